"""
Mesh files: JSON serialization of a domain decomposition.

Format (``"format": "fcflow-mesh"``, ``"version": 1``)::

    {
      "format": "fcflow-mesh", "version": 1, "name": str,
      "nv": int, "n0": int, "n1": int, "hbar": float | null,
      "patches": [
        {"index": int, "kind": "S" | "C1" | "C2" | "I", "name": str,
         "r": int, "s": int, "mapping": {"kind": ..., parameters...},
         "sides": {"q1_min": tag | null, ...}}
      ],
      "subpatches": [
        {"gid": int, "patch": int, "label": [int, ...],
         "box": [i0, i1, j0, j1], "l_shaped": bool, "points": int}
      ]
    }

Subpatch tables are derived data: loading rebuilds them from the patch
counts and rejects files whose tables disagree.
"""
import json
from pathlib import Path
from typing import Any

from loguru import logger

from app.core.exceptions import ConfigurationError, DecompositionError
from app.services.curves import mapping_from_dict
from app.services.decomposition import DomainDecomposition
from app.services.patches import Patch, PatchKind

MESH_FORMAT = "fcflow-mesh"
MESH_VERSION = 1


def mesh_to_dict(dec: DomainDecomposition) -> dict[str, Any]:
    return {
        "format": MESH_FORMAT,
        "version": MESH_VERSION,
        "name": dec.name,
        "nv": dec.nv,
        "n0": dec.n0,
        "n1": dec.n1,
        "hbar": dec.hbar,
        "patches": [
            {
                "index": p.index,
                "kind": p.kind.value,
                "name": p.name,
                "r": p.r,
                "s": p.s,
                "mapping": p.mapping.to_dict(),
                "sides": dict(p.sides),
            }
            for p in dec.patches
        ],
        "subpatches": [
            {
                "gid": sp.gid,
                "patch": sp.patch.index,
                "label": list(sp.label),
                "box": [sp.i0, sp.i1, sp.j0, sp.j1],
                "l_shaped": sp.is_l_shaped,
                "points": sp.n_points,
            }
            for sp in dec.subpatches
        ],
    }


def mesh_from_dict(data: dict[str, Any]) -> DomainDecomposition:
    if data.get("format") != MESH_FORMAT:
        raise ConfigurationError("not an fcflow mesh document", format=data.get("format"))
    if data.get("version") != MESH_VERSION:
        raise ConfigurationError("unsupported mesh version", version=data.get("version"))
    patches = [
        Patch(
            PatchKind(entry["kind"]),
            mapping_from_dict(entry["mapping"]),
            entry["sides"],
            r=entry["r"],
            s=entry["s"],
            name=entry.get("name", ""),
        )
        for entry in sorted(data["patches"], key=lambda e: e["index"])
    ]
    dec = DomainDecomposition(
        patches,
        nv=data["nv"],
        n0=data["n0"],
        n1=data["n1"],
        hbar=data.get("hbar"),
        name=data.get("name", ""),
    )
    tables = data.get("subpatches")
    if tables is not None:
        rebuilt = mesh_to_dict(dec)["subpatches"]
        if rebuilt != tables:
            raise DecompositionError(
                "subpatch tables do not match the patch counts", name=dec.name
            )
    return dec


def save_mesh(dec: DomainDecomposition, path: Path) -> Path:
    """Write ``dec`` as a mesh file; returns the path."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(mesh_to_dict(dec), indent=2))
    logger.info(f"Mesh '{dec.name}' written to {path}")
    return path


def load_mesh(path: Path) -> DomainDecomposition:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as e:
        logger.error(f"Cannot read mesh file {path}: {e}")
        raise ConfigurationError("cannot read mesh file", path=str(path)) from e
    dec = mesh_from_dict(data)
    logger.info(f"Mesh '{dec.name}' loaded from {path}: {len(dec.subpatches)} subpatches")
    return dec
