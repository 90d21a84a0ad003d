"""
Run output writers.

Formats:
    fields CSV   header ``x,y,rho,u,v,p,mu,tau``; one row per active grid point
                 of one subpatch, floats with 17 significant digits.
    energy CSV   header ``step,t,energy``.
    manifest     JSON object with ``schema_version`` (see ``MANIFEST_SCHEMA_VERSION``).
    Schlieren    binary 8-bit portable graymap (P5), ``round(255 sigma)``.
"""
import json
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np
from loguru import logger
from PIL import Image

from app.core.exceptions import UsageError
from app.services.gas import GAMMA, primitives
from app.services.subpatches import Subpatch

MANIFEST_SCHEMA_VERSION = 1
FIELD_COLUMNS = ("x", "y", "rho", "u", "v", "p", "mu", "tau")


def write_fields_csv(
    path: Path,
    sp: Subpatch,
    state: np.ndarray,
    mu: Optional[np.ndarray] = None,
    tau: Optional[np.ndarray] = None,
    gamma: float = GAMMA,
) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    act = sp.active
    x, y = sp.physical
    rho, u, v, p = primitives(state, gamma)
    mu = np.zeros(sp.shape) if mu is None else mu
    tau = np.full(sp.shape, 4) if tau is None else tau
    table = np.column_stack(
        [x[act], y[act], rho[act], u[act], v[act], p[act], mu[act], tau[act].astype(float)]
    )
    np.savetxt(
        path,
        table,
        delimiter=",",
        header=",".join(FIELD_COLUMNS),
        comments="",
        fmt=["%.17g"] * 7 + ["%d"],
    )
    return path


def read_fields_csv(path: Path) -> dict[str, np.ndarray]:
    table = np.loadtxt(Path(path), delimiter=",", skiprows=1, ndmin=2)
    return {name: table[:, k] for k, name in enumerate(FIELD_COLUMNS)}


def write_energy_csv(path: Path, series: Sequence[tuple[int, float, float]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        fh.write("step,t,energy\n")
        for step, t, energy in series:
            fh.write(f"{int(step)},{t:.17g},{energy:.17g}\n")
    return path


def read_energy_csv(path: Path) -> list[tuple[int, float, float]]:
    path = Path(path)
    if not path.exists():
        raise UsageError("energy series not found", path=str(path))
    rows = []
    with path.open() as fh:
        next(fh)
        for line in fh:
            step, t, energy = line.strip().split(",")
            rows.append((int(step), float(t), float(energy)))
    return rows


def energy_series(run_dir: Path) -> list[tuple[float, float]]:
    """``(t, E)`` pairs recorded by a run."""
    return [(t, e) for _, t, e in read_energy_csv(Path(run_dir) / "energy.csv")]


def write_pgm(path: Path, image: np.ndarray) -> Path:
    """Write values in ``[0, 1]`` as an 8-bit binary graymap."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pixels = np.round(255.0 * np.clip(np.asarray(image, dtype=float), 0.0, 1.0)).astype(np.uint8)
    Image.fromarray(pixels).save(path, format="PPM")
    return path


def read_pgm(path: Path) -> np.ndarray:
    with Image.open(Path(path)) as img:
        return np.asarray(img.convert("L"))


def write_manifest(path: Path, manifest: dict[str, Any]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    body = {"schema_version": MANIFEST_SCHEMA_VERSION, **manifest}
    path.write_text(json.dumps(body, indent=2, sort_keys=True, default=_jsonable))
    logger.info(f"Wrote manifest {path}")
    return path


def read_manifest(path: Path) -> dict[str, Any]:
    data = json.loads(Path(path).read_text())
    if data.get("schema_version") != MANIFEST_SCHEMA_VERSION:
        raise UsageError("unsupported manifest schema", path=str(path), found=data.get("schema_version"))
    return data


def _jsonable(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"not JSON serializable: {type(value).__name__}")
