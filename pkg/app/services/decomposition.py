"""
Domain decomposition: the patch cover of the flow domain and its checks.

Holds the patch list, builds the subpatch list (global indices ``gid`` in
patch order), refines subdivision counts to meet a mesh-size bound and
validates the minimum-overlap condition and the coverage of the domain.
"""
from collections import Counter
from typing import Callable, Optional

import numpy as np
from loguru import logger

from app.core.exceptions import UsageError
from app.models.mesh import CoverageReport, OverlapIssue, OverlapReport
from app.services.patches import Q_SIDES, Patch, PatchKind
from app.services.subpatches import Subpatch, subdivide

DomainTest = Callable[[np.ndarray, np.ndarray], np.ndarray]

_MAX_REPORTED = 20


class DomainDecomposition:
    """
    Overlapping patch cover of a flow domain.

    Args:
        patches: Patches in a fixed order; their position becomes ``patch.index``.
        nv: Overlap parameter shared by every subpatch.
        n0: Points per preliminary cell of square-parameter patches.
        n1: Points per preliminary cell of C1 patches.
        hbar: Mesh-size bound the counts were refined for, if any.
        domain: Optional closed membership test of the flow domain, used by
            the coverage checks.
    """

    def __init__(
        self,
        patches: list[Patch],
        nv: int,
        n0: int,
        n1: int,
        hbar: Optional[float] = None,
        name: str = "",
        domain: Optional[DomainTest] = None,
    ):
        if not patches:
            raise UsageError("a decomposition needs at least one patch")
        self.patches = list(patches)
        self.nv = nv
        self.n0 = n0
        self.n1 = n1
        self.hbar = hbar
        self.name = name
        self.domain = domain
        for index, patch in enumerate(self.patches):
            patch.index = index
            patch.nv = nv
            patch.n = n1 if patch.kind is PatchKind.C1 else n0
        self._subpatches: Optional[list[Subpatch]] = None

    @property
    def subpatches(self) -> list[Subpatch]:
        if self._subpatches is None:
            self._subpatches = self._build_subpatches()
        return self._subpatches

    def _build_subpatches(self) -> list[Subpatch]:
        out = []
        for patch in self.patches:
            out.extend(subdivide(patch))
        for gid, sp in enumerate(out):
            sp.gid = gid
        logger.debug(
            f"Decomposition '{self.name}': {len(self.patches)} patches, {len(out)} subpatches"
        )
        return out

    def patch_subpatches(self, patch_index: int) -> list[Subpatch]:
        return [sp for sp in self.subpatches if sp.patch.index == patch_index]

    @property
    def counts(self) -> dict[str, int]:
        """Number of patches per kind (``P_S``, ``P_C1``, ``P_C2``, ``P_I``)."""
        found = Counter(p.kind.value for p in self.patches)
        return {kind.value: found.get(kind.value, 0) for kind in PatchKind}

    @property
    def has_c1(self) -> bool:
        return any(p.kind is PatchKind.C1 for p in self.patches)

    @property
    def n_points(self) -> int:
        """Total grid points over all subpatches (overlaps counted per subpatch)."""
        return sum(sp.n_points for sp in self.subpatches)

    def max_spacing(self) -> float:
        return max(max(p.physical_spacing()) for p in self.patches)

    def summary(self) -> dict:
        return {
            "name": self.name,
            "patches": len(self.patches),
            "counts": self.counts,
            "subpatches": len(self.subpatches),
            "points": self.n_points,
            "nv": self.nv,
            "n0": self.n0,
            "n1": self.n1,
            "hbar": self.hbar,
        }


def clone_patch(patch: Patch, r: Optional[int] = None, s: Optional[int] = None) -> Patch:
    """Copy of ``patch`` sharing its mapping, optionally with new counts."""
    return Patch(
        patch.kind,
        patch.mapping,
        dict(patch.sides),
        r=patch.r if r is None else r,
        s=patch.s if s is None else s,
        n=patch.n,
        nv=patch.nv,
        name=patch.name,
    )


def refine(dec: DomainDecomposition, hbar: float) -> DomainDecomposition:
    """
    Increase subdivision counts until every patch grid is finer than ``hbar``.

    C1 patches grow by two in both directions so ``r = s`` stays even; other
    patches grow independently along each parameter direction. Returns
    ``dec`` itself when no patch needed refinement.
    """
    if hbar <= 0:
        raise UsageError("hbar must be positive", hbar=hbar)
    refined = []
    changed = False
    for patch in dec.patches:
        candidate = clone_patch(patch)
        steps = 0
        while True:
            d1, d2 = candidate.physical_spacing()
            if max(d1, d2) <= hbar:
                break
            if candidate.kind is PatchKind.C1:
                candidate.set_counts(candidate.r + 2, candidate.s + 2)
            else:
                candidate.set_counts(candidate.r + (d1 > hbar), candidate.s + (d2 > hbar))
            steps += 1
        if steps:
            changed = True
            logger.info(
                f"Refined {patch.describe()}: r={patch.r}->{candidate.r}, "
                f"s={patch.s}->{candidate.s} in {steps} steps"
            )
        refined.append(candidate)
    if not changed:
        return dec
    return DomainDecomposition(
        refined, dec.nv, dec.n0, dec.n1, hbar=hbar, name=dec.name, domain=dec.domain
    )


def _layer_indices(patch: Patch, side: str, width: int) -> tuple[np.ndarray, np.ndarray]:
    n1, n2 = patch.shape
    if side in ("q1_min", "q1_max"):
        rows = np.arange(width) if side == "q1_min" else np.arange(n1 - width, n1)
        I, J = np.meshgrid(rows, np.arange(n2), indexing="ij")
    else:
        cols = np.arange(width) if side == "q2_min" else np.arange(n2 - width, n2)
        I, J = np.meshgrid(np.arange(n1), cols, indexing="ij")
    I, J = I.ravel(), J.ravel()
    keep = patch.in_parameter_space(I, J)
    return I[keep], J[keep]


def covered_by(patches: list[Patch], x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Whether each point lies in the closure of at least one of ``patches``."""
    covered = np.zeros(x.shape, dtype=bool)
    for patch in patches:
        x0, x1, y0, y1 = patch.bounding_box()
        pad = 1e-9 * max(patch.diameter, 1.0)
        candidate = (~covered) & (x >= x0 - pad) & (x <= x1 + pad) & (y >= y0 - pad) & (y <= y1 + pad)
        if not candidate.any():
            continue
        idx = np.flatnonzero(candidate)
        _, _, inside = patch.locate(x[idx], y[idx])
        covered[idx[inside]] = True
    return covered


def check_min_overlap(dec: DomainDecomposition) -> OverlapReport:
    """
    Check the minimum-overlap condition of ``dec``.

    For every patch side inside the domain, the ``2 nv + 1`` grid lines next
    to it must lie in the union of the other patches. Every S patch touching
    a C1 patch must also reach that patch's corner point.
    """
    issues: list[OverlapIssue] = []
    width = 2 * dec.nv + 1
    checked_sides = 0
    for patch in dec.patches:
        others = [p for p in dec.patches if p is not patch]
        for side in Q_SIDES:
            if patch.sides[side] is not None:
                continue
            checked_sides += 1
            I, J = _layer_indices(patch, side, width)
            h1, h2 = patch.h
            x, y = patch.mapping.map(I * h1, J * h2)
            orphan = ~covered_by(others, x, y)
            if orphan.any():
                pts = np.column_stack([x[orphan], y[orphan]])[:_MAX_REPORTED]
                issues.append(
                    OverlapIssue(
                        patch=patch.index,
                        side=side,
                        rule="layer",
                        count=int(orphan.sum()),
                        points=pts.tolist(),
                        detail="layer points outside every other patch",
                    )
                )

    checked_corners = 0
    corner_patches = [p for p in dec.patches if p.kind is PatchKind.C1]
    strip_patches = [p for p in dec.patches if p.kind is PatchKind.S]
    for c1 in corner_patches:
        corner = c1.mapping.corner
        for strip in strip_patches:
            ends = strip.mapping.curve.point(np.array([0.0, 1.0]))
            _, _, near = c1.locate(ends[0], ends[1])
            if not near.any():
                continue
            checked_corners += 1
            q1, q2, inside = strip.locate(np.array([corner[0]]), np.array([corner[1]]))
            if not (inside[0] and abs(q2[0]) <= 1e-8):
                issues.append(
                    OverlapIssue(
                        patch=strip.index,
                        side="corner",
                        rule="s_c1_corner",
                        count=1,
                        points=[corner.tolist()],
                        detail=f"S patch does not reach the corner of {c1.describe()}",
                    )
                )

    report = OverlapReport(
        passed=not issues,
        checked_sides=checked_sides,
        checked_corners=checked_corners,
        issues=issues,
    )
    if issues:
        logger.warning(
            f"Minimum-overlap check failed for '{dec.name}': {len(issues)} issue(s)"
        )
    else:
        logger.info(
            f"Minimum-overlap check passed for '{dec.name}' "
            f"({checked_sides} sides, {checked_corners} corners)"
        )
    return report


def check_coverage(dec: DomainDecomposition, samples: int = 4000, seed: int = 0) -> CoverageReport:
    """
    Sample the flow domain uniformly and check every sample is covered.

    Also checks that every physical grid point of every subpatch lies in the
    domain. Requires ``dec.domain``.
    """
    if dec.domain is None:
        raise UsageError("coverage check needs a domain membership test", name=dec.name)
    boxes = np.array([p.bounding_box() for p in dec.patches])
    x0, x1 = boxes[:, 0].min(), boxes[:, 1].max()
    y0, y1 = boxes[:, 2].min(), boxes[:, 3].max()
    rng = np.random.default_rng(seed)
    x = rng.uniform(x0, x1, samples)
    y = rng.uniform(y0, y1, samples)
    inside = dec.domain(x, y)
    x, y = x[inside], y[inside]
    uncovered = ~covered_by(dec.patches, x, y)

    outside = 0
    for sp in dec.subpatches:
        px, py = sp.physical
        act = sp.active
        outside += int((~dec.domain(px[act], py[act])).sum())

    report = CoverageReport(
        samples=int(x.size),
        uncovered=int(uncovered.sum()),
        grid_points_outside=outside,
        passed=not uncovered.any() and outside == 0,
        points=np.column_stack([x[uncovered], y[uncovered]])[:_MAX_REPORTED].tolist(),
    )
    logger.info(
        f"Coverage of '{dec.name}': {report.uncovered}/{report.samples} samples uncovered, "
        f"{outside} grid points outside the domain"
    )
    return report
