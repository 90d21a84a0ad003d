"""
Subpatches: the fixed-size overlapping grids every patch is split into.

A subpatch is an index box of its patch grid plus an optional activity mask
(only the L-shaped corner subpatch ``H_0`` of a C1 patch needs one). Every
row and column of a subpatch is a union of contiguous segments; FC
operations run segment by segment, batched over segments of equal extent.
"""
from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np

from app.core.exceptions import GeometryError, UsageError
from app.services.patches import Patch, PatchKind

SIBLING, INTERIOR_SIDE, PHYSICAL = 0, 1, 2


@dataclass(frozen=True)
class SegmentGroup:
    """Lines of one axis whose active run spans local indices ``start..stop``."""

    axis: int
    lines: np.ndarray
    start: int
    stop: int
    start_kind: np.ndarray
    stop_kind: np.ndarray

    @property
    def length(self) -> int:
        return self.stop - self.start + 1

    def index(self) -> tuple:
        """Index expression selecting the block ``(length, n_lines)`` or ``(n_lines, length)``."""
        run = slice(self.start, self.stop + 1)
        return (run, self.lines) if self.axis == 0 else (self.lines, run)


@dataclass(frozen=True)
class BoundaryFace:
    """Subpatch points lying on one physical side of the patch."""

    side: str
    tag: str
    points: np.ndarray
    inward: np.ndarray
    nx: np.ndarray
    ny: np.ndarray


class Subpatch:
    """One overlapping subpatch of a patch."""

    def __init__(
        self,
        patch: Patch,
        label: tuple,
        box: tuple[int, int, int, int],
        mask: Optional[np.ndarray] = None,
    ):
        self.patch = patch
        self.label = tuple(int(v) for v in label)
        self.i0, self.i1, self.j0, self.j1 = (int(v) for v in box)
        if self.i1 < self.i0 or self.j1 < self.j0:
            raise GeometryError("empty subpatch box", box=box)
        if mask is not None and mask.shape != self.shape:
            raise GeometryError("subpatch mask does not match its box", box=box)
        self.mask = mask
        self.gid = -1

    # -- index structure ------------------------------------------------------

    @property
    def shape(self) -> tuple[int, int]:
        return self.i1 - self.i0 + 1, self.j1 - self.j0 + 1

    @property
    def size(self) -> int:
        return self.shape[0] * self.shape[1]

    @property
    def is_l_shaped(self) -> bool:
        return self.mask is not None

    @cached_property
    def active(self) -> np.ndarray:
        return np.ones(self.shape, dtype=bool) if self.mask is None else self.mask

    @property
    def n_points(self) -> int:
        return int(self.active.sum())

    @cached_property
    def patch_indices(self) -> tuple[np.ndarray, np.ndarray]:
        """Patch-grid indices ``(I, J)`` of every box point."""
        i = np.arange(self.i0, self.i1 + 1)
        j = np.arange(self.j0, self.j1 + 1)
        return np.meshgrid(i, j, indexing="ij")

    def index_set(self) -> frozenset:
        """Patch-grid index pairs of all active points."""
        I, J = self.patch_indices
        act = self.active
        return frozenset(zip(I[act].tolist(), J[act].tolist()))

    def contains_index(self, i: np.ndarray, j: np.ndarray) -> np.ndarray:
        inside = (i >= self.i0) & (i <= self.i1) & (j >= self.j0) & (j <= self.j1)
        if self.mask is None or not inside.any():
            return inside
        out = inside.copy()
        out[inside] = self.mask[i[inside] - self.i0, j[inside] - self.j0]
        return out

    def flat_index(self, i: np.ndarray, j: np.ndarray) -> np.ndarray:
        return (i - self.i0) * self.shape[1] + (j - self.j0)

    def segments(self, axis: int) -> list[SegmentGroup]:
        return self._segments[axis]

    @cached_property
    def _segments(self) -> tuple[list[SegmentGroup], list[SegmentGroup]]:
        return self._runs(0), self._runs(1)

    def _runs(self, axis: int) -> list[SegmentGroup]:
        act = self.active if axis == 0 else self.active.T
        groups: dict[tuple[int, int], list[int]] = {}
        for line in range(act.shape[1]):
            idx = np.flatnonzero(act[:, line])
            if idx.size == 0:
                continue
            breaks = np.flatnonzero(np.diff(idx) > 1)
            starts = np.concatenate([idx[:1], idx[breaks + 1]])
            stops = np.concatenate([idx[breaks], idx[-1:]])
            for start, stop in zip(starts.tolist(), stops.tolist()):
                groups.setdefault((start, stop), []).append(line)
        out = []
        for (start, stop), lines in sorted(groups.items()):
            lines_arr = np.asarray(lines)
            out.append(
                SegmentGroup(
                    axis=axis,
                    lines=lines_arr,
                    start=start,
                    stop=stop,
                    start_kind=self._neighbor_kind(axis, lines_arr, start - 1),
                    stop_kind=self._neighbor_kind(axis, lines_arr, stop + 1),
                )
            )
        return out

    def _neighbor_kind(self, axis: int, lines: np.ndarray, pos: int) -> np.ndarray:
        if axis == 0:
            i = np.full(lines.shape, self.i0 + pos)
            j = self.j0 + lines
        else:
            i = self.i0 + lines
            j = np.full(lines.shape, self.j0 + pos)
        return self.patch.boundary_kind(i, j)

    @cached_property
    def internal_distance(self) -> tuple[np.ndarray, np.ndarray]:
        """Index distance of every point to the nearest internal segment end, per axis."""
        out = []
        for axis in (0, 1):
            dist = np.full(self.shape, np.inf)
            for group in self.segments(axis):
                pos = np.arange(group.start, group.stop + 1, dtype=float)[:, None]
                to_start = np.where(group.start_kind[None, :] != PHYSICAL, pos - group.start, np.inf)
                to_stop = np.where(group.stop_kind[None, :] != PHYSICAL, group.stop - pos, np.inf)
                block = np.minimum(to_start, to_stop)
                dist[group.index()] = block if axis == 0 else block.T
            out.append(dist)
        return out[0], out[1]

    def fringe_mask(self, n_f: int) -> np.ndarray:
        d0, d1 = self.internal_distance
        return self.active & ((d0 <= n_f - 1) | (d1 <= n_f - 1))

    def side_classification(self) -> dict[str, str]:
        """``internal``/``external``/``mixed`` for each box side (based on segment ends)."""
        summary: dict[str, set] = {"q1_lo": set(), "q1_hi": set(), "q2_lo": set(), "q2_hi": set()}
        for axis, (lo, hi) in ((0, ("q1_lo", "q1_hi")), (1, ("q2_lo", "q2_hi"))):
            for group in self.segments(axis):
                summary[lo].update(np.where(group.start_kind == PHYSICAL, "external", "internal"))
                summary[hi].update(np.where(group.stop_kind == PHYSICAL, "external", "internal"))
        return {k: (v.pop() if len(v) == 1 else "mixed") for k, v in summary.items()}

    # -- geometry -------------------------------------------------------------

    @cached_property
    def parameters(self) -> tuple[np.ndarray, np.ndarray]:
        h1, h2 = self.patch.h
        I, J = self.patch_indices
        return I * h1, J * h2

    @cached_property
    def physical(self) -> tuple[np.ndarray, np.ndarray]:
        q1, q2 = self.parameters
        return self.patch.mapping.map(q1, q2)

    @cached_property
    def metrics(self) -> tuple[np.ndarray, ...]:
        """``(q1_x, q1_y, q2_x, q2_y, det)`` at every box point."""
        q1, q2 = self.parameters
        return self.patch.mapping.metrics(q1, q2)

    @cached_property
    def spacing(self) -> tuple[np.ndarray, np.ndarray]:
        """Local physical grid spacing along ``q1`` and ``q2``."""
        q1, q2 = self.parameters
        x1, x2, y1, y2 = self.patch.mapping.jacobian(q1, q2)
        h1, h2 = self.patch.h
        return np.hypot(x1, y1) * h1, np.hypot(x2, y2) * h2

    @cached_property
    def quadrature_weights(self) -> np.ndarray:
        """Tensor trapezoid weights times ``|det J|`` (zero at inactive points)."""
        h1, h2 = self.patch.h
        weights = []
        for axis in (0, 1):
            w = np.zeros(self.shape)
            for group in self.segments(axis):
                line = np.ones(group.length)
                line[0] = line[-1] = 0.5
                w[group.index()] = line[:, None] if axis == 0 else line[None, :]
            weights.append(w)
        return weights[0] * weights[1] * h1 * h2 * np.abs(self.metrics[4])

    @cached_property
    def boundary_faces(self) -> list[BoundaryFace]:
        faces: dict[str, list] = {}
        q1_x, q1_y, q2_x, q2_y, _ = self.metrics
        ncol = self.shape[1]
        for axis in (0, 1):
            gx, gy = (q1_x, q1_y) if axis == 0 else (q2_x, q2_y)
            for group in self.segments(axis):
                for end, kinds, sign, step in (
                    (group.start, group.start_kind, -1.0, 1),
                    (group.stop, group.stop_kind, 1.0, -1),
                ):
                    hit = kinds == PHYSICAL
                    if not hit.any():
                        continue
                    lines = group.lines[hit]
                    if axis == 0:
                        li, lj = np.full(lines.shape, end), lines
                        ni, nj = li + step, lj
                    else:
                        li, lj = lines, np.full(lines.shape, end)
                        ni, nj = li, lj + step
                    side = self._side_name(axis, sign, li, lj)
                    norm = np.hypot(gx[li, lj], gy[li, lj])
                    faces.setdefault(side, []).append(
                        (li * ncol + lj, ni * ncol + nj, sign * gx[li, lj] / norm, sign * gy[li, lj] / norm)
                    )
        out = []
        for side in sorted(faces):
            parts = faces[side]
            out.append(
                BoundaryFace(
                    side=side,
                    tag=self.patch.sides[side],
                    points=np.concatenate([p[0] for p in parts]),
                    inward=np.concatenate([p[1] for p in parts]),
                    nx=np.concatenate([p[2] for p in parts]),
                    ny=np.concatenate([p[3] for p in parts]),
                )
            )
        return out

    def _side_name(self, axis: int, sign: float, li: np.ndarray, lj: np.ndarray) -> str:
        n1, n2 = self.patch.shape
        gi = self.i0 + li[0]
        gj = self.j0 + lj[0]
        if axis == 0:
            if sign < 0 and gi == 0:
                return "q1_min"
            if sign > 0 and gi == n1 - 1:
                return "q1_max"
            return "arc_b"
        if sign < 0 and gj == 0:
            return "q2_min"
        if sign > 0 and gj == n2 - 1:
            return "q2_max"
        return "arc_a"

    def describe(self) -> str:
        return f"{self.patch.describe()}/{self.label}"

    def __repr__(self) -> str:
        return f"Subpatch({self.describe()}, box=({self.i0},{self.i1},{self.j0},{self.j1}))"


def _box(a: int, b: int, stride: int, width: int) -> tuple[int, int, int, int]:
    return a * stride, a * stride + width - 1, b * stride, b * stride + width - 1


def subdivide_Q(patch: Patch, r: int, s: int, n0: int, nv: int) -> list[Subpatch]:
    """
    Split a square-parameter patch into ``r * s`` overlapping subpatches.

    Preliminary cells are ``n0 - 1`` steps apart; each subpatch spans
    ``n0 + 2 nv`` points, so neighbors share ``2 nv + 1`` grid lines.
    """
    if patch.kind is PatchKind.C1:
        raise UsageError("C1 patches are subdivided in L space", patch=patch.name)
    if r < 1 or s < 1:
        raise UsageError("subdivision counts must be positive", r=r, s=s)
    patch.n, patch.nv = n0, nv
    patch.set_counts(r, s)
    stride, width = n0 - 1, n0 + 2 * nv
    return [
        Subpatch(patch, (a, b), _box(a, b, stride, width))
        for a in range(r)
        for b in range(s)
    ]


def preliminary_squares_L(r: int) -> list[tuple[int, int]]:
    """Indices of the preliminary squares of the L space (upper-left, upper-right, lower-right)."""
    if r < 2 or r % 2:
        raise UsageError("L subdivision needs an even r >= 2", r=r)
    m = r // 2
    upper_left = [(a, b) for a in range(m) for b in range(m, r)]
    upper_right = [(a, b) for a in range(m, r) for b in range(m, r)]
    lower_right = [(a, b) for a in range(m, r) for b in range(m)]
    return upper_left + upper_right + lower_right


def subdivide_L(patch: Patch, r: int, n1: int, nv: int) -> list[Subpatch]:
    """
    Split a C1 patch into overlapping subpatches of the L-shaped parameter set.

    The three preliminary squares touching the corner are replaced by the
    single L-shaped subpatch ``H_0`` (listed first); every other square gives
    a rectangle clipped against the obstacle square.
    """
    if patch.kind is not PatchKind.C1:
        raise UsageError("only C1 patches use L subdivision", patch=patch.name)
    squares = preliminary_squares_L(r)
    patch.n, patch.nv = n1, nv
    patch.set_counts(r, r)
    m = r // 2
    stride, width = n1 - 1, n1 + 2 * nv
    corner_adjacent = {(m - 1, m), (m, m), (m, m - 1)}

    lo, hi = (m - 1) * stride, m * stride + width - 1
    I, J = np.meshgrid(np.arange(lo, hi + 1), np.arange(lo, hi + 1), indexing="ij")
    in_blocks = np.zeros(I.shape, dtype=bool)
    for a, b in sorted(corner_adjacent):
        bi0, bi1, bj0, bj1 = _box(a, b, stride, width)
        in_blocks |= (I >= bi0) & (I <= bi1) & (J >= bj0) & (J <= bj1)
    corner_mask = in_blocks & patch.in_parameter_space(I, J)
    subpatches = [_cropped(patch, (0,), (lo, hi, lo, hi), corner_mask, allow_mask=True)]

    for a, b in squares:
        if (a, b) in corner_adjacent:
            continue
        i0, i1, j0, j1 = _box(a, b, stride, width)
        Ib, Jb = np.meshgrid(np.arange(i0, i1 + 1), np.arange(j0, j1 + 1), indexing="ij")
        mask = patch.in_parameter_space(Ib, Jb)
        subpatches.append(_cropped(patch, (a, b), (i0, i1, j0, j1), mask, allow_mask=False))
    return subpatches


def _cropped(patch: Patch, label: tuple, box, mask: np.ndarray, allow_mask: bool) -> Subpatch:
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    if rows.size == 0:
        raise GeometryError("subpatch lies outside the parameter set", label=label)
    i0, j0 = box[0] + rows[0], box[2] + cols[0]
    i1, j1 = box[0] + rows[-1], box[2] + cols[-1]
    sub = mask[rows[0] : rows[-1] + 1, cols[0] : cols[-1] + 1]
    if sub.all():
        return Subpatch(patch, label, (i0, i1, j0, j1))
    if not allow_mask:
        raise GeometryError("clipped subpatch is not rectangular", label=label)
    return Subpatch(patch, label, (i0, i1, j0, j1), sub.copy())


def subdivide(patch: Patch) -> list[Subpatch]:
    """Subdivide ``patch`` according to its current counts."""
    if patch.kind is PatchKind.C1:
        return subdivide_L(patch, patch.r, patch.n, patch.nv)
    return subdivide_Q(patch, patch.r, patch.s, patch.n, patch.nv)


def fringe_region(sp: Subpatch, n_f: int) -> frozenset:
    """Patch-grid indices within ``n_f`` points of an internal side of ``sp``."""
    if n_f < 1:
        raise UsageError("fringe depth must be positive", n_f=n_f)
    I, J = sp.patch_indices
    mask = sp.fringe_mask(n_f)
    return frozenset(zip(I[mask].tolist(), J[mask].tolist()))


def window_profile(distance: np.ndarray, n_f: int, taper: int) -> np.ndarray:
    """
    Cosine taper of the internal-side distance.

    Zero on the fringe (``d <= n_f - 1``), one from ``n_f - 1 + taper`` on,
    and ``(1 - cos)/2`` in between, which is C1 at both ends.
    """
    s = np.clip((np.asarray(distance, dtype=float) - (n_f - 1)) / taper, 0.0, 1.0)
    return 0.5 * (1.0 - np.cos(np.pi * s))


def window(sp: Subpatch, n_f: int, taper: Optional[int] = None) -> np.ndarray:
    """Unnormalized window of ``sp`` on its own grid (zero at inactive points)."""
    taper = taper or default_taper(sp.patch.nv, n_f)
    d0, d1 = sp.internal_distance
    return np.where(sp.active, window_profile(d0, n_f, taper) * window_profile(d1, n_f, taper), 0.0)


def default_taper(nv: int, n_f: int) -> int:
    """Taper width that keeps a sibling's window at 1 across this subpatch's fringe."""
    return max(1, 2 * nv + 2 - 2 * n_f)
