"""
Patches: mapped regions of the flow domain.

A patch couples a mapping with its parameter polygon (the unit square ``Q``
or, for concave corners, the L-shaped set ``L``), its subdivision counts and
the boundary condition attached to each parameter side. Grid indices run
``i`` along ``q1`` and ``j`` along ``q2``.
"""
from enum import Enum
from typing import Optional

import numpy as np
from loguru import logger
from scipy.spatial import cKDTree

from app.core.exceptions import GeometryError, UsageError
from app.services.curves import (
    AffineMapping,
    BoundaryCurve,
    CurveSumMapping,
    NormalExtrusionMapping,
    PatchMapping,
)

Q_SIDES = ("q1_min", "q1_max", "q2_min", "q2_max")
ARC_SIDES = ("arc_a", "arc_b")

BOUNDARY_CONDITIONS = (
    "inflow_dirichlet",
    "outflow_pressure",
    "slip_wall",
    "noslip_adiabatic",
    "supersonic_outflow_none",
    "zero_normal_derivative_all",
)

_SEED_SAMPLES = 41


class PatchKind(str, Enum):
    S = "S"
    C1 = "C1"
    C2 = "C2"
    I = "I"  # noqa: E741


class Patch:
    """
    One patch of a domain decomposition.

    ``sides`` maps every parameter side to a boundary-condition tag, or to
    ``None`` when the side lies inside the flow domain. C1 patches carry the
    two extra sides ``arc_a`` (``q2 = 1/2, q1 <= 1/2``) and ``arc_b``
    (``q1 = 1/2, q2 <= 1/2``); they are always physical boundary.
    """

    def __init__(
        self,
        kind: PatchKind,
        mapping: PatchMapping,
        sides: dict[str, Optional[str]],
        r: int = 1,
        s: int = 1,
        n: int = 83,
        nv: int = 9,
        name: str = "",
    ):
        self.kind = PatchKind(kind)
        self.mapping = mapping
        self.name = name
        self.index = -1
        self.nv = nv
        self.n = n
        self.r = r
        self.s = s
        expected = Q_SIDES + (ARC_SIDES if self.kind is PatchKind.C1 else ())
        unknown = set(sides) - set(expected)
        if unknown:
            raise GeometryError("unknown patch sides", sides=sorted(unknown), patch=name)
        self.sides = {side: sides.get(side) for side in expected}
        for side, tag in self.sides.items():
            if tag is not None and tag not in BOUNDARY_CONDITIONS:
                raise GeometryError("unknown boundary condition", side=side, tag=tag, patch=name)
        if self.kind is PatchKind.C1:
            for side in ARC_SIDES:
                if self.sides[side] is None:
                    raise GeometryError("C1 corner arcs must carry a boundary condition", side=side)
        self._check_counts()
        self._seed_tree: Optional[cKDTree] = None
        self._seed_params: Optional[np.ndarray] = None
        self._diameter: Optional[float] = None

    def _check_counts(self) -> None:
        if self.r < 1 or self.s < 1:
            raise UsageError("subdivision counts must be positive", r=self.r, s=self.s)
        if self.kind is PatchKind.C1 and (self.r != self.s or self.r % 2):
            raise UsageError("C1 patches need r = s even", r=self.r, s=self.s)

    def set_counts(self, r: int, s: int) -> None:
        self.r, self.s = r, s
        self._check_counts()

    # -- grid sizes -----------------------------------------------------------

    @property
    def shape(self) -> tuple[int, int]:
        """Number of grid points along ``q1`` and ``q2``."""
        return (
            self.r * (self.n - 1) + 2 * self.nv + 1,
            self.s * (self.n - 1) + 2 * self.nv + 1,
        )

    @property
    def h(self) -> tuple[float, float]:
        n1, n2 = self.shape
        return 1.0 / (n1 - 1), 1.0 / (n2 - 1)

    @property
    def half_index(self) -> int:
        """Grid index of ``q = 1/2`` on C1 patches."""
        if self.kind is not PatchKind.C1:
            raise UsageError("half index only exists on C1 patches")
        return (self.shape[0] - 1) // 2

    def in_parameter_space(self, i: np.ndarray, j: np.ndarray) -> np.ndarray:
        """Whether integer grid indices belong to the parameter polygon."""
        n1, n2 = self.shape
        inside = (i >= 0) & (i < n1) & (j >= 0) & (j < n2)
        if self.kind is PatchKind.C1:
            half = self.half_index
            inside &= (i >= half) | (j >= half)
        return inside

    def contains_parameter(self, q1: np.ndarray, q2: np.ndarray, tol: float = 1e-9) -> np.ndarray:
        inside = (q1 >= -tol) & (q1 <= 1 + tol) & (q2 >= -tol) & (q2 <= 1 + tol)
        if self.kind is PatchKind.C1:
            inside &= (q1 >= 0.5 - tol) | (q2 >= 0.5 - tol)
        return inside

    def boundary_kind(self, i: np.ndarray, j: np.ndarray) -> np.ndarray:
        """
        Classify grid indices just outside a subpatch.

        Returns an integer array: 0 for indices inside the patch grid (a sibling
        side), 1 for indices beyond an interior patch side and 2 for indices
        beyond physical boundary.
        """
        i = np.asarray(i)
        j = np.asarray(j)
        n1, n2 = self.shape
        out = np.zeros(np.broadcast(i, j).shape, dtype=np.int8)
        beyond = {
            "q1_min": i < 0,
            "q1_max": i >= n1,
            "q2_min": j < 0,
            "q2_max": j >= n2,
        }
        for side, hit in beyond.items():
            out[hit] = 1 if self.sides[side] is None else 2
        if self.kind is PatchKind.C1:
            half = self.half_index
            obstacle = (i >= 0) & (j >= 0) & (i < half) & (j < half)
            out[obstacle] = 2
        return out

    # -- mapping helpers ------------------------------------------------------

    def parameter_grid(self) -> tuple[np.ndarray, np.ndarray]:
        n1, n2 = self.shape
        return np.linspace(0.0, 1.0, n1), np.linspace(0.0, 1.0, n2)

    def physical_spacing(self) -> tuple[float, float]:
        """Largest distance between consecutive grid points along ``q1`` and ``q2``."""
        q1, q2 = self.parameter_grid()
        Q1, Q2 = np.meshgrid(q1, q2, indexing="ij")
        x, y = self.mapping.map(Q1, Q2)
        inside = self.contains_parameter(Q1, Q2)
        d1 = np.hypot(np.diff(x, axis=0), np.diff(y, axis=0))
        d2 = np.hypot(np.diff(x, axis=1), np.diff(y, axis=1))
        m1 = inside[1:, :] & inside[:-1, :]
        m2 = inside[:, 1:] & inside[:, :-1]
        return float(d1[m1].max()), float(d2[m2].max())

    @property
    def diameter(self) -> float:
        if self._diameter is None:
            self._build_seeds()
        return self._diameter

    def _build_seeds(self) -> None:
        q = np.linspace(0.0, 1.0, _SEED_SAMPLES)
        Q1, Q2 = np.meshgrid(q, q, indexing="ij")
        keep = self.contains_parameter(Q1, Q2)
        params = np.column_stack([Q1[keep], Q2[keep]])
        x, y = self.mapping.map(params[:, 0], params[:, 1])
        points = np.column_stack([x, y])
        self._seed_params = params
        self._seed_tree = cKDTree(points)
        self._diameter = float(np.ptp(points, axis=0).max())

    def bounding_box(self) -> tuple[float, float, float, float]:
        if self._seed_tree is None:
            self._build_seeds()
        data = self._seed_tree.data
        return (
            float(data[:, 0].min()),
            float(data[:, 0].max()),
            float(data[:, 1].min()),
            float(data[:, 1].max()),
        )

    def inverse_map(
        self,
        x: np.ndarray,
        y: np.ndarray,
        tol: float = 1e-10,
        max_iterations: int = 50,
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        Damped Newton inversion of the patch mapping.

        Args:
            x, y: Physical coordinates (1D arrays).
            tol: Convergence tolerance on the residual relative to the patch diameter.
            max_iterations: Newton iteration cap.

        Returns:
            ``(q1, q2, converged)``.
        """
        if self._seed_tree is None:
            self._build_seeds()
        x = np.atleast_1d(np.asarray(x, dtype=float))
        y = np.atleast_1d(np.asarray(y, dtype=float))
        _, nearest = self._seed_tree.query(np.column_stack([x, y]))
        q1 = self._seed_params[nearest, 0].copy()
        q2 = self._seed_params[nearest, 1].copy()
        threshold = tol * max(self._diameter, 1e-300)

        rx, ry = _residual(self.mapping, q1, q2, x, y)
        norm = np.hypot(rx, ry)
        done = norm <= threshold
        for _ in range(max_iterations):
            active = np.flatnonzero(~done)
            if active.size == 0:
                break
            x1, x2, y1, y2 = self.mapping.jacobian(q1[active], q2[active])
            det = x1 * y2 - x2 * y1
            det = np.where(np.abs(det) < 1e-300, 1e-300, det)
            d1 = (y2 * rx[active] - x2 * ry[active]) / det
            d2 = (-y1 * rx[active] + x1 * ry[active]) / det
            base1, base2, old = q1[active], q2[active], norm[active]
            step = np.ones_like(d1)
            for _ in range(10):
                new1 = base1 - step * d1
                new2 = base2 - step * d2
                nrx, nry = _residual(self.mapping, new1, new2, x[active], y[active])
                new_norm = np.hypot(nrx, nry)
                worse = new_norm > old
                if not worse.any():
                    break
                step = np.where(worse, 0.5 * step, step)
            q1[active], q2[active] = new1, new2
            rx[active], ry[active], norm[active] = nrx, nry, new_norm
            stalled = np.hypot(step * d1, step * d2) <= 1e-15
            done[active] = (new_norm <= threshold) | stalled
        return q1, q2, norm <= threshold

    def locate(self, x: np.ndarray, y: np.ndarray, tol: float = 1e-9) -> tuple[np.ndarray, ...]:
        """Inverse map plus membership in the closed parameter polygon."""
        q1, q2, ok = self.inverse_map(x, y)
        return q1, q2, ok & self.contains_parameter(q1, q2, tol)

    def describe(self) -> str:
        return f"{self.kind.value}[{self.index}]{(' ' + self.name) if self.name else ''}"

    def __repr__(self) -> str:
        return f"Patch({self.describe()}, r={self.r}, s={self.s}, shape={self.shape})"


def _residual(mapping: PatchMapping, q1, q2, x, y):
    mx, my = mapping.map(q1, q2)
    return mx - x, my - y


def _check_determinant(patch: Patch, samples: int = 101) -> None:
    q = np.linspace(0.0, 1.0, samples)
    Q1, Q2 = np.meshgrid(q, q, indexing="ij")
    keep = patch.contains_parameter(Q1, Q2)
    det = patch.mapping.determinant(Q1[keep], Q2[keep])
    if not (np.all(det > 0) or np.all(det < 0)):
        logger.error(f"Jacobian determinant changes sign on {patch.describe()}")
        raise GeometryError("mapping is not invertible (det J changes sign)", patch=patch.name)


def _tangent(curve: BoundaryCurve, s: float) -> np.ndarray:
    tx, ty = curve.derivative(np.array(s))
    return np.array([float(tx), float(ty)])


def _check_corner(ell_a: BoundaryCurve, ell_b: BoundaryCurve, corner, s: float) -> np.ndarray:
    corner = np.asarray(corner, dtype=float)
    for curve in (ell_a, ell_b):
        px, py = curve.point(np.array(s))
        if np.hypot(float(px) - corner[0], float(py) - corner[1]) > 1e-12 * max(
            1.0, np.abs(corner).max()
        ):
            raise GeometryError("boundary arcs do not meet at the corner", corner=corner.tolist())
    ta, tb = _tangent(ell_a, s), _tangent(ell_b, s)
    cross = ta[0] * tb[1] - ta[1] * tb[0]
    if abs(cross) <= 1e-10 * np.linalg.norm(ta) * np.linalg.norm(tb):
        raise GeometryError("boundary arcs have parallel tangents at the corner")
    return corner


def build_c1_patch(
    ell_a: BoundaryCurve,
    ell_b: BoundaryCurve,
    corner,
    sides: Optional[dict[str, Optional[str]]] = None,
    wall: str = "noslip_adiabatic",
    r: int = 2,
    n: int = 43,
    nv: int = 9,
    name: str = "",
) -> Patch:
    """
    Concave-corner patch ``M(q) = lA(q1) + lB(q2) - C`` on the L-shaped set.

    ``lA(1/2) = lB(1/2) = C``; the missing square ``[0,1/2)^2`` maps onto the
    obstacle, so ``arc_a`` and ``arc_b`` carry the wall condition ``wall``.
    """
    corner = _check_corner(ell_a, ell_b, corner, 0.5)
    all_sides = {side: None for side in Q_SIDES}
    all_sides.update({"arc_a": wall, "arc_b": wall})
    all_sides.update(sides or {})
    patch = Patch(
        PatchKind.C1,
        CurveSumMapping(ell_a, ell_b, corner),
        all_sides,
        r=r,
        s=r,
        n=n,
        nv=nv,
        name=name,
    )
    _check_determinant(patch)
    return patch


def build_c2_patch(
    ell_a: BoundaryCurve,
    ell_b: BoundaryCurve,
    corner,
    sides: Optional[dict[str, Optional[str]]] = None,
    r: int = 1,
    s: int = 1,
    n: int = 83,
    nv: int = 9,
    name: str = "",
) -> Patch:
    """Convex-corner patch; ``lA(1) = lB(1) = C`` so the corner is the image of ``(1, 1)``."""
    corner = _check_corner(ell_a, ell_b, corner, 1.0)
    all_sides = {side: None for side in Q_SIDES}
    all_sides.update(sides or {})
    patch = Patch(
        PatchKind.C2,
        CurveSumMapping(ell_a, ell_b, corner),
        all_sides,
        r=r,
        s=s,
        n=n,
        nv=nv,
        name=name,
    )
    _check_determinant(patch)
    return patch


def build_s_patch(
    curve: BoundaryCurve,
    depth: float,
    side: int = 1,
    sides: Optional[dict[str, Optional[str]]] = None,
    r: int = 1,
    s: int = 1,
    n: int = 83,
    nv: int = 9,
    name: str = "",
) -> Patch:
    """Smooth-boundary patch extruded from ``curve`` along its normal; ``q2 = 0`` is the curve."""
    all_sides = {side_name: None for side_name in Q_SIDES}
    all_sides.update(sides or {})
    patch = Patch(
        PatchKind.S,
        NormalExtrusionMapping(curve, depth, side),
        all_sides,
        r=r,
        s=s,
        n=n,
        nv=nv,
        name=name,
    )
    _check_determinant(patch)
    return patch


def build_i_patch(
    x0: float,
    x1: float,
    y0: float,
    y1: float,
    sides: Optional[dict[str, Optional[str]]] = None,
    r: int = 1,
    s: int = 1,
    n: int = 83,
    nv: int = 9,
    name: str = "",
) -> Patch:
    """Axis-aligned rectangle; ``q1`` runs along ``x``."""
    if x1 <= x0 or y1 <= y0:
        raise GeometryError("empty rectangle", x0=x0, x1=x1, y0=y0, y1=y1)
    all_sides = {side: None for side in Q_SIDES}
    all_sides.update(sides or {})
    return Patch(
        PatchKind.I,
        AffineMapping.rectangle(x0, x1, y0, y1),
        all_sides,
        r=r,
        s=s,
        n=n,
        nv=nv,
        name=name,
    )
