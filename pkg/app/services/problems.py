"""
Built-in problems: initial conditions, geometry builders and presets.

Every preset couples a patch layout with an initial condition, the values
needed by the side conditions, an end time and an optional CFL override.
Presets accept a refinement bound ``hbar``; coarser bounds give desk-scale
variants with the same patch topology.
"""
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from loguru import logger

from app.core.config import Settings
from app.core.exceptions import UsageError
from app.services.curves import CircularArc, LineSegment
from app.services.decomposition import DomainDecomposition, DomainTest, refine
from app.services.euler import BoundaryData
from app.services.gas import GAMMA, conservative
from app.services.oracles import jump_residuals, normal_shock
from app.services.patches import (
    Patch,
    build_c1_patch,
    build_c2_patch,
    build_i_patch,
    build_s_patch,
)

AMBIENT = (1.4, 0.0, 0.0, 1.0)
Primitive = tuple[float, float, float, float]


# -- initial conditions -------------------------------------------------------


@dataclass(frozen=True)
class UniformFlow:
    """Uniform Mach ``mach`` flow along ``+x`` with unit sound speed."""

    mach: float
    gamma: float = GAMMA

    @property
    def state(self) -> Primitive:
        return (1.4, float(self.mach), 0.0, 1.0)

    def __call__(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        rho, u, v, p = self.state
        ones = np.ones_like(np.asarray(x, dtype=float))
        return conservative(rho * ones, u * ones, v * ones, p * ones, self.gamma)


@dataclass(frozen=True)
class PlanarDiscontinuity:
    """``left`` for ``x < x_s`` and ``right`` elsewhere."""

    left: Primitive
    right: Primitive
    x_s: float
    gamma: float = GAMMA

    def __call__(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        upstream = x < self.x_s
        comps = [np.where(upstream, a, b) for a, b in zip(self.left, self.right)]
        return conservative(*comps, gamma=self.gamma)


@dataclass(frozen=True)
class Quadrants:
    """Four constant states split at ``(x_c, y_c)``."""

    upper_right: Primitive
    upper_left: Primitive
    lower_left: Primitive
    lower_right: Primitive
    x_c: float = 0.5
    y_c: float = 0.5
    gamma: float = GAMMA

    def __call__(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        right, upper = x >= self.x_c, y >= self.y_c
        comps = []
        for k in range(4):
            comps.append(
                np.where(
                    upper,
                    np.where(right, self.upper_right[k], self.upper_left[k]),
                    np.where(right, self.lower_right[k], self.lower_left[k]),
                )
            )
        return conservative(*comps, gamma=self.gamma)


def shock_strength(mach: float, gamma: float = GAMMA) -> float:
    """Pressure ratio ``zeta = (2 gamma M^2 - gamma + 1) / (gamma + 1)`` across a normal shock."""
    return (2.0 * gamma * mach * mach - gamma + 1.0) / (gamma + 1.0)


def make_shock_ic(
    mach: float,
    x_s: float,
    gamma: float = GAMMA,
    convention: str = "tabulated",
) -> PlanarDiscontinuity:
    """
    Right-moving Mach ``mach`` shock at ``x_s`` running into the ambient state.

    The left state is ``(rho_L, (zeta - 1) / (gamma M), 0, zeta)``. With the
    density ratio ``r = (gamma + 1) M^2 / ((gamma - 1) M^2 + 2)``, the
    ``tabulated`` convention uses ``rho_L = r / 1.4`` and the
    ``rankine_hugoniot`` convention uses ``rho_L = 1.4 r``.

    Raises:
        UsageError: If ``mach <= 1`` or the convention is unknown.
    """
    if not mach > 1.0:
        raise UsageError("a shock needs a Mach number above one", mach=mach)
    zeta = shock_strength(mach, gamma)
    velocity = (zeta - 1.0) / (gamma * mach)
    ratio = (gamma + 1.0) * mach * mach / ((gamma - 1.0) * mach * mach + 2.0)
    if convention == "tabulated":
        rho = ratio / AMBIENT[0]
    elif convention == "rankine_hugoniot":
        rho = AMBIENT[0] * ratio
    else:
        raise UsageError("unknown shock density convention", convention=convention)
    return PlanarDiscontinuity((rho, velocity, 0.0, zeta), AMBIENT, x_s, gamma)


def make_flow_ic(mach: float, gamma: float = GAMMA) -> UniformFlow:
    if mach < 0:
        raise UsageError("Mach number must be non-negative", mach=mach)
    return UniformFlow(mach, gamma)


# -- geometry builders ----------------------------------------------------------


def _direction(degrees: float) -> np.ndarray:
    angle = np.radians(degrees)
    return np.array([np.cos(angle), np.sin(angle)])


def _c1_vertex(vertex, dir_a, dir_b, half: float, wall: str, name: str) -> Patch:
    """C1 patch whose obstacle is the cone spanned by the wall directions ``dir_a``, ``dir_b``."""
    v = np.asarray(vertex, dtype=float)
    ell_a = LineSegment(v + half * dir_a, v - half * dir_a)
    ell_b = LineSegment(v + half * dir_b, v - half * dir_b)
    return build_c1_patch(ell_a, ell_b, v, wall=wall, name=name)


def _c2_corner(corner, dir_a, dir_b, length: float, sides: dict, name: str) -> Patch:
    """C2 patch on ``C + a dir_a + b dir_b``; ``q2_max`` runs along ``dir_a``, ``q1_max`` along ``dir_b``."""
    c = np.asarray(corner, dtype=float)
    ell_a = LineSegment(c + length * dir_a, c)
    ell_b = LineSegment(c + length * dir_b, c)
    return build_c2_patch(ell_a, ell_b, c, sides=sides, name=name)


def build_channel(
    x0: float,
    x1: float,
    y0: float,
    y1: float,
    sides: dict,
    r: int = 1,
    s: int = 1,
    name: str = "channel",
) -> list[Patch]:
    return [build_i_patch(x0, x1, y0, y1, sides=sides, r=r, s=s, name=name)]


@dataclass(frozen=True)
class WedgeLayout:
    """
    Patch extents around a wedge, in units of the wedge length.

    ``x`` offsets are measured from the tip along the flow, ``y`` offsets
    from the tip height. The front blocks fill the gap between the upstream
    block and the tip; the rear blocks run to the outflow boundary above and
    below the faces.
    """

    tip_arm: float = 0.45
    face_strip: float = 0.95
    strip_depth: float = 0.75
    corner_arm: float = 0.45
    upstream_end: float = -0.04
    front_start: float = -0.28
    front_end: float = 0.36
    front_floor: float = 0.17
    rear_start: float = -0.15
    rear_floor: float = 0.54


def build_wedge(
    box: tuple[float, float, float, float] = (0.0, 0.024, 0.0, 0.03),
    tip: tuple[float, float] = (0.013, 0.015),
    half_angle: float = 20.0,
    wall: str = "noslip_adiabatic",
    far_field: str = "zero_normal_derivative_all",
    layout: WedgeLayout = WedgeLayout(),
) -> list[Patch]:
    """
    Wedge whose faces run from ``tip`` to the outflow boundary ``x = box[1]``.

    C1 patch at the tip, S strips along both faces, C2 patches where the
    faces meet the outflow boundary and five I blocks around them.
    """
    x0, x1, y0, y1 = box
    t = np.asarray(tip, dtype=float)
    length = x1 - t[0]
    face = length / np.cos(np.radians(half_angle))
    up, down = _direction(half_angle), _direction(-half_angle)
    e_y = np.array([0.0, 1.0])
    lay = layout
    front = (t[0] + lay.front_start * length, t[0] + lay.front_end * length)
    rear = t[0] + lay.rear_start * length
    outflow = "supersonic_outflow_none"
    return [
        _c1_vertex(t, up, down, lay.tip_arm * length, wall, "tip"),
        build_s_patch(
            LineSegment(t, t + lay.face_strip * face * up), lay.strip_depth * length, side=1,
            sides={"q2_min": wall}, name="upper-face",
        ),
        build_s_patch(
            LineSegment(t, t + lay.face_strip * face * down), lay.strip_depth * length, side=-1,
            sides={"q2_min": wall}, name="lower-face",
        ),
        _c2_corner(
            t + face * up, -up, e_y, lay.corner_arm * length,
            {"q2_max": wall, "q1_max": outflow}, "upper-corner",
        ),
        _c2_corner(
            t + face * down, -down, -e_y, lay.corner_arm * length,
            {"q2_max": wall, "q1_max": outflow}, "lower-corner",
        ),
        build_i_patch(
            x0, t[0] + lay.upstream_end * length, y0, y1,
            sides={"q1_min": "inflow_dirichlet", "q2_min": far_field, "q2_max": far_field},
            name="upstream",
        ),
        build_i_patch(
            *front, t[1] + lay.front_floor * length, y1,
            sides={"q2_max": far_field}, name="front-above",
        ),
        build_i_patch(
            *front, y0, t[1] - lay.front_floor * length,
            sides={"q2_min": far_field}, name="front-below",
        ),
        build_i_patch(
            rear, x1, t[1] + lay.rear_floor * length, y1,
            sides={"q1_max": outflow, "q2_max": far_field}, name="above",
        ),
        build_i_patch(
            rear, x1, y0, t[1] - lay.rear_floor * length,
            sides={"q1_max": outflow, "q2_min": far_field}, name="below",
        ),
    ]


def _tolerance(box) -> float:
    x0, x1, y0, y1 = box
    return 1e-9 * max(x1 - x0, y1 - y0)


def _in_box(x, y, box, eps: float) -> np.ndarray:
    x0, x1, y0, y1 = box
    return (x >= x0 - eps) & (x <= x1 + eps) & (y >= y0 - eps) & (y <= y1 + eps)


def wedge_domain(box, tip, half_angle: float) -> DomainTest:
    """Closed flow domain around a wedge; wall points within a relative ``1e-9`` count as inside."""
    slope = np.tan(np.radians(half_angle))
    eps = _tolerance(box)

    def inside(x, y):
        x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        solid = (x > tip[0] + eps) & (np.abs(y - tip[1]) < (x - tip[0]) * slope - eps)
        return _in_box(x, y, box, eps) & ~solid

    return inside


@dataclass(frozen=True)
class PrismLayout:
    """
    Patch extents around a prism, in units of its length.

    Offsets follow :class:`WedgeLayout`. ``above_end = None`` runs the blocks
    above and below the prism to the outflow boundary; otherwise they stop
    there and the downstream block covers the rest of the channel.
    """

    front_arm: float = 0.49
    rear_arm: float = 0.65
    face_depth: float = 1.05
    rear_depth: float = 0.75
    upstream_end: float = -0.02
    front_start: float = -0.8
    front_end: float = 0.61
    front_floor: float = 0.23
    above_start: float = -0.23
    above_floor: float = 0.45
    above_end: Optional[float] = None
    downstream_start: float = 1.02


EQUILATERAL_PRISM = PrismLayout(
    front_arm=0.59,
    rear_arm=0.85,
    face_depth=0.82,
    rear_depth=1.17,
    upstream_end=-0.05,
    front_start=-0.78,
    front_end=0.88,
    front_floor=0.53,
    above_start=-0.28,
    above_floor=0.58,
    above_end=1.96,
    downstream_start=1.05,
)


def build_prism(
    box: tuple[float, float, float, float],
    front: tuple[float, float],
    half_angle: float,
    length: float,
    wall: str = "noslip_adiabatic",
    top_bottom: str = "slip_wall",
    outflow: str = "supersonic_outflow_none",
    layout: PrismLayout = PrismLayout(),
) -> list[Patch]:
    """
    Triangular prism with a vertical rear face ``length`` behind ``front``.

    All three vertices are C1 corners; each face carries an S strip reaching
    both of its vertices; six I blocks cover the rest of the channel.
    """
    x0, x1, y0, y1 = box
    t = np.asarray(front, dtype=float)
    up, down = _direction(half_angle), _direction(-half_angle)
    face = length / np.cos(np.radians(half_angle))
    top, bottom = t + face * up, t + face * down
    e_y = np.array([0.0, 1.0])
    lay = layout
    ahead = (t[0] + lay.front_start * length, t[0] + lay.front_end * length)
    span = (
        t[0] + lay.above_start * length,
        x1 if lay.above_end is None else t[0] + lay.above_end * length,
    )
    span_sides = {"q1_max": outflow} if lay.above_end is None else {}
    return [
        _c1_vertex(t, up, down, lay.front_arm * length, wall, "front"),
        _c1_vertex(top, -up, -e_y, lay.rear_arm * length, wall, "rear-top"),
        _c1_vertex(bottom, -down, e_y, lay.rear_arm * length, wall, "rear-bottom"),
        build_s_patch(
            LineSegment(t, top), lay.face_depth * length, side=1, sides={"q2_min": wall},
            name="upper-face",
        ),
        build_s_patch(
            LineSegment(t, bottom), lay.face_depth * length, side=-1, sides={"q2_min": wall},
            name="lower-face",
        ),
        build_s_patch(
            LineSegment(bottom, top), lay.rear_depth * length, side=-1, sides={"q2_min": wall},
            name="rear-face",
        ),
        build_i_patch(
            x0, t[0] + lay.upstream_end * length, y0, y1,
            sides={"q1_min": "inflow_dirichlet", "q2_min": top_bottom, "q2_max": top_bottom},
            name="upstream",
        ),
        build_i_patch(
            *ahead, t[1] + lay.front_floor * length, y1,
            sides={"q2_max": top_bottom}, name="front-above",
        ),
        build_i_patch(
            *ahead, y0, t[1] - lay.front_floor * length,
            sides={"q2_min": top_bottom}, name="front-below",
        ),
        build_i_patch(
            *span, t[1] + lay.above_floor * length, y1,
            sides={**span_sides, "q2_max": top_bottom}, name="above",
        ),
        build_i_patch(
            *span, y0, t[1] - lay.above_floor * length,
            sides={**span_sides, "q2_min": top_bottom}, name="below",
        ),
        build_i_patch(
            t[0] + lay.downstream_start * length, x1, y0, y1,
            sides={"q1_max": outflow, "q2_min": top_bottom, "q2_max": top_bottom},
            name="downstream",
        ),
    ]


def prism_domain(box, front, half_angle: float, length: float) -> DomainTest:
    slope = np.tan(np.radians(half_angle))
    eps = _tolerance(box)

    def inside(x, y):
        x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        solid = (
            (x > front[0] + eps)
            & (x < front[0] + length - eps)
            & (np.abs(y - front[1]) < (x - front[0]) * slope - eps)
        )
        return _in_box(x, y, box, eps) & ~solid

    return inside


@dataclass(frozen=True)
class CylinderLayout:
    """
    Patch sizes around one cylinder of radius ``radius``.

    The annulus reaches ``outer``; vertical blocks stop ``inner`` from the
    centre and horizontal blocks span ``block`` on either side of it. I
    blocks start with one subdivision per ``span`` of each side.
    """

    radius: float
    span: float = 1.0

    @property
    def inner(self) -> float:
        return self.radius + 0.15

    @property
    def block(self) -> float:
        return self.inner + 0.25

    @property
    def outer(self) -> float:
        return self.radius + 0.6


def _block(x0, x1, y0, y1, layout: CylinderLayout, sides: dict, name: str) -> Patch:
    r = max(1, math.ceil((x1 - x0) / layout.span))
    s = max(1, math.ceil((y1 - y0) / layout.span))
    return build_i_patch(x0, x1, y0, y1, sides=sides, r=r, s=s, name=name)


def _annulus(center, layout: CylinderLayout, wall: str, name: str) -> list[Patch]:
    """Four overlapping annular sectors of 140 degrees centred on the axes."""
    out = []
    for k in range(4):
        mid = np.radians(90.0 * k)
        spread = np.radians(70.0)
        arc = CircularArc(center, layout.radius, mid - spread, mid + spread)
        out.append(
            build_s_patch(
                arc,
                layout.outer - layout.radius,
                side=-1,
                sides={"q2_min": wall},
                name=f"{name}-sector{k}",
            )
        )
    return out


def build_cylinder_matrix(
    rows: int = 1,
    cols: int = 1,
    radius: float = 0.25,
    front: float = 2.5,
    wake: float = 3.0,
    y0: float = 0.0,
    wall: str = "noslip_adiabatic",
    outflow: str = "outflow_pressure",
) -> list[Patch]:
    """
    ``rows x cols`` cells of size 3 x 2 with a cylinder at offset ``(1.1, 1)``.

    Full-height vertical blocks fill the gaps between cylinder columns (and
    the ``front`` and ``wake`` columns); horizontal blocks fill the gaps
    between cylinders of one column; each cylinder carries four sectors.
    """
    if rows < 1 or cols < 1:
        raise UsageError("cylinder matrix needs at least one row and column", rows=rows, cols=cols)
    layout = CylinderLayout(radius)
    a, b = layout.inner, layout.block
    xc = [front + 3.0 * i + 1.1 for i in range(cols)]
    yc = [y0 + 2.0 * j + 1.0 for j in range(rows)]
    x_end = front + 3.0 * cols + wake
    y_end = y0 + 2.0 * rows
    walls = {"q2_min": "slip_wall", "q2_max": "slip_wall"}

    edges = [0.0] + [e for c in xc for e in (c - a, c + a)] + [x_end]
    patches = []
    for k in range(cols + 1):
        sides = dict(walls)
        if k == 0:
            sides["q1_min"] = "inflow_dirichlet"
        if k == cols:
            sides["q1_max"] = outflow
        patches.append(
            _block(edges[2 * k], edges[2 * k + 1], y0, y_end, layout, sides, f"column{k}")
        )
    for i, cx in enumerate(xc):
        stops = [y0] + [e for c in yc for e in (c - a, c + a)] + [y_end]
        for j in range(rows + 1):
            sides = {}
            if j == 0:
                sides["q2_min"] = "slip_wall"
            if j == rows:
                sides["q2_max"] = "slip_wall"
            patches.append(
                _block(cx - b, cx + b, stops[2 * j], stops[2 * j + 1], layout, sides, f"gap{i}.{j}")
            )
        for j, cy in enumerate(yc):
            patches.extend(_annulus((cx, cy), layout, wall, f"cylinder{i}.{j}"))
    logger.debug(f"Cylinder matrix {rows}x{cols}: {len(patches)} patches")
    return patches


def cylinder_domain(rows, cols, radius, front, wake, y0) -> DomainTest:
    xc = np.array([front + 3.0 * i + 1.1 for i in range(cols)])
    yc = np.array([y0 + 2.0 * j + 1.0 for j in range(rows)])
    x_end = front + 3.0 * cols + wake
    y_end = y0 + 2.0 * rows
    box = (0.0, x_end, y0, y_end)
    eps = _tolerance(box)

    def inside(x, y):
        x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        out = _in_box(x, y, box, eps)
        for cx in xc:
            for cy in yc:
                out &= np.hypot(x - cx, y - cy) >= radius - eps
        return out

    return inside


def box_domain(x0: float, x1: float, y0: float, y1: float) -> DomainTest:
    box = (x0, x1, y0, y1)
    eps = _tolerance(box)

    def inside(x, y):
        x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        return _in_box(x, y, box, eps)

    return inside


# -- presets ------------------------------------------------------------------


@dataclass
class ProblemSpec:
    """
    A runnable problem.

    ``cfl = None`` selects ``CFL_C1`` or ``CFL`` from the settings depending
    on whether the layout has a C1 patch. ``energy_length`` divides the
    energy integral.
    """

    name: str
    description: str
    build: Callable[[], list[Patch]]
    domain: DomainTest
    initial_state: Callable[[np.ndarray, np.ndarray], np.ndarray]
    boundary: BoundaryData
    t_end: float
    cfl: Optional[float] = None
    hbar: Optional[float] = None
    energy_length: float = 1.0
    options: dict = field(default_factory=dict)

    def decomposition(self, config: Settings, hbar: Optional[float] = None) -> DomainDecomposition:
        dec = DomainDecomposition(
            self.build(),
            nv=config.geom_nv,
            n0=config.geom_n0,
            n1=config.geom_n1,
            name=self.name,
            domain=self.domain,
        )
        bound = hbar if hbar is not None else self.hbar
        if bound is not None:
            dec = refine(dec, bound)
        return dec

    def cfl_for(self, dec: DomainDecomposition, config: Settings) -> float:
        if self.cfl is not None:
            return self.cfl
        return config.cfl_c1 if dec.has_c1 else config.cfl

    def describe(self) -> dict:
        return {
            "name": self.name,
            "description": self.description,
            "t_end": self.t_end,
            "cfl": self.cfl,
            "hbar": self.hbar,
            "energy_length": self.energy_length,
            "options": dict(self.options),
        }


SOD_LEFT: Primitive = (1.0, 0.0, 0.0, 1.0)
SOD_RIGHT: Primitive = (0.125, 0.0, 0.0, 0.1)
RIEMANN4_STATES = {
    "upper_right": (1.1, 0.0, 0.0, 1.1),
    "upper_left": (0.5065, 0.8939, 0.0, 0.35),
    "lower_left": (1.1, 0.8939, 0.8939, 1.1),
    "lower_right": (0.5065, 0.0, 0.8939, 0.35),
}


def _sod(t_end: float = 0.2, r: int = 4, s: int = 1, hbar: Optional[float] = None, **_) -> ProblemSpec:
    sides = {
        "q1_min": "slip_wall",
        "q1_max": "slip_wall",
        "q2_min": "zero_normal_derivative_all",
        "q2_max": "zero_normal_derivative_all",
    }
    return ProblemSpec(
        name="sod",
        description="Sod shock tube in the closed channel [0,1]x[0,0.25]",
        build=lambda: build_channel(0.0, 1.0, 0.0, 0.25, sides, r=r, s=s, name="sod"),
        domain=box_domain(0.0, 1.0, 0.0, 0.25),
        initial_state=PlanarDiscontinuity(SOD_LEFT, SOD_RIGHT, 0.5),
        boundary=BoundaryData(),
        t_end=t_end,
        hbar=hbar,
        energy_length=0.25,
        options={"r": r, "s": s},
    )


def _sod_energy(**options) -> ProblemSpec:
    spec = _sod(**{"t_end": 5.0, **options})
    spec.name = "sod-energy"
    spec.description = "Sod shock tube run through repeated wall reflections"
    return spec


def _riemann4(t_end: float = 0.25, r: int = 7, s: int = 7, hbar: Optional[float] = None, **_) -> ProblemSpec:
    sides = {side: "zero_normal_derivative_all" for side in ("q1_min", "q1_max", "q2_min", "q2_max")}
    return ProblemSpec(
        name="riemann4",
        description="Four-quadrant Riemann problem on the unit square",
        build=lambda: build_channel(0.0, 1.0, 0.0, 1.0, sides, r=r, s=s, name="square"),
        domain=box_domain(0.0, 1.0, 0.0, 1.0),
        initial_state=Quadrants(**RIEMANN4_STATES),
        boundary=BoundaryData(),
        t_end=t_end,
        hbar=hbar,
        options={"r": r, "s": s},
    )


def _wedge(mach: float):
    def factory(t_end: float = 0.02, hbar: Optional[float] = 1e-4, **_) -> ProblemSpec:
        box, tip = (0.0, 0.024, 0.0, 0.03), (0.013, 0.015)
        flow = make_flow_ic(mach)
        return ProblemSpec(
            name=f"wedge-m{mach:g}",
            description=f"Mach {mach:g} flow over a 40 degree wedge",
            build=lambda: build_wedge(box, tip, 20.0),
            domain=wedge_domain(box, tip, 20.0),
            initial_state=flow,
            boundary=BoundaryData(inflow=flow.state),
            t_end=t_end,
            cfl=0.25,
            hbar=hbar,
            options={"mach": mach},
        )

    return factory


def _prism_flow(mach: float):
    def factory(t_end: float = 0.02, hbar: Optional[float] = 1.5e-4, **_) -> ProblemSpec:
        box, front = (0.0, 0.06, 0.0, 0.03), (0.013, 0.015)
        flow = make_flow_ic(mach)
        return ProblemSpec(
            name=f"prism-flow-m{mach:g}",
            description=f"Mach {mach:g} flow past a triangular prism in a channel",
            build=lambda: build_prism(box, front, 20.0, 0.011),
            domain=prism_domain(box, front, 20.0, 0.011),
            initial_state=flow,
            boundary=BoundaryData(inflow=flow.state),
            t_end=t_end,
            hbar=hbar,
            options={"mach": mach},
        )

    return factory


def _shock_prism(mach: float):
    def factory(
        t_end: float = 0.025,
        hbar: Optional[float] = 2e-4,
        convention: str = "tabulated",
        **_,
    ) -> ProblemSpec:
        box, front = (0.0, 0.08, 0.0, 0.06), (0.013, 0.03)
        shock = make_shock_ic(mach, 0.007, convention=convention)
        return ProblemSpec(
            name=f"shock-prism-m{mach:g}",
            description=f"Mach {mach:g} shock passing an equilateral prism",
            build=lambda: build_prism(
                box, front, 30.0, 0.011, outflow="outflow_pressure", layout=EQUILATERAL_PRISM
            ),
            domain=prism_domain(box, front, 30.0, 0.011),
            initial_state=shock,
            boundary=BoundaryData(inflow=shock.left, outflow_pressure=1.0),
            t_end=t_end,
            hbar=hbar,
            options={"mach": mach, "convention": convention},
        )

    return factory


def _flow_cylinder(mach: float = 10.0, t_end: float = 0.1, hbar: Optional[float] = 0.012, **_) -> ProblemSpec:
    flow = make_flow_ic(mach)
    return ProblemSpec(
        name="flow-cylinder",
        description=f"Mach {mach:g} flow past a cylinder of diameter 0.25",
        build=lambda: build_cylinder_matrix(
            1, 1, radius=0.125, front=0.0, wake=0.0, y0=-1.0, outflow="supersonic_outflow_none"
        ),
        domain=cylinder_domain(1, 1, 0.125, 0.0, 0.0, -1.0),
        initial_state=flow,
        boundary=BoundaryData(inflow=flow.state),
        t_end=t_end,
        hbar=hbar,
        options={"mach": mach},
    )


def _matrix(
    name: str,
    mach: float,
    x_s: float,
    t_end: float,
    rows: int,
    cols: int,
    hbar: Optional[float],
    convention: str,
) -> ProblemSpec:
    shock = make_shock_ic(mach, x_s, convention=convention)
    return ProblemSpec(
        name=name,
        description=f"Mach {mach:g} shock through a {rows}x{cols} cylinder matrix",
        build=lambda: build_cylinder_matrix(rows, cols, radius=0.25),
        domain=cylinder_domain(rows, cols, 0.25, 2.5, 3.0, 0.0),
        initial_state=shock,
        boundary=BoundaryData(inflow=shock.left, outflow_pressure=1.0),
        t_end=t_end,
        hbar=hbar,
        options={"mach": mach, "rows": rows, "cols": cols, "x_s": x_s, "convention": convention},
    )


def _cylinder_matrix(
    rows: int = 2,
    cols: int = 2,
    t_end: float = 0.1,
    hbar: Optional[float] = 0.012,
    convention: str = "tabulated",
    **_,
) -> ProblemSpec:
    return _matrix("cylinder-matrix", 10.0, 0.6, t_end, rows, cols, hbar, convention)


def _shock_matrix(mach: float):
    def factory(
        rows: int = 2,
        cols: int = 2,
        t_end: float = 1.4,
        hbar: Optional[float] = 0.012,
        convention: str = "tabulated",
        **_,
    ) -> ProblemSpec:
        return _matrix(f"shock-matrix-m{mach:g}", mach, 0.5, t_end, rows, cols, hbar, convention)

    return factory


PROBLEMS: dict[str, Callable[..., ProblemSpec]] = {
    "sod": _sod,
    "sod-energy": _sod_energy,
    "riemann4": _riemann4,
    "wedge-m3.5": _wedge(3.5),
    "wedge-m10": _wedge(10.0),
    "prism-flow-m3.5": _prism_flow(3.5),
    "prism-flow-m10": _prism_flow(10.0),
    "shock-prism-m1.5": _shock_prism(1.5),
    "shock-prism-m10": _shock_prism(10.0),
    "flow-cylinder": _flow_cylinder,
    "cylinder-matrix": _cylinder_matrix,
    "shock-matrix-m3": _shock_matrix(3.0),
    "shock-matrix-m10": _shock_matrix(10.0),
}


def get_problem(name: str, **options) -> ProblemSpec:
    """
    Instantiate a preset.

    Raises:
        UsageError: If ``name`` is not a known preset.
    """
    if name not in PROBLEMS:
        raise UsageError("unknown problem", problem=name, known=sorted(PROBLEMS))
    options = {k: v for k, v in options.items() if v is not None}
    return PROBLEMS[name](**options)


def list_problems() -> list[dict]:
    return [PROBLEMS[name]().describe() for name in sorted(PROBLEMS)]


def shock_state_check(
    mach: float, x_s: float = 0.0, gamma: float = GAMMA, convention: str = "tabulated"
) -> dict:
    """
    Shock initial states next to the jump-condition solution.

    ``residuals`` are the relative mass, momentum and energy flux jumps of the
    initial states across a shock moving at the reference speed; they vanish
    for ``rankine_hugoniot`` and expose the density of ``tabulated``.
    """
    ic = make_shock_ic(mach, x_s, gamma, convention)
    reference = normal_shock(mach, AMBIENT, gamma)
    residuals = jump_residuals(ic.left, ic.right, reference.speed, gamma)
    logger.debug(f"Shock state M={mach:g} ({convention}): residuals {residuals}")
    return {
        "left": list(ic.left),
        "right": list(ic.right),
        "convention": convention,
        "reference": list(reference.state),
        "residuals": list(residuals),
    }
