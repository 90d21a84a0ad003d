"""
Validation oracles.

Exact one-dimensional Riemann solutions, the weak and strong oblique-shock
angles behind a wedge, and a normal-shock evaluator coded from the jump
conditions independently of ``problems.make_shock_ic``.
"""
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np
from loguru import logger
from scipy.optimize import brentq, minimize_scalar

from app.core.exceptions import DomainError, UsageError
from app.services.gas import GAMMA

PRESSURE_TOLERANCE = 1e-12


# -- exact Riemann solver -------------------------------------------------------


@dataclass
class RiemannSolution:
    x: np.ndarray
    rho: np.ndarray
    u: np.ndarray
    p: np.ndarray
    p_star: float
    u_star: float
    rho_star_left: float
    rho_star_right: float
    shock_positions: list[float]
    wave_positions: list[float]

    def to_dict(self) -> dict:
        out = asdict(self)
        for key in ("x", "rho", "u", "p"):
            out[key] = out[key].tolist()
        return out


def _check_primitive(state: Sequence[float], side: str) -> tuple[float, float, float]:
    if len(state) != 3:
        raise UsageError("a 1D state is (rho, u, p)", side=side, state=list(state))
    rho, u, p = (float(c) for c in state)
    if not (rho > 0.0 and p > 0.0):
        raise UsageError("density and pressure must be positive", side=side, rho=rho, p=p)
    return rho, u, p


def _wave_function(p, rho, pk, ak, gamma):
    """Velocity change across a left or right wave reaching pressure ``p``."""
    if p > pk:
        a = 2.0 / ((gamma + 1.0) * rho)
        b = (gamma - 1.0) / (gamma + 1.0) * pk
        return (p - pk) * np.sqrt(a / (p + b))
    return 2.0 * ak / (gamma - 1.0) * ((p / pk) ** ((gamma - 1.0) / (2.0 * gamma)) - 1.0)


def star_state(left, right, gamma: float = GAMMA) -> tuple[float, float]:
    """
    Pressure and velocity between the two nonlinear waves.

    Raises:
        DomainError: If the states generate a vacuum.
    """
    rl, ul, pl = _check_primitive(left, "left")
    rr, ur, pr = _check_primitive(right, "right")
    al, ar = np.sqrt(gamma * pl / rl), np.sqrt(gamma * pr / rr)

    def f(p):
        return _wave_function(p, rl, pl, al, gamma) + _wave_function(p, rr, pr, ar, gamma) + ur - ul

    if 2.0 * (al + ar) / (gamma - 1.0) <= ur - ul:
        raise DomainError("states generate a vacuum", left=list(left), right=list(right))
    lo = 1e-14 * min(pl, pr)
    hi = max(pl, pr)
    while f(hi) < 0.0:
        hi *= 2.0
    p_star = brentq(f, lo, hi, xtol=PRESSURE_TOLERANCE * hi, rtol=4 * np.finfo(float).eps, maxiter=500)
    u_star = 0.5 * (ul + ur) + 0.5 * (
        _wave_function(p_star, rr, pr, ar, gamma) - _wave_function(p_star, rl, pl, al, gamma)
    )
    return float(p_star), float(u_star)


def exact_riemann_1d(
    left: Sequence[float],
    right: Sequence[float],
    t: float,
    x: np.ndarray,
    x0: float = 0.5,
    gamma: float = GAMMA,
) -> RiemannSolution:
    """
    Sample the exact solution of the Riemann problem with initial jump at ``x0``.

    ``left`` and ``right`` are primitive ``(rho, u, p)`` triples; ``t = 0``
    returns the initial data.
    """
    rl, ul, pl = _check_primitive(left, "left")
    rr, ur, pr = _check_primitive(right, "right")
    x = np.asarray(x, dtype=float)
    p_star, u_star = star_state(left, right, gamma)
    al, ar = np.sqrt(gamma * pl / rl), np.sqrt(gamma * pr / rr)
    gm = (gamma - 1.0) / (gamma + 1.0)

    def star_density(rho, pk):
        if p_star > pk:
            ratio = p_star / pk
            return rho * (ratio + gm) / (gm * ratio + 1.0)
        return rho * (p_star / pk) ** (1.0 / gamma)

    rsl, rsr = star_density(rl, pl), star_density(rr, pr)
    rho = np.where(x < x0, rl, rr).astype(float)
    u = np.where(x < x0, ul, ur).astype(float)
    p = np.where(x < x0, pl, pr).astype(float)
    shocks: list[float] = []
    waves: list[float] = []
    if t <= 0.0:
        return RiemannSolution(x, rho, u, p, p_star, u_star, rsl, rsr, shocks, sorted(waves))

    xi = (x - x0) / t
    waves.append(float(x0 + u_star * t))
    # left of the contact
    if p_star > pl:
        sl = ul - al * np.sqrt((gamma + 1.0) / (2.0 * gamma) * p_star / pl + (gamma - 1.0) / (2.0 * gamma))
        shocks.append(float(x0 + sl * t))
        waves.append(shocks[-1])
        region = (xi >= sl) & (xi < u_star)
        rho[region], u[region], p[region] = rsl, u_star, p_star
    else:
        a_star = al * (p_star / pl) ** ((gamma - 1.0) / (2.0 * gamma))
        head, tail = ul - al, u_star - a_star
        waves += [float(x0 + head * t), float(x0 + tail * t)]
        fan = (xi >= head) & (xi < tail)
        c = 2.0 / (gamma + 1.0) + (gamma - 1.0) / ((gamma + 1.0) * al) * (ul - xi[fan])
        rho[fan] = rl * c ** (2.0 / (gamma - 1.0))
        u[fan] = 2.0 / (gamma + 1.0) * (al + 0.5 * (gamma - 1.0) * ul + xi[fan])
        p[fan] = pl * c ** (2.0 * gamma / (gamma - 1.0))
        region = (xi >= tail) & (xi < u_star)
        rho[region], u[region], p[region] = rsl, u_star, p_star
    # right of the contact
    if p_star > pr:
        sr = ur + ar * np.sqrt((gamma + 1.0) / (2.0 * gamma) * p_star / pr + (gamma - 1.0) / (2.0 * gamma))
        shocks.append(float(x0 + sr * t))
        waves.append(shocks[-1])
        region = (xi >= u_star) & (xi < sr)
        rho[region], u[region], p[region] = rsr, u_star, p_star
    else:
        a_star = ar * (p_star / pr) ** ((gamma - 1.0) / (2.0 * gamma))
        head, tail = ur + ar, u_star + a_star
        waves += [float(x0 + tail * t), float(x0 + head * t)]
        fan = (xi > tail) & (xi <= head)
        c = 2.0 / (gamma + 1.0) - (gamma - 1.0) / ((gamma + 1.0) * ar) * (ur - xi[fan])
        rho[fan] = rr * c ** (2.0 / (gamma - 1.0))
        u[fan] = 2.0 / (gamma + 1.0) * (-ar + 0.5 * (gamma - 1.0) * ur + xi[fan])
        p[fan] = pr * c ** (2.0 * gamma / (gamma - 1.0))
        region = (xi >= u_star) & (xi <= tail)
        rho[region], u[region], p[region] = rsr, u_star, p_star
    return RiemannSolution(x, rho, u, p, p_star, u_star, rsl, rsr, shocks, sorted(waves))


# -- normal and oblique shocks ----------------------------------------------------


@dataclass
class NormalShock:
    """Post-shock state behind a shock moving at ``speed`` into ``ambient`` at rest."""

    mach: float
    speed: float
    pressure_ratio: float
    rho: float
    u: float
    p: float

    @property
    def state(self) -> tuple[float, float, float, float]:
        return (self.rho, self.u, 0.0, self.p)


def normal_shock(mach: float, ambient=(1.4, 0.0, 0.0, 1.0), gamma: float = GAMMA) -> NormalShock:
    """
    Solve the jump conditions for the pressure ratio along the shock Hugoniot.

    The shock speed ``M a`` fixes the pressure ratio through
    ``s^2 = (p2 - p1) / (rho1 (1 - rho1 / rho2))`` with ``rho2 / rho1`` taken
    from the Hugoniot curve.
    """
    if not mach > 1.0:
        raise UsageError("a shock needs a Mach number above one", mach=mach)
    rho1, _, _, p1 = ambient
    speed = mach * np.sqrt(gamma * p1 / rho1)
    k = (gamma + 1.0) / (gamma - 1.0)

    def density_ratio(z):
        return (1.0 + k * z) / (k + z)

    def residual(z):
        return p1 * (z - 1.0) - rho1 * speed * speed * (1.0 - 1.0 / density_ratio(z))

    hi = 2.0
    while residual(hi) < 0.0:
        hi *= 2.0
    z = brentq(residual, 1.0 + 1e-12, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    rho2 = rho1 * density_ratio(z)
    u2 = speed * (1.0 - rho1 / rho2)
    return NormalShock(mach, speed, z, rho2, u2, z * p1)


def jump_residuals(
    left, right, speed: float, gamma: float = GAMMA
) -> tuple[float, float, float]:
    """Relative mass, momentum and energy flux jumps in the frame of a shock moving at ``speed``."""
    out = []
    fluxes = []
    for rho, u, v, p in (left, right):
        energy = p / (gamma - 1.0) + 0.5 * rho * (u * u + v * v)
        w = u - speed
        fluxes.append((rho * w, rho * u * w + p, energy * w + p * u))
    for (fl, fr) in zip(*fluxes):
        scale = max(abs(fl), abs(fr), 1.0)
        out.append(abs(fl - fr) / scale)
    return tuple(out)


@dataclass
class ObliqueShock:
    """Shock angles in degrees; zero deflection gives the Mach angle and a normal shock."""

    mach: float
    wedge_angle: float
    weak: float
    strong: float
    max_deflection: float
    mach_angle: float


def _tan_deflection(beta, mach, gamma):
    m2 = mach * mach
    return 2.0 / np.tan(beta) * (m2 * np.sin(beta) ** 2 - 1.0) / (m2 * (gamma + np.cos(2.0 * beta)) + 2.0)


def oblique_shock(mach: float, wedge_angle: float, gamma: float = GAMMA) -> ObliqueShock:
    """
    Attached shock angles for a symmetric wedge of full angle ``wedge_angle`` (degrees).

    Raises:
        UsageError: If ``mach <= 1`` or the angle is negative.
        DomainError: If the half-angle exceeds the maximum deflection (detached shock).
    """
    if not mach > 1.0:
        raise UsageError("oblique shocks need supersonic flow", mach=mach)
    if wedge_angle < 0.0:
        raise UsageError("wedge angle must be non-negative", wedge_angle=wedge_angle)
    mu = float(np.arcsin(1.0 / mach))
    best = minimize_scalar(
        lambda b: -_tan_deflection(b, mach, gamma),
        bounds=(mu, 0.5 * np.pi),
        method="bounded",
        options={"xatol": 1e-12},
    )
    beta_max = float(best.x)
    max_deflection = float(np.degrees(np.arctan(_tan_deflection(beta_max, mach, gamma))))
    target = np.tan(np.radians(0.5 * wedge_angle))
    if 0.5 * wedge_angle > max_deflection:
        logger.error(f"Detached shock: half-angle {0.5 * wedge_angle} > {max_deflection:.3f} at M={mach}")
        raise DomainError(
            "wedge half-angle exceeds the maximum deflection",
            mach=mach,
            wedge_angle=wedge_angle,
            max_deflection=max_deflection,
        )
    if target == 0.0:
        weak, strong = mu, 0.5 * np.pi
    else:

        def g(b):
            return _tan_deflection(b, mach, gamma) - target

        weak = brentq(g, mu, beta_max, xtol=1e-14)
        strong = brentq(g, beta_max, 0.5 * np.pi, xtol=1e-14)
    return ObliqueShock(
        mach=mach,
        wedge_angle=wedge_angle,
        weak=float(np.degrees(weak)),
        strong=float(np.degrees(strong)),
        max_deflection=max_deflection,
        mach_angle=float(np.degrees(mu)),
    )


def oblique_shock_angle(mach: float, wedge_angle: float, gamma: float = GAMMA) -> float:
    """Weak-branch shock angle in degrees."""
    return oblique_shock(mach, wedge_angle, gamma).weak
