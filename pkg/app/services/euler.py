"""
Euler equations on one subpatch.

Derivatives are taken line by line with FC operators along the active
segments of the subpatch and mapped to physical coordinates with the chain
rule. The artificial viscosity term is ``div(mu grad w)`` for
``w = (rho, rho u, rho v)`` and, in the energy equation, the same operator
applied to ``E`` with its gradient assembled from ``grad rho``,
``grad theta`` and the momentum gradients (``theta = p / rho``).
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from app.core.exceptions import ConfigurationError, InvalidStateError
from app.services.fc_core import differentiate, filter_lines, smear_lines
from app.services.gas import GAMMA, check_state, conservative, energy_from_temperature, primitives
from app.services.operator_cache import InMemoryOperatorCache
from app.services.subpatches import Subpatch


@dataclass(frozen=True)
class BoundaryData:
    """Problem values used by the boundary conditions."""

    inflow: Optional[tuple[float, float, float, float]] = None
    outflow_pressure: float = 1.0


class SubpatchSolver:
    """
    Precomputed geometry and operators of one subpatch.

    Args:
        sp: The subpatch.
        operators: Cache providing FC operators by line length.
        n_f: Fringe depth.
        bc: Inflow state and outflow pressure.
        gamma: Heat-capacity ratio.
    """

    def __init__(
        self,
        sp: Subpatch,
        operators: InMemoryOperatorCache,
        n_f: int,
        bc: BoundaryData = BoundaryData(),
        gamma: float = GAMMA,
    ):
        self.sp = sp
        self.gid = sp.gid
        self.gamma = gamma
        self.bc = bc
        self.h = sp.patch.h
        self.active = sp.active
        self.fringe = sp.fringe_mask(n_f)
        self.interior = self.active & ~self.fringe
        self.metrics = sp.metrics
        s1, s2 = sp.spacing
        self.h_min = np.minimum(s1, s2)
        self.faces = sp.boundary_faces
        self._groups = [
            [(g, operators.get(g.length)) for g in sp.segments(axis)] for axis in (0, 1)
        ]
        for face in self.faces:
            if face.tag == "inflow_dirichlet" and bc.inflow is None:
                raise ConfigurationError("inflow side without an inflow state", subpatch=sp.gid)

    # -- derivatives ----------------------------------------------------------

    def dq(self, f: np.ndarray, axis: int) -> np.ndarray:
        """Derivative along parameter axis ``axis`` of ``f`` shaped ``(..., n1, n2)``."""
        out = np.zeros_like(f)
        line_axis = -2 if axis == 0 else -1
        for group, op in self._groups[axis]:
            idx = (Ellipsis,) + group.index()
            out[idx] = differentiate(op, f[idx], self.h[axis], axis=line_axis)
        return out

    def gradient(self, f: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        q1_x, q1_y, q2_x, q2_y, _ = self.metrics
        d1, d2 = self.dq(f, 0), self.dq(f, 1)
        return q1_x * d1 + q2_x * d2, q1_y * d1 + q2_y * d2

    def divergence(self, fx: np.ndarray, fy: np.ndarray) -> np.ndarray:
        q1_x, q1_y, q2_x, q2_y, _ = self.metrics
        return (
            q1_x * self.dq(fx, 0)
            + q2_x * self.dq(fx, 1)
            + q1_y * self.dq(fy, 0)
            + q2_y * self.dq(fy, 1)
        )

    # -- right-hand side ------------------------------------------------------

    def rhs(self, state: np.ndarray, mu: Optional[np.ndarray] = None, t: float = 0.0) -> np.ndarray:
        """``-div f(e) + div(mu grad w)`` at every active point (zero elsewhere)."""
        check_state(state, self.gamma, where=self.active, subpatch=self.gid, t=t)
        g = self.gamma
        rho, u, v, p = primitives(state, g)
        mx, my, energy = state[1], state[2], state[3]
        fx = np.stack([mx, mx * u + p, my * u, (energy + p) * u])
        fy = np.stack([my, mx * v, my * v + p, (energy + p) * v])
        out = -self.divergence(fx, fy)
        if mu is not None and np.any(mu > 0.0):
            out += self.viscous_term(state, mu)
        out[:, ~self.active] = 0.0
        return out

    def viscous_term(self, state: np.ndarray, mu: np.ndarray) -> np.ndarray:
        g = self.gamma
        rho, mx, my = state[0], state[1], state[2]
        theta = primitives(state, g)[3] / rho
        w = np.stack([rho, mx, my, theta])
        gx, gy = self.gradient(w)
        self._wall_gradients(gx, gy)
        kinetic = (mx * mx + my * my) / (2.0 * rho * rho)
        ex = (theta * gx[0] + rho * gx[3]) / (g - 1.0) + (mx * gx[1] + my * gx[2]) / rho - kinetic * gx[0]
        ey = (theta * gy[0] + rho * gy[3]) / (g - 1.0) + (mx * gy[1] + my * gy[2]) / rho - kinetic * gy[0]
        vx = mu * np.stack([gx[0], gx[1], gx[2], ex])
        vy = mu * np.stack([gy[0], gy[1], gy[2], ey])
        return self.divergence(vx, vy)

    def _wall_gradients(self, gx: np.ndarray, gy: np.ndarray) -> None:
        """Remove normal gradient components at boundary points, per side condition."""
        fx = gx.reshape(4, -1)
        fy = gy.reshape(4, -1)
        for face in self.faces:
            if face.tag in ("slip_wall", "zero_normal_derivative_all"):
                comps = [0, 1, 2, 3]
            elif face.tag == "noslip_adiabatic":
                comps = [0, 3]
            else:
                continue
            pts = face.points
            for c in comps:
                gn = fx[c, pts] * face.nx + fy[c, pts] * face.ny
                fx[c, pts] -= gn * face.nx
                fy[c, pts] -= gn * face.ny

    # -- boundary conditions --------------------------------------------------

    def enforce_bc(self, state: np.ndarray, t: float = 0.0) -> np.ndarray:
        """Impose the side conditions on boundary points in place; returns ``state``."""
        g = self.gamma
        flat = state.reshape(4, -1)
        for face in self.faces:
            pts = face.points
            if face.tag == "inflow_dirichlet":
                flat[:, pts] = conservative(*self.bc.inflow, gamma=g)[:, None]
            elif face.tag == "outflow_pressure":
                rho, mx, my = flat[0, pts], flat[1, pts], flat[2, pts]
                flat[3, pts] = self.bc.outflow_pressure / (g - 1.0) + 0.5 * (mx * mx + my * my) / rho
            elif face.tag == "slip_wall":
                mn = flat[1, pts] * face.nx + flat[2, pts] * face.ny
                rho = flat[0, pts]
                kinetic_old = 0.5 * (flat[1, pts] ** 2 + flat[2, pts] ** 2) / rho
                flat[1, pts] -= mn * face.nx
                flat[2, pts] -= mn * face.ny
                kinetic_new = 0.5 * (flat[1, pts] ** 2 + flat[2, pts] ** 2) / rho
                flat[3, pts] += kinetic_new - kinetic_old
            elif face.tag == "noslip_adiabatic":
                inner = face.inward
                theta_in = _temperature(flat[:, inner], g)
                flat[1, pts] = 0.0
                flat[2, pts] = 0.0
                flat[3, pts] = energy_from_temperature(flat[0, pts], 0.0, 0.0, theta_in, g)
            elif face.tag == "zero_normal_derivative_all":
                flat[:, pts] = flat[:, face.inward]
            elif face.tag == "supersonic_outflow_none":
                continue
            else:
                raise ConfigurationError("unknown boundary condition", tag=face.tag, subpatch=self.gid)
        return state

    # -- time step ------------------------------------------------------------

    def dt_bound(self, state: np.ndarray, mu: Optional[np.ndarray] = None) -> float:
        """``min (S/h + mu/h^2)^-1`` over active points (before the CFL factor)."""
        rho, u, v, p = primitives(state, self.gamma)
        act = self.active
        speed = np.hypot(u, v) + np.sqrt(self.gamma * p / rho)
        h = self.h_min
        rate = speed / h
        if mu is not None:
            rate = rate + mu / (h * h)
        rate = rate[act]
        if not np.all(np.isfinite(rate)):
            raise InvalidStateError("nonfinite wave speed", subpatch=self.gid)
        return float(1.0 / rate.max())

    # -- filtering ------------------------------------------------------------

    def _filtered_variables(self, state: np.ndarray) -> np.ndarray:
        rho = state[0]
        return np.stack([rho, state[1], state[2], primitives(state, self.gamma)[3] / rho])

    def _rebuild(self, w: np.ndarray, state: np.ndarray) -> np.ndarray:
        out = state.copy()
        act = self.active
        out[0][act] = w[0][act]
        out[1][act] = w[1][act]
        out[2][act] = w[2][act]
        out[3][act] = energy_from_temperature(w[0], w[1], w[2], w[3], self.gamma)[act]
        return out

    def filter(self, state: np.ndarray) -> np.ndarray:
        """Per-step spectral filter of ``rho``, momenta and ``theta`` along both directions."""
        w = self._filtered_variables(state)
        for axis in (0, 1):
            line_axis = -2 if axis == 0 else -1
            for group, op in self._groups[axis]:
                idx = (Ellipsis,) + group.index()
                w[idx] = filter_lines(op, w[idx], axis=line_axis)
        return self._rebuild(w, state)

    def smear(self, state: np.ndarray, mask: np.ndarray) -> np.ndarray:
        """Initial-data smearing where ``mask`` (in ``[0, 1]``) is positive."""
        if not np.any(mask > 0.0):
            return state.copy()
        w = self._filtered_variables(state)
        for axis in (0, 1):
            line_axis = -2 if axis == 0 else -1
            for group, op in self._groups[axis]:
                idx = (Ellipsis,) + group.index()
                w[idx] = smear_lines(op, w[idx], mask[group.index()], axis=line_axis)
        return self._rebuild(w, state)


def _temperature(columns: np.ndarray, gamma: float) -> np.ndarray:
    rho, mx, my, energy = columns
    p = (gamma - 1.0) * (energy - 0.5 * (mx * mx + my * my) / rho)
    return p / rho

