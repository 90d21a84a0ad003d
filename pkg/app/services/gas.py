"""
Ideal-gas relations for the conservative state ``(rho, rho u, rho v, E)``.

States are arrays whose first axis holds the four conservative components;
the remaining axes are the grid. The gas constant is one, so the
temperature is ``theta = p / rho``.
"""
from typing import Optional

import numpy as np

from app.core.exceptions import InvalidStateError

GAMMA = 1.4
N_VARS = 4


def pressure(state: np.ndarray, gamma: float = GAMMA) -> np.ndarray:
    rho, mx, my, energy = state
    return (gamma - 1.0) * (energy - 0.5 * (mx * mx + my * my) / rho)


def primitives(state: np.ndarray, gamma: float = GAMMA) -> tuple[np.ndarray, ...]:
    """``(rho, u, v, p)`` of a conservative state."""
    rho = state[0]
    u = state[1] / rho
    v = state[2] / rho
    return rho, u, v, pressure(state, gamma)


def conservative(rho, u, v, p, gamma: float = GAMMA) -> np.ndarray:
    rho, u, v, p = np.broadcast_arrays(*(np.asarray(c, dtype=float) for c in (rho, u, v, p)))
    energy = p / (gamma - 1.0) + 0.5 * rho * (u * u + v * v)
    return np.stack([rho, rho * u, rho * v, energy])


def energy_from_temperature(rho, mx, my, theta, gamma: float = GAMMA) -> np.ndarray:
    """``E = rho theta / (gamma - 1) + |rho u|^2 / (2 rho)``."""
    return rho * theta / (gamma - 1.0) + 0.5 * (mx * mx + my * my) / rho


def sound_speed(rho, p, gamma: float = GAMMA) -> np.ndarray:
    return np.sqrt(gamma * p / rho)


def check_state(
    state: np.ndarray,
    gamma: float = GAMMA,
    where: Optional[np.ndarray] = None,
    **context,
) -> None:
    """
    Raise ``InvalidStateError`` on nonfinite values or nonpositive density/pressure.

    Args:
        state: Conservative state, shape ``(4, ...)``.
        where: Boolean mask of the points to check (all points by default).
        context: Patch/subpatch/time information attached to the error.
    """
    rho = state[0]
    p = pressure(state, gamma)
    bad = ~np.isfinite(state).all(axis=0) | ~(rho > 0.0) | ~(p > 0.0)
    if where is not None:
        bad &= where
    if bad.any():
        index = tuple(int(k) for k in np.argwhere(bad)[0])
        raise InvalidStateError(
            "nonpositive density or pressure",
            index=index,
            rho=float(rho[index]),
            p=float(p[index]),
            count=int(bad.sum()),
            **context,
        )
