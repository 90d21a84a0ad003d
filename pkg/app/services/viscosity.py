"""
Artificial viscosity: proxy, smoothness classes, preliminary values and blending.

Per subpatch, the Mach-number proxy is classified along both grid
directions (the smaller class wins), scaled by the wave-speed bound and the
local grid size, and smoothed. The blended viscosity at a point is the
window-weighted average of every subpatch value covering it; values of other
subpatches arrive through a blend plan (see ``comm_plan``).
"""
from typing import Optional, Sequence

import numpy as np
from loguru import logger
from scipy import ndimage

from app.core.exceptions import DecompositionError
from app.services.classifier import SMOOTH, SmoothnessClassifier
from app.services.gas import GAMMA, check_state, primitives
from app.services.subpatches import Subpatch

DEFAULT_WEIGHTS = (1.5, 1.0, 0.25, 0.0)


def evaluate_proxy(state: np.ndarray, gamma: float = GAMMA, where=None, **context) -> np.ndarray:
    """Local Mach number ``|u| sqrt(rho / (gamma p))``."""
    check_state(state, gamma, where=where, **context)
    rho, u, v, p = primitives(state, gamma)
    return np.hypot(u, v) * np.sqrt(rho / (gamma * p))


def mwsb(state: np.ndarray, gamma: float = GAMMA, where=None, **context) -> np.ndarray:
    """Maximum wave-speed bound ``|u| + a``."""
    check_state(state, gamma, where=where, **context)
    rho, u, v, p = primitives(state, gamma)
    return np.hypot(u, v) + np.sqrt(gamma * p / rho)


def classify_field(
    classifier: SmoothnessClassifier, field: np.ndarray, sp: Subpatch
) -> np.ndarray:
    """
    Smoothness classes of a scalar field on ``sp``.

    Every active segment is classified along its own direction; the two
    directions are combined by the minimum. Inactive points get class 4.
    """
    act = sp.active
    scale = float(np.max(np.abs(field[act]))) if act.any() else 1.0
    tau = np.full(sp.shape, SMOOTH, dtype=np.int8)
    for axis in (0, 1):
        for group in sp.segments(axis):
            block = field[group.index()]
            if axis == 0:
                tau_lines = classifier.classify_lines(block.T, scale=scale).T
            else:
                tau_lines = classifier.classify_lines(block, scale=scale)
            idx = group.index()
            tau[idx] = np.minimum(tau[idx], tau_lines)
    return tau


def classify(
    classifier: SmoothnessClassifier, proxy: np.ndarray, sp: Subpatch
) -> np.ndarray:
    return classify_field(classifier, proxy, sp)


def preliminary_viscosity(
    tau: np.ndarray,
    speed: np.ndarray,
    h,
    fringe: Optional[np.ndarray] = None,
    weights: Sequence[float] = DEFAULT_WEIGHTS,
) -> np.ndarray:
    """``c(tau) h S`` with ``c`` indexed by class; zero on ``fringe``."""
    c = np.asarray(weights, dtype=float)
    mu = c[np.asarray(tau, dtype=int) - 1] * h * speed
    if fringe is not None:
        mu = np.where(fringe, 0.0, mu)
    return mu


def cosine_kernel(half_width: int) -> np.ndarray:
    k = np.arange(-half_width, half_width + 1)
    return 0.5 * (1.0 + np.cos(np.pi * k / (half_width + 1)))


def smooth_viscosity(
    mu: np.ndarray, sp: Subpatch, half_width: int, fringe: Optional[np.ndarray] = None
) -> np.ndarray:
    """Normalized cosine-kernel average over active points, re-zeroed on the fringe."""
    if half_width <= 0:
        out = np.where(sp.active, mu, 0.0)
    else:
        k1 = cosine_kernel(half_width)
        kernel = np.outer(k1, k1)
        act = sp.active.astype(float)
        num = ndimage.convolve(np.where(sp.active, mu, 0.0), kernel, mode="constant")
        den = ndimage.convolve(act, kernel, mode="constant")
        out = np.where(sp.active, num / np.where(den > 0.0, den, 1.0), 0.0)
    if fringe is not None:
        out = np.where(fringe, 0.0, out)
    return np.maximum(out, 0.0)


def local_grid_size(sp: Subpatch) -> np.ndarray:
    s1, s2 = sp.spacing
    return np.maximum(s1, s2)


def subpatch_viscosity(
    classifier: SmoothnessClassifier,
    state: np.ndarray,
    sp: Subpatch,
    fringe: np.ndarray,
    gamma: float = GAMMA,
    weights: Sequence[float] = DEFAULT_WEIGHTS,
    smoothing: int = 4,
) -> tuple[np.ndarray, np.ndarray]:
    """Smoothed preliminary viscosity and classes ``(mu_hat, tau)`` of one subpatch."""
    where = sp.active
    proxy = evaluate_proxy(state, gamma, where=where, subpatch=sp.gid)
    speed = mwsb(state, gamma, where=where, subpatch=sp.gid)
    tau = classify(classifier, np.where(where, proxy, 0.0), sp)
    mu_hat = preliminary_viscosity(tau, speed, local_grid_size(sp), fringe, weights)
    return smooth_viscosity(mu_hat, sp, smoothing, fringe), tau


def blend(
    plan,
    windows: dict[int, np.ndarray],
    prelim: dict[int, np.ndarray],
    receivers: Optional[Sequence[int]] = None,
) -> tuple[dict[int, np.ndarray], dict[int, np.ndarray]]:
    """
    Window-weighted average of all preliminary values covering each point.

    Args:
        plan: Blend plan; ``plan.for_receiver(gid)`` yields transfers from
            every other subpatch covering points of ``gid``.
        windows: Unnormalized windows per subpatch gid.
        prelim: Preliminary viscosity per subpatch gid.
        receivers: Gids to evaluate (all windows by default).

    Returns:
        ``(mu, normalized_windows)`` for the receivers.

    Raises:
        DecompositionError: If an active point has no positive window weight.
    """
    receivers = sorted(windows) if receivers is None else receivers
    mu_out: dict[int, np.ndarray] = {}
    w_out: dict[int, np.ndarray] = {}
    for gid in receivers:
        w_self = windows[gid]
        num = (w_self * prelim[gid]).ravel().copy()
        den = w_self.ravel().copy()
        for transfer in plan.for_receiver(gid):
            w_d = windows[transfer.donor]
            w_i = np.maximum(transfer.values(w_d), 0.0)
            m_i = transfer.values(w_d * prelim[transfer.donor])
            num[transfer.recv_idx] += m_i
            den[transfer.recv_idx] += w_i
        active = plan.active(gid).ravel()
        bad = active & ~(den > 0.0)
        if bad.any():
            index = int(np.flatnonzero(bad)[0])
            logger.error(f"No window covers point {index} of subpatch {gid}")
            raise DecompositionError("windows do not cover the point", subpatch=gid, index=index)
        safe = np.where(den > 0.0, den, 1.0)
        shape = w_self.shape
        mu_out[gid] = np.where(active, np.maximum(num / safe, 0.0), 0.0).reshape(shape)
        w_out[gid] = np.where(active, w_self.ravel() / safe, 0.0).reshape(shape)
    return mu_out, w_out


def discontinuity_mask(
    classifier: SmoothnessClassifier,
    state: np.ndarray,
    sp: Subpatch,
    gamma: float = GAMMA,
    half_width: int = 3,
) -> np.ndarray:
    """
    Smearing mask in ``[0, 1]`` for initial data.

    Points where density or pressure is classified discontinuous or kinked
    are dilated by ``half_width`` and smoothed with the cosine kernel.
    """
    rho, _, _, p = primitives(state, gamma)
    act = sp.active
    marked = np.zeros(sp.shape, dtype=bool)
    for field in (rho, p):
        marked |= classify_field(classifier, np.where(act, field, 0.0), sp) <= 2
    marked &= act
    if not marked.any():
        return np.zeros(sp.shape)
    size = 2 * half_width + 1
    marked = ndimage.binary_dilation(marked, structure=np.ones((size, size), dtype=bool)) & act
    k1 = cosine_kernel(half_width)
    kernel = np.outer(k1, k1) / np.outer(k1, k1).max()
    smooth = ndimage.convolve(marked.astype(float), kernel, mode="constant")
    return np.where(act, np.clip(np.maximum(smooth, marked), 0.0, 1.0), 0.0)
