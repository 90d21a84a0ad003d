"""
Post-processing diagnostics: Schlieren values, rasters, shock-angle fits and energy.
"""
from typing import Callable, Optional, Sequence

import numpy as np
from loguru import logger
from scipy.spatial import cKDTree

from app.core.exceptions import DomainError
from app.services.euler import SubpatchSolver
from app.services.subpatches import Subpatch

MIN_FIT_COLUMNS = 5


def density_gradient(solver: SubpatchSolver, state: np.ndarray) -> np.ndarray:
    """Spectral ``|grad rho|`` on the active points of one subpatch."""
    gx, gy = solver.gradient(state[0])
    return np.where(solver.active, np.hypot(gx, gy), 0.0)


def schlieren(
    gradients: dict[int, np.ndarray],
    actives: dict[int, np.ndarray],
    beta: float = 10.0,
) -> dict[int, np.ndarray]:
    """
    ``sigma = exp(-beta (g - min) / (max - min))`` with min/max over all subpatches.

    A zero range gives ``sigma = 1``; inactive points are set to 1.
    """
    values = [gradients[gid][actives[gid]] for gid in sorted(gradients)]
    values = [v for v in values if v.size]
    if not values:
        return {gid: np.ones_like(g) for gid, g in gradients.items()}
    lo = min(float(v.min()) for v in values)
    hi = max(float(v.max()) for v in values)
    out = {}
    for gid in sorted(gradients):
        if hi <= lo:
            sigma = np.ones_like(gradients[gid])
        else:
            scaled = np.clip((gradients[gid] - lo) / (hi - lo), 0.0, 1.0)
            sigma = np.exp(-beta * scaled)
        out[gid] = np.where(actives[gid], sigma, 1.0)
    return out


def raster_grid(
    bounds: tuple[float, float, float, float], width: int
) -> tuple[np.ndarray, np.ndarray]:
    """Pixel-centre coordinates of a raster ``width`` pixels wide with square pixels."""
    x0, x1, y0, y1 = bounds
    height = max(1, int(round(width * (y1 - y0) / (x1 - x0))))
    dx, dy = (x1 - x0) / width, (y1 - y0) / height
    return x0 + dx * (np.arange(width) + 0.5), y0 + dy * (np.arange(height) + 0.5)


def rasterize(
    subpatches: Sequence[Subpatch],
    values: dict[int, np.ndarray],
    bounds: tuple[float, float, float, float],
    width: int = 400,
    fill: float = 1.0,
    domain: Optional[Callable] = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Nearest-grid-point resampling onto a uniform raster.

    Returns ``(xs, ys, image)`` with ``image[row, col]`` and row 0 at the
    top. Pixels outside ``domain`` (when given) or farther than two local
    grid spacings from every grid point get ``fill``.
    """
    px, py, pv, ph = [], [], [], []
    for sp in subpatches:
        act = sp.active
        x, y = sp.physical
        s1, s2 = sp.spacing
        px.append(x[act])
        py.append(y[act])
        pv.append(values[sp.gid][act])
        ph.append(np.maximum(s1, s2)[act])
    points = np.column_stack([np.concatenate(px), np.concatenate(py)])
    vals, spacing = np.concatenate(pv), np.concatenate(ph)
    xs, ys = raster_grid(bounds, width)
    X, Y = np.meshgrid(xs, ys[::-1])
    dist, idx = cKDTree(points).query(np.column_stack([X.ravel(), Y.ravel()]))
    image = vals[idx]
    far = dist > 2.0 * spacing[idx]
    if domain is not None:
        far |= ~domain(X.ravel(), Y.ravel())
    image[far] = fill
    return xs, ys, image.reshape(X.shape)


def fit_shock_angle(
    xs: np.ndarray,
    ys: np.ndarray,
    field: np.ndarray,
    y_min: float,
    x_range: Optional[tuple[float, float]] = None,
    rel_threshold: float = 0.1,
) -> float:
    """
    Angle in degrees of the straight line through per-column maxima of ``field``.

    ``field[k, j]`` belongs to ``(xs[j], ys[k])`` with ``ys`` increasing.
    Only rows with ``y > y_min`` and columns inside ``x_range`` are used; a
    column counts when its maximum exceeds ``rel_threshold`` of the window
    maximum.

    Raises:
        DomainError: If fewer than five columns are usable.
    """
    xs, ys, field = np.asarray(xs), np.asarray(ys), np.asarray(field, dtype=float)
    rows = ys > y_min
    cols = np.ones(xs.shape, dtype=bool)
    if x_range is not None:
        cols = (xs >= x_range[0]) & (xs <= x_range[1])
    window = field[np.ix_(rows, cols)]
    if window.size == 0:
        raise DomainError("empty fit window", y_min=y_min, x_range=x_range)
    finite = np.where(np.isfinite(window), window, -np.inf)
    peak = finite.max(axis=0)
    top = peak.max()
    usable = np.isfinite(peak) & (peak > 0.0) & (peak >= rel_threshold * top)
    if usable.sum() < MIN_FIT_COLUMNS:
        raise DomainError(
            "too few columns for a shock-angle fit", usable=int(usable.sum()), needed=MIN_FIT_COLUMNS
        )
    y_peak = ys[rows][np.argmax(finite, axis=0)][usable]
    slope, _ = np.polyfit(xs[cols][usable], y_peak, 1)
    angle = float(np.degrees(np.arctan(slope)))
    logger.debug(f"Shock-angle fit over {int(usable.sum())} columns: {angle:.3f} deg")
    return angle


def total_energy(
    subpatches: Sequence[Subpatch],
    states: dict[int, np.ndarray],
    windows: dict[int, np.ndarray],
    reference_length: float = 1.0,
) -> float:
    """
    ``(1 / L) integral E dx dy`` with overlaps weighted by the normalized windows.

    Sums in gid order.
    """
    total = 0.0
    for sp in sorted(subpatches, key=lambda s: s.gid):
        total += float(np.sum(windows[sp.gid] * sp.quadrature_weights * states[sp.gid][3]))
    return total / reference_length


def covered_area(subpatches: Sequence[Subpatch], windows: dict[int, np.ndarray]) -> float:
    """Window-weighted quadrature of the constant one."""
    return float(sum(np.sum(windows[sp.gid] * sp.quadrature_weights) for sp in subpatches))
