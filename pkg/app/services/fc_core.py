"""
One-dimensional FC-Gram kernel.

A grid function sampled on ``N`` equispaced points of ``[0, 1]`` is extended
by ``n_cont - 1`` samples into a smooth periodic sequence; derivatives and
filters are then applied with real FFTs on the extended line and the result
is restricted back to the original nodes. Every operator works on the last
axis of an array, so whole stacks of grid lines are processed in one call.
"""
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.fft
import scipy.linalg
from loguru import logger

from app.core.exceptions import ConfigurationError, UsageError

GRAM_DEGREE = 2
MATCH_POINTS = GRAM_DEGREE + 1


@dataclass(frozen=True)
class GridLine:
    """Samples ``F_j = F(j*h)`` of one grid line."""

    values: np.ndarray
    h: float

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size < GRAM_DEGREE + 2:
            raise UsageError("grid line needs at least d+2 samples", size=values.size)
        if not np.all(np.isfinite(values)):
            raise UsageError("grid line contains nonfinite values")
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.size


@dataclass(frozen=True, eq=False)
class FcOperator:
    """Precomputed continuation, differentiation and filtering for one line length."""

    n_points: int
    n_cont: int
    period: float
    n_modes: int
    right_blend: np.ndarray
    left_blend: np.ndarray
    filter_profile: np.ndarray
    smear_profile: np.ndarray
    filter_order: int
    filter_alpha: float
    d: int = GRAM_DEGREE
    _symbols: dict = field(default_factory=dict, repr=False)

    @property
    def n_ext(self) -> int:
        return self.n_points + self.n_cont - 1

    @property
    def cont_matrices(self) -> tuple[np.ndarray, np.ndarray]:
        return self.left_blend, self.right_blend

    def extend(self, values: np.ndarray) -> np.ndarray:
        """Append the blend-to-zero continuation along the last axis."""
        m = MATCH_POINTS
        gap = values[..., -m:] @ self.right_blend.T + values[..., :m] @ self.left_blend.T
        return np.concatenate([values, gap], axis=-1)

    def derivative_symbol(self, h: float, order: int) -> np.ndarray:
        key = (float(h), order)
        symbol = self._symbols.get(key)
        if symbol is None:
            k = 2.0 * np.pi * scipy.fft.rfftfreq(self.n_ext, d=h)
            symbol = (1j * k) ** order
            if order % 2 == 1 and self.n_ext % 2 == 0:
                symbol[-1] = 0.0
            symbol.setflags(write=False)
            self._symbols[key] = symbol
        return symbol


@lru_cache(maxsize=None)
def blend_matrices(
    n_cont: int,
    oversampling: int = 20,
    fit_modes: int = 0,
    fit_tolerance: float = 1e-8,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Build the right and left blend-to-zero matrices.

    The right matrix maps the last ``d+1`` samples of a line to the
    ``n_cont - 1`` continuation samples; the left matrix does the same for
    the first ``d+1`` samples. Both only depend on ``n_cont`` and the fit
    settings.

    Args:
        n_cont: Continuation length in grid steps.
        oversampling: Fine samples per grid step in the least-squares fit.
        fit_modes: Trigonometric modes of the fit (0 picks a default).
        fit_tolerance: Largest admissible fit residual.

    Returns:
        Tuple ``(right_blend, left_blend)``, each of shape ``(n_cont-1, d+1)``.
    """
    m = MATCH_POINTS
    span = 2 * (m - 1) + n_cont
    period = 2.0 * span
    modes = fit_modes or n_cont // 2 + 3

    nodes = np.arange(m, dtype=float)
    vander = np.vander(nodes, m, increasing=True)
    q_mat, r_mat = np.linalg.qr(vander)
    r_inv = np.linalg.inv(r_mat)

    fine = np.linspace(0.0, m - 1.0, (m - 1) * oversampling + 1)
    zero = span - fine[::-1]
    gap = np.arange(m, m + n_cont - 1, dtype=float)

    # Constant channel: w(t) = 1/2 + odd part about span/2, so that the left and
    # right blends of a constant add up to the constant itself.
    j = np.arange(1, modes + 1)
    odd_fine = np.sin(np.pi * np.outer(fine - span / 2.0, j) / span)
    odd_coeffs, *_ = scipy.linalg.lstsq(odd_fine, np.full(fine.size, 0.5), cond=1e-14)
    weight_residual = np.max(np.abs(odd_fine @ odd_coeffs - 0.5))
    weight_gap = 0.5 + np.sin(np.pi * np.outer(gap - span / 2.0, j) / span) @ odd_coeffs

    # Remaining Gram polynomials: full trigonometric fit, P_k on the matching
    # interval and zero on the far interval.
    def trig_basis(t: np.ndarray) -> np.ndarray:
        arg = 2.0 * np.pi * np.outer(t, j) / period
        return np.hstack([np.ones((t.size, 1)), np.cos(arg), np.sin(arg)])

    gram_fine = np.vander(fine, m, increasing=True) @ r_inv
    system = np.vstack([trig_basis(fine), trig_basis(zero)])
    targets = np.vstack([gram_fine[:, 1:], np.zeros((zero.size, m - 1))])
    coeffs, *_ = scipy.linalg.lstsq(system, targets, cond=1e-14)
    fit_residual = np.max(np.abs(system @ coeffs - targets))

    residual = max(weight_residual, fit_residual)
    if not np.isfinite(residual) or residual > fit_tolerance:
        logger.error(f"FC blend fit residual {residual:.3e} exceeds {fit_tolerance:.1e}")
        raise ConfigurationError(
            "FC-Gram blend fit did not converge",
            n_cont=n_cont,
            residual=float(residual),
            modes=modes,
        )

    blends = np.empty((gap.size, m))
    blends[:, 0] = (r_inv[0, 0] * weight_gap)
    blends[:, 1:] = trig_basis(gap) @ coeffs

    right = blends @ q_mat.T
    left = (blends[::-1] @ q_mat.T)[:, ::-1]
    logger.debug(
        f"FC blend matrices built: n_cont={n_cont}, modes={modes}, residual={residual:.2e}"
    )
    right.setflags(write=False)
    left.setflags(write=False)
    return right, left


def _profile(n_ext: int, n_modes: int, alpha: float, order: int) -> np.ndarray:
    k = np.arange(n_ext // 2 + 1, dtype=float)
    profile = np.exp(-alpha * (k / n_modes) ** order)
    profile.setflags(write=False)
    return profile


def build_fc_operator(
    n_points: int,
    n_cont: int = 25,
    filter_order: int = 14,
    filter_alpha: float = -np.log(1e-10),
    smear_order: int = 4,
    oversampling: int = 20,
    fit_modes: int = 0,
    fit_tolerance: float = 1e-8,
) -> FcOperator:
    """
    Build an immutable FC operator for lines of ``n_points`` samples.

    Raises:
        ConfigurationError: For line lengths below 10, ``n_cont`` below 4 or
            odd filter orders.
    """
    if n_points < 10 or n_cont < 4:
        raise ConfigurationError(
            "FC operator needs n_points >= 10 and n_cont >= 4",
            n_points=n_points,
            n_cont=n_cont,
        )
    if filter_order <= 0 or smear_order <= 0 or filter_order % 2 or smear_order % 2:
        raise ConfigurationError(
            "filter orders must be positive and even",
            filter_order=filter_order,
            smear_order=smear_order,
        )
    right, left = blend_matrices(n_cont, oversampling, fit_modes, fit_tolerance)
    h = 1.0 / (n_points - 1)
    n_ext = n_points + n_cont - 1
    n_modes = (n_points + n_cont) // 2
    return FcOperator(
        n_points=n_points,
        n_cont=n_cont,
        period=(n_points - 1 + n_cont) * h,
        n_modes=n_modes,
        right_blend=right,
        left_blend=left,
        filter_profile=_profile(n_ext, n_modes, filter_alpha, filter_order),
        smear_profile=_profile(n_ext, n_modes, filter_alpha, smear_order),
        filter_order=filter_order,
        filter_alpha=filter_alpha,
    )


def _check_length(op: FcOperator, size: int) -> None:
    if size != op.n_points:
        raise UsageError(
            "line length does not match the operator", expected=op.n_points, got=size
        )


def differentiate(
    op: FcOperator, values: np.ndarray, h: float, order: int = 1, axis: int = -1
) -> np.ndarray:
    """Spectral derivative of every line of ``values`` along ``axis``."""
    if order not in (1, 2):
        raise UsageError("derivative order must be 1 or 2", order=order)
    lines = np.moveaxis(np.asarray(values, dtype=float), axis, -1)
    _check_length(op, lines.shape[-1])
    coeffs = scipy.fft.rfft(op.extend(lines), axis=-1)
    coeffs *= op.derivative_symbol(h, order)
    out = scipy.fft.irfft(coeffs, n=op.n_ext, axis=-1)[..., : op.n_points]
    return np.moveaxis(out, -1, axis)


def filter_lines(
    op: FcOperator, values: np.ndarray, axis: int = -1, profile: np.ndarray | None = None
) -> np.ndarray:
    """Multiply the continuation's Fourier coefficients by ``profile``."""
    lines = np.moveaxis(np.asarray(values, dtype=float), axis, -1)
    _check_length(op, lines.shape[-1])
    coeffs = scipy.fft.rfft(op.extend(lines), axis=-1)
    coeffs *= op.filter_profile if profile is None else profile
    out = scipy.fft.irfft(coeffs, n=op.n_ext, axis=-1)[..., : op.n_points]
    return np.moveaxis(out, -1, axis)


def reconstruct(op: FcOperator, values: np.ndarray) -> np.ndarray:
    """Trigonometric interpolant of the continued line, restricted to the nodes."""
    lines = np.asarray(values, dtype=float)
    _check_length(op, lines.shape[-1])
    ext = op.extend(lines)
    return scipy.fft.irfft(scipy.fft.rfft(ext, axis=-1), n=op.n_ext, axis=-1)[..., : op.n_points]


def continuation_coefficients(op: FcOperator, line: GridLine) -> np.ndarray:
    """Complex Fourier coefficients of the continued line (rfft ordering)."""
    _check_length(op, len(line))
    return scipy.fft.rfft(op.extend(line.values)) / op.n_ext


def fc_derivative(op: FcOperator, line: GridLine, order: int = 1) -> GridLine:
    """Derivative of ``line`` at its own nodes."""
    return GridLine(differentiate(op, line.values, line.h, order), line.h)


def apply_filter(op: FcOperator, line: GridLine) -> GridLine:
    """Per-step exponential filter."""
    return GridLine(filter_lines(op, line.values), line.h)


def smear_initial_data(op: FcOperator, line: GridLine, mask: np.ndarray) -> GridLine:
    """Blend the strongly filtered line in where ``mask`` is nonzero."""
    mask = np.asarray(mask, dtype=float)
    if mask.shape != line.values.shape:
        raise UsageError("mask must match the line", mask=mask.shape, line=line.values.shape)
    if np.any(mask < 0.0) or np.any(mask > 1.0):
        raise UsageError("mask values must lie in [0, 1]")
    smeared = filter_lines(op, line.values, profile=op.smear_profile)
    return GridLine(mask * smeared + (1.0 - mask) * line.values, line.h)


def smear_lines(op: FcOperator, values: np.ndarray, mask: np.ndarray, axis: int = -1) -> np.ndarray:
    """Array form of :func:`smear_initial_data`."""
    smeared = filter_lines(op, values, axis=axis, profile=op.smear_profile)
    return mask * smeared + (1.0 - mask) * values


__all__ = [
    "GRAM_DEGREE",
    "GridLine",
    "FcOperator",
    "blend_matrices",
    "build_fc_operator",
    "differentiate",
    "filter_lines",
    "reconstruct",
    "continuation_coefficients",
    "fc_derivative",
    "apply_filter",
    "smear_initial_data",
    "smear_lines",
]
