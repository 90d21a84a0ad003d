"""
Smoothness classifiers.

A classifier assigns every grid point of a line a class ``tau`` in
``{1, 2, 3, 4}`` (1 = discontinuous, 2 = kink, 3 = rough/oscillatory,
4 = smooth). Nearly flat stencils are class 4 without consulting the model.

Weight file format (little-endian)::

    offset  type            content
    0       4 bytes         magic b"FCWT"
    4       uint32          format version (1)
    8       uint32          activation id (0 = tanh, 1 = relu)
    12      uint32          number of layer sizes L + 1
    16      uint32[L + 1]   layer sizes, input first
    ...     float64[...]    per layer: weights (out x in, row-major), then bias (out)
"""
import struct
from abc import ABC, abstractmethod
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.fft
from loguru import logger

from app.core.config import Settings, settings
from app.core.exceptions import ConfigurationError, UsageError
from app.services.fc_core import FcOperator, build_fc_operator

WEIGHT_MAGIC = b"FCWT"
WEIGHT_VERSION = 1
ACTIVATIONS = {0: "tanh", 1: "relu"}
N_CLASSES = 4
SMOOTH = 4

_HEADER = struct.Struct("<4sIII")


@dataclass
class ClassifierWeights:
    """Fully connected network: hidden layers use ``activation``, the last layer is linear."""

    sizes: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activation: int = 0

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ConfigurationError("unknown activation id", activation=self.activation)
        if len(self.weights) != len(self.sizes) - 1 or len(self.biases) != len(self.weights):
            raise ConfigurationError("layer count does not match the sizes", sizes=self.sizes)
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (self.sizes[k + 1], self.sizes[k]) or b.shape != (self.sizes[k + 1],):
                raise ConfigurationError("layer shape does not match the sizes", layer=k)
        if self.sizes[-1] != N_CLASSES:
            raise ConfigurationError("classifier output must have 4 classes", sizes=self.sizes)


def write_weights(weights: ClassifierWeights, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    chunks = [
        _HEADER.pack(WEIGHT_MAGIC, WEIGHT_VERSION, weights.activation, len(weights.sizes)),
        struct.pack(f"<{len(weights.sizes)}I", *weights.sizes),
    ]
    for w, b in zip(weights.weights, weights.biases):
        chunks.append(np.ascontiguousarray(w, dtype="<f8").tobytes())
        chunks.append(np.ascontiguousarray(b, dtype="<f8").tobytes())
    path.write_bytes(b"".join(chunks))
    logger.info(f"Classifier weights written to {path} (sizes={weights.sizes})")
    return path


def read_weights(path: Path) -> ClassifierWeights:
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError("classifier weight file not found", path=str(path))
    data = path.read_bytes()
    if len(data) < _HEADER.size:
        raise ConfigurationError("truncated classifier weight file", path=str(path))
    magic, version, activation, n_sizes = _HEADER.unpack_from(data, 0)
    if magic != WEIGHT_MAGIC or version != WEIGHT_VERSION:
        raise ConfigurationError(
            "unsupported classifier weight file", path=str(path), version=version
        )
    offset = _HEADER.size
    sizes = list(struct.unpack_from(f"<{n_sizes}I", data, offset))
    offset += 4 * n_sizes
    weights, biases = [], []
    for n_in, n_out in zip(sizes[:-1], sizes[1:]):
        count = n_out * n_in
        if offset + 8 * (count + n_out) > len(data):
            raise ConfigurationError("truncated classifier weight file", path=str(path))
        w = np.frombuffer(data, dtype="<f8", count=count, offset=offset).reshape(n_out, n_in)
        offset += 8 * count
        b = np.frombuffer(data, dtype="<f8", count=n_out, offset=offset)
        offset += 8 * n_out
        weights.append(w.astype(np.float64))
        biases.append(b.astype(np.float64))
    if offset != len(data):
        raise ConfigurationError("trailing bytes in classifier weight file", path=str(path))
    return ClassifierWeights(sizes, weights, biases, activation)


def _window_starts(n: int, width: int) -> np.ndarray:
    return np.clip(np.arange(n) - width // 2, 0, max(n, width) - width)


def _windows(values: np.ndarray, width: int) -> np.ndarray:
    """Clamped sliding windows: ``out[..., i, :]`` is the width-``width`` window around ``i``."""
    n = values.shape[-1]
    if n < width:
        pad = [(0, 0)] * (values.ndim - 1) + [(0, width - n)]
        values = np.pad(values, pad, mode="edge")
    start = _window_starts(n, width)
    return values[..., start[:, None] + np.arange(width)]


def normalize_stencils(stencils: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Affine map of each stencil onto ``[-1, 1]``; returns ``(normalized, range)``."""
    lo = stencils.min(axis=-1, keepdims=True)
    hi = stencils.max(axis=-1, keepdims=True)
    span = hi - lo
    safe = np.where(span > 0.0, span, 1.0)
    return 2.0 * (stencils - lo) / safe - 1.0, span[..., 0]


class SmoothnessClassifier(ABC):
    """
    Per-point smoothness classes along grid lines.

    Args:
        stencil: Odd stencil width used for flatness detection (and by the network).
        flat_tolerance: Stencils whose range is below ``flat_tolerance * scale``
            are smooth; ``scale`` is at least one.
    """

    variant: str = "base"

    def __init__(self, stencil: int = 7, flat_tolerance: float = 1e-3):
        if stencil < 3 or stencil % 2 == 0:
            raise ConfigurationError("stencil width must be odd and >= 3", stencil=stencil)
        self.stencil = stencil
        self.flat_tolerance = flat_tolerance

    def classify_lines(self, values: np.ndarray, scale: Optional[float] = None) -> np.ndarray:
        """Classes for every point of every line (last axis) of ``values``."""
        values = np.asarray(values, dtype=float)
        if not np.all(np.isfinite(values)):
            raise UsageError("classifier input must be finite")
        if scale is None:
            scale = float(np.max(np.abs(values))) if values.size else 1.0
        scale = max(scale, 1.0)
        stencils = _windows(values, self.stencil)
        _, span = normalize_stencils(stencils)
        flat = span <= self.flat_tolerance * scale
        tau = np.full(values.shape, SMOOTH, dtype=np.int8)
        if (~flat).any():
            tau[~flat] = self._classify_points(values, stencils, ~flat)
        return tau

    @abstractmethod
    def _classify_points(
        self, values: np.ndarray, stencils: np.ndarray, mask: np.ndarray
    ) -> np.ndarray:
        """Classes of the points selected by ``mask``."""


class AnnClassifier(SmoothnessClassifier):
    """Fully connected network evaluated with numpy."""

    variant = "ann"

    def __init__(self, weights: ClassifierWeights, flat_tolerance: float = 1e-3):
        super().__init__(weights.sizes[0], flat_tolerance)
        self.weights = weights
        self._act = np.tanh if weights.activation == 0 else (lambda a: np.maximum(a, 0.0))

    @classmethod
    def from_file(cls, path: Path, flat_tolerance: float = 1e-3) -> "AnnClassifier":
        return cls(read_weights(path), flat_tolerance)

    def probabilities(self, normalized: np.ndarray) -> np.ndarray:
        a = np.asarray(normalized, dtype=float)
        layers = list(zip(self.weights.weights, self.weights.biases))
        for w, b in layers[:-1]:
            a = self._act(a @ w.T + b)
        w, b = layers[-1]
        logits = a @ w.T + b
        logits -= logits.max(axis=-1, keepdims=True)
        e = np.exp(logits)
        return e / e.sum(axis=-1, keepdims=True)

    def classify_stencils(self, stencils: np.ndarray) -> np.ndarray:
        """Classes of raw stencils ``(n, w)``; flat stencils are class 4."""
        normalized, span = normalize_stencils(np.asarray(stencils, dtype=float))
        tau = np.full(span.shape, SMOOTH, dtype=np.int8)
        live = span > 0.0
        if live.any():
            tau[live] = np.argmax(self.probabilities(normalized[live]), axis=-1) + 1
        return tau

    def _classify_points(self, values, stencils, mask):
        normalized, _ = normalize_stencils(stencils[mask])
        return (np.argmax(self.probabilities(normalized), axis=-1) + 1).astype(np.int8)


@lru_cache(maxsize=32)
def _window_operator(width: int, n_cont: int) -> FcOperator:
    return build_fc_operator(width, n_cont=n_cont)


class FallbackClassifier(SmoothnessClassifier):
    """
    Deterministic classifier from the decay of windowed FC coefficients.

    Each point's window (``window`` samples, clamped to the line) is continued
    and transformed. The magnitudes ``|c_k|`` of the non-mean modes above
    ``noise_floor`` times the largest one are fitted as
    ``|c_k| ~ (2 sin(pi k / n))^-s`` over the modes from ``band_start`` times
    the highest mode upwards; this is the discrete form of ``k^-s``, so a jump
    gives ``s = 1`` and a kink ``s = 2``. ``thresholds`` (ascending) split the
    exponent into non-decaying (3), jump (1), kink (2) and smooth (4).
    Jump and kink classes are kept only where the point's stencil holds the
    window's largest second difference.
    """

    variant = "fallback"

    def __init__(
        self,
        window: int = 32,
        stencil: int = 7,
        flat_tolerance: float = 1e-3,
        thresholds: tuple[float, float, float] = (0.5, 1.5, 2.5),
        noise_floor: float = 1e-8,
        band_start: float = 0.0,
        n_cont: int = 25,
    ):
        super().__init__(stencil, flat_tolerance)
        if window < 10:
            raise ConfigurationError("fallback window must hold at least 10 points", window=window)
        if list(thresholds) != sorted(thresholds):
            raise ConfigurationError("exponent thresholds must be ascending", thresholds=thresholds)
        if not 0.0 <= band_start < 1.0:
            raise ConfigurationError("band start must lie in [0, 1)", band_start=band_start)
        self.window = window
        self.thresholds = thresholds
        self.noise_floor = noise_floor
        self.band_start = band_start
        self.n_cont = n_cont

    def decay_exponent(self, windows: np.ndarray) -> np.ndarray:
        """Fitted exponent ``s`` per window; ``inf`` when fewer than three modes are above the floor."""
        op = _window_operator(windows.shape[-1], self.n_cont)
        coeffs = np.abs(scipy.fft.rfft(op.extend(windows), axis=-1))[..., 1:]
        k = np.arange(1, coeffs.shape[-1] + 1)
        x = np.log(2.0 * np.sin(np.pi * k / op.n_ext))

        peak = coeffs.max(axis=-1, keepdims=True)
        live = (coeffs > self.noise_floor * peak) & (k >= self.band_start * k[-1])
        y = np.log(np.where(live, coeffs, 1.0))
        m = live.astype(float)

        # least-squares slope of y against x over the live modes of each window
        n = m.sum(axis=-1)
        sx, sy = m @ x, np.sum(m * y, axis=-1)
        sxx, sxy = m @ (x * x), np.sum(m * y * x, axis=-1)
        denom = n * sxx - sx * sx
        ok = (n >= 3) & (denom > 0.0)
        slope = np.divide(n * sxy - sx * sy, denom, out=np.zeros_like(denom), where=ok)
        return np.where(ok, -slope, np.inf)

    def classes_from_exponent(self, exponent: np.ndarray) -> np.ndarray:
        t_flat, t_jump, t_kink = self.thresholds
        return np.select(
            [exponent < t_flat, exponent < t_jump, exponent < t_kink], [3, 1, 2], default=SMOOTH
        ).astype(np.int8)

    def _classify_points(self, values, stencils, mask):
        n = values.shape[-1]
        width = max(min(self.window, n), 10)
        windows = _windows(values, width)[mask]
        tau = self.classes_from_exponent(self.decay_exponent(windows))
        # jumps and kinks stay with the points whose stencil holds the largest second difference
        offset = np.broadcast_to(np.arange(n) - _window_starts(n, width), values.shape)[mask]
        centre = np.argmax(np.abs(np.diff(windows, n=2, axis=-1)), axis=-1) + 1
        tau[(tau <= 2) & (np.abs(centre - offset) > self.stencil // 2)] = SMOOTH
        return tau


def load_classifier(config: Optional[Settings] = None, variant: Optional[str] = None,
                    weights_path: Optional[str] = None) -> SmoothnessClassifier:
    """
    Build the classifier selected by the settings (or the explicit overrides).

    Raises:
        ConfigurationError: For the ann variant without a readable weight file.
    """
    config = config or settings
    variant = variant or config.classifier_variant
    if variant == "ann":
        path = Path(weights_path or config.classifier_weights)
        classifier = AnnClassifier.from_file(path, config.visc_flat_tolerance)
        logger.info(f"Loaded ANN classifier from {path} (sizes={classifier.weights.sizes})")
        return classifier
    if variant == "fallback":
        return FallbackClassifier(
            window=config.fallback_window,
            noise_floor=config.fallback_noise_floor,
            stencil=config.visc_stencil,
            flat_tolerance=config.visc_flat_tolerance,
            n_cont=config.fc_n_cont,
        )
    raise ConfigurationError("unknown classifier variant", variant=variant)
