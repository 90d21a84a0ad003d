"""
Boundary curves and patch mappings.

Curves are parametrized over ``[0, 1]`` and evaluated on arrays. Mappings send
parameter points ``(q1, q2)`` to physical points and provide the forward
Jacobian; the inverse-mapping metrics used by the solver are derived from it.
"""
from abc import ABC, abstractmethod
from typing import Any

import numpy as np

from app.core.exceptions import GeometryError

_FD_STEP = 1e-6


def _rotate_left(vx: np.ndarray, vy: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return -vy, vx


class BoundaryCurve(ABC):
    """Smooth injective map ``[0, 1] -> R^2``."""

    kind: str = "curve"

    @abstractmethod
    def point(self, s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Curve point(s)."""

    @abstractmethod
    def derivative(self, s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """First derivative with respect to the parameter."""

    def second_derivative(self, s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        s = np.asarray(s, dtype=float)
        xp, yp = self.derivative(s + _FD_STEP)
        xm, ym = self.derivative(s - _FD_STEP)
        return (xp - xm) / (2 * _FD_STEP), (yp - ym) / (2 * _FD_STEP)

    def normal(self, s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Unit left normal (tangent rotated by +90 degrees)."""
        tx, ty = self.derivative(s)
        speed = np.hypot(tx, ty)
        nx, ny = _rotate_left(tx, ty)
        return nx / speed, ny / speed

    def normal_derivative(self, s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        tx, ty = self.derivative(s)
        ax, ay = self.second_derivative(s)
        speed = np.hypot(tx, ty)
        along = (tx * ax + ty * ay) / speed**3
        dx = ax / speed - tx * along
        dy = ay / speed - ty * along
        return _rotate_left(dx, dy)

    @abstractmethod
    def to_dict(self) -> dict[str, Any]:
        """Serializable description."""


class LineSegment(BoundaryCurve):
    kind = "segment"

    def __init__(self, start, end):
        self.start = np.asarray(start, dtype=float)
        self.end = np.asarray(end, dtype=float)
        if np.allclose(self.start, self.end):
            raise GeometryError("degenerate segment", start=self.start, end=self.end)

    def point(self, s):
        s = np.asarray(s, dtype=float)
        d = self.end - self.start
        return self.start[0] + s * d[0], self.start[1] + s * d[1]

    def derivative(self, s):
        s = np.asarray(s, dtype=float)
        d = self.end - self.start
        return np.full_like(s, d[0]), np.full_like(s, d[1])

    def second_derivative(self, s):
        s = np.asarray(s, dtype=float)
        return np.zeros_like(s), np.zeros_like(s)

    def to_dict(self):
        return {"kind": self.kind, "start": self.start.tolist(), "end": self.end.tolist()}


class CircularArc(BoundaryCurve):
    """Arc ``c + R (cos t, sin t)``, ``t = theta0 + s (theta1 - theta0)``."""

    kind = "arc"

    def __init__(self, center, radius: float, theta0: float, theta1: float):
        if radius <= 0 or theta0 == theta1:
            raise GeometryError("degenerate arc", radius=radius, theta0=theta0, theta1=theta1)
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)
        self.theta0 = float(theta0)
        self.theta1 = float(theta1)

    def _angle(self, s):
        return self.theta0 + np.asarray(s, dtype=float) * (self.theta1 - self.theta0)

    def point(self, s):
        t = self._angle(s)
        return self.center[0] + self.radius * np.cos(t), self.center[1] + self.radius * np.sin(t)

    def derivative(self, s):
        t = self._angle(s)
        w = (self.theta1 - self.theta0) * self.radius
        return -w * np.sin(t), w * np.cos(t)

    def second_derivative(self, s):
        t = self._angle(s)
        w = (self.theta1 - self.theta0) ** 2 * self.radius
        return -w * np.cos(t), -w * np.sin(t)

    def to_dict(self):
        return {
            "kind": self.kind,
            "center": self.center.tolist(),
            "radius": self.radius,
            "theta0": self.theta0,
            "theta1": self.theta1,
        }


def curve_from_dict(data: dict[str, Any]) -> BoundaryCurve:
    if data["kind"] == LineSegment.kind:
        return LineSegment(data["start"], data["end"])
    if data["kind"] == CircularArc.kind:
        return CircularArc(data["center"], data["radius"], data["theta0"], data["theta1"])
    raise GeometryError("unknown curve kind", kind=data.get("kind"))


class PatchMapping(ABC):
    """Smooth map from a parameter polygon to a physical patch."""

    kind: str = "mapping"

    @abstractmethod
    def map(self, q1: np.ndarray, q2: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Physical coordinates of parameter points."""

    @abstractmethod
    def jacobian(self, q1: np.ndarray, q2: np.ndarray) -> tuple[np.ndarray, ...]:
        """``(x_q1, x_q2, y_q1, y_q2)``."""

    @abstractmethod
    def to_dict(self) -> dict[str, Any]:
        """Serializable description."""

    def determinant(self, q1, q2) -> np.ndarray:
        x1, x2, y1, y2 = self.jacobian(q1, q2)
        return x1 * y2 - x2 * y1

    def metrics(self, q1, q2) -> tuple[np.ndarray, ...]:
        """Inverse-mapping Jacobian ``(q1_x, q1_y, q2_x, q2_y)`` and ``det``."""
        x1, x2, y1, y2 = self.jacobian(q1, q2)
        det = x1 * y2 - x2 * y1
        return y2 / det, -x2 / det, -y1 / det, x1 / det, det


class AffineMapping(PatchMapping):
    """``M(q) = origin + q1 * e1 + q2 * e2``."""

    kind = "affine"

    def __init__(self, origin, e1, e2):
        self.origin = np.asarray(origin, dtype=float)
        self.e1 = np.asarray(e1, dtype=float)
        self.e2 = np.asarray(e2, dtype=float)
        if abs(self.e1[0] * self.e2[1] - self.e1[1] * self.e2[0]) < 1e-14:
            raise GeometryError("affine mapping is singular", e1=self.e1, e2=self.e2)

    @classmethod
    def rectangle(cls, x0: float, x1: float, y0: float, y1: float) -> "AffineMapping":
        return cls((x0, y0), (x1 - x0, 0.0), (0.0, y1 - y0))

    def map(self, q1, q2):
        q1 = np.asarray(q1, dtype=float)
        q2 = np.asarray(q2, dtype=float)
        o, a, b = self.origin, self.e1, self.e2
        return o[0] + q1 * a[0] + q2 * b[0], o[1] + q1 * a[1] + q2 * b[1]

    def jacobian(self, q1, q2):
        shape = np.broadcast(np.asarray(q1), np.asarray(q2)).shape
        a, b = self.e1, self.e2
        return (
            np.full(shape, a[0]),
            np.full(shape, b[0]),
            np.full(shape, a[1]),
            np.full(shape, b[1]),
        )

    def to_dict(self):
        return {
            "kind": self.kind,
            "origin": self.origin.tolist(),
            "e1": self.e1.tolist(),
            "e2": self.e2.tolist(),
        }


class CurveSumMapping(PatchMapping):
    """Corner mapping ``M(q) = lA(q1) + lB(q2) - C``."""

    kind = "curve_sum"

    def __init__(self, curve_a: BoundaryCurve, curve_b: BoundaryCurve, corner):
        self.curve_a = curve_a
        self.curve_b = curve_b
        self.corner = np.asarray(corner, dtype=float)

    def map(self, q1, q2):
        ax, ay = self.curve_a.point(q1)
        bx, by = self.curve_b.point(q2)
        return ax + bx - self.corner[0], ay + by - self.corner[1]

    def jacobian(self, q1, q2):
        q1, q2 = np.broadcast_arrays(np.asarray(q1, dtype=float), np.asarray(q2, dtype=float))
        ax, ay = self.curve_a.derivative(q1)
        bx, by = self.curve_b.derivative(q2)
        return ax, bx, ay, by

    def to_dict(self):
        return {
            "kind": self.kind,
            "curve_a": self.curve_a.to_dict(),
            "curve_b": self.curve_b.to_dict(),
            "corner": self.corner.tolist(),
        }


class NormalExtrusionMapping(PatchMapping):
    """Boundary-layer mapping ``M(q) = l(q1) + side * depth * q2 * n(q1)``."""

    kind = "normal_extrusion"

    def __init__(self, curve: BoundaryCurve, depth: float, side: int = 1):
        if depth <= 0 or side not in (-1, 1):
            raise GeometryError("invalid extrusion", depth=depth, side=side)
        self.curve = curve
        self.depth = float(depth)
        self.side = side

    def map(self, q1, q2):
        q2 = np.asarray(q2, dtype=float)
        px, py = self.curve.point(q1)
        nx, ny = self.curve.normal(q1)
        w = self.side * self.depth * q2
        return px + w * nx, py + w * ny

    def jacobian(self, q1, q2):
        q1, q2 = np.broadcast_arrays(np.asarray(q1, dtype=float), np.asarray(q2, dtype=float))
        tx, ty = self.curve.derivative(q1)
        nx, ny = self.curve.normal(q1)
        dnx, dny = self.curve.normal_derivative(q1)
        w = self.side * self.depth
        return tx + w * q2 * dnx, w * nx, ty + w * q2 * dny, w * ny

    def to_dict(self):
        return {
            "kind": self.kind,
            "curve": self.curve.to_dict(),
            "depth": self.depth,
            "side": self.side,
        }


def mapping_from_dict(data: dict[str, Any]) -> PatchMapping:
    kind = data.get("kind")
    if kind == AffineMapping.kind:
        return AffineMapping(data["origin"], data["e1"], data["e2"])
    if kind == CurveSumMapping.kind:
        return CurveSumMapping(
            curve_from_dict(data["curve_a"]), curve_from_dict(data["curve_b"]), data["corner"]
        )
    if kind == NormalExtrusionMapping.kind:
        return NormalExtrusionMapping(
            curve_from_dict(data["curve"]), data["depth"], int(data["side"])
        )
    raise GeometryError("unknown mapping kind", kind=kind)
