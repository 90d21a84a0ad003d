"""
Scaling metrics.

``S = N_C T 1e6 / (4 N steps)`` is the CPU time per grid point and stage in
microseconds. At a fixed point count ``E^s = T_S(N0_C) N0_C / (T_S(N_C) N_C)``;
when ``N`` grows with ``N_C``, ``E^w = T_S(N0_C) / T_S(N_C)``. Both also
follow from ``S`` alone (``E = S_0 / S``), which is the identity checked by
``metric_identity_error``.
"""
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional, Sequence

from loguru import logger

from app.core.exceptions import UsageError

STAGES = 4


@dataclass
class ScalingRecord:
    n_points: int
    workers: int
    wall_time: float
    steps: int
    speed: float = 0.0
    strong_efficiency: Optional[float] = None
    weak_efficiency: Optional[float] = None

    @property
    def time_per_step(self) -> float:
        return self.wall_time / self.steps


def cpu_speed(n_points: int, workers: int, wall_time: float, steps: int) -> float:
    """``S`` in microseconds per point per stage."""
    if n_points <= 0 or steps <= 0:
        raise UsageError("speed needs positive point and step counts", n_points=n_points, steps=steps)
    return workers * wall_time * 1e6 / (STAGES * n_points * steps)


def strong_efficiency(t0: float, workers0: int, t: float, workers: int) -> float:
    return t0 * workers0 / (t * workers)


def weak_efficiency(t0: float, t: float) -> float:
    return t0 / t


def efficiency_from_speed(speed0: float, speed: float) -> float:
    return speed0 / speed


def scaling_metrics(records: Sequence[ScalingRecord]) -> list[ScalingRecord]:
    """
    Fill ``speed`` and the efficiencies relative to the first record.

    Records with the same point count as the first get a strong efficiency;
    records whose points per worker match the first get a weak efficiency.

    Raises:
        UsageError: With fewer than two records.
    """
    if len(records) < 2:
        raise UsageError("scaling metrics need at least two timed runs", runs=len(records))
    base = records[0]
    t0 = base.time_per_step
    out = []
    for rec in records:
        rec = ScalingRecord(rec.n_points, rec.workers, rec.wall_time, rec.steps)
        rec.speed = cpu_speed(rec.n_points, rec.workers, rec.wall_time, rec.steps)
        if rec.n_points == base.n_points:
            rec.strong_efficiency = strong_efficiency(t0, base.workers, rec.time_per_step, rec.workers)
        if rec.n_points * base.workers == base.n_points * rec.workers:
            rec.weak_efficiency = weak_efficiency(t0, rec.time_per_step)
        out.append(rec)
    logger.info(f"Scaling metrics for {len(out)} runs (base N={base.n_points}, N_C={base.workers})")
    return out


def metric_identity_error(records: Sequence[ScalingRecord]) -> float:
    """Largest difference between efficiencies computed from times and from ``S``."""
    base = records[0]
    worst = 0.0
    for rec in records:
        from_speed = efficiency_from_speed(base.speed, rec.speed)
        for value in (rec.strong_efficiency, rec.weak_efficiency):
            if value is not None:
                worst = max(worst, abs(value - from_speed))
    return worst


def write_scaling_csv(path: Path, records: Sequence[ScalingRecord]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    def fmt(value):
        return "" if value is None else f"{value:.6g}"

    with path.open("w") as fh:
        fh.write("N,N_C,T_S,S,E_s,E_w\n")
        for rec in records:
            fh.write(
                f"{rec.n_points},{rec.workers},{rec.time_per_step:.6g},{rec.speed:.6g},"
                f"{fmt(rec.strong_efficiency)},{fmt(rec.weak_efficiency)}\n"
            )
    return path


def scaling_markdown(records: Sequence[ScalingRecord], title: str = "Scaling") -> str:
    def pct(value):
        return "-" if value is None else f"{100.0 * value:.0f}%"

    lines = [
        f"## {title}",
        "",
        "| N | N_C | T_S (s/step) | S | E^s | E^w |",
        "|---|---|---|---|---|---|",
    ]
    for rec in records:
        lines.append(
            f"| {rec.n_points:,} | {rec.workers} | {rec.time_per_step:.4g} | {rec.speed:.3g} "
            f"| {pct(rec.strong_efficiency)} | {pct(rec.weak_efficiency)} |"
        )
    return "\n".join(lines) + "\n"


def records_to_dicts(records: Sequence[ScalingRecord]) -> list[dict]:
    return [asdict(r) for r in records]
