"""
Run driver and scaling benchmark.

The master owns the conservative states of every subpatch. Each step it
asks the workers for the preliminary viscosity, blends it, filters, fixes
boundary and fringe values, takes the global time step and advances with
SSPRK(5,4); after every stage boundary conditions and the fringe exchange
run on the master in a fixed order.
"""
import time
from datetime import datetime
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from loguru import logger

from app.core.config import Settings
from app.core.exceptions import SolverError, UsageError
from app.core.logger import add_run_log, remove_run_log
from app.models.run import RunConfig, RunResult
from app.services.comm_plan import assign_ranks, exchange
from app.services.diagnostics import rasterize, schlieren, total_energy
from app.services.scaling import (
    ScalingRecord,
    records_to_dicts,
    scaling_markdown,
    scaling_metrics,
    write_scaling_csv,
)
from app.services.solver_context import SolverContext, build_context, run_settings
from app.services.time_stepping import ssprk54_step
from app.services.transport import Transport, make_transport
from app.services.writers import write_energy_csv, write_fields_csv, write_manifest, write_pgm


def domain_bounds(context: SolverContext) -> tuple[float, float, float, float]:
    """Bounding box of all active grid points."""
    xs, ys = [], []
    for sp in context.dec.subpatches:
        x, y = sp.physical
        xs.append(x[sp.active])
        ys.append(y[sp.active])
    x, y = np.concatenate(xs), np.concatenate(ys)
    return float(x.min()), float(x.max()), float(y.min()), float(y.max())


class Simulation:
    """
    One run in progress.

    Args:
        context: Replicated solver context (master copy).
        transport: Workers executing the per-subpatch tasks.
        run_dir: Directory receiving the outputs.
    """

    def __init__(self, context: SolverContext, transport: Transport, run_dir: Path):
        self.context = context
        self.transport = transport
        self.run_dir = run_dir
        self.cfg = context.settings
        self.config = context.config
        self.problem = context.problem
        self.t = 0.0
        self.step = 0
        self.states: dict[int, np.ndarray] = {}
        self.mu: dict[int, np.ndarray] = {}
        self.tau: dict[int, np.ndarray] = {}
        self.normalized_windows: dict[int, np.ndarray] = {}
        self.energy: list[tuple[int, float, float]] = []
        self.files: list[str] = []

    @property
    def t_end(self) -> float:
        return self.config.t_end if self.config.t_end is not None else self.problem.t_end

    @property
    def cfl(self) -> float:
        if self.config.cfl is not None:
            return self.config.cfl
        return self.problem.cfl_for(self.context.dec, self.cfg)

    def initialize(self) -> None:
        for sp in self.context.dec.subpatches:
            x, y = sp.physical
            self.states[sp.gid] = np.ascontiguousarray(self.problem.initial_state(x, y), dtype=float)
        self.fix_boundaries(self.states, 0.0)
        self.update_viscosity()
        self.record_energy()

    def fix_boundaries(self, states: dict[int, np.ndarray], t: float) -> dict[int, np.ndarray]:
        for gid in sorted(states):
            states[gid] = np.ascontiguousarray(self.context.solvers[gid].enforce_bc(states[gid], t))
        return exchange(self.context.plan, states)

    def update_viscosity(self) -> None:
        prelim = self.transport.run("viscosity", {"states": self.states})
        self.tau = {gid: tau for gid, (_, tau) in prelim.items()}
        blended = self.transport.run(
            "blend", {"prelim": {gid: mu_hat for gid, (mu_hat, _) in prelim.items()}}
        )
        self.mu = {gid: mu for gid, (mu, _) in blended.items()}
        if not self.normalized_windows:
            self.normalized_windows = {gid: w for gid, (_, w) in blended.items()}

    def record_energy(self) -> None:
        energy = total_energy(
            self.context.dec.subpatches,
            self.states,
            self.normalized_windows,
            self.problem.energy_length,
        )
        self.energy.append((self.step, self.t, energy))

    def time_step(self) -> float:
        bounds = self.transport.run("dt", {"states": self.states, "mu": self.mu})
        dt = self.cfl * min(bounds[gid] for gid in sorted(bounds))
        return min(dt, self.t_end - self.t)

    def advance(self) -> float:
        """One full time step; returns ``dt``."""
        self.update_viscosity()
        task = "smear" if self.step == 0 else "filter"
        self.states = {
            gid: np.ascontiguousarray(s)
            for gid, s in self.transport.run(task, {"states": self.states}).items()
        }
        self.fix_boundaries(self.states, self.t)
        dt = self.time_step()
        if not dt > 0.0:
            raise SolverError("nonpositive time step", dt=dt)

        def rhs(states, t):
            return self.transport.run("rhs", {"states": states, "mu": self.mu, "t": t})

        self.states = ssprk54_step(self.states, self.t, dt, rhs, self.fix_boundaries)
        self.t += dt
        self.step += 1
        self.record_energy()
        return dt

    def finished(self) -> bool:
        if self.config.max_steps is not None and self.step >= self.config.max_steps:
            return True
        return self.t >= self.t_end * (1.0 - 1e-12)

    def write_output(self) -> None:
        step_dir = self.run_dir / f"step_{self.step:06d}"
        dec = self.context.dec
        if self.config.write_fields:
            for sp in dec.subpatches:
                path = write_fields_csv(
                    step_dir / f"subpatch_{sp.gid:04d}.csv",
                    sp,
                    self.states[sp.gid],
                    self.mu.get(sp.gid),
                    self.tau.get(sp.gid),
                    self.cfg.gamma,
                )
                self.files.append(str(path.relative_to(self.run_dir)))
        if self.config.write_schlieren:
            gradients = self.transport.run("gradient", {"states": self.states})
            actives = {gid: solver.active for gid, solver in self.context.solvers.items()}
            sigma = schlieren(gradients, actives, self.cfg.schlieren_beta)
            _, _, image = rasterize(
                dec.subpatches,
                sigma,
                domain_bounds(self.context),
                self.config.raster_width,
                domain=dec.domain,
            )
            path = write_pgm(step_dir / "schlieren.pgm", image)
            self.files.append(str(path.relative_to(self.run_dir)))
        logger.debug(f"Wrote output for step {self.step} to {step_dir}")


def make_run_dir(config: RunConfig, cfg: Settings) -> Path:
    name = config.run_name or f"{config.problem}-{datetime.now().strftime('%Y%m%d-%H%M%S')}"
    return Path(cfg.output_dir) / name


def run(config: RunConfig, base_settings: Optional[Settings] = None) -> RunResult:
    """
    Run ``config`` to its end time (or step limit) and write the outputs.

    Raises:
        SolverError: Any solver failure, with the step and time attached.
    """
    cfg = run_settings(config, base_settings)
    run_dir = make_run_dir(config, cfg)
    sink = add_run_log(run_dir)
    wall = {"setup": 0.0, "stepping": 0.0, "output": 0.0}
    started = time.perf_counter()
    transport: Optional[Transport] = None
    sim: Optional[Simulation] = None
    try:
        context = build_context(config, cfg)
        assignment = assign_ranks(context.dec, cfg.workers)
        transport = make_transport(cfg.transport, context, assignment)
        sim = Simulation(context, transport, run_dir)
        sim.initialize()
        wall["setup"] = time.perf_counter() - started
        logger.info(
            f"Running '{context.problem.name}' to t={sim.t_end:g} with cfl={sim.cfl:g} "
            f"on {len(transport.ranks)} {transport.kind} workers; output in {run_dir}"
        )

        if config.output_every:
            tic = time.perf_counter()
            sim.write_output()
            wall["output"] += time.perf_counter() - tic

        while not sim.finished():
            tic = time.perf_counter()
            dt = sim.advance()
            wall["stepping"] += time.perf_counter() - tic
            max_mu = max(float(m.max()) for m in sim.mu.values())
            logger.info(
                f"step {sim.step} t={sim.t:.6g} dt={dt:.4g} max_mu={max_mu:.4g} "
                f"wall={time.perf_counter() - started:.2f}s"
            )
            if config.output_every and sim.step % config.output_every == 0 and not sim.finished():
                tic = time.perf_counter()
                sim.write_output()
                wall["output"] += time.perf_counter() - tic

        tic = time.perf_counter()
        sim.write_output()
        energy_file = write_energy_csv(run_dir / "energy.csv", sim.energy)
        wall["output"] += time.perf_counter() - tic
        wall["total"] = time.perf_counter() - started
        wall["per_step"] = wall["stepping"] / max(sim.step, 1)

        result = RunResult(
            run_dir=str(run_dir),
            problem=context.problem.name,
            steps=sim.step,
            final_time=sim.t,
            decomposition=context.dec.summary(),
            wall_times=wall,
            files=sim.files,
            energy_file=str(energy_file.relative_to(run_dir)),
            config=config.model_dump(),
        )
        write_manifest(
            run_dir / "manifest.json",
            {
                **result.model_dump(exclude={"schema_version"}),
                "cfl": sim.cfl,
                "problem_spec": context.problem.describe(),
                "exchange": context.plan.summary(),
                "workers": len(transport.ranks),
                "transport": transport.kind,
            },
        )
        logger.success(
            f"Finished '{context.problem.name}': {sim.step} steps to t={sim.t:.6g} "
            f"in {wall['total']:.2f}s"
        )
        return result
    except SolverError as e:
        if sim is not None:
            e.with_context(step=sim.step, t=sim.t)
        logger.error(f"Run failed: {e}")
        raise
    finally:
        if transport is not None:
            transport.close()
        remove_run_log(sink)


def bench(
    problem: str,
    workers: Sequence[int],
    steps: int = 10,
    weak: Optional[str] = None,
    base_settings: Optional[Settings] = None,
    transport: Optional[str] = None,
    output_dir: Optional[str] = None,
    problem_options: Optional[dict] = None,
) -> list[ScalingRecord]:
    """
    Time ``steps`` steps of ``problem`` for each worker count.

    ``weak="refine"`` shrinks the refinement bound so the point count grows
    with the workers; ``weak="matrix"`` widens a cylinder matrix to one
    column per worker.

    Raises:
        UsageError: For an unknown weak mode or fewer than two worker counts.
    """
    if weak not in (None, "refine", "matrix"):
        raise UsageError("unknown weak-scaling mode", weak=weak)
    if len(workers) < 2:
        raise UsageError("a benchmark needs at least two worker counts", workers=list(workers))
    records = []
    base = workers[0]
    out_root = Path(output_dir or (base_settings.output_dir if base_settings else "runs"))
    bench_dir = out_root / f"bench-{problem}{'-' + weak if weak else ''}"
    for n in workers:
        options = dict(problem_options or {})
        scale = 1.0
        if weak == "refine":
            scale = float(np.sqrt(base / n))
        elif weak == "matrix":
            options["cols"] = n
        config = RunConfig(
            problem=problem,
            problem_options=options,
            scale=scale,
            max_steps=steps,
            workers=n,
            transport=transport,
            write_fields=False,
            write_schlieren=False,
            output_dir=str(bench_dir),
            run_name=f"workers-{n}",
        )
        result = run(config, base_settings)
        records.append(
            ScalingRecord(
                n_points=result.decomposition["points"],
                workers=n,
                wall_time=result.wall_times["stepping"],
                steps=result.steps,
            )
        )
    records = scaling_metrics(records)
    write_scaling_csv(bench_dir / "scaling.csv", records)
    (bench_dir / "scaling.md").write_text(scaling_markdown(records, title=f"Scaling: {problem}"))
    write_manifest(
        bench_dir / "bench.json",
        {"problem": problem, "weak": weak, "records": records_to_dicts(records)},
    )
    return records
