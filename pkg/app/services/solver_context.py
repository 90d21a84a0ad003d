"""
Replicated solver context and the per-subpatch worker tasks.

Every worker holds the full geometry, both communication plans and one
``SubpatchSolver`` per subpatch; tasks only ever touch the subpatches they
are given, so results do not depend on how subpatches are spread over
workers.
"""
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Optional

import numpy as np
from loguru import logger

from app.core.config import Settings, settings
from app.core.exceptions import SolverError, UsageError
from app.models.run import RunConfig
from app.services.classifier import SmoothnessClassifier, load_classifier
from app.services.comm_plan import CommPlan, build_blend_plan, build_comm_plan
from app.services.decomposition import DomainDecomposition
from app.services.diagnostics import density_gradient
from app.services.euler import SubpatchSolver
from app.services.mesh_io import load_mesh
from app.services.operator_cache import InMemoryOperatorCache
from app.services.problems import ProblemSpec, get_problem
from app.services.subpatches import window
from app.services.viscosity import blend, discontinuity_mask, subpatch_viscosity


def run_settings(config: RunConfig, base: Optional[Settings] = None) -> Settings:
    """``base`` with the run-config overrides applied (and validated)."""
    base = base or settings
    overrides = config.settings_overrides()
    if not overrides:
        return base
    return Settings(**{**base.model_dump(), **overrides})


@dataclass
class SolverContext:
    config: RunConfig
    settings: Settings
    problem: ProblemSpec
    dec: DomainDecomposition
    plan: CommPlan
    blend_plan: CommPlan
    solvers: dict[int, SubpatchSolver]
    windows: dict[int, np.ndarray]
    classifier: SmoothnessClassifier

    @property
    def gids(self) -> list[int]:
        return sorted(self.solvers)

    @property
    def n_f(self) -> int:
        return self.settings.geom_nf


def build_decomposition(config: RunConfig, cfg: Settings, problem: ProblemSpec) -> DomainDecomposition:
    if config.mesh:
        dec = load_mesh(Path(config.mesh))
        dec.domain = dec.domain or problem.domain
        return dec
    hbar = config.hbar
    if hbar is None and problem.hbar is not None:
        hbar = problem.hbar * config.scale
    return problem.decomposition(cfg, hbar=hbar)


def build_context(config: RunConfig, cfg: Optional[Settings] = None) -> SolverContext:
    """Geometry, plans, operators and classifier for ``config``."""
    cfg = cfg or run_settings(config)
    options = {"convention": cfg.shock_density_convention, **config.problem_options}
    problem = get_problem(config.problem, **options)
    dec = build_decomposition(config, cfg, problem)
    n_f = cfg.geom_nf
    plan = build_comm_plan(dec, n_f, cfg.interp_order)
    blend_plan = build_blend_plan(dec, cfg.interp_order)
    operators = InMemoryOperatorCache(cfg)
    solvers = {
        sp.gid: SubpatchSolver(sp, operators, n_f, problem.boundary, cfg.gamma)
        for sp in dec.subpatches
    }
    windows = {sp.gid: window(sp, n_f) for sp in dec.subpatches}
    classifier = load_classifier(cfg)
    logger.info(
        f"Context for '{problem.name}': {len(dec.patches)} patches, {len(solvers)} subpatches, "
        f"{dec.n_points} points, {plan.n_copies} copies, {plan.n_interpolations} interpolations"
    )
    return SolverContext(config, cfg, problem, dec, plan, blend_plan, solvers, windows, classifier)


# -- tasks ----------------------------------------------------------------------


def _viscosity(ctx: SolverContext, gids, payload):
    cfg = ctx.settings
    out = {}
    for gid in gids:
        solver = ctx.solvers[gid]
        out[gid] = subpatch_viscosity(
            ctx.classifier,
            payload["states"][gid],
            solver.sp,
            solver.fringe,
            cfg.gamma,
            cfg.visc_weights,
            cfg.visc_smoothing,
        )
    return out


def _blend(ctx: SolverContext, gids, payload):
    mu, normalized = blend(ctx.blend_plan, ctx.windows, payload["prelim"], receivers=list(gids))
    return {gid: (mu[gid], normalized[gid]) for gid in gids}


def _rhs(ctx: SolverContext, gids, payload):
    t = payload["t"]
    return {gid: ctx.solvers[gid].rhs(payload["states"][gid], payload["mu"][gid], t) for gid in gids}


def _dt(ctx: SolverContext, gids, payload):
    return {gid: ctx.solvers[gid].dt_bound(payload["states"][gid], payload["mu"][gid]) for gid in gids}


def _filter(ctx: SolverContext, gids, payload):
    return {gid: ctx.solvers[gid].filter(payload["states"][gid]) for gid in gids}


def _smear(ctx: SolverContext, gids, payload):
    out = {}
    for gid in gids:
        solver = ctx.solvers[gid]
        state = payload["states"][gid]
        mask = discontinuity_mask(
            ctx.classifier, state, solver.sp, ctx.settings.gamma, ctx.classifier.stencil // 2
        )
        out[gid] = solver.smear(state, mask)
    return out


def _gradient(ctx: SolverContext, gids, payload):
    return {gid: density_gradient(ctx.solvers[gid], payload["states"][gid]) for gid in gids}


TASKS: dict[str, Callable[[SolverContext, list[int], dict], dict[int, Any]]] = {
    "viscosity": _viscosity,
    "blend": _blend,
    "rhs": _rhs,
    "dt": _dt,
    "filter": _filter,
    "smear": _smear,
    "gradient": _gradient,
}

# payload entries that are per-subpatch and can be cut down to the task's gids
PER_SUBPATCH = {"states", "mu"}


def execute(ctx: SolverContext, task: str, gids: list[int], payload: dict) -> dict[int, Any]:
    if task not in TASKS:
        raise UsageError("unknown worker task", task=task)
    try:
        return TASKS[task](ctx, gids, payload)
    except SolverError as e:
        raise e.with_context(task=task)


# -- process-local context (process and mpi transports) ----------------------------

_CONTEXT: Optional[SolverContext] = None


def init_worker(config_data: dict, settings_data: dict) -> None:
    global _CONTEXT
    config = RunConfig.model_validate(config_data)
    _CONTEXT = build_context(config, Settings(**settings_data))


def execute_remote(task: str, gids: list[int], payload: dict) -> dict[int, Any]:
    if _CONTEXT is None:
        raise UsageError("worker context not initialized", task=task)
    return execute(_CONTEXT, task, gids, payload)
