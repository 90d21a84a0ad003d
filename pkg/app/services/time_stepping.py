"""
Five-stage, fourth-order strong-stability-preserving Runge-Kutta (SSPRK(5,4)).

The scheme is stored in Shu-Osher form. States may be numpy arrays or dicts
of arrays keyed by subpatch gid; linear combinations are evaluated in a
fixed order so results are bitwise reproducible.
"""
from typing import Callable, Optional, TypeVar, Union

import numpy as np

State = TypeVar("State", np.ndarray, dict)
Rhs = Callable[[State, float], State]
AfterStage = Callable[[State, float], State]

# u_i = sum_k ALPHA[i][k] u_k + dt * sum_k BETA[i][k] L(u_k), k < i
ALPHA = (
    (1.0,),
    (0.444370493651235, 0.555629506348765),
    (0.620101851488403, 0.0, 0.379898148511597),
    (0.178079954393132, 0.0, 0.0, 0.821920045606868),
    (0.0, 0.0, 0.517231671970585, 0.096059710526147, 0.386708617503269),
)
BETA = (
    (0.391752226571890,),
    (0.0, 0.368410593050371),
    (0.0, 0.0, 0.251891774271694),
    (0.0, 0.0, 0.0, 0.544974750228521),
    (0.0, 0.0, 0.0, 0.063692468666290, 0.226007483236906),
)
STAGE_TIMES = (0.0, 0.391752226571890, 0.586079689311540, 0.474542363121400, 0.935010630967653)
N_STAGES = 5
ORDER = 4


def lincomb(terms: list[tuple[float, Union[np.ndarray, dict]]]) -> Union[np.ndarray, dict]:
    """``sum c_k s_k`` skipping zero coefficients, accumulated left to right."""
    terms = [(c, s) for c, s in terms if c != 0.0]
    first = terms[0][1]
    if isinstance(first, dict):
        return {key: lincomb([(c, s[key]) for c, s in terms]) for key in first}
    out = terms[0][0] * first
    for c, s in terms[1:]:
        out = out + c * s
    return out


def ssprk54_step(
    u0: State,
    t: float,
    dt: float,
    rhs: Rhs,
    after_stage: Optional[AfterStage] = None,
) -> State:
    """
    Advance ``u0`` from ``t`` to ``t + dt``.

    Args:
        rhs: ``L(u, t)``.
        after_stage: Applied to every new stage value (boundary conditions and
            fringe exchange); receives the stage time.
    """
    stages = [u0]
    slopes = []
    for i in range(N_STAGES):
        slopes.append(rhs(stages[i], t + STAGE_TIMES[i] * dt))
        terms = [(a, stages[k]) for k, a in enumerate(ALPHA[i])]
        terms += [(dt * b, slopes[k]) for k, b in enumerate(BETA[i])]
        new = lincomb(terms)
        stage_time = t + (STAGE_TIMES[i + 1] if i + 1 < N_STAGES else 1.0) * dt
        if after_stage is not None:
            new = after_stage(new, stage_time)
        stages.append(new)
    return stages[-1]
