"""
Worker transports.

A transport runs one named task (see ``solver_context.TASKS``) over every
rank's subpatches and returns the merged per-subpatch results. The master
keeps the authoritative states; only the per-subpatch entries a rank needs
are shipped to it.
"""
from abc import ABC, abstractmethod
from concurrent.futures import Executor, ProcessPoolExecutor, ThreadPoolExecutor
from typing import Any, Optional

from loguru import logger

from app.core.exceptions import SolverError, TransportError, UsageError
from app.services.comm_plan import RankAssignment
from app.services.solver_context import (
    PER_SUBPATCH,
    SolverContext,
    execute,
    execute_remote,
    init_worker,
)


def slice_payload(payload: dict, gids: list[int]) -> dict:
    """Cut per-subpatch payload entries down to ``gids``."""
    out = {}
    for key, value in payload.items():
        if key in PER_SUBPATCH and isinstance(value, dict):
            out[key] = {gid: value[gid] for gid in gids}
        else:
            out[key] = value
    return out


class Transport(ABC):
    """Runs tasks over the ranks of an assignment."""

    kind = "base"

    def __init__(self, context: SolverContext, assignment: RankAssignment):
        self.context = context
        self.assignment = assignment
        self.ranks = [
            (rank, gids)
            for rank in range(assignment.n_workers)
            if (gids := assignment.subpatches_of(rank))
        ]

    @property
    def n_workers(self) -> int:
        return self.assignment.n_workers

    def run(self, task: str, payload: dict) -> dict[int, Any]:
        """Run ``task`` on every rank; results are merged in gid order."""
        parts = self._dispatch(task, payload)
        merged: dict[int, Any] = {}
        for part in parts:
            merged.update(part)
        return {gid: merged[gid] for gid in sorted(merged)}

    @abstractmethod
    def _dispatch(self, task: str, payload: dict) -> list[dict[int, Any]]:
        ...

    def close(self) -> None:
        pass

    def __enter__(self) -> "Transport":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


class _ExecutorTransport(Transport):
    """Shared submit/collect logic for executor-backed transports."""

    executor: Optional[Executor] = None

    def _submit(self, task: str, gids: list[int], payload: dict):
        raise NotImplementedError

    def _dispatch(self, task: str, payload: dict) -> list[dict[int, Any]]:
        futures = [(rank, self._submit(task, gids, payload)) for rank, gids in self.ranks]
        parts = []
        for rank, future in futures:
            try:
                parts.append(future.result())
            except SolverError as e:
                raise e.with_context(rank=rank)
            except Exception as e:
                logger.error(f"Worker {rank} failed in task '{task}': {e}")
                raise TransportError("worker failed", rank=rank, task=task, reason=str(e)) from e
        return parts

    def close(self) -> None:
        if self.executor is not None:
            self.executor.shutdown(wait=True)
            self.executor = None


class ThreadTransport(_ExecutorTransport):
    """Shared-memory workers; a single worker runs inline."""

    kind = "thread"

    def __init__(self, context: SolverContext, assignment: RankAssignment):
        super().__init__(context, assignment)
        if len(self.ranks) > 1:
            self.executor = ThreadPoolExecutor(
                max_workers=len(self.ranks), thread_name_prefix="fcflow-worker"
            )

    def _dispatch(self, task: str, payload: dict) -> list[dict[int, Any]]:
        if self.executor is None:
            return [execute(self.context, task, gids, payload) for _, gids in self.ranks]
        return super()._dispatch(task, payload)

    def _submit(self, task, gids, payload):
        return self.executor.submit(execute, self.context, task, gids, payload)


def _initargs(context: SolverContext) -> tuple[dict, dict]:
    return context.config.model_dump(), context.settings.model_dump()


class ProcessTransport(_ExecutorTransport):
    """Local processes, each holding a replicated context."""

    kind = "process"

    def __init__(self, context: SolverContext, assignment: RankAssignment):
        super().__init__(context, assignment)
        self.executor = ProcessPoolExecutor(
            max_workers=len(self.ranks), initializer=init_worker, initargs=_initargs(context)
        )

    def _submit(self, task, gids, payload):
        return self.executor.submit(execute_remote, task, gids, slice_payload(payload, gids))


class MpiTransport(_ExecutorTransport):
    """MPI workers spawned through ``mpi4py.futures``."""

    kind = "mpi"

    def __init__(self, context: SolverContext, assignment: RankAssignment):
        super().__init__(context, assignment)
        try:
            from mpi4py.futures import MPIPoolExecutor
        except ImportError as e:
            raise TransportError("mpi transport needs mpi4py", reason=str(e)) from e
        self.executor = MPIPoolExecutor(
            max_workers=len(self.ranks), initializer=init_worker, initargs=_initargs(context)
        )

    def _submit(self, task, gids, payload):
        return self.executor.submit(execute_remote, task, gids, slice_payload(payload, gids))


TRANSPORTS = {
    ThreadTransport.kind: ThreadTransport,
    ProcessTransport.kind: ProcessTransport,
    MpiTransport.kind: MpiTransport,
}


def make_transport(kind: str, context: SolverContext, assignment: RankAssignment) -> Transport:
    if kind not in TRANSPORTS:
        raise UsageError("unknown transport", transport=kind, known=sorted(TRANSPORTS))
    transport = TRANSPORTS[kind](context, assignment)
    logger.info(
        f"Started {kind} transport with {len(transport.ranks)} workers "
        f"(loads {assignment.loads})"
    )
    return transport
