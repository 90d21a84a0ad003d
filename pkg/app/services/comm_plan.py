"""
Communication plans: who sends which values to whom.

A plan is an ordered list of transfers. Each transfer fills points of one
receiver subpatch from one donor subpatch, either by copying coincident
grid values (siblings inside a patch) or by tensor-product Lagrange
interpolation in the donor's parameter space (other patches).

Two plans are built per decomposition:

* the exchange plan fills every fringe point exactly once from donor points
  that are not themselves fringe points;
* the blend plan carries window and viscosity values from every subpatch to
  every other subpatch point it covers.
"""
from dataclasses import dataclass, field
from itertools import product
from typing import Optional

import numpy as np
from loguru import logger
from numpy.lib.stride_tricks import sliding_window_view

from app.core.exceptions import DecompositionError, UsageError
from app.services.decomposition import DomainDecomposition
from app.services.patches import Patch
from app.services.subpatches import Subpatch

_SHIFTS = (0, -1, 1, -2, 2, -3, 3)
_SHIFT_PAIRS = sorted(product(_SHIFTS, _SHIFTS), key=lambda p: abs(p[0]) + abs(p[1]))


@dataclass(frozen=True, eq=False)
class Transfer:
    """
    Values for ``recv_idx`` (flat box indices of the receiver) computed from
    ``donor_idx`` (flat box indices of the donor, one row per point) with
    ``weights`` of the same shape.
    """

    receiver: int
    donor: int
    recv_idx: np.ndarray
    donor_idx: np.ndarray
    weights: np.ndarray

    @property
    def kind(self) -> str:
        return "copy" if self.donor_idx.shape[1] == 1 else "interp"

    @property
    def size(self) -> int:
        return int(self.recv_idx.size)

    def values(self, donor_field: np.ndarray) -> np.ndarray:
        """Receiver values from a donor field of shape ``(..., n1, n2)``."""
        flat = donor_field.reshape(donor_field.shape[:-2] + (-1,))
        gathered = flat[..., self.donor_idx]
        if self.donor_idx.shape[1] == 1:
            return gathered[..., 0]
        return np.einsum("...ns,ns->...n", gathered, self.weights)


@dataclass
class CommPlan:
    transfers: list[Transfer]
    actives: dict[int, np.ndarray]
    name: str = "exchange"
    _by_receiver: dict[int, list[Transfer]] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        for t in self.transfers:
            self._by_receiver.setdefault(t.receiver, []).append(t)

    def for_receiver(self, gid: int) -> list[Transfer]:
        return self._by_receiver.get(gid, [])

    def active(self, gid: int) -> np.ndarray:
        return self.actives[gid]

    @property
    def n_copies(self) -> int:
        return sum(t.size for t in self.transfers if t.kind == "copy")

    @property
    def n_interpolations(self) -> int:
        return sum(t.size for t in self.transfers if t.kind == "interp")

    def schedule(self, assignment: "RankAssignment") -> dict[int, dict[str, list[int]]]:
        """Per-rank indices of transfers sent to and received from other ranks."""
        out = {rank: {"send": [], "recv": []} for rank in range(assignment.n_workers)}
        for k, t in enumerate(self.transfers):
            src, dst = assignment.owner[t.donor], assignment.owner[t.receiver]
            if src != dst:
                out[src]["send"].append(k)
                out[dst]["recv"].append(k)
        return out

    def summary(self) -> dict:
        return {
            "plan": self.name,
            "transfers": len(self.transfers),
            "copies": self.n_copies,
            "interpolations": self.n_interpolations,
        }


@dataclass(frozen=True)
class RankAssignment:
    n_workers: int
    owner: tuple[int, ...]

    def subpatches_of(self, rank: int) -> list[int]:
        return [gid for gid, r in enumerate(self.owner) if r == rank]

    @property
    def loads(self) -> list[int]:
        counts = [0] * self.n_workers
        for r in self.owner:
            counts[r] += 1
        return counts


def assign_ranks(dec: DomainDecomposition, n_workers: int) -> RankAssignment:
    """Round-robin assignment of subpatches (by gid) to ``n_workers`` workers."""
    if n_workers < 1:
        raise UsageError("worker count must be positive", workers=n_workers)
    owner = tuple(gid % n_workers for gid in range(len(dec.subpatches)))
    return RankAssignment(n_workers, owner)


def lagrange_weights(t: np.ndarray, size: int) -> np.ndarray:
    """Weights of the Lagrange interpolant on nodes ``0..size-1`` at positions ``t``."""
    nodes = np.arange(size, dtype=float)
    t = np.asarray(t, dtype=float)[:, None]
    w = np.ones((t.shape[0], size))
    for k in range(size):
        for m in range(size):
            if m != k:
                w[:, k] *= (t[:, 0] - nodes[m]) / (nodes[k] - nodes[m])
    return w


def _valid_bases(ok: np.ndarray, size: int) -> Optional[np.ndarray]:
    """``out[a, b]`` is True when the ``size x size`` block at local ``(a, b)`` is all ok."""
    if ok.shape[0] < size or ok.shape[1] < size:
        return None
    return sliding_window_view(ok, (size, size)).all(axis=(-2, -1))


def _stencils(
    donor: Subpatch, bases: np.ndarray, q1: np.ndarray, q2: np.ndarray, size: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Interpolation stencils in ``donor`` for parameter points ``(q1, q2)``.

    Returns ``(found, donor_idx, weights)``; rows of the index and weight
    arrays correspond to the found points.
    """
    h1, h2 = donor.patch.h
    t1, t2 = q1 / h1, q2 / h2
    c1 = np.floor(t1).astype(int) - (size - 1) // 2 - donor.i0
    c2 = np.floor(t2).astype(int) - (size - 1) // 2 - donor.j0
    chosen1 = np.full(t1.shape, -1)
    chosen2 = np.full(t2.shape, -1)
    found = np.zeros(t1.shape, dtype=bool)
    n_a, n_b = bases.shape
    for s1, s2 in _SHIFT_PAIRS:
        todo = ~found
        if not todo.any():
            break
        b1, b2 = c1 + s1, c2 + s2
        inside = todo & (b1 >= 0) & (b1 < n_a) & (b2 >= 0) & (b2 < n_b)
        good = np.zeros(t1.shape, dtype=bool)
        good[inside] = bases[b1[inside], b2[inside]]
        chosen1[good], chosen2[good] = b1[good], b2[good]
        found |= good
    if not found.any():
        return found, np.empty((0, size * size), dtype=int), np.empty((0, size * size))
    b1, b2 = chosen1[found], chosen2[found]
    w1 = lagrange_weights(t1[found] - (b1 + donor.i0), size)
    w2 = lagrange_weights(t2[found] - (b2 + donor.j0), size)
    rows = b1[:, None] + np.arange(size)
    cols = b2[:, None] + np.arange(size)
    ncol = donor.shape[1]
    donor_idx = (rows[:, :, None] * ncol + cols[:, None, :]).reshape(len(b1), size * size)
    weights = (w1[:, :, None] * w2[:, None, :]).reshape(len(b1), size * size)
    return found, donor_idx, weights


def _locate(patch: Patch, x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, ...]:
    x0, x1, y0, y1 = patch.bounding_box()
    pad = 1e-9 * max(patch.diameter, 1.0)
    near = (x >= x0 - pad) & (x <= x1 + pad) & (y >= y0 - pad) & (y <= y1 + pad)
    q1 = np.full(x.shape, np.nan)
    q2 = np.full(x.shape, np.nan)
    inside = np.zeros(x.shape, dtype=bool)
    if near.any():
        idx = np.flatnonzero(near)
        a, b, ok = patch.locate(x[idx], y[idx])
        q1[idx], q2[idx], inside[idx] = a, b, ok
    return q1, q2, inside


def _coincident(
    receiver: Subpatch, donor: Subpatch, I: np.ndarray, J: np.ndarray, usable: np.ndarray
) -> np.ndarray:
    """Positions (into ``I``/``J``) whose point is a usable point of ``donor``."""
    inside = (I >= donor.i0) & (I <= donor.i1) & (J >= donor.j0) & (J <= donor.j1)
    ok = np.zeros(I.shape, dtype=bool)
    ok[inside] = usable[I[inside] - donor.i0, J[inside] - donor.j0]
    return ok


def _copy(receiver: Subpatch, donor: Subpatch, recv_flat, I, J) -> Transfer:
    return Transfer(
        receiver.gid,
        donor.gid,
        recv_flat,
        donor.flat_index(I, J)[:, None],
        np.ones((I.size, 1)),
    )


def build_comm_plan(dec: DomainDecomposition, n_f: int, order: int = 5) -> CommPlan:
    """
    Exchange plan filling every fringe point of every subpatch.

    Siblings with a coincident non-fringe point donate by copy (lowest gid
    first); remaining points are interpolated from the first patch (by
    index) holding a full stencil of non-fringe points.

    Raises:
        DecompositionError: For a fringe point without a donor.
    """
    if order < 3:
        raise UsageError("interpolation order must be at least 3", order=order)
    size = order + 1
    subs = dec.subpatches
    fringe = {sp.gid: sp.fringe_mask(n_f) for sp in subs}
    usable = {sp.gid: sp.active & ~fringe[sp.gid] for sp in subs}
    bases = {sp.gid: _valid_bases(usable[sp.gid], size) for sp in subs}
    transfers: list[Transfer] = []

    for sp in subs:
        li, lj = np.nonzero(fringe[sp.gid])
        if li.size == 0:
            continue
        I, J = sp.i0 + li, sp.j0 + lj
        recv_flat = li * sp.shape[1] + lj
        pending = np.ones(li.size, dtype=bool)

        for donor in dec.patch_subpatches(sp.patch.index):
            if donor is sp or not pending.any():
                continue
            hit = pending & _coincident(sp, donor, I, J, usable[donor.gid])
            if hit.any():
                transfers.append(_copy(sp, donor, recv_flat[hit], I[hit], J[hit]))
                pending &= ~hit

        if pending.any():
            px, py = sp.physical
            for patch in dec.patches:
                if patch is sp.patch or not pending.any():
                    continue
                idx = np.flatnonzero(pending)
                q1, q2, inside = _locate(patch, px[li[idx], lj[idx]], py[li[idx], lj[idx]])
                idx, q1, q2 = idx[inside], q1[inside], q2[inside]
                for donor in dec.patch_subpatches(patch.index):
                    if idx.size == 0:
                        break
                    if bases[donor.gid] is None:
                        continue
                    found, donor_idx, weights = _stencils(donor, bases[donor.gid], q1, q2, size)
                    if found.any():
                        transfers.append(
                            Transfer(sp.gid, donor.gid, recv_flat[idx[found]], donor_idx, weights)
                        )
                        pending[idx[found]] = False
                        idx, q1, q2 = idx[~found], q1[~found], q2[~found]

        if pending.any():
            k = int(np.flatnonzero(pending)[0])
            x, y = sp.physical
            point = [float(x[li[k], lj[k]]), float(y[li[k], lj[k]])]
            logger.error(f"Orphan fringe point {point} in {sp.describe()}")
            raise DecompositionError(
                "fringe point has no donor",
                subpatch=sp.gid,
                patch=sp.patch.index,
                index=[int(I[k]), int(J[k])],
                point=point,
                count=int(pending.sum()),
            )

    plan = CommPlan(transfers, {sp.gid: sp.active for sp in subs}, name="exchange")
    _check_complete(plan, fringe)
    logger.info(
        f"Exchange plan for '{dec.name}': {plan.n_copies} copies, "
        f"{plan.n_interpolations} interpolations in {len(transfers)} transfers"
    )
    return plan


def _check_complete(plan: CommPlan, fringe: dict[int, np.ndarray]) -> None:
    for gid, mask in fringe.items():
        filled = np.zeros(mask.size, dtype=int)
        for t in plan.for_receiver(gid):
            np.add.at(filled, t.recv_idx, 1)
        if not np.array_equal(filled, mask.ravel().astype(int)):
            raise DecompositionError("exchange plan does not fill each fringe point once", subpatch=gid)


def build_blend_plan(dec: DomainDecomposition, order: int = 5) -> CommPlan:
    """
    Plan carrying values of every subpatch to the points of other subpatches it covers.

    Siblings contribute by copy at coincident active points; other patches
    by interpolation from active donor points. Points of a donor box with no
    fitting stencil are skipped.
    """
    size = order + 1
    subs = dec.subpatches
    bases = {sp.gid: _valid_bases(sp.active, size) for sp in subs}
    transfers: list[Transfer] = []
    for sp in subs:
        li, lj = np.nonzero(sp.active)
        I, J = sp.i0 + li, sp.j0 + lj
        recv_flat = li * sp.shape[1] + lj
        px, py = sp.physical
        located: dict[int, tuple] = {}
        for donor in subs:
            if donor is sp:
                continue
            if donor.patch is sp.patch:
                hit = _coincident(sp, donor, I, J, donor.active)
                if hit.any():
                    transfers.append(_copy(sp, donor, recv_flat[hit], I[hit], J[hit]))
                continue
            if bases[donor.gid] is None:
                continue
            if donor.patch.index not in located:
                located[donor.patch.index] = _locate(donor.patch, px[li, lj], py[li, lj])
            q1, q2, inside = located[donor.patch.index]
            h1, h2 = donor.patch.h
            t1, t2 = q1 / h1, q2 / h2
            tol = 1e-9
            in_box = inside & (t1 >= donor.i0 - tol) & (t1 <= donor.i1 + tol)
            in_box &= (t2 >= donor.j0 - tol) & (t2 <= donor.j1 + tol)
            if not in_box.any():
                continue
            idx = np.flatnonzero(in_box)
            found, donor_idx, weights = _stencils(donor, bases[donor.gid], q1[idx], q2[idx], size)
            if found.any():
                transfers.append(
                    Transfer(sp.gid, donor.gid, recv_flat[idx[found]], donor_idx, weights)
                )
    plan = CommPlan(transfers, {sp.gid: sp.active for sp in subs}, name="blend")
    logger.info(
        f"Blend plan for '{dec.name}': {plan.n_copies} copies, "
        f"{plan.n_interpolations} interpolations"
    )
    return plan


def exchange(
    plan: CommPlan, states: dict[int, np.ndarray], receivers: Optional[list[int]] = None
) -> dict[int, np.ndarray]:
    """
    Overwrite receiver points from donor values, in plan order.

    Donor values read by the exchange plan are never written by it, so the
    result does not depend on the order in which receivers are processed.
    """
    targets = None if receivers is None else set(receivers)
    for t in plan.transfers:
        if targets is not None and t.receiver not in targets:
            continue
        out = states[t.receiver]
        if not out.flags.c_contiguous:
            raise UsageError("exchange needs C-contiguous state arrays", subpatch=t.receiver)
        flat = out.reshape(out.shape[:-2] + (-1,))
        flat[..., t.recv_idx] = t.values(states[t.donor])
    return states
