"""Simulated multi-rank communicator, halo exchange and gather/scatter.

Ranks run as threads that talk only through mailboxes keyed by
(destination, source, tag); each mailbox is FIFO.  In sequential mode a
baton lets exactly one rank run at a time, handed over round-robin when
the running rank blocks, which gives a fully deterministic schedule.
"""

import copy
import logging
import threading
from collections import defaultdict, deque
from dataclasses import dataclass, field

import numpy as np

from .errors import CommAborted, DeadlockError, InvalidArgument, PlanError

log = logging.getLogger(__name__)

_TAG_ALLGATHER = -1
_TAG_GATHER = -2
_TAG_BCAST = -3
_TAG_ALLTOALL = -4
_TAG_HALO = -5
_TAG_SCATTER = -6


def _copy_payload(obj):
    if isinstance(obj, np.ndarray):
        return obj.copy()
    return copy.deepcopy(obj)


class SimComm:
    """In-process communicator for ``size`` ranks.

    Parameters
    ----------
    size : int
    sequential : bool
        Run one rank at a time under a deterministic round-robin schedule.
    """

    def __init__(self, size, sequential=False):
        if isinstance(size, bool) or int(size) != size or size < 1:
            raise InvalidArgument(f"communicator size must be a positive integer, got {size!r}")
        self.size = int(size)
        self.sequential = bool(sequential)

    def __repr__(self):
        return f"SimComm(size={self.size}, sequential={self.sequential})"

    def run(self, task, *args, **kwargs):
        """Run ``task(ctx, *args, **kwargs)`` on every rank; return results in rank order.

        If a rank raises, the remaining ranks are aborted and the first
        error (lowest rank among the originals) is re-raised.
        """
        state = _RunState(self.size, self.sequential)
        results = [None] * self.size
        errors: dict[int, BaseException] = {}

        def body(rank):
            ctx = RankContext(state, rank)
            try:
                if self.sequential:
                    state.wait_turn(rank)
                results[rank] = task(ctx, *args, **kwargs)
            except BaseException as exc:  # noqa: BLE001 - propagated below
                errors[rank] = exc
                if not isinstance(exc, CommAborted) or isinstance(exc, DeadlockError):
                    state.abort(exc)
            finally:
                state.finish(rank)

        if self.size == 1 and not self.sequential:
            body(0)
        else:
            threads = [threading.Thread(target=body, args=(r,), name=f"rank{r}", daemon=True) for r in range(self.size)]
            for t in threads:
                t.start()
            for t in threads:
                t.join()
        if errors:
            primary = [r for r in sorted(errors) if not isinstance(errors[r], CommAborted)]
            if not primary:
                primary = [r for r in sorted(errors) if isinstance(errors[r], DeadlockError)] or sorted(errors)
            raise errors[primary[0]]
        return results


class _RunState:
    def __init__(self, size, sequential):
        self.size = size
        self.sequential = sequential
        self.cond = threading.Condition()
        self.boxes = defaultdict(deque)
        self.alive = set(range(size))
        self.blocked: dict[int, tuple] = {}
        self.aborted: BaseException | None = None
        self.turn = 0

    # caller holds the lock for the helpers below
    def _has_message(self, rank):
        key = self.blocked.get(rank)
        return key is not None and bool(self.boxes[key])

    def _runnable(self, rank):
        return rank in self.alive and (rank not in self.blocked or self._has_message(rank))

    def _deadlocked(self):
        return bool(self.alive) and all(r in self.blocked and not self._has_message(r) for r in self.alive)

    def _pass_turn(self, rank):
        for k in range(1, self.size + 1):
            nxt = (rank + k) % self.size
            if self._runnable(nxt):
                self.turn = nxt
                self.cond.notify_all()
                return
        self.turn = -1
        self.cond.notify_all()

    def _check_deadlock(self):
        if self.aborted is None and self._deadlocked():
            waiting = {r: self.blocked[r] for r in sorted(self.alive)}
            self.aborted = DeadlockError(f"simulated ranks deadlocked; waiting on (dest, source, tag): {waiting}")
            self.cond.notify_all()

    def _raise_aborted(self, rank):
        if isinstance(self.aborted, DeadlockError):
            raise DeadlockError(str(self.aborted))
        raise CommAborted(f"rank {rank} aborted: {self.aborted!r}")

    def wait_turn(self, rank):
        with self.cond:
            while self.turn != rank and self.aborted is None:
                self.cond.wait()
            if self.aborted is not None:
                self._raise_aborted(rank)

    def abort(self, exc):
        with self.cond:
            if self.aborted is None:
                self.aborted = exc
            self.cond.notify_all()

    def finish(self, rank):
        with self.cond:
            self.alive.discard(rank)
            self.blocked.pop(rank, None)
            if self.sequential and self.turn == rank:
                self._pass_turn(rank)
            self._check_deadlock()
            self.cond.notify_all()

    def send(self, rank, dest, tag, payload):
        with self.cond:
            if self.aborted is not None:
                self._raise_aborted(rank)
            self.boxes[(dest, rank, tag)].append(payload)
            self.cond.notify_all()

    def recv(self, rank, source, tag):
        key = (rank, source, tag)
        with self.cond:
            while True:
                if self.aborted is not None:
                    self._raise_aborted(rank)
                box = self.boxes[key]
                if box:
                    self.blocked.pop(rank, None)
                    return box.popleft()
                if source not in self.alive and not box:
                    self.aborted = DeadlockError(f"rank {rank} waits for rank {source}, which has finished (tag {tag})")
                    self.cond.notify_all()
                    raise self.aborted
                self.blocked[rank] = key
                self._check_deadlock()
                if self.aborted is not None:
                    continue
                if self.sequential:
                    self._pass_turn(rank)
                    while (self.turn != rank or not self.boxes[key]) and self.aborted is None:
                        self.cond.wait()
                else:
                    self.cond.wait()


class RankContext:
    """Handle given to a rank task: point-to-point and collective operations."""

    def __init__(self, state: _RunState, rank):
        self._state = state
        self.rank = rank
        self.size = state.size

    def __repr__(self):
        return f"RankContext(rank={self.rank}, size={self.size})"

    def send(self, obj, dest, tag=0):
        if not 0 <= dest < self.size:
            raise InvalidArgument(f"destination {dest} out of range")
        self._state.send(self.rank, dest, tag, _copy_payload(obj))

    def recv(self, source, tag=0):
        if not 0 <= source < self.size:
            raise InvalidArgument(f"source {source} out of range")
        return self._state.recv(self.rank, source, tag)

    def allgather(self, obj):
        for r in range(self.size):
            if r != self.rank:
                self.send(obj, r, _TAG_ALLGATHER)
        return [_copy_payload(obj) if r == self.rank else self.recv(r, _TAG_ALLGATHER) for r in range(self.size)]

    def gather(self, obj, root=0):
        if self.rank != root:
            self.send(obj, root, _TAG_GATHER)
            return None
        return [_copy_payload(obj) if r == root else self.recv(r, _TAG_GATHER) for r in range(self.size)]

    def bcast(self, obj, root=0):
        if self.rank == root:
            for r in range(self.size):
                if r != root:
                    self.send(obj, r, _TAG_BCAST)
            return obj
        return self.recv(root, _TAG_BCAST)

    def alltoall(self, items):
        """``items[r]`` goes to rank r; returns what every rank sent here."""
        if len(items) != self.size:
            raise InvalidArgument("alltoall needs one item per rank")
        for r in range(self.size):
            if r != self.rank:
                self.send(items[r], r, _TAG_ALLTOALL)
        return [_copy_payload(items[r]) if r == self.rank else self.recv(r, _TAG_ALLTOALL) for r in range(self.size)]

    def barrier(self):
        self.allgather(None)


@dataclass
class HaloExchangePlan:
    """Per-neighbour index lists of one rank.

    ``send[q]`` are local indices whose values go to rank q and
    ``recv[q]`` the local ghost slots filled from rank q.
    """

    rank: int
    size: int
    send: dict = field(default_factory=dict)
    recv: dict = field(default_factory=dict)

    def __eq__(self, other):
        if not isinstance(other, HaloExchangePlan):
            return NotImplemented
        same = lambda a, b: a.keys() == b.keys() and all(np.array_equal(a[k], b[k]) for k in a)  # noqa: E731
        return self.rank == other.rank and self.size == other.size and same(self.send, other.send) and same(self.recv, other.recv)

    @property
    def empty(self):
        return not self.send and not self.recv


def build_halo_plan(partition, remote_index, global_index, ctx: RankContext) -> HaloExchangePlan:
    """Build the halo exchange plan of ``ctx.rank`` by exchanging ghost requests.

    Raises
    ------
    PlanError
        A ghost names a remote index that is missing on its owner or whose
        global index differs.
    """
    partition = np.asarray(partition, dtype=np.int64)
    remote_index = np.asarray(remote_index, dtype=np.int64)
    global_index = np.asarray(global_index, dtype=np.int64)
    n = len(partition)
    if len(remote_index) != n or len(global_index) != n:
        raise InvalidArgument("partition, remote_index and global_index must have equal length")
    rank = ctx.rank
    ghosts = np.flatnonzero(partition != rank)
    if np.any((partition[ghosts] < 0) | (partition[ghosts] >= ctx.size)):
        raise PlanError(f"rank {rank}: ghost partition outside [0, {ctx.size})")
    requests, recv = [], {}
    for q in range(ctx.size):
        mine = ghosts[partition[ghosts] == q] if q != rank else ghosts[:0]
        requests.append(np.column_stack([remote_index[mine], global_index[mine]]))
        if len(mine):
            recv[q] = mine
    incoming = ctx.alltoall(requests)
    send = {}
    for p, req in enumerate(incoming):
        if p == rank or len(req) == 0:
            continue
        ridx, gidx = req[:, 0], req[:, 1]
        bad = (ridx < 0) | (ridx >= n)
        ok = ~bad
        bad[ok] = (partition[ridx[ok]] != rank) | (global_index[ridx[ok]] != gidx[ok])
        if np.any(bad):
            k = int(np.flatnonzero(bad)[0])
            raise PlanError(
                f"rank {p} requests local index {ridx[k]} (global {gidx[k]}) from rank {rank}, "
                "which does not own a matching entry"
            )
        send[p] = ridx.copy()
    return HaloExchangePlan(rank, ctx.size, send, recv)


def halo_exchange(plan: HaloExchangePlan, data, ctx: RankContext, nb_local=None):
    """Overwrite ghost rows of ``data`` (in place) with the owners' values."""
    data = np.asarray(data) if not isinstance(data, np.ndarray) else data
    if nb_local is not None and len(data) != nb_local:
        raise InvalidArgument(f"data has {len(data)} rows, plan expects {nb_local}")
    for q in sorted(plan.send):
        idx = plan.send[q]
        if len(idx) and idx.max() >= len(data):
            raise InvalidArgument("data is shorter than the halo plan requires")
        ctx.send(data[idx], q, _TAG_HALO)
    for q in sorted(plan.recv):
        idx = plan.recv[q]
        if len(idx) and idx.max() >= len(data):
            raise InvalidArgument("data is shorter than the halo plan requires")
        values = ctx.recv(q, _TAG_HALO)
        if values.shape[1:] != data.shape[1:]:
            raise InvalidArgument(f"rank {q} sent rows of shape {values.shape[1:]}, expected {data.shape[1:]}")
        data[idx] = values
    return data


@dataclass
class GatherScatterPlan:
    """Owned local indices sorted by global index, plus the root's view of all ranks."""

    rank: int
    root: int
    nb_local: int
    owned: np.ndarray
    owned_global: np.ndarray
    global_size: int
    rank_global: list | None = None  # root only: global indices owned by each rank

    def __eq__(self, other):
        if not isinstance(other, GatherScatterPlan):
            return NotImplemented
        return (
            (self.rank, self.root, self.nb_local, self.global_size) == (other.rank, other.root, other.nb_local, other.global_size)
            and np.array_equal(self.owned, other.owned)
            and np.array_equal(self.owned_global, other.owned_global)
        )


def build_gather_plan(global_index, ghost, ctx: RankContext, root=0) -> GatherScatterPlan:
    """Plan for gathering owned values to ``root`` in ascending global order.

    Raises
    ------
    PlanError
        A global index is owned twice, or the owned indices are not exactly 1..G.
    """
    global_index = np.asarray(global_index, dtype=np.int64)
    ghost = np.asarray(ghost, dtype=bool)
    if len(global_index) != len(ghost):
        raise InvalidArgument("global_index and ghost must have equal length")
    owned = np.flatnonzero(~ghost)
    owned = owned[np.argsort(global_index[owned], kind="stable")]
    og = global_index[owned]
    everyone = ctx.allgather(og)
    allg = np.concatenate(everyone)
    G = len(allg)
    counts = np.bincount(allg[(allg >= 1) & (allg <= G)], minlength=G + 1)
    if np.any(counts[1:] > 1):
        dup = int(np.flatnonzero(counts > 1)[0])
        raise PlanError(f"global index {dup} is owned by more than one rank")
    if np.any(counts[1:] != 1):
        raise PlanError(f"owned global indices are not a permutation of 1..{G}")
    return GatherScatterPlan(
        ctx.rank, root, len(global_index), owned, og, G, everyone if ctx.rank == root else None
    )


def gather(plan: GatherScatterPlan, data, ctx: RankContext):
    """Owned rows of every rank, ordered by global index, on the root (``None`` elsewhere)."""
    data = np.asarray(data)
    if len(data) != plan.nb_local:
        raise InvalidArgument(f"data has {len(data)} rows, plan expects {plan.nb_local}")
    parts = ctx.gather(data[plan.owned], plan.root)
    if ctx.rank != plan.root:
        return None
    out = np.empty((plan.global_size,) + data.shape[1:], dtype=data.dtype)
    for g, vals in zip(plan.rank_global, parts):
        out[g - 1] = vals
    return out


def scatter(plan: GatherScatterPlan, global_data, ctx: RankContext, out=None):
    """Distribute root rows to their owners; ghost rows of ``out`` are left untouched."""
    if ctx.rank == plan.root:
        global_data = np.asarray(global_data)
        if len(global_data) != plan.global_size:
            raise InvalidArgument(f"root array has {len(global_data)} rows, expected {plan.global_size}")
        for r, g in enumerate(plan.rank_global):
            if r != plan.root:
                ctx.send(global_data[g - 1], r, _TAG_SCATTER)
        mine = global_data[plan.owned_global - 1]
    else:
        mine = ctx.recv(plan.root, _TAG_SCATTER)
    if out is None:
        out = np.zeros((plan.nb_local,) + mine.shape[1:], dtype=mine.dtype)
    elif len(out) != plan.nb_local:
        raise InvalidArgument(f"output has {len(out)} rows, plan expects {plan.nb_local}")
    out[plan.owned] = mine
    return out


class SerialContext:
    """Single-rank stand-in for :class:`RankContext`, usable outside ``SimComm.run``."""

    rank = 0
    size = 1

    def __repr__(self):
        return "SerialContext()"

    def send(self, obj, dest, tag=0):
        raise DeadlockError("a single rank cannot send to itself without a matching receive")

    def recv(self, source, tag=0):
        raise DeadlockError("no message can arrive on a single rank")

    def allgather(self, obj):
        return [_copy_payload(obj)]

    def gather(self, obj, root=0):
        return [_copy_payload(obj)]

    def bcast(self, obj, root=0):
        return obj

    def alltoall(self, items):
        if len(items) != 1:
            raise InvalidArgument("alltoall needs one item per rank")
        return [_copy_payload(items[0])]

    def barrier(self):
        pass
