"""Bounded resident-chunk pool with prioritised, swap-atomic transitions.

A frame always renders one immutable :class:`ResidentSnapshot`.  Loads are
staged in pool slots and become visible only together with the unloads of
the chunks they replace, so every published snapshot is a cut.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from functools import cached_property
from types import MappingProxyType
from typing import Iterable, Mapping, NamedTuple

import numpy as np

from .errors import CapacityError, ConfigError
from .lod import ChunkRecord, LodPyramid, coarsest_cut, world_aabb
from .scene import ChunkKey, WorldConfig

MAX_SLOTS = 1 << 13


@dataclass(frozen=True)
class StreamingParams:
    streaming_factor: float = 2.0
    density: int = 2
    pool_capacity: int = MAX_SLOTS
    load_budget: int | None = None  # None: unlimited

    def __post_init__(self):
        if not self.streaming_factor > 0:
            raise ConfigError("streaming_factor must be positive")
        if not 1 <= self.density <= 8:
            raise ConfigError("density must lie in [1, 8]")
        if not 1 <= self.pool_capacity <= MAX_SLOTS:
            raise ConfigError(f"pool_capacity must lie in [1, {MAX_SLOTS}]")
        if self.load_budget is not None and self.load_budget < 0:
            raise ConfigError("load_budget must be non-negative")


@dataclass(frozen=True, eq=False)
class ResidentChunk:
    slot: int
    key: ChunkKey
    record: ChunkRecord
    origin: np.ndarray      # world-space min corner of the chunk region
    voxel_size: float       # world size of one voxel at this LOD
    aabb_lo: np.ndarray     # world-space occupied bounds
    aabb_hi: np.ndarray

    @property
    def nbytes(self) -> int:
        return self.record.nbytes

    @classmethod
    def make(cls, slot: int, record: ChunkRecord, config: WorldConfig) -> "ResidentChunk":
        key = record.key
        lo, hi = world_aabb(config, record.info)
        return cls(slot, key, record, config.chunk_origin(key),
                   config.voxel_size * (1 << key.lod), lo, hi)


@dataclass(frozen=True, eq=False)
class ResidentSnapshot:
    epoch: int
    slots: Mapping[int, ResidentChunk]
    config: WorldConfig | None = None

    @cached_property
    def keys(self) -> frozenset[ChunkKey]:
        return frozenset(c.key for c in self.slots.values())

    @cached_property
    def slot_of(self) -> dict[ChunkKey, int]:
        return {c.key: s for s, c in self.slots.items()}

    @property
    def resident_bytes(self) -> int:
        return sum(c.nbytes for c in self.slots.values())

    def __len__(self):
        return len(self.slots)

    @cached_property
    def packed(self):
        from .pipeline.packing import pack_snapshot

        return pack_snapshot(self)


def snapshot_of(records: Iterable[ChunkRecord], config: WorldConfig, epoch: int = 0) -> ResidentSnapshot:
    """A snapshot with ``records`` in slots ``0..n-1`` (no pool involved)."""
    slots = {}
    for i, rec in enumerate(sorted(records, key=lambda r: r.key)):
        if i >= MAX_SLOTS:
            raise CapacityError(f"more than {MAX_SLOTS} chunks")
        slots[i] = ResidentChunk.make(i, rec, config)
    return ResidentSnapshot(epoch, MappingProxyType(slots), config)


class PlanOp(NamedTuple):
    action: str  # "load" | "unload"
    key: ChunkKey
    group: int


def _distance(config: WorldConfig, key: ChunkKey, camera_pos) -> float:
    return float(np.linalg.norm(config.chunk_center(key) - np.asarray(camera_pos, dtype=np.float64)))


def _transition_ops(cur: set[ChunkKey], tgt: set[ChunkKey], camera_pos, config: WorldConfig) -> list[PlanOp]:
    loads = tgt - cur
    unloads = cur - tgt

    # swap groups: connected components of the overlap relation between loads and unloads;
    # loads that overlap nothing being unloaded fill gaps and share one group
    group_of: dict[ChunkKey, int] = {}
    groups: list[tuple[list[ChunkKey], list[ChunkKey]]] = []
    unload_lods = sorted({k.lod for k in unloads})
    load_lods = sorted({k.lod for k in loads})
    coarsening = {a for u in unloads for n in load_lods if n > u.lod and (a := u.ancestor(n)) in loads}
    fill_gid = None
    for key in sorted(loads):
        covering = [a for n in unload_lods if n > key.lod and (a := key.ancestor(n)) in unloads]
        gid = group_of.get(covering[0]) if covering else None
        if gid is None and not covering and key not in coarsening:
            if fill_gid is None:
                fill_gid = len(groups)
                groups.append(([], []))
            gid = fill_gid
        if gid is None:
            gid = len(groups)
            groups.append(([], []))
        groups[gid][0].append(key)
        group_of[key] = gid
        for a in covering:
            if a not in group_of:
                group_of[a] = gid
                groups[gid][1].append(a)
    orphans = []
    for key in sorted(unloads):
        if key in group_of:
            continue
        anc = [a for n in load_lods if n > key.lod and (a := key.ancestor(n)) in loads]
        if anc:
            gid = group_of[anc[0]]
            group_of[key] = gid
            groups[gid][1].append(key)
        else:
            orphans.append(key)

    order = sorted(loads, key=lambda k: (-k.lod, _distance(config, k, camera_pos), k))
    remaining = [len(g[0]) for g in groups]
    plan: list[PlanOp] = [PlanOp("unload", k, -1) for k in orphans]
    for key in order:
        gid = group_of[key]
        plan.append(PlanOp("load", key, gid))
        remaining[gid] -= 1
        if remaining[gid] == 0:
            plan.extend(PlanOp("unload", u, gid) for u in sorted(groups[gid][1]))
    return plan


def _check_peak(plan: list[PlanOp], cur: set[ChunkKey], staged: set[ChunkKey], capacity: int):
    """Peak occupancy (published + staged) while executing ``plan``."""
    loads = {op.key for op in plan if op.action == "load"}
    pre = staged & loads
    occupied = len(cur) + len(pre)
    peak = occupied
    for op in plan:
        if op.action == "load":
            if op.key not in pre:
                occupied += 1
        else:
            occupied -= 1
        peak = max(peak, occupied)
    if peak > capacity:
        raise CapacityError(f"transition needs {peak} slots at peak, pool capacity is {capacity}")


def _frontier(pyramid: LodPyramid, key: ChunkKey) -> list[ChunkKey]:
    """Highest stored chunks strictly below ``key`` (skipping pruned regions)."""
    out, stack = [], key.children() if key.lod > 0 else []
    while stack:
        k = stack.pop()
        if k not in pyramid.occupied_regions:
            continue
        if k in pyramid.infos:
            out.append(k)
        elif k.lod > 0:
            stack.extend(k.children())
    return out


def _step(pyramid: LodPyramid, cur: set[ChunkKey], tgt: set[ChunkKey]) -> set[ChunkKey]:
    """One move from ``cur`` towards ``tgt``: refine by one stored level, or coarsen directly."""
    if not cur:
        return set(coarsest_cut(pyramid))
    levels = pyramid.lod_count
    above_tgt = {k.ancestor(n) for k in tgt for n in range(k.lod + 1, levels)}
    nxt: set[ChunkKey] = set()
    for key in cur:
        if key in tgt:
            nxt.add(key)
        elif key in above_tgt:
            nxt.update(_frontier(pyramid, key))
        else:
            owner = next((a for n in range(key.lod + 1, levels) if (a := key.ancestor(n)) in tgt), None)
            if owner is not None:
                nxt.add(owner)
    # regions the current set leaves uncovered are filled directly
    above_nxt = {k.ancestor(n) for k in nxt for n in range(k.lod + 1, levels)}
    for key in tgt:
        if key not in nxt and key not in above_nxt and \
                not any(key.ancestor(n) in nxt for n in range(key.lod + 1, levels)):
            nxt.add(key)
    return nxt


def plan_transition(current: ResidentSnapshot | Iterable[ChunkKey], target: Iterable[ChunkKey], camera_pos,
                    config: WorldConfig, capacity: int = MAX_SLOTS,
                    staged: Iterable[ChunkKey] = (), pyramid: LodPyramid | None = None) -> list[PlanOp]:
    """Ordered loads/unloads taking ``current`` to ``target``.

    Loads are sorted by (LOD descending, camera distance ascending).  Each
    region that changes forms a swap group; the group's unloads follow its
    last load.  Given the ``pyramid``, the plan moves one stored level at a
    time (a parent is swapped for its children, never for a deeper set) and
    an empty pool starts from the coarsest cut, so a small load budget keeps
    publishing complete cuts.  Raises :class:`CapacityError` when the target,
    or the peak occupancy while executing the plan, exceeds ``capacity``.
    """
    cur = set(current.keys if isinstance(current, ResidentSnapshot) else current)
    tgt = set(target)
    staged = set(staged)
    if len(tgt) > capacity:
        raise CapacityError(f"target cut has {len(tgt)} chunks, pool capacity is {capacity}")
    if pyramid is None or not tgt:
        plan = _transition_ops(cur, tgt, camera_pos, config)
        _check_peak(plan, cur, staged, capacity)
        return plan
    plan: list[PlanOp] = []
    shift = 0
    state = set(cur)
    for _ in range(pyramid.lod_count + 2):
        if state == tgt:
            break
        nxt = _step(pyramid, state, tgt)
        if nxt == state:
            nxt = tgt
        ops = _transition_ops(state, nxt, camera_pos, config)
        plan.extend(op._replace(group=op.group + shift) if op.group >= 0 else op for op in ops)
        shift += 1 + max((op.group for op in ops), default=-1)
        state = nxt
    if state != tgt:
        ops = _transition_ops(state, tgt, camera_pos, config)
        plan.extend(op._replace(group=op.group + shift) if op.group >= 0 else op for op in ops)
    _check_peak(plan, cur, staged, capacity)
    return plan


class ChunkPool:
    """Slot allocator + staged loads + the published snapshot."""

    def __init__(self, pyramid: LodPyramid, capacity: int = MAX_SLOTS):
        if not 1 <= capacity <= MAX_SLOTS:
            raise ConfigError(f"capacity must lie in [1, {MAX_SLOTS}]")
        self.pyramid = pyramid
        self.capacity = capacity
        self.snapshot = ResidentSnapshot(0, MappingProxyType({}), pyramid.config)
        self._published: dict[int, ResidentChunk] = {}
        self._staged: dict[ChunkKey, ResidentChunk] = {}
        self._free = list(range(capacity))
        heapq.heapify(self._free)
        self._pending: list[PlanOp] = []
        self._members: dict[int, list[ChunkKey]] = {}
        self._last_load: dict[int, ChunkKey] = {}
        self.loads_performed = 0

    @property
    def staged_keys(self) -> frozenset[ChunkKey]:
        return frozenset(self._staged)

    @property
    def pending(self) -> list[PlanOp]:
        return list(self._pending)

    @property
    def occupied_slots(self) -> int:
        return len(self._published) + len(self._staged)

    @property
    def resident_bytes(self) -> int:
        """Bytes held by published and staged chunks."""
        return sum(c.nbytes for c in self._published.values()) + sum(c.nbytes for c in self._staged.values())

    def plan(self, target: Iterable[ChunkKey], camera_pos) -> list[PlanOp]:
        return plan_transition(self.snapshot, target, camera_pos, self.pyramid.config,
                               self.capacity, self._staged, self.pyramid)

    def _alloc(self) -> int:
        if not self._free:
            raise CapacityError("no free pool slot")
        return heapq.heappop(self._free)

    def _release(self, slot: int):
        heapq.heappush(self._free, slot)

    def set_plan(self, plan: list[PlanOp]):
        """Replace the pending plan; staged chunks it no longer loads are dropped."""
        wanted = {op.key for op in plan if op.action == "load"}
        for key in [k for k in self._staged if k not in wanted]:
            self._release(self._staged.pop(key).slot)
        self._pending = list(plan)
        self._members: dict[int, list[ChunkKey]] = {}
        self._last_load: dict[int, ChunkKey] = {}
        for op in self._pending:
            if op.action == "load":
                self._members.setdefault(op.group, []).append(op.key)
                self._last_load[op.group] = op.key

    def apply(self, plan: list[PlanOp] | None = None, load_budget: int | None = None) -> ResidentSnapshot:
        """Run pending ops, at most ``load_budget`` new loads; publish epoch + 1.

        A swap group's staged loads are published in the same call as its
        unloads, which directly follow the group's last load.
        """
        if plan is not None:
            self.set_plan(plan)
        budget = float("inf") if load_budget is None else load_budget
        by_key = {c.key: s for s, c in self._published.items()}
        i = 0
        while i < len(self._pending):
            op = self._pending[i]
            if op.action == "load":
                if op.key not in self._staged:
                    if budget <= 0:
                        break
                    record = self.pyramid.record(op.key)
                    self._staged[op.key] = ResidentChunk.make(self._alloc(), record, self.pyramid.config)
                    budget -= 1
                    self.loads_performed += 1
                if self._last_load[op.group] == op.key:
                    for key in self._members[op.group]:
                        chunk = self._staged.pop(key)
                        self._published[chunk.slot] = chunk
                        by_key[key] = chunk.slot
            else:
                slot = by_key.pop(op.key, None)
                if slot is not None:
                    del self._published[slot]
                    self._release(slot)
            i += 1
        self._pending = self._pending[i:]
        self.snapshot = ResidentSnapshot(self.snapshot.epoch + 1, MappingProxyType(dict(self._published)),
                                         self.pyramid.config)
        return self.snapshot


def apply(pool: ChunkPool, plan: list[PlanOp] | None, load_budget: int | None) -> ResidentSnapshot:
    return pool.apply(plan, load_budget)
