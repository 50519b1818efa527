"""Split the index set into infinitely many conditionally convergable classes.

The schedule is a triangular sweep over a stream of non-negative weights:
round ``r`` visits classes ``1..r`` in order, and each visit appends the next
consecutive stream elements to the visited class until its weight sum has
grown by at least ``threshold``.  A class is seeded, on its first visit, with
the smallest element not yet assigned, so every element is reached after
finitely many rounds.

Positive-or-zero terms and negative terms are swept independently and the
class ``I_t`` is the union of the two class-``t`` pieces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

from .errors import PartitionExhausted
from .series import SeriesSource

DEFAULT_THRESHOLD = 1.0
DEFAULT_MAX_HORIZON = 1 << 26


def split_divergent(betas: Iterable[float], threshold: float = DEFAULT_THRESHOLD) -> Iterator[int]:
    """Yield the class (1-based) of each successive weight in ``betas``.

    Lazy reference form of the sweep.  Every visit takes at least one
    element; zero weights are absorbed into the visit that meets them.
    """
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    it = iter(betas)
    running = 0.0
    r = 1
    while True:
        for t in range(1, r + 1):
            goal = running + threshold
            while True:
                try:
                    b = next(it)
                except StopIteration:
                    return
                if b < 0:
                    raise ValueError("weights must be non-negative")
                running = running + b
                yield t
                if running >= goal:
                    break
        r += 1


class _Sweep:
    """Incremental array form of :func:`split_divergent`.

    Uses a sequential cumulative sum so the comparisons match the lazy
    generator exactly.
    """

    def __init__(self, threshold: float):
        self.threshold = threshold
        self.cs = np.zeros(1)
        self.owner = np.zeros(0, dtype=np.int32)
        self.blocks: list[tuple[int, int, int]] = []  # (t, start, stop), completed visits
        self.pos = 0
        self.r = 1
        self.t = 1
        self.vstart = 0

    def __len__(self):
        return len(self.owner)

    def extend(self, betas: np.ndarray) -> None:
        if len(betas) == 0:
            return
        if np.any(betas < 0):
            raise ValueError("weights must be non-negative")
        tail = np.cumsum(np.concatenate(([self.cs[-1]], betas)))[1:]
        self.cs = np.concatenate((self.cs, tail))
        self.owner = np.concatenate((self.owner, np.zeros(len(betas), dtype=np.int32)))
        self._advance()

    def _advance(self) -> None:
        size = len(self.owner)
        while True:
            goal = self.cs[self.vstart] + self.threshold
            j = int(np.searchsorted(self.cs, goal, side="left"))
            j = max(j, self.vstart + 1)
            if j > size:
                self.owner[self.pos:size] = self.t
                self.pos = size
                return
            self.owner[self.pos:j] = self.t
            self.blocks.append((self.t, self.vstart, j))
            self.pos = j
            self.vstart = j
            if self.t == self.r:
                self.r += 1
                self.t = 1
            else:
                self.t += 1

    def open_block(self):
        if self.pos > self.vstart:
            return (self.t, self.vstart, self.pos)
        return None


@dataclass
class SignedStream:
    """Ascending ``(index, value)`` iterators over the non-negative and negative terms."""

    positive: Iterator[tuple[int, float]]
    negative: Iterator[tuple[int, float]]


def signed_stream(indices: Iterable[int], source: SeriesSource) -> SignedStream:
    """Split an ascending index stream by the sign of ``source`` lazily."""
    it = iter(indices)
    queues = {True: [], False: []}
    heads = {True: 0, False: 0}

    def pull(want_pos: bool):
        while True:
            q = queues[want_pos]
            if heads[want_pos] < len(q):
                item = q[heads[want_pos]]
                heads[want_pos] += 1
                yield item
                continue
            try:
                m = next(it)
            except StopIteration:
                return
            v = source(m)
            queues[v >= 0].append((int(m), v))

    return SignedStream(pull(True), pull(False))


@dataclass
class BlockMeta:
    """Block boundaries (inclusive series indices) of one class, per sign."""

    t: int
    positive: list[tuple[int, int]] = field(default_factory=list)
    negative: list[tuple[int, int]] = field(default_factory=list)


class IndexPartition:
    """Lazy disjoint partition ``N = I_1 ∪ I_2 ∪ ...`` of a series' indices.

    Everything up to the current horizon is materialised; queries grow the
    horizon geometrically (factor 1.5), up to ``max_horizon``.
    """

    def __init__(self, source: SeriesSource, threshold: float = DEFAULT_THRESHOLD,
                 max_horizon: int = DEFAULT_MAX_HORIZON, initial_horizon: int = 1024):
        if threshold <= 0:
            raise ValueError("threshold must be positive")
        self.source = source
        self.threshold = threshold
        self.max_horizon = max_horizon
        self.horizon = 0
        self.a = np.zeros(0)
        self.pidx = np.zeros(0, dtype=np.int64)
        self.nidx = np.zeros(0, dtype=np.int64)
        self._psweep = _Sweep(threshold)
        self._nsweep = _Sweep(threshold)
        self._owner = np.zeros(0, dtype=np.int32)
        self._cache: dict = {}
        self._grow_to(min(initial_horizon, max_horizon))

    # -- growth -------------------------------------------------------------
    def _grow_to(self, horizon: int) -> None:
        if horizon <= self.horizon:
            return
        if horizon > self.max_horizon:
            raise PartitionExhausted(
                f"partition of {self.source.name!r} needs horizon {horizon} > max_horizon {self.max_horizon}")
        new = self.source.terms(self.horizon + 1, horizon + 1)
        if not np.all(np.isfinite(new)):
            raise ValueError(f"series {self.source.name!r} produced non-finite terms")
        idx = np.arange(self.horizon + 1, horizon + 1, dtype=np.int64)
        nonneg = new >= 0
        self.a = np.concatenate((self.a, new))
        self.pidx = np.concatenate((self.pidx, idx[nonneg]))
        self.nidx = np.concatenate((self.nidx, idx[~nonneg]))
        self._psweep.extend(new[nonneg])
        self._nsweep.extend(-new[~nonneg])
        self.horizon = horizon
        owner = np.empty(horizon, dtype=np.int32)
        owner[self.pidx - 1] = self._psweep.owner
        owner[self.nidx - 1] = self._nsweep.owner
        self._owner = owner
        self._cache.clear()

    def _grow(self) -> None:
        if self.horizon >= self.max_horizon:
            raise PartitionExhausted(
                f"partition of {self.source.name!r} exhausted max_horizon {self.max_horizon}")
        self._grow_to(min(self.horizon + max(1024, self.horizon // 2), self.max_horizon))

    # -- queries ------------------------------------------------------------
    @property
    def rounds(self) -> int:
        """Number of classes seeded so far, per sign (min over both signs)."""
        return min(self._psweep.r, self._nsweep.r)

    def membership(self, m: int) -> int:
        """The class ``t`` with ``m ∈ I_t``."""
        if m < 1:
            raise IndexError("indices start at 1")
        while self.horizon < m:
            self._grow()
        return int(self._owner[m - 1])

    def memberships(self, horizon: int) -> np.ndarray:
        """Classes of indices ``1..horizon`` as an array."""
        while self.horizon < horizon:
            self._grow()
        return self._owner[:horizon].copy()

    def _class(self, kind: str, t: int) -> np.ndarray:
        key = (kind, t)
        hit = self._cache.get(key)
        if hit is None:
            if kind == "+":
                hit = self.pidx[self._psweep.owner == t]
            elif kind == "-":
                hit = self.nidx[self._nsweep.owner == t]
            else:
                hit = np.nonzero(self._owner == t)[0].astype(np.int64) + 1
            self._cache[key] = hit
        return hit

    def sign_indices(self, t: int, sign: int, count: int) -> np.ndarray:
        """First ``count`` indices of ``P_t`` (sign=+1) or ``N_t`` (sign=-1)."""
        kind = "+" if sign > 0 else "-"
        while len(self._class(kind, t)) < count:
            self._grow()
        return self._class(kind, t)[:count]

    def members(self, t: int, count: int) -> np.ndarray:
        """The ``count`` smallest elements of ``I_t`` in increasing order."""
        while len(self._class("all", t)) < count:
            self._grow()
        return self._class("all", t)[:count]

    def enumerate(self, t: int, i: int) -> int:
        """The ``i``-th smallest element (1-based) of ``I_t``."""
        if i < 1:
            raise IndexError("enumeration is 1-based")
        return int(self.members(t, i)[i - 1])

    def meta(self, t: int) -> BlockMeta:
        """Block boundaries of ``P_t`` and ``N_t`` found so far."""
        out = BlockMeta(t)
        for sweep, idx, dest in ((self._psweep, self.pidx, out.positive),
                                 (self._nsweep, self.nidx, out.negative)):
            blocks = list(sweep.blocks)
            ob = sweep.open_block()
            if ob is not None:
                blocks.append(ob)
            for bt, start, stop in blocks:
                if bt == t:
                    dest.append((int(idx[start]), int(idx[stop - 1])))
        return out

    def values(self, idx) -> np.ndarray:
        idx = np.asarray(idx, dtype=np.int64)
        if len(idx) and int(idx.max()) > self.horizon:
            self._grow_to(min(max(int(idx.max()), 2 * self.horizon), self.max_horizon))
            if int(idx.max()) > self.horizon:
                self._grow_to(int(idx.max()))
        return self.a[idx - 1]

    def stream(self, t: int) -> SignedStream:
        """Lazy ascending ``(index, value)`` streams over ``P_t`` and ``N_t``.

        The horizon only grows when a stream has used up what is materialised,
        so nested partitions do not over-request their parents.
        """

        def gen(kind: str):
            have = 0
            while True:
                cls = self._class(kind, t)
                if len(cls) <= have:
                    self._grow()
                    continue
                fresh = cls[have:]
                yield from zip(fresh.tolist(), self.a[fresh - 1].tolist())
                have = len(cls)

        return SignedStream(gen("+"), gen("-"))

    def subseries(self, t: int) -> SeriesSource:
        """The subseries ``(a_m)_{m ∈ I_t}`` in increasing index order, as a new source."""
        parent = self.source

        def vector(idx: np.ndarray) -> np.ndarray:
            if len(idx) == 0:
                return np.zeros(0)
            mem = self.members(t, int(idx.max()))
            return self.a[mem[idx - 1] - 1]

        def term(i: int) -> float:
            return float(vector(np.array([i], dtype=np.int64))[0])

        def origin(idx: np.ndarray) -> np.ndarray:
            if len(idx) == 0:
                return np.zeros(0, dtype=np.int64)
            mem = self.members(t, int(np.max(idx)))
            return parent.root_index(mem[np.asarray(idx) - 1])

        return SeriesSource(f"{parent.name}|I{t}", term, vector, origin)


def split_conditionally_convergable(source: SeriesSource, threshold: float = DEFAULT_THRESHOLD,
                                    max_horizon: int = DEFAULT_MAX_HORIZON) -> IndexPartition:
    """Partition the indices of a (witnessed) conditionally convergable series.

    ``P = {m : a_m >= 0}`` and ``N = {m : a_m < 0}`` are swept independently
    with weights ``a_m`` and ``-a_m``; ``I_t = P_t ∪ N_t``.
    """
    return IndexPartition(source, threshold=threshold, max_horizon=max_horizon)


def audit_partition(partition: IndexPartition, horizon: int) -> list[str]:
    """Exhaustive disjointness / coverage / min-element audit up to ``horizon``.

    Returns a list of violation messages (empty when clean).
    """
    problems = []
    owner = partition.memberships(horizon)
    if np.any(owner < 1):
        problems.append("unassigned index below horizon")
    tmax = int(owner.max()) if horizon else 0
    seen = np.zeros(horizon, dtype=np.int32)
    for t in range(1, tmax + 1):
        mem = np.nonzero(owner == t)[0] + 1
        seen[mem - 1] += 1
        cls = partition._class("all", t)
        if not np.array_equal(cls[cls <= horizon], mem):
            problems.append(f"class {t}: enumeration disagrees with membership")
        if len(mem):
            earlier = owner < t
            rest = np.nonzero(~earlier)[0]
            if len(rest) and rest[0] + 1 != mem[0]:
                problems.append(f"class {t}: min-element rule violated")
    if np.any(seen != 1):
        problems.append("index covered zero or multiple times")
    return problems


def class_weight_sums(partition: IndexPartition, t: int, horizon: int) -> tuple[float, float]:
    """Weight sums of ``P_t`` and ``N_t`` restricted to indices ``<= horizon``."""
    owner = partition.memberships(horizon)
    a = partition.a[:horizon]
    mask = owner == t
    return math.fsum(a[mask & (a >= 0)]), -math.fsum(a[mask & (a < 0)])
