"""Truncated construction of multi-index rearrangements with prescribed iterated sums.

A build of dimension ``n`` is a :class:`Block`.  Its slab ``(d, mu)`` is the
region where coordinate ``mu`` equals ``d+1``, earlier coordinates are at
least ``d+2`` and later ones at least ``d+1``; it is filled from the class
``I_{n*d+mu}`` of the block's partition by a sub-build of dimension ``n-1``
(a greedy line, a :class:`Leaf`, when ``n-1 == 1``).  Sub-builds realise
constant target sequences, so each of their iterated sums is carried by
the first layer and later layers contribute exactly zero.

Truncation
----------
Every infinite iterated sum is evaluated on the tree, never by scanning a
box of indices.  A region is split into slab pieces; a piece that is a whole
sub-build contributes its recorded target (bookkeeping) or the sum of its
built layers (numeric); a piece that is a whole greedy line contributes its
target or its achieved sum; pinned positions contribute the assigned term.
The numeric value therefore differs from the bookkeeping value only through
the greedy lines it uses in full, which is what the reported bound adds up.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .errors import DepthExceeded, MissingStage, PhaseStarvation
from .partition import DEFAULT_MAX_HORIZON, DEFAULT_THRESHOLD, IndexPartition
from .perms import Permutation, PermTargets, all_permutations, reduce_fixing
from .riemann import ConvergenceReport, greedy_to_value
from .series import SeriesSource

BOOKKEEPING = "bookkeeping"
NUMERIC = "numeric"
EXPANDED = "expanded"  # bookkeeping, but sub-builds are unfolded down to line targets


@dataclass
class TruncationBudget:
    """How much of the infinite construction to materialise.

    ``depth`` is the number of completed layers of the top build;
    ``slab_budget`` the number of terms each greedy line consumes;
    ``sub_depths`` maps a sub-build dimension to its layer count (defaults
    to the parent's depth, the least that keeps every section a verifier
    visits inside built layers).
    """

    depth: int
    slab_budget: int
    sub_depths: dict[int, int] = field(default_factory=dict)
    threshold: float = DEFAULT_THRESHOLD
    max_horizon: int = DEFAULT_MAX_HORIZON

    def __post_init__(self):
        if self.depth < 1 or self.slab_budget < 1:
            raise ValueError("depth and slab_budget must be positive")
        if any(v < 1 for v in self.sub_depths.values()):
            raise ValueError("sub-build depths must be positive")

    def depth_for(self, dim: int, parent_depth: int) -> int:
        return self.sub_depths.get(dim, parent_depth)


@dataclass(eq=False)
class Leaf:
    """A one-dimensional greedy line."""

    target: float
    indices: np.ndarray
    values: list[float]
    report: ConvergenceReport
    local: Optional[np.ndarray] = None  # indices within the owning block's series
    coords: Optional[list[tuple[int, ...]]] = None

    dim = 1

    def __len__(self):
        return len(self.values)


@dataclass(eq=False)
class Slab:
    d: int
    mu: int
    index_set: int
    child: Union["Block", Leaf]
    section_targets: dict[Permutation, float]
    claims: dict[Permutation, list[float]]
    corrections: dict[Permutation, float]
    residuals: dict[Permutation, float]


@dataclass(eq=False)
class Block:
    dim: int
    depth: int
    targets: PermTargets
    constant: Optional[dict[Permutation, float]] = None
    slabs: dict[tuple[int, int], Slab] = field(default_factory=dict)
    partition: Optional[IndexPartition] = None

    def leaves(self):
        for slab in self.slabs.values():
            if isinstance(slab.child, Leaf):
                yield slab.child
            else:
                yield from slab.child.leaves()


Node = Union[Block, Leaf]


# -- coordinates ---------------------------------------------------------

def child_coord(i: int, mu: int) -> int:
    return i if i < mu else i - 1


def parent_coord(r: int, mu: int) -> int:
    return r if r < mu else r + 1


def offset(i: int, d: int, mu: int) -> int:
    """Parent value minus child value along parent coordinate ``i``."""
    return d + 1 if i < mu else d


def slab_of(j: tuple[int, ...]) -> tuple[int, int]:
    """The slab ``(d, mu)`` containing multi-index ``j``: smallest value, first position."""
    low = min(j)
    return low - 1, j.index(low) + 1


def lift(local: tuple[int, ...], d: int, mu: int) -> tuple[int, ...]:
    """Map a sub-build multi-index into its parent block's coordinates."""
    n = len(local) + 1
    out = []
    for i in range(1, n + 1):
        if i == mu:
            out.append(d + 1)
        else:
            out.append(local[child_coord(i, mu) - 1] + offset(i, d, mu))
    return tuple(out)


def delta(sigma: Permutation, nu: int, mu: int, d: int) -> int:
    """Lower summation limit of variable ``j_nu`` in slab ``(d, mu)`` for order ``sigma``."""
    if sigma(mu) != 1:
        raise ValueError(f"delta needs sigma(mu) = 1, got sigma({mu}) = {sigma(mu)}")
    if nu == sigma(mu):
        raise ValueError("delta is not defined for nu = sigma(mu)")
    before = {sigma(i) for i in range(1, mu)}
    after = {sigma(i) for i in range(mu + 1, sigma.n + 1)}
    if nu in before:
        return d + 2
    if nu in after:
        return d + 1
    raise ValueError(f"nu={nu} is not a variable of Sym({sigma.n})")


def exchange_permutation(sigma: Permutation, lam: int, mu: int) -> Permutation:
    """``tau`` agreeing with ``sigma`` except ``tau(lam) = sigma(mu)`` and ``tau(mu) = sigma(lam)``."""
    imgs = list(sigma.images)
    imgs[lam - 1], imgs[mu - 1] = sigma(mu), sigma(lam)
    return Permutation(tuple(imgs))


# -- region evaluation -----------------------------------------------------

class Tally:
    """Signed multiset of contributions gathered while walking a region."""

    def __init__(self):
        self.exact: list[float] = []
        self.full: Counter = Counter()
        self.single: Counter = Counter()

    def numeric(self) -> tuple[float, float, int]:
        """``(value, bound, term_count)`` using achieved sums for full lines."""
        terms, bound, count = [], 0.0, 0
        for leaf, mult in self.full.items():
            if mult:
                terms.extend(mult * v for v in leaf.values)
                bound += abs(mult) * leaf.report.error_bound
                count += abs(mult) * len(leaf)
        for (leaf, pos), mult in self.single.items():
            if mult:
                terms.append(mult * leaf.values[pos - 1])
                count += abs(mult)
        return math.fsum(terms + self.exact), bound, count

    def exact_value(self) -> float:
        terms = list(self.exact)
        for (leaf, pos), mult in self.single.items():
            if mult:
                terms.append(mult * leaf.values[pos - 1])
        return math.fsum(terms)

    def weights(self) -> Counter:
        """Per-entry multiplicities ``(leaf, position) -> int`` of a numeric walk."""
        out = Counter()
        for leaf, mult in self.full.items():
            if mult:
                for p in range(1, len(leaf) + 1):
                    out[(leaf, p)] += mult
        for key, mult in self.single.items():
            if mult:
                out[key] += mult
        return out


def _pieces(node: Block, pins: dict[int, int]):
    """Slabs meeting the region where ``pins`` are fixed and other coordinates are free."""
    m0 = min(pins.values())
    p0 = min(i for i, v in pins.items() if v == m0)
    free = [i for i in range(1, node.dim + 1) if i not in pins]
    for d in range(m0):
        if d + 1 < m0:
            mus = free
        else:
            mus = [mu for mu in free if mu < p0] + [p0]
        for mu in mus:
            yield d, mu


def collect(node: Node, order: tuple[int, ...], pins: dict[int, int], sign: int,
            tally: Tally, mode: str, skip: Optional[tuple[int, int]] = None) -> None:
    """Accumulate the iterated sum over ``{pinned coordinates fixed}``.

    ``order`` lists the free coordinates from outermost to innermost.
    ``skip`` omits one slab of ``node`` (used for the not-yet-built core).
    """
    if isinstance(node, Leaf):
        if pins:
            p = pins[1]
            if p > len(node):
                raise DepthExceeded(f"position {p} lies beyond a greedy line of length {len(node)}")
            tally.single[(node, p)] += sign
        elif mode == NUMERIC:
            tally.full[node] += sign
        else:
            tally.exact.append(sign * node.target)
        return
    if not pins:
        if node.constant is None:
            raise DepthExceeded("the full iterated sum of the top build is not a finite object")
        if mode == BOOKKEEPING:
            tally.exact.append(sign * node.constant[Permutation.from_order(order)])
            return
        q = order[0]
        for c in range(1, node.depth + 1):
            collect(node, order[1:], {q: c}, sign, tally, mode)
        return
    for d, mu in _pieces(node, pins):
        if (d, mu) == skip:
            continue
        slab = node.slabs.get((d, mu))
        if slab is None:
            if d >= node.depth:
                raise DepthExceeded(f"region reaches layer {d + 1} of a build with {node.depth} layers")
            raise MissingStage(f"slab {(d, mu)} has not been recorded")
        cpins = {child_coord(i, mu): v - offset(i, d, mu) for i, v in pins.items() if i != mu}
        corder = tuple(child_coord(i, mu) for i in order if i != mu)
        collect(slab.child, corder, cpins, sign, tally, mode)


def collect_box(node: Node, order: tuple[int, ...], pins: dict[int, int], lows: dict[int, int],
                sign: int, tally: Tally, mode: str) -> None:
    """Like :func:`collect` with lower limits ``lows`` on some free coordinates."""
    lows = {i: lo for i, lo in lows.items() if lo > 1}
    if not lows:
        collect(node, order, pins, sign, tally, mode)
        return
    x, lo = next(iter(lows.items()))
    rest = {i: v for i, v in lows.items() if i != x}
    collect_box(node, order, pins, rest, sign, tally, mode)
    sub_order = tuple(i for i in order if i != x)
    for v in range(1, lo):
        collect_box(node, sub_order, {**pins, x: v}, rest, -sign, tally, mode)


# -- claim series ------------------------------------------------------------

@dataclass(frozen=True)
class ClaimPiece:
    """One of the ``delta(sigma, l) - 1`` series the claim splits into."""

    value: int  # the fixed value of j_l
    case: int  # 1: coordinate of j_l precedes mu, 2: it follows mu
    tau: Permutation
    stage: tuple[int, int]  # (depth, mu-limit) of the stage that settled it


def claim_stages(sigma: Permutation, mu: int, d: int, l: int) -> list[ClaimPiece]:
    """Which earlier stage settles each piece of the claim series for ``l``.

    Case 1 pieces are inner series of stage ``B_{c-1, lam+1}``, case 2
    pieces of stage ``A_c``; ``tau`` exchanges the roles of ``lam`` and
    ``mu``.  Stage ``A_c`` is written ``(c, 0)``.
    """
    if not 2 <= l <= sigma.n:
        raise ValueError(f"l must lie in 2..{sigma.n}")
    lam = sigma.inverse()(l)
    tau = exchange_permutation(sigma, lam, mu)
    top = delta(sigma, l, mu, d) - 1
    case = 1 if lam < mu else 2
    return [ClaimPiece(c, case, tau, (c - 1, lam + 1) if case == 1 else (c, 0)) for c in range(1, top + 1)]


def _stage_recorded(block: Block, stage: tuple[int, int]) -> bool:
    depth, mu_lim = stage
    if mu_lim == 0:
        return all((dd, m) in block.slabs for dd in range(depth) for m in range(1, block.dim + 1))
    return (all((dd, m) in block.slabs for dd in range(depth) for m in range(1, block.dim + 1))
            and all((depth, m) in block.slabs for m in range(1, mu_lim)))


def claim_tally(block: Block, sigma: Permutation, mu: int, d: int, l: int, mode: str) -> Tally:
    """Walk the claim region for ``l`` (the part of section ``mu = d+1`` with ``j_l`` small)."""
    for piece in claim_stages(sigma, mu, d, l):
        if not _stage_recorded(block, piece.stage):
            raise MissingStage(f"claim piece j_{l}={piece.value} needs stage {piece.stage}")
    order = sigma.order()
    tally = Tally()
    lam = order[l - 1]
    free = tuple(order[i - 1] for i in range(2, block.dim + 1) if i != l)
    lows = {order[i - 1]: delta(sigma, i, mu, d) for i in range(l + 1, block.dim + 1)}
    for c in range(1, delta(sigma, l, mu, d)):
        collect_box(block, free, {mu: d + 1, lam: c}, lows, 1, tally, mode)
    return tally


def claim_series_value(block: Block, sigma: Permutation, mu: int, d: int, l: int) -> float:
    """Exact value of the claim series, from recorded targets and assigned terms."""
    return claim_tally(block, sigma, mu, d, l, BOOKKEEPING).exact_value()


# -- construction ------------------------------------------------------------

def _leaf_from(result, source: SeriesSource) -> Leaf:
    local = np.asarray(result.ordering, dtype=np.int64)
    return Leaf(result.report.target, source.root_index(local), result.values, result.report, local)


def fill_slab(block: Block, d: int, mu: int, budget: TruncationBudget, path: tuple = ()) -> Slab:
    """Build slab ``(d, mu)`` of ``block`` from class ``I_{n*d+mu}``."""
    n = block.dim
    if (d, mu) in block.slabs:
        raise ValueError(f"slab {(d, mu)} already built")
    for m in range(1, mu):
        if (d, m) not in block.slabs:
            raise MissingStage(f"slab {(d, mu)} needs slab {(d, m)} first")
    if d > 0 and not all((d - 1, m) in block.slabs for m in range(1, n + 1)):
        raise MissingStage(f"slab {(d, mu)} needs layer {d} complete")
    t = n * d + mu
    sigmas = [s for s in all_permutations(n) if s(mu) == 1]
    section, claims, corrections, residuals = {}, {}, {}, {}
    for sigma in sigmas:
        section[sigma] = block.targets.step(sigma, d + 1)
        tallies = [claim_tally(block, sigma, mu, d, l, BOOKKEEPING) for l in range(2, n + 1)]
        claims[sigma] = [tl.exact_value() for tl in tallies]
        joint = Tally()
        for tl in tallies:
            joint.exact.extend(tl.exact)
            joint.single.update(tl.single)
        corrections[sigma] = joint.exact_value()
        residuals[sigma] = section[sigma] - corrections[sigma]
    here = path + ((d, mu),)
    try:
        child = _fill_child(block, d, mu, t, sigmas, residuals, budget, here)
    except PhaseStarvation as exc:
        if exc.slab is not None:
            raise
        raise type(exc)(str(exc), slab=here) from exc
    slab = Slab(d, mu, t, child, section, claims, corrections, residuals)
    block.slabs[(d, mu)] = slab
    return slab


def _fill_child(block: Block, d: int, mu: int, t: int, sigmas, residuals, budget, here) -> Node:
    n, partition = block.dim, block.partition
    if n == 2:
        (sigma,) = sigmas
        res = greedy_to_value(partition.stream(t), partition.source, residuals[sigma], budget.slab_budget)
        if res.report.starved:
            raise PhaseStarvation(f"class I_{t} ran out of terms after {res.report.used}", slab=here)
        return _leaf_from(res, partition.source)
    sub_part = IndexPartition(partition.subseries(t), threshold=budget.threshold,
                              max_horizon=budget.max_horizon)
    const = {reduce_fixing(s, mu): r for s, r in residuals.items()}
    return _build_block(n - 1, sub_part, PermTargets.constants(const),
                        budget.depth_for(n - 1, block.depth), budget, const, here)


def _build_block(n: int, partition: IndexPartition, targets: PermTargets, depth: int,
                 budget: TruncationBudget, constant=None, path: tuple = ()) -> Block:
    block = Block(n, depth, targets, constant, partition=partition)
    for d in range(depth):
        for mu in range(1, n + 1):
            fill_slab(block, d, mu, budget, path)
    return block


@dataclass
class Assignment:
    """A finite truncation of a rearrangement ``b(j_1, ..., j_n) = a_m``.

    ``entries`` maps multi-indices to root series indices and ``values`` to
    the terms.  Builds also carry the construction tree (``root``), which is
    what gives infinite iterated sums a meaning on the truncation.
    """

    n: int
    entries: dict[tuple[int, ...], int]
    values: dict[tuple[int, ...], float]
    slab: dict[tuple[int, ...], tuple[int, int]] = field(default_factory=dict)
    root: Optional[Block] = None
    targets: Optional[PermTargets] = None

    @property
    def depth(self) -> int:
        return self.root.depth if self.root is not None else 0

    @property
    def slabs(self) -> dict[tuple[int, int], Slab]:
        return self.root.slabs if self.root is not None else {}

    @property
    def partition(self) -> Optional[IndexPartition]:
        return self.root.partition if self.root is not None else None

    def leaves(self):
        return self.root.leaves() if self.root is not None else iter(())

    @classmethod
    def from_values(cls, n: int, values: dict[tuple[int, ...], float]) -> "Assignment":
        """A hand-made assignment with no construction tree (index = insertion order)."""
        vals = {tuple(k): float(v) for k, v in values.items()}
        for k in vals:
            if len(k) != n or min(k) < 1:
                raise ValueError(f"bad multi-index {k} for n={n}")
        entries = {k: i for i, k in enumerate(vals, start=1)}
        return cls(n, entries, vals, {k: slab_of(k) for k in vals})


def _assign_coords(node: Node, to_top) -> None:
    if isinstance(node, Leaf):
        node.coords = [to_top((p,)) for p in range(1, len(node) + 1)]
        return
    for (d, mu), slab in node.slabs.items():
        def inner(local, d=d, mu=mu):
            return to_top(lift(local, d, mu))
        _assign_coords(slab.child, inner)


def assemble(root: Block, targets: PermTargets) -> Assignment:
    """Flatten a construction tree into an :class:`Assignment`."""
    entries, values, slabs = {}, {}, {}
    for (d, mu), slab in root.slabs.items():
        _assign_coords(slab.child, lambda local, d=d, mu=mu: lift(local, d, mu))
        leaves = [slab.child] if isinstance(slab.child, Leaf) else list(slab.child.leaves())
        for leaf in leaves:
            for j, m, v in zip(leaf.coords, leaf.indices.tolist(), leaf.values):
                if j in entries:
                    raise AssertionError(f"multi-index {j} assigned twice")
                entries[j] = m
                values[j] = v
                slabs[j] = (d, mu)
    return Assignment(root.dim, entries, values, slabs, root, targets)


def build_nd(n: int, source: SeriesSource, partition: Optional[IndexPartition], targets: PermTargets,
             budget: TruncationBudget) -> Assignment:
    """Run the layered construction for ``n >= 2``: layers ``d = 0..depth-1``, slabs ``mu = 1..n``."""
    if n < 2:
        raise ValueError("build_nd needs n >= 2")
    if targets.n != n:
        raise ValueError("targets dimension does not match n")
    if partition is None:
        partition = IndexPartition(source, threshold=budget.threshold, max_horizon=budget.max_horizon)
    root = _build_block(n, partition, targets, budget.depth, budget)
    return assemble(root, targets)


def build_2d(source: SeriesSource, partition: Optional[IndexPartition], targets: PermTargets,
             budget: TruncationBudget) -> Assignment:
    """The explicit two-dimensional procedure: row ``j`` from ``I_{2j-1}``, column ``k`` from ``I_{2k}``.

    Row ``j`` (entries ``b(j, k)``, ``k >= j``) targets
    ``s_j - s_{j-1} - sum_{k<j} b(j, k)`` for the identity order; column
    ``k`` (entries ``b(j, k)``, ``j > k``) targets
    ``t_k - t_{k-1} - sum_{j<=k} b(j, k)`` for the swapped order.
    """
    if targets.n != 2:
        raise ValueError("build_2d needs n = 2 targets")
    if partition is None:
        partition = IndexPartition(source, threshold=budget.threshold, max_horizon=budget.max_horizon)
    ident, swap = Permutation.of(1, 2), Permutation.of(2, 1)
    rows: dict[int, Leaf] = {}
    cols: dict[int, Leaf] = {}

    def b(j: int, k: int) -> float:
        if k >= j:
            return rows[j].values[k - j]
        return cols[k].values[j - k - 1]

    root = Block(2, budget.depth, targets, partition=partition)
    for j in range(1, budget.depth + 1):
        for kind, t, sigma in (("row", 2 * j - 1, ident), ("col", 2 * j, swap)):
            earlier = [b(j, k) for k in range(1, j)] if kind == "row" else [b(i, j) for i in range(1, j + 1)]
            step = targets.step(sigma, j)
            target = step - math.fsum(earlier)
            res = greedy_to_value(partition.stream(t), partition.source, target, budget.slab_budget)
            if res.report.starved:
                raise PhaseStarvation(f"class I_{t} ran out of terms", slab=(j - 1, 1 if kind == "row" else 2))
            leaf = _leaf_from(res, partition.source)
            (rows if kind == "row" else cols)[j] = leaf
            mu = 1 if kind == "row" else 2
            root.slabs[(j - 1, mu)] = Slab(j - 1, mu, t, leaf, {sigma: step}, {sigma: [math.fsum(earlier)]},
                                           {sigma: math.fsum(earlier)}, {sigma: target})
    return assemble(root, targets)
