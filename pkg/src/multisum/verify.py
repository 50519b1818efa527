"""Numerical checks of prescribed iterated prefix sums and structural audits."""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field

import numpy as np

from .builder import (BOOKKEEPING, NUMERIC, Assignment, Block, Leaf, Tally, claim_series_value,
                      claim_tally, collect, slab_of)
from .errors import DepthExceeded
from .perms import Permutation, PermTargets, all_permutations

FLOAT_SLACK = 1e-9
TELESCOPE_TOL = 1e-12


@dataclass
class PrefixCheck:
    sigma: Permutation
    k: int
    measured: float
    target: float
    bound: float
    terms: int
    bookkeeping: float = math.nan
    passed: bool = False


@dataclass
class VerificationReport:
    checks: list[PrefixCheck] = field(default_factory=list)
    bijectivity: list[str] = field(default_factory=list)
    regions: list[str] = field(default_factory=list)
    sources: list[str] = field(default_factory=list)
    telescoping: list[str] = field(default_factory=list)
    tolerance: float = math.inf

    @property
    def audits_clean(self) -> bool:
        return not (self.bijectivity or self.regions or self.sources or self.telescoping)

    @property
    def passed(self) -> bool:
        return self.audits_clean and all(c.passed for c in self.checks)


def _hand_sum(assignment: Assignment, sigma: Permutation, k: int) -> float:
    """Iterated sum of a finite assignment, innermost first, each level compensated."""
    order = sigma.order()
    rows = [(tuple(j[c - 1] for c in order), v) for j, v in assignment.values.items()
            if j[order[0] - 1] <= k]

    def level(items, depth):
        if depth == len(order):
            return math.fsum(v for _, v in items)
        groups = defaultdict(list)
        for key, v in items:
            groups[key[depth]].append((key, v))
        return math.fsum(level(groups[g], depth + 1) for g in sorted(groups))

    return level(rows, 0) if rows else 0.0


def prefix_tally(assignment: Assignment, sigma: Permutation, k: int, mode: str = NUMERIC) -> Tally:
    if k > assignment.depth:
        raise DepthExceeded(f"prefix depth {k} exceeds built depth {assignment.depth}")
    order = sigma.order()
    tally = Tally()
    for c in range(1, k + 1):
        collect(assignment.root, order[1:], {order[0]: c}, 1, tally, mode)
    return tally


def iterated_prefix_sum(assignment: Assignment, sigma: Permutation, k: int) -> tuple[float, float]:
    """``sum_{j_1<=k} sum_{j_2} ... sum_{j_n} b(j_sigma(1), ..., j_sigma(n))`` and its error bound.

    Inner infinite sums use the built truncation; the bound adds the crossing
    bounds of every greedy line that enters in full.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    if k == 0:
        return 0.0, 0.0
    if assignment.root is None:
        if k > _hand_depth(assignment):
            raise DepthExceeded(f"prefix depth {k} exceeds the assignment's extent")
        return _hand_sum(assignment, sigma, k), 0.0
    value, bound, _ = prefix_tally(assignment, sigma, k).numeric()
    return value, bound


def _hand_depth(assignment: Assignment) -> int:
    return max((max(j) for j in assignment.values), default=0)


def prefix_check(assignment: Assignment, targets: PermTargets, sigma: Permutation, k: int,
                 tolerance: float) -> PrefixCheck:
    target = targets(sigma, k)
    if assignment.root is None:
        value, bound = iterated_prefix_sum(assignment, sigma, k)
        terms, book = len(assignment.values), value
    else:
        value, bound, terms = prefix_tally(assignment, sigma, k).numeric()
        book = prefix_tally(assignment, sigma, k, BOOKKEEPING).exact_value()
    ok = abs(value - target) <= bound + FLOAT_SLACK * max(terms, 1) and bound <= tolerance
    return PrefixCheck(sigma, k, value, target, bound, terms, book, ok)


# -- audits --------------------------------------------------------------------

def audit_bijectivity(assignment: Assignment) -> list[str]:
    """Every source index is used at most once."""
    counts = Counter(assignment.entries.values())
    dup = sorted(m for m, c in counts.items() if c > 1)
    out = [f"source index {m} assigned {counts[m]} times" for m in dup[:20]]
    if len(dup) > 20:
        out.append(f"... {len(dup) - 20} more duplicates")
    return out


def audit_regions(assignment: Assignment) -> list[str]:
    """Each entry lies in exactly the slab it was filled from, inside the built layers."""
    out = []
    for j in assignment.entries:
        if len(j) != assignment.n or min(j) < 1:
            out.append(f"{j}: not a multi-index of dimension {assignment.n}")
            continue
        want = slab_of(j)
        got = assignment.slab.get(j)
        if got != want:
            out.append(f"{j}: recorded in slab {got}, lies in slab {want}")
        if assignment.root is not None and want[0] >= assignment.depth:
            out.append(f"{j}: beyond the built layers")
    if assignment.root is not None:
        placed = sum(len(leaf) for leaf in assignment.leaves())
        if placed != len(assignment.entries):
            out.append(f"{placed} leaf positions but {len(assignment.entries)} entries")
        for key in assignment.slabs:
            if not 0 <= key[0] < assignment.depth or not 1 <= key[1] <= assignment.n:
                out.append(f"slab {key} outside the layer grid")
    return out[:50]


def _audit_block_sources(block: Block, label: str, out: list[str]) -> None:
    part = block.partition
    for (d, mu), slab in sorted(block.slabs.items()):
        t = block.dim * d + mu
        child = slab.child
        if isinstance(child, Leaf):
            if len(child.local):
                owner = part.memberships(int(child.local.max()))
                bad = int(np.count_nonzero(owner[child.local - 1] != t))
                if bad:
                    out.append(f"{label}slab {(d, mu)}: {bad} indices outside class {t}")
        else:
            _audit_block_sources(child, f"{label}slab {(d, mu)} > ", out)


def audit_slab_sources(assignment: Assignment) -> list[str]:
    """Slab ``(d, mu)`` draws only from class ``I_{n*d+mu}``, at every nesting level."""
    out: list[str] = []
    if assignment.root is None:
        return out
    _audit_block_sources(assignment.root, "", out)
    # the top level again, in root indices, straight from the flattened entries
    part = assignment.partition
    if assignment.entries:
        ms = np.fromiter(assignment.entries.values(), dtype=np.int64, count=len(assignment.entries))
        ts = np.array([assignment.n * d + mu for d, mu in (assignment.slab[j] for j in assignment.entries)])
        owner = part.memberships(int(ms.max()))
        bad = int(np.count_nonzero(owner[ms - 1] != ts))
        if bad:
            out.append(f"{bad} entries outside their slab's class")
    return out


def audit_telescoping(assignment: Assignment, targets: PermTargets, tol: float = TELESCOPE_TOL) -> list[str]:
    """Recorded per-layer section targets add up to ``s_K`` for every ``K`` built."""
    out = []
    if assignment.root is None:
        return out
    for sigma in all_permutations(assignment.n):
        mu = sigma.inverse()(1)
        steps = []
        for d in range(assignment.depth):
            slab = assignment.slabs.get((d, mu))
            if slab is None:
                out.append(f"{sigma}: layer {d} not recorded")
                break
            steps.append(slab.section_targets[sigma])
            dev = abs(math.fsum(steps) - targets(sigma, d + 1))
            if dev > tol:
                out.append(f"{sigma}: K={d + 1} telescopes with deviation {dev:.3e}")
    return out


def verify_theorem(assignment: Assignment, targets: PermTargets, tolerance: float) -> VerificationReport:
    """All ``n! * depth`` prefix checks plus the structural audits."""
    depth = assignment.depth if assignment.root is not None else _hand_depth(assignment)
    rep = VerificationReport(tolerance=tolerance)
    for sigma in all_permutations(assignment.n):
        for k in range(1, depth + 1):
            rep.checks.append(prefix_check(assignment, targets, sigma, k, tolerance))
    rep.bijectivity = audit_bijectivity(assignment)
    rep.regions = audit_regions(assignment)
    rep.sources = audit_slab_sources(assignment)
    rep.telescoping = audit_telescoping(assignment, targets)
    return rep


def resum_claim_crosscheck(assignment: Assignment, sigma: Permutation, mu: int, d: int,
                           l: int) -> tuple[float, float, bool]:
    """Re-sum a claim series from assigned terms and compare with its bookkeeping value."""
    block = assignment.root
    value, bound, terms = claim_tally(block, sigma, mu, d, l, NUMERIC).numeric()
    book = claim_series_value(block, sigma, mu, d, l)
    agree = abs(value - book) <= bound + FLOAT_SLACK * max(terms, 1)
    return value, book, agree
