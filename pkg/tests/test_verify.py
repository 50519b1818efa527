import copy
import itertools
import math

import numpy as np
import pytest

from multisum.builder import Assignment, TruncationBudget, build_nd
from multisum.errors import DepthExceeded
from multisum.perms import Permutation, PermTargets, all_permutations
from multisum.series import alternating_sqrt
from multisum.verify import (audit_bijectivity, audit_regions, audit_slab_sources, audit_telescoping,
                             iterated_prefix_sum, resum_claim_crosscheck, verify_theorem)

from conftest import ID2, SWAP2


def test_single_entry():
    a = Assignment.from_values(2, {(1, 1): 5.0})
    assert iterated_prefix_sum(a, ID2, 1) == (5.0, 0.0)


def test_zero_prefix():
    a = Assignment.from_values(2, {})
    assert iterated_prefix_sum(a, SWAP2, 0) == (0.0, 0.0)


def test_toy_3x3_exact_against_numpy():
    rng = np.random.default_rng(7)
    grid = rng.normal(size=(3, 3))
    a = Assignment.from_values(2, {(i + 1, j + 1): grid[i, j] for i in range(3) for j in range(3)})
    for k in (1, 2, 3):
        assert iterated_prefix_sum(a, ID2, k)[0] == pytest.approx(grid[:k, :].sum(), abs=1e-14)
        assert iterated_prefix_sum(a, SWAP2, k)[0] == pytest.approx(grid[:, :k].sum(), abs=1e-14)
    exact = {s: [iterated_prefix_sum(a, s, k)[0] for k in (1, 2, 3)] for s in (ID2, SWAP2)}
    tg = PermTargets(2, {s: (lambda k, v=v: v[k - 1]) for s, v in exact.items()})
    rep = verify_theorem(a, tg, 1e-12)
    assert rep.passed and len(rep.checks) == 6 and all(c.bound == 0.0 for c in rep.checks)


def test_toy_3x3x3_orders():
    rng = np.random.default_rng(3)
    grid = rng.normal(size=(3, 3, 3))
    a = Assignment.from_values(3, {tuple(np.add(ix, 1)): grid[ix] for ix in itertools.product(range(3), repeat=3)})
    for sigma in all_permutations(3):
        outer = sigma.order()[0] - 1
        sel = [slice(None)] * 3
        sel[outer] = slice(0, 2)
        assert iterated_prefix_sum(a, sigma, 2)[0] == pytest.approx(grid[tuple(sel)].sum(), abs=1e-13)


def test_desk2_passes(desk2, targets2):
    rep = verify_theorem(desk2, targets2, 0.05)
    assert len(rep.checks) == 8 and rep.passed
    first = next(c for c in rep.checks if c.sigma == ID2 and c.k == 1)
    assert abs(first.measured - 1.0) <= first.bound
    assert first.bookkeeping == 1.0


def test_desk3_passes(desk3, targets3):
    rep = verify_theorem(desk3, targets3, 0.1)
    assert len(rep.checks) == 12 and rep.passed


def test_duplicate_index_detected(desk2):
    bad = copy.copy(desk2)
    bad.entries = dict(desk2.entries)
    bad.entries[(1, 2)] = bad.entries[(1, 1)]
    assert audit_bijectivity(bad)
    assert not audit_bijectivity(desk2)


def test_foreign_class_detected(desk2):
    bad = copy.copy(desk2)
    bad.entries = dict(desk2.entries)
    foreign = int(desk2.partition.members(2, 1)[0])
    bad.entries[(1, 1)] = foreign
    assert audit_slab_sources(bad)
    assert not audit_slab_sources(desk2)


def test_region_fault_detected(desk2):
    bad = copy.copy(desk2)
    bad.slab = dict(desk2.slab)
    bad.slab[(2, 5)] = (0, 1)
    assert audit_regions(bad)
    assert not audit_regions(desk2)


def test_telescoping(desk2, targets2, desk3, targets3):
    assert audit_telescoping(desk2, targets2) == []
    assert audit_telescoping(desk3, targets3) == []
    shifted = PermTargets.constants({ID2: 1.5, SWAP2: -1.0})
    assert audit_telescoping(desk2, shifted)


def test_depth_exceeded(desk2):
    with pytest.raises(DepthExceeded):
        iterated_prefix_sum(desk2, ID2, 5)


def test_claim_crosscheck_n2(desk2):
    for d in range(4):
        num, book, ok = resum_claim_crosscheck(desk2, SWAP2, 2, d, 2)
        assert ok and num == book
        num, book, ok = resum_claim_crosscheck(desk2, ID2, 1, d, 2)
        assert ok


def test_claim_crosscheck_empty_region(desk2):
    assert resum_claim_crosscheck(desk2, ID2, 1, 0, 2) == (0.0, 0.0, True)


def test_claim_crosscheck_all_n3(small3):
    for sigma in all_permutations(3):
        mu = sigma.inverse()(1)
        for d in range(2):
            for l in (2, 3):
                assert resum_claim_crosscheck(small3, sigma, mu, d, l)[2]


def test_claim_crosscheck_flags_wrong_target(targets3):
    a = build_nd(3, alternating_sqrt(), None, targets3, TruncationBudget(depth=2, slab_budget=500))
    sigma = Permutation.of(2, 1, 3)
    assert resum_claim_crosscheck(a, sigma, 2, 0, 2)[2]
    for leaf in a.slabs[(0, 1)].child.leaves():
        leaf.target += 0.5
    assert not resum_claim_crosscheck(a, sigma, 2, 0, 2)[2]


def test_bounds_shrink_with_budget(targets2):
    prev = None
    for sb in (10**3, 10**4, 10**5):
        a = build_nd(2, alternating_sqrt(), None, targets2, TruncationBudget(depth=4, slab_budget=sb))
        bounds = [c.bound for c in verify_theorem(a, targets2, 1.0).checks]
        if prev is not None:
            assert all(b <= p for b, p in zip(bounds, prev))
        prev = bounds
