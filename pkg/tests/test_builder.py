import math

import numpy as np
import pytest

from multisum.builder import (EXPANDED, Block, Leaf, Tally, TruncationBudget, build_2d, build_nd,
                              claim_series_value, claim_stages, collect, delta, exchange_permutation, lift,
                              slab_of)
from multisum.errors import MissingStage, PhaseStarvation
from multisum.partition import IndexPartition
from multisum.perms import Permutation, PermTargets, all_permutations
from multisum.series import alternating_harmonic, alternating_sqrt, from_values

from conftest import ID2, SWAP2


def test_delta_examples():
    sigma = Permutation.of(2, 1, 3)
    assert delta(sigma, 2, 2, 0) == 2
    assert delta(sigma, 3, 2, 0) == 1
    for sigma in all_permutations(3):
        if sigma(1) == 1:
            assert all(delta(sigma, nu, 1, 4) == 5 for nu in (2, 3))
    with pytest.raises(ValueError):
        delta(Permutation.of(2, 1, 3), 1, 2, 0)


def test_exchange_permutation():
    sigma = Permutation.of(3, 1, 2)
    tau = exchange_permutation(sigma, 1, 2)
    assert tau == Permutation.of(1, 3, 2)


def test_claim_stage_cases():
    sigma = Permutation.of(2, 1, 3)  # mu = 2; j_2 sits before mu, j_3 after
    one = claim_stages(sigma, 2, 1, 2)
    two = claim_stages(sigma, 2, 1, 3)
    assert [p.case for p in one] == [1, 1] and [p.stage for p in one] == [(0, 2), (1, 2)]
    assert [p.case for p in two] == [2] and [p.stage for p in two] == [(1, 0)]
    assert all(p.tau == Permutation.of(1, 2, 3) for p in one)


def test_slab_geometry():
    assert slab_of((3, 2, 2)) == (1, 2)
    assert lift((1, 1), 0, 2) == (2, 1, 1)
    assert slab_of(lift((4, 7), 2, 1)) == (2, 1)


def test_first_slab_has_no_correction(small3, targets3):
    slab = small3.slabs[(0, 1)]
    for sigma, corr in slab.corrections.items():
        assert corr == 0.0
        assert slab.residuals[sigma] == targets3(sigma, 1)
    assert isinstance(slab.child, Block) and slab.child.dim == 2
    assert slab.index_set == 1 and len(slab.residuals) == 2


def test_swap_claim_equals_b11(desk2):
    assert claim_series_value(desk2.root, SWAP2, 2, 0, 2) == desk2.values[(1, 1)]
    again = claim_series_value(desk2.root, SWAP2, 2, 0, 2)
    assert again == desk2.values[(1, 1)]


def test_missing_stage():
    block = Block(2, 1, PermTargets.constants({ID2: 1.0, SWAP2: -1.0}))
    with pytest.raises(MissingStage):
        claim_series_value(block, SWAP2, 2, 0, 2)


def test_b11_is_first_index_of_first_class(desk2):
    part = IndexPartition(alternating_sqrt())
    assert desk2.entries[(1, 1)] == int(part.members(1, 1)[0]) == 1


def test_build_2d_slab_targets(desk2_explicit):
    a = desk2_explicit
    rows = {d + 1: s for (d, mu), s in a.slabs.items() if mu == 1}
    cols = {d + 1: s for (d, mu), s in a.slabs.items() if mu == 2}
    assert rows[1].residuals[ID2] == 1.0
    assert cols[1].residuals[SWAP2] == -1.0 - a.values[(1, 1)]
    for j in range(2, 5):
        assert rows[j].residuals[ID2] == 0.0 - math.fsum(a.values[(j, k)] for k in range(1, j))
        assert cols[j].residuals[SWAP2] == 0.0 - math.fsum(a.values[(i, j)] for i in range(1, j + 1))


def test_n2_equivalence(desk2, desk2_explicit):
    assert desk2.entries == desk2_explicit.entries
    assert desk2.values == desk2_explicit.values
    for key, slab in desk2.slabs.items():
        assert slab.residuals == desk2_explicit.slabs[key].residuals


def test_row_and_column_windows(desk2):
    for d in range(4):
        row = {j for j, s in desk2.slab.items() if s == (d, 1)}
        col = {j for j, s in desk2.slab.items() if s == (d, 2)}
        assert row == {(d + 1, k) for k in range(d + 1, d + 1 + 20_000)}
        assert col == {(i, d + 1) for i in range(d + 2, d + 2 + 20_000)}


def test_one_layer_n3_uses_first_three_classes():
    tg = PermTargets.constants({s: float(i) for i, s in enumerate(all_permutations(3))})
    a = build_nd(3, alternating_sqrt(), None, tg, TruncationBudget(depth=1, slab_budget=200))
    assert sorted(a.slabs) == [(0, 1), (0, 2), (0, 3)]
    part = a.partition
    for (d, mu), slab in a.slabs.items():
        ms = [m for j, m in a.entries.items() if a.slab[j] == (d, mu)]
        assert {part.membership(m) for m in ms} == {slab.index_set} == {mu}


def test_sub_builds_carry_their_constants_exactly(small3):
    """Unfolding every sub-build to its line targets reproduces the recorded constants."""
    for slab in small3.slabs.values():
        child = slab.child
        for sigma, value in child.constant.items():
            tally = Tally()
            collect(child, sigma.order(), {}, 1, tally, EXPANDED)
            assert tally.exact_value() == pytest.approx(value, abs=1e-12)


def test_injective_entries(desk3):
    ms = list(desk3.entries.values())
    assert len(ms) == len(set(ms)) == 24 * 10_000


def test_starvation_carries_slab_id():
    src = from_values([1.0, -1.0, 0.5])
    tg = PermTargets.constants({ID2: 1.0, SWAP2: -1.0})
    with pytest.raises(PhaseStarvation) as exc:
        build_nd(2, src, None, tg, TruncationBudget(depth=1, slab_budget=50, max_horizon=4096))
    assert exc.value.slab is not None and exc.value.slab[0][0] == 0
    assert "slab" in str(exc.value)


def test_budget_validation():
    with pytest.raises(ValueError):
        TruncationBudget(depth=0, slab_budget=10)
    with pytest.raises(ValueError):
        TruncationBudget(depth=1, slab_budget=10, sub_depths={2: 0})


def test_deterministic(targets3):
    b = TruncationBudget(depth=2, slab_budget=300)
    one = build_nd(3, alternating_sqrt(), None, targets3, b)
    two = build_nd(3, alternating_sqrt(), None, targets3, b)
    assert one.entries == two.entries and one.values == two.values


@pytest.mark.xfail(strict=True, reason="harmonic classes too thin at desk scale; see ledger")
def test_harmonic_desk_build_bounds():
    tg = PermTargets.constants({ID2: 1.0, SWAP2: -1.0})
    a = build_nd(2, alternating_harmonic(), None, tg, TruncationBudget(depth=4, slab_budget=20_000))
    assert all(s.child.report.error_bound <= 0.05 for s in a.slabs.values())
