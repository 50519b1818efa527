import pytest

from multisum.builder import TruncationBudget, build_2d, build_nd
from multisum.perms import Permutation, PermTargets, all_permutations
from multisum.series import alternating_sqrt

ID2, SWAP2 = Permutation.of(1, 2), Permutation.of(2, 1)


@pytest.fixture(scope="session")
def targets2():
    return PermTargets.constants({ID2: 1.0, SWAP2: -1.0})


@pytest.fixture(scope="session")
def targets3():
    return PermTargets.constants(dict(zip(all_permutations(3), [1.0, 2.0, 3.0, -1.0, -2.0, -3.0])))


@pytest.fixture(scope="session")
def desk2(targets2):
    return build_nd(2, alternating_sqrt(), None, targets2, TruncationBudget(depth=4, slab_budget=20_000))


@pytest.fixture(scope="session")
def desk2_explicit(targets2):
    return build_2d(alternating_sqrt(), None, targets2, TruncationBudget(depth=4, slab_budget=20_000))


@pytest.fixture(scope="session")
def desk3(targets3):
    return build_nd(3, alternating_sqrt(), None, targets3, TruncationBudget(depth=2, slab_budget=10_000))


@pytest.fixture(scope="session")
def small3(targets3):
    return build_nd(3, alternating_sqrt(), None, targets3, TruncationBudget(depth=2, slab_budget=500))


ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def acceptance_log(request):
    return request.config.stash.setdefault(ACCEPTANCE, [])


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
