"""Permutations of ``{1..n}`` and per-permutation target sequences.

A permutation ``sigma`` fixes a summation order for ``b(j_sigma(1), ..., j_sigma(n))``:
coordinate ``i`` carries the summation variable ``j_sigma(i)``, so the
outermost variable ``j_1`` sits at coordinate ``sigma^{-1}(1)``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Iterator, Mapping, Sequence


@dataclass(frozen=True, order=True)
class Permutation:
    images: tuple[int, ...]

    def __post_init__(self):
        imgs = tuple(int(i) for i in self.images)
        if sorted(imgs) != list(range(1, len(imgs) + 1)):
            raise ValueError(f"not a permutation of 1..{len(imgs)}: {self.images}")
        object.__setattr__(self, "images", imgs)

    @classmethod
    def of(cls, *images: int) -> "Permutation":
        return cls(tuple(images))

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(tuple(range(1, n + 1)))

    @classmethod
    def parse(cls, text: str) -> "Permutation":
        """Parse one-line image notation such as ``"2 1 3"``."""
        return cls(tuple(int(tok) for tok in text.replace(",", " ").split()))

    @classmethod
    def from_order(cls, order: Sequence[int]) -> "Permutation":
        """The permutation whose summation order (outer to inner coordinates) is ``order``."""
        images = [0] * len(order)
        for k, coord in enumerate(order):
            images[coord - 1] = k + 1
        return cls(tuple(images))

    @property
    def n(self) -> int:
        return len(self.images)

    def __call__(self, i: int) -> int:
        return self.images[i - 1]

    def inverse(self) -> "Permutation":
        inv = [0] * self.n
        for i, img in enumerate(self.images, start=1):
            inv[img - 1] = i
        return Permutation(tuple(inv))

    def __matmul__(self, other: "Permutation") -> "Permutation":
        """Composition ``(self @ other)(i) = self(other(i))``."""
        return Permutation(tuple(self(other(i)) for i in range(1, self.n + 1)))

    def order(self) -> tuple[int, ...]:
        """Coordinates from outermost to innermost summation."""
        return self.inverse().images

    def one_line(self) -> str:
        return " ".join(map(str, self.images))

    def cycles(self) -> str:
        seen, out = set(), []
        for start in range(1, self.n + 1):
            if start in seen:
                continue
            cyc, i = [], start
            while i not in seen:
                seen.add(i)
                cyc.append(i)
                i = self(i)
            out.append("(" + " ".join(map(str, cyc)) + ")")
        return "".join(out)

    def __str__(self):
        return self.one_line()


def all_permutations(n: int) -> list[Permutation]:
    """All of Sym(n) in lexicographic order of one-line notation."""
    return [Permutation(p) for p in itertools.permutations(range(1, n + 1))]


def reduce_fixing(sigma: Permutation, mu: int) -> Permutation:
    """Identify ``{sigma : sigma(mu) = 1}`` with Sym(n-1).

    Coordinate ``mu`` is dropped and the remaining variables ``j_2..j_n``
    are relabelled ``1..n-1``.
    """
    if sigma(mu) != 1:
        raise ValueError(f"sigma({mu}) must be 1, got {sigma(mu)}")
    return Permutation(tuple(sigma(i) - 1 for i in range(1, sigma.n + 1) if i != mu))


def lift_fixing(sub: Permutation, mu: int) -> Permutation:
    """Inverse of :func:`reduce_fixing`."""
    imgs = [x + 1 for x in sub.images]
    imgs.insert(mu - 1, 1)
    return Permutation(tuple(imgs))


Sequence_ = Callable[[int], float]


def constant(value: float) -> Sequence_:
    return lambda k: float(value)


def linear(slope: float) -> Sequence_:
    return lambda k: float(slope) * k


def explicit(values: Sequence[float]) -> Sequence_:
    vals = [float(v) for v in values]

    def seq(k: int) -> float:
        if k > len(vals):
            raise IndexError(f"explicit target list has only {len(vals)} entries, asked for k={k}")
        return vals[k - 1]

    return seq


def corollary(value: float) -> Sequence_:
    """Target sequence whose limit is ``value`` (finite or ``±inf``).

    Constant sequences for finite limits, ``k * sign`` for infinite ones.
    """
    if math.isinf(value):
        return linear(math.copysign(1.0, value))
    return constant(value)


class PermTargets:
    """``sigma -> (s_k^sigma)_{k>=1}`` for every sigma in Sym(n), with ``s_0 = 0``."""

    def __init__(self, n: int, table: Mapping[Permutation, Sequence_]):
        missing = [p for p in all_permutations(n) if p not in table]
        if missing:
            raise ValueError("targets missing for " + ", ".join(p.one_line() for p in missing))
        self.n = n
        self.table = dict(table)

    def __call__(self, sigma: Permutation, k: int) -> float:
        if k == 0:
            return 0.0
        if k < 0:
            raise IndexError("k must be >= 0")
        return float(self.table[sigma](k))

    def step(self, sigma: Permutation, k: int) -> float:
        """``s_k - s_{k-1}``."""
        return self(sigma, k) - self(sigma, k - 1)

    @classmethod
    def constants(cls, values: Mapping[Permutation, float]) -> "PermTargets":
        n = next(iter(values)).n
        return cls(n, {p: constant(v) for p, v in values.items()})

    @classmethod
    def limits(cls, values: Mapping[Permutation, float]) -> "PermTargets":
        """Targets realising prescribed full iterated sums (finite or infinite)."""
        n = next(iter(values)).n
        return cls(n, {p: corollary(v) for p, v in values.items()})


def iter_fixing(n: int, mu: int) -> Iterator[Permutation]:
    """Permutations with ``sigma(mu) = 1`` in lexicographic order."""
    return (p for p in all_permutations(n) if p(mu) == 1)
