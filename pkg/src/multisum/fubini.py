"""A function on ``[0, inf)^n`` whose iterated integrals depend on the order.

Each coefficient ``b(j)`` of a rearrangement sits on a unit-mass bump
centred at the lattice point ``j``.  Supports are pairwise disjoint, so any
iterated integral over a region that does not cut a bump is an iterated sum
of coefficients.

Integration order: ``sigma`` integrates ``dx_sigma(1)`` innermost and
``dx_sigma(n)`` outermost.  The matching summation order puts coordinate
``sigma(n)`` outermost, see :func:`summation_order`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate, special
from scipy.spatial import cKDTree

from .builder import Assignment, TruncationBudget, build_nd
from .errors import QuadratureFailure
from .perms import Permutation, PermTargets, all_permutations
from .series import SeriesSource

RADIUS = 0.49
LATTICE = "lattice"
UNIT_CUBE = "unit_cube"


@dataclass(frozen=True)
class BumpFunction:
    """``A * exp(-1/(radius - |x|)^2)`` inside the ball, zero outside."""

    n: int
    amplitude: float = 1.0
    radius: float = RADIUS

    def __post_init__(self):
        if self.n < 1 or self.amplitude <= 0 or self.radius <= 0:
            raise ValueError("need n >= 1, amplitude > 0 and radius > 0")

    def __call__(self, x) -> np.ndarray:
        return phi(self, x)


def phi(bump: BumpFunction, x) -> np.ndarray:
    """Evaluate the bump at points ``x`` (shape ``(..., n)``, or ``(n,)``).

    The profile depends on ``|x|`` itself, so it has a conical kink at the
    centre; it is smooth everywhere else, including the support boundary.
    """
    x = np.asarray(x, dtype=np.float64)
    r = np.sqrt(np.sum(x * x, axis=-1))
    inside = r < bump.radius
    gap = np.where(inside, bump.radius - r, 1.0)
    out = np.where(inside, bump.amplitude * np.exp(-1.0 / (gap * gap)), 0.0)
    return out if out.ndim else float(out)


def phi_gradient(bump: BumpFunction, x) -> np.ndarray:
    """Analytic gradient of :func:`phi`."""
    x = np.asarray(x, dtype=np.float64)
    r = np.sqrt(np.sum(x * x, axis=-1, keepdims=True))
    inside = r < bump.radius
    gap = np.where(inside, bump.radius - r, 1.0)
    dr = np.where(inside, bump.amplitude * np.exp(-1.0 / gap**2) * (-2.0 / gap**3), 0.0)
    safe = np.where(r > 0, r, 1.0)
    return np.where(r > 0, dr * x / safe, 0.0)


def sphere_area(n: int) -> float:
    """Surface measure of the unit sphere in ``R^n`` (2 for ``n = 1``)."""
    return 2.0 * math.pi ** (n / 2) / special.gamma(n / 2)


def raw_mass(n: int, quad_tol: float, radius: float = RADIUS) -> float:
    """``integral of exp(-1/(radius-|x|)^2)`` over ``R^n`` by radial quadrature."""
    val, err = integrate.quad(lambda r: math.exp(-1.0 / (radius - r) ** 2) * r ** (n - 1),
                              0.0, radius, epsabs=0.0, epsrel=quad_tol / 4, limit=200)
    if not err <= quad_tol * abs(val) / 2:
        raise QuadratureFailure(f"radial integral for n={n} reached only {err / val:.2e} relative error")
    return sphere_area(n) * val


def _axis_rule(lo: float, hi: float, center: float, nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes on ``[lo, hi]``, split at ``center`` where the bump has its kink."""
    gx, gw = leggauss(nodes)
    pieces = [(lo, center), (center, hi)] if lo < center < hi else [(lo, hi)]
    xs, ws = [], []
    for a, b in pieces:
        half = (b - a) / 2
        xs.append(a + half * (gx + 1))
        ws.append(half * gw)
    return np.concatenate(xs), np.concatenate(ws)


def _tensor_mass(bump: BumpFunction, nodes: int) -> float:
    x, w = _axis_rule(-bump.radius, bump.radius, 0.0, nodes)
    grids = np.meshgrid(*([x] * bump.n), indexing="ij")
    vals = phi(bump, np.stack(grids, axis=-1))
    for _ in range(bump.n):
        vals = np.tensordot(w, vals, axes=(0, 0))
    return float(vals)


def tensor_mass(bump: BumpFunction, quad_tol: float, max_nodes: Optional[int] = None) -> float:
    """Mass of ``bump`` by a tensor Gauss-Legendre rule on the cube, refined until stable."""
    if max_nodes is None:
        max_nodes = {1: 1024, 2: 512, 3: 96}.get(bump.n, 24)
    nodes, prev = 16, _tensor_mass(bump, 8)
    while nodes <= max_nodes:
        cur = _tensor_mass(bump, nodes)
        if abs(cur - prev) <= quad_tol * abs(cur) / 4:
            return cur
        prev, nodes = cur, nodes * 2
    raise QuadratureFailure(f"tensor rule for n={bump.n} not stable at {max_nodes} nodes per axis")


def normalize_amplitude(n: int, quad_tol: float = 1e-8, radius: float = RADIUS) -> float:
    """``A`` such that the bump has unit mass, audited by an independent tensor rule."""
    if quad_tol <= 0:
        raise ValueError("quad_tol must be positive")
    amp = 1.0 / raw_mass(n, quad_tol, radius)
    if n <= 3:
        mass = tensor_mass(BumpFunction(n, amp, radius), quad_tol)
        if abs(mass - 1.0) > 2 * quad_tol:
            raise QuadratureFailure(f"normalisation audit: mass {mass!r} for n={n}")
    return amp


def summation_order(sigma: Permutation) -> Permutation:
    """Summation permutation matching integration order ``sigma``."""
    return Permutation.from_order(tuple(reversed(sigma.images)))


@dataclass(frozen=True)
class Peak:
    j: tuple[int, ...]
    b: float
    center: np.ndarray
    radius: float


@dataclass
class FubiniField:
    """``f(x) = sum_j b(j) * bump_j(x)`` with pairwise disjoint bump supports."""

    n: int
    bump: BumpFunction
    coefficients: dict[tuple[int, ...], float]
    layout: str = LATTICE
    _coords: np.ndarray = field(init=False, repr=False)
    _vals: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.layout not in (LATTICE, UNIT_CUBE):
            raise ValueError(f"unknown layout {self.layout!r}")
        if self.bump.n != self.n:
            raise ValueError("bump dimension does not match field dimension")
        keys = list(self.coefficients)
        self._coords = np.array(keys, dtype=np.int64).reshape(len(keys), self.n)
        self._vals = np.array([self.coefficients[k] for k in keys], dtype=np.float64)

    @classmethod
    def from_assignment(cls, assignment: Assignment, quad_tol: float = 1e-8,
                        layout: str = LATTICE) -> "FubiniField":
        bump = BumpFunction(assignment.n, normalize_amplitude(assignment.n, quad_tol))
        return cls(assignment.n, bump, dict(assignment.values), layout)

    @property
    def extent(self) -> int:
        return int(self._coords.max()) if len(self._coords) else 0

    def peak_radius(self, j: Sequence[int]) -> float:
        if self.layout == LATTICE:
            return self.bump.radius
        top = max(j)
        gap = 2.0 ** (-top - 1)  # nearest possible neighbour of a peak with largest index `top`
        return min(self.bump.radius * 2.0 ** (-top - 1), gap / 2)

    def center(self, j: Sequence[int]) -> np.ndarray:
        j = np.asarray(j, dtype=np.float64)
        return j if self.layout == LATTICE else np.exp2(-j)

    def peak(self, j: tuple[int, ...]) -> Peak:
        return Peak(j, self.coefficients.get(j, 0.0), self.center(j), self.peak_radius(j))

    def peak_value(self, pk: Peak, x: np.ndarray) -> np.ndarray:
        """``b * bump`` rescaled to the peak's radius with unit mass kept."""
        scale = self.bump.radius / pk.radius
        return pk.b * scale**self.n * phi(self.bump, (x - pk.center) * scale)

    def __call__(self, x) -> float:
        return f_eval(self, x)


def _candidates(field: FubiniField, x: np.ndarray):
    if field.layout == LATTICE:
        yield tuple(int(v) for v in np.rint(x))
        return
    if np.any(x <= 0):
        return
    e = -np.log2(x)
    lo, hi = np.maximum(np.floor(e), 1).astype(int), np.maximum(np.ceil(e), 1).astype(int)
    choices = [sorted({int(a), int(b)}) for a, b in zip(lo, hi)]
    for combo in np.array(np.meshgrid(*choices, indexing="ij")).reshape(field.n, -1).T:
        yield tuple(int(v) for v in combo)


def f_eval(field: FubiniField, x) -> float:
    """Value of the field at ``x``; at most one peak contributes."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (field.n,):
        raise ValueError(f"expected a point of dimension {field.n}")
    for j in _candidates(field, x):
        if min(j) < 1 or j not in field.coefficients:
            continue
        pk = field.peak(j)
        if np.linalg.norm(x - pk.center) < pk.radius:
            return float(field.peak_value(pk, x))
    return 0.0


def audit_supports(field: FubiniField) -> list[str]:
    """Pairs of assigned peaks whose supports meet (exhaustive via a k-d tree)."""
    if len(field._coords) < 2:
        return []
    centers = np.array([field.center(j) for j in field._coords])
    radii = np.array([field.peak_radius(j) for j in field._coords])
    tree = cKDTree(centers)
    out = []
    for a, b in sorted(tree.query_pairs(2 * radii.max())):
        if np.linalg.norm(centers[a] - centers[b]) < radii[a] + radii[b]:
            out.append(f"supports of {tuple(field._coords[a])} and {tuple(field._coords[b])} intersect")
    return out


# -- iterated integrals ----------------------------------------------------------

@dataclass
class IntegralEstimate:
    sigma: Permutation
    region: tuple[tuple[float, float], ...]
    coefficient_sum: float
    quadrature: float  # nan when the region holds more than ``max_peaks`` peaks
    quad_error: float
    peaks: int
    cut: int


def _peak_iterated(field: FubiniField, pk: Peak, sigma: Permutation, region, nodes: int) -> float:
    axes_x, axes_w = [], []
    for i in range(field.n):
        lo = max(pk.center[i] - pk.radius, region[i][0])
        hi = min(pk.center[i] + pk.radius, region[i][1])
        if hi <= lo:
            return 0.0
        x, w = _axis_rule(lo, hi, pk.center[i], nodes)
        axes_x.append(x)
        axes_w.append(w)
    grids = np.meshgrid(*axes_x, indexing="ij")
    vals = field.peak_value(pk, np.stack(grids, axis=-1))
    # integrate dx_sigma(1) first, dx_sigma(n) last
    vals = np.transpose(vals, [c - 1 for c in sigma.images])
    for c in sigma.images:
        vals = np.tensordot(axes_w[c - 1], vals, axes=(0, 0))
    return float(vals)


def peak_integral(field: FubiniField, pk: Peak, sigma: Permutation, region,
                  quad_tol: float) -> tuple[float, float]:
    """Iterated Gauss-Legendre integral of one peak over ``region``, refined until stable."""
    max_nodes = {1: 1024, 2: 256, 3: 64}.get(field.n, 16)
    nodes, prev = 16, _peak_iterated(field, pk, sigma, region, 8)
    while nodes <= max_nodes:
        cur = _peak_iterated(field, pk, sigma, region, nodes)
        err = abs(cur - prev)
        if err <= quad_tol * max(1.0, abs(pk.b)):
            return cur, err
        prev, nodes = cur, nodes * 2
    raise QuadratureFailure(f"peak {pk.j}: iterated rule not stable at {max_nodes} nodes per axis")


def _region(field: FubiniField, box) -> tuple[tuple[float, float], ...]:
    box = [float(v) for v in box]
    if len(box) != field.n:
        raise ValueError(f"box needs {field.n} limits")
    if field.layout == LATTICE:
        return tuple((0.0, b) for b in box)
    return tuple((b, 1.0) for b in box)


def iterated_integral(field: FubiniField, sigma: Permutation, box, quad_tol: float = 1e-6,
                      max_peaks: int = 100) -> IntegralEstimate:
    """Iterated integral of ``field`` in order ``sigma`` over a box.

    ``box`` holds upper limits ``L_i`` (region ``[0, L_i]``) for the lattice
    layout and lower limits (region ``[l_i, 1]``) for the unit cube.  The
    coefficient sum adds ``b(j)`` for whole peaks and the quadrature mass
    for peaks the box cuts; the quadrature value integrates every peak
    separately in order ``sigma`` and is only sampled when the box holds at
    most ``max_peaks`` peaks.
    """
    region = _region(field, box)
    if not len(field._coords):
        return IntegralEstimate(sigma, region, 0.0, 0.0, 0.0, 0, 0)
    centers = np.array([field.center(j) for j in field._coords]) if field.layout == UNIT_CUBE \
        else field._coords.astype(np.float64)
    radii = (np.full(len(centers), field.bump.radius) if field.layout == LATTICE
             else np.array([field.peak_radius(j) for j in field._coords]))
    lo = np.array([r[0] for r in region])
    hi = np.array([r[1] for r in region])
    inside = np.all((centers - radii[:, None] >= lo) & (centers + radii[:, None] <= hi), axis=1)
    touching = np.all((centers + radii[:, None] > lo) & (centers - radii[:, None] < hi), axis=1)
    cut = touching & ~inside
    terms = list(field._vals[inside])
    cut_err = 0.0
    for idx in np.nonzero(cut)[0]:
        pk = field.peak(tuple(int(v) for v in field._coords[idx]))
        val, err = peak_integral(field, pk, sigma, region, quad_tol)
        terms.append(val)
        cut_err += err
    coeff = math.fsum(terms)
    count = int(np.count_nonzero(touching))
    quad, qerr = math.nan, cut_err
    if count <= max_peaks:
        parts = []
        for idx in np.nonzero(touching)[0]:
            pk = field.peak(tuple(int(v) for v in field._coords[idx]))
            val, err = peak_integral(field, pk, sigma, region, quad_tol)
            parts.append(val)
            qerr += err
        quad = math.fsum(parts)
    return IntegralEstimate(sigma, region, coeff, quad, qerr, count, int(np.count_nonzero(cut)))


def prefix_box(field: FubiniField, sigma: Permutation, k: int) -> tuple[float, ...]:
    """Box whose outermost integration variable is cut after the ``k``-th peak and others are whole.

    Over it the iterated integral equals the ``k``-th iterated prefix sum of
    the coefficients in the matching summation order.
    """
    outer = sigma(field.n)
    top = field.extent
    if field.layout == LATTICE:
        return tuple(k + 0.5 if i == outer else top + 0.5 for i in range(1, field.n + 1))
    return tuple(0.75 * 2.0**-k if i == outer else 0.75 * 2.0**-top for i in range(1, field.n + 1))


def corollary_targets(n: int, values: Mapping[Permutation, float]) -> PermTargets:
    """Summation targets realising integral values keyed by integration order."""
    if set(values) != set(all_permutations(n)):
        raise ValueError("an integral value is needed for every integration order")
    return PermTargets.limits({summation_order(s): v for s, v in values.items()})


def build_field(n: int, values: Mapping[Permutation, float], source: SeriesSource,
                budget: TruncationBudget, quad_tol: float = 1e-8,
                layout: str = LATTICE) -> tuple[FubiniField, Assignment, PermTargets]:
    """Build coefficients with prescribed limits and wrap them in a field."""
    targets = corollary_targets(n, values)
    assignment = build_nd(n, source, None, targets, budget)
    return FubiniField.from_assignment(assignment, quad_tol, layout), assignment, targets
