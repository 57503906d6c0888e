"""Exact Littlewood-Offord small-ball probabilities for linear and multilinear forms.

Exact methods carry probabilities as integer weights over a common
denominator, so results are returned as ``fractions.Fraction``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce

import numpy as np
from scipy.spatial import cKDTree

from . import rng
from .ensembles import AtomDistribution, BlockEnsembleSpec, block_tuples
from .errors import CapExceededError
from .gap import Gap, gap_dilate, gap_membership

ENUMERATION_CAP = 10**7
_INT64_SAFE = 2**62


@dataclass
class SmallBallResult:
    rho: Fraction | float
    center: complex
    method: str  # "exact-enumeration", "dp-lattice" or "monte-carlo"
    trials: int | None = None
    ci_halfwidth: float | None = None

    def __float__(self):
        return float(self.rho)

    @property
    def exact(self) -> bool:
        return self.method != "monte-carlo"


def _atom_law(atom: AtomDistribution):
    vals = np.asarray(atom.values())
    probs = atom.exact_probabilities()
    den = reduce(lambda a, b: a * b // math.gcd(a, b), (p.denominator for p in probs), 1)
    nums = [int(p * den) for p in probs]
    return vals, nums, den


def _tolerance(values) -> float:
    return 1e-9 * max(1.0, float(np.max(np.abs(values), initial=0.0)))


def _group(values: np.ndarray, weights: np.ndarray):
    """Merge equal values (to rounding) and add their weights."""
    if np.iscomplexobj(values) and np.all(values.imag == 0):
        values = values.real
    keys = np.round(values, 9) + 0.0
    if np.iscomplexobj(keys):
        order = np.lexsort((keys.imag, keys.real))
        ks = keys[order]
        new = np.ones(len(ks), dtype=bool)
        new[1:] = (ks[1:].real != ks[:-1].real) | (ks[1:].imag != ks[:-1].imag)
    else:
        order = np.argsort(keys, kind="stable")
        ks = keys[order]
        new = np.ones(len(ks), dtype=bool)
        new[1:] = ks[1:] != ks[:-1]
    starts = np.flatnonzero(new)
    w = np.asarray(weights)[order]
    summed = np.add.reduceat(w, starts) if len(w) else w
    return values[order][starts], summed


def _best_window_1d(xs: np.ndarray, w: np.ndarray, beta: float, tol: float):
    order = np.argsort(xs, kind="stable")
    xs, w = xs[order], w[order]
    csum = np.concatenate([np.zeros(1, dtype=w.dtype), np.cumsum(w)])
    right = np.searchsorted(xs, xs + 2 * beta + tol, side="right")
    mass = csum[right] - csum[np.arange(len(xs))]
    i = int(np.argmax(mass))
    return mass[i], float(xs[i] + beta)


def _best_disc(pts: np.ndarray, w: np.ndarray, beta: float, tol: float):
    """Heaviest closed disc of radius beta.

    An optimal disc can be moved until it has either a single covered point at
    its center or two covered points on its boundary, so candidate centers are
    the points themselves and the (up to two) centers through each close pair.
    """
    xy = np.column_stack([pts.real, pts.imag])
    tree = cKDTree(xy)
    best_mass, best_center = None, complex(pts[0])
    for i in range(len(pts)):
        near = np.array(tree.query_ball_point(xy[i], 2 * beta + tol), dtype=int)
        local = pts[near]
        lw = w[near]
        cands = [pts[i]]
        others = local[near != i]
        if beta > 0 and len(others):
            mid = 0.5 * (pts[i] + others)
            half = np.abs(others - pts[i]) / 2
            ok = half > 0
            h = np.sqrt(np.maximum(beta * beta - half[ok] ** 2, 0.0))
            u = (others[ok] - pts[i]) / (2 * half[ok])
            cands.extend(mid[ok] + 1j * u * h)
            cands.extend(mid[ok] - 1j * u * h)
        cands = np.asarray(cands)
        inside = np.abs(cands[:, None] - local[None, :]) <= beta + tol
        masses = (inside * lw[None, :]).sum(axis=1) if lw.dtype != object else \
            np.array([sum(lw[row]) for row in inside], dtype=object)
        k = int(np.argmax(masses))
        if best_mass is None or masses[k] > best_mass:
            best_mass, best_center = masses[k], complex(cands[k])
    return best_mass, best_center


def best_ball(values, weights, beta: float, center=None):
    """(max mass of a radius-beta ball, its center); the center can be pinned."""
    values = np.asarray(values)
    weights = np.asarray(weights)
    tol = _tolerance(values)
    if center is not None:
        inside = np.abs(values - center) <= beta + tol
        return weights[inside].sum() if inside.any() else weights[:0].sum(), complex(center)
    vals, w = _group(values, weights)
    if beta == 0:
        i = int(np.argmax(w))
        return w[i], complex(vals[i])
    if not np.iscomplexobj(vals):
        return _best_window_1d(vals, w, beta, tol)
    return _best_disc(vals, w, beta, tol)


def _all_assignments(vals, nums, n):
    """Every x in supp^n with its integer weight; shapes (m, n) and (m,)."""
    k = len(vals)
    idx = np.array(list(itertools.product(range(k), repeat=n)), dtype=np.int64).reshape(-1, n)
    xs = np.asarray(vals)[idx]
    w = np.prod(np.asarray(nums, dtype=np.int64)[idx], axis=1) if n else np.ones(1, dtype=np.int64)
    return xs, w


def _is_lattice(coeffs, vals) -> bool:
    c = np.asarray(coeffs, dtype=np.complex128)
    v = np.asarray(vals, dtype=np.complex128)
    ints = lambda a: bool(np.all(a.real == np.round(a.real)) and np.all(a.imag == np.round(a.imag)))
    return ints(c) and ints(v)


def _dp_lattice(coeffs, vals, nums):
    dist = {(0, 0): 1}
    for a in coeffs:
        a = complex(a)
        nxt = {}
        for (re, im), wt in dist.items():
            for v, nm in zip(vals, nums):
                s = a * complex(v)
                key = (re + int(round(s.real)), im + int(round(s.imag)))
                nxt[key] = nxt.get(key, 0) + wt * nm
        dist = nxt
    keys = list(dist)
    values = np.array([complex(re, im) for re, im in keys])
    weights = np.array([dist[k] for k in keys], dtype=object)
    return values, weights


def linear_smallball(a, atom: AtomDistribution, beta: float, method: str | None = None,
                     center=None, trials: int = 10**5, seed: int = 0) -> SmallBallResult:
    """sup_c P(|sum_i a_i x_i - c| <= beta) for iid finite-support x_i.

    ``method`` picks the route; by default exhaustive enumeration when
    |supp|^n <= ENUMERATION_CAP, a lattice DP when coefficients and support are
    (Gaussian) integers, Monte Carlo otherwise.  ``center`` pins c instead of
    taking the sup.
    """
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    coeffs = np.atleast_1d(np.asarray(a, dtype=np.complex128))
    n = len(coeffs)
    vals, nums, den = _atom_law(atom)
    total = den ** n
    if method is None:
        if len(vals) ** n <= ENUMERATION_CAP and total < _INT64_SAFE:
            method = "exact-enumeration"
        elif _is_lattice(coeffs, vals):
            method = "dp-lattice"
        else:
            method = "monte-carlo"
    if method == "exact-enumeration":
        if len(vals) ** n > ENUMERATION_CAP or total >= _INT64_SAFE:
            raise CapExceededError(f"{len(vals)}^{n} assignments exceed the enumeration cap")
        xs, w = _all_assignments(vals, nums, n)
        sums = xs @ coeffs if n else np.zeros(1, dtype=np.complex128)
        mass, c = best_ball(sums, w, beta, center)
        return SmallBallResult(Fraction(int(mass), total), c, method)
    if method == "dp-lattice":
        if not _is_lattice(coeffs, vals):
            raise CapExceededError("lattice DP needs Gaussian-integer coefficients and integer support")
        values, weights = _dp_lattice(coeffs, vals, nums)
        mass, c = best_ball(values, weights, beta, center)
        return SmallBallResult(Fraction(int(mass), total), c, method)
    if method == "monte-carlo":
        keys = np.arange(trials)[:, None], np.arange(n)[None, :]
        xs = atom.draw(seed, *keys)
        sums = xs @ coeffs
        mass, c = best_ball(sums, np.ones(trials, dtype=np.int64), beta, center)
        p = mass / trials
        return SmallBallResult(float(p), c, method, trials=trials,
                               ci_halfwidth=1.96 * math.sqrt(max(p * (1 - p), 1.0 / trials) / trials))
    raise ValueError(f"unknown method {method!r}")


@dataclass(frozen=True)
class CoefficientArray:
    """An n^D array of complex coefficients."""

    entries: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=np.complex128)
        if a.ndim < 1 or len(set(a.shape)) != 1:
            raise ValueError("coefficient array must have shape (n,)*D")
        object.__setattr__(self, "entries", a)

    @property
    def degree(self) -> int:
        return self.entries.ndim

    @property
    def side(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def rank_one(cls, *factors) -> "CoefficientArray":
        out = np.asarray(factors[0], dtype=np.complex128)
        for f in factors[1:]:
            out = np.multiply.outer(out, np.asarray(f, dtype=np.complex128))
        return cls(out)


def multilinear_values(A: CoefficientArray, atom: AtomDistribution, shift=None):
    """All values of sum a_{i1..iD} x_{1 i1}...x_{D iD} (+ shift) with integer weights."""
    D, n = A.degree, A.side
    vals, nums, den = _atom_law(atom)
    m = len(vals) ** n
    if m ** D > ENUMERATION_CAP or den ** (n * D) >= _INT64_SAFE:
        raise CapExceededError(f"{m}^{D} assignments exceed the enumeration cap")
    xs, w = _all_assignments(vals, nums, n)
    t = A.entries
    for _ in range(D):
        # contract the leading coefficient axis; the new assignment axis goes last
        t = np.tensordot(t, xs, axes=([0], [1]))
    weights = reduce(np.multiply.outer, [w] * D)
    if shift is not None:
        extra = np.empty(t.shape, dtype=np.complex128)
        for idx in itertools.product(range(m), repeat=D):
            extra[idx] = shift(*(xs[i] for i in idx))
        t = t + extra
    return t.ravel(), np.asarray(weights).ravel(), den ** (n * D)


def multilinear_smallball(A: CoefficientArray, atom: AtomDistribution, beta: float,
                          shift=None, center=None) -> SmallBallResult:
    """sup over scalar centers of P(|F(x_1..x_D) + L(x) - c| <= beta), exactly.

    ``shift`` is an optional fixed lower-degree form called as shift(x_1, ..., x_D);
    the sup over all such forms is not taken.
    """
    values, weights, total = multilinear_values(A, atom, shift)
    mass, c = best_ball(values, weights, beta, center)
    return SmallBallResult(Fraction(int(mass), total), c, "exact-enumeration")


def factored_zero_probability(k, l, atom: AtomDistribution) -> Fraction:
    """p + q - pq with p = P(k.x = 0), q = P(l.y = 0)."""
    p = linear_smallball(k, atom, 0.0, center=0.0).rho
    q = linear_smallball(l, atom, 0.0, center=0.0).rho
    return p + q - p * q


# -- pigeonhole lower bound -----------------------------------------------------

@dataclass
class PigeonholeResult:
    bound: Fraction
    rho: Fraction
    value_count: int
    volume: int

    @property
    def verified(self) -> bool:
        return self.rho >= self.bound


def pigeonhole_bound(q: Gap, coefficients, atom: AtomDistribution) -> PigeonholeResult:
    """1/|nQ| lower bound for rho_0 when every coefficient lies in the symmetric GAP Q.

    ``coefficients`` is the sequence a_1..a_n, or an integer n meaning n copies
    of the first generator.  With support in {-1, 0, 1} every sum lies in nQ,
    so some value carries mass at least 1/|nQ|.
    """
    vals = np.asarray(atom.values())
    if not np.all(np.isin(vals, (-1.0, 0.0, 1.0))):
        raise ValueError("pigeonhole bound assumes support within {-1, 0, 1}")
    if isinstance(coefficients, (int, np.integer)):
        # n copies of the first generator (of 0 for the rank-0 GAP {0})
        g = q.generators[0][0] if q.rank else 0j
        coefficients = [g] * int(coefficients)
    coeffs = list(np.atleast_1d(coefficients)) if len(coefficients) else []
    for c in coeffs:
        if gap_membership(q, c, 1e-9) is None:
            raise ValueError(f"coefficient {c} is not an element of Q")
    nq = gap_dilate(q, len(coeffs))
    count = nq.size
    rho = linear_smallball(coeffs, atom, 0.0).rho if coeffs else Fraction(1)
    return PigeonholeResult(bound=Fraction(1, count), rho=rho, value_count=count, volume=nq.volume)


# -- decoupling -----------------------------------------------------------------

@dataclass
class DecouplingReport:
    rho_hat: float
    rho_decoupled_hat: float
    rho_power: float  # rho_hat^(2d)
    ratio: float
    ci_halfwidth: float
    ci_halfwidth_decoupled: float
    partition: tuple
    trials: int
    extra: dict = field(default_factory=dict)


def _det_form(rows: np.ndarray, coeffs: np.ndarray, index_sets) -> np.ndarray:
    """sum a_{i1..id} det[c_{i1}, ..., c_{id}] per trial; rows has shape (T, d, dn)."""
    d = rows.shape[1]
    sub = coeffs[np.ix_(*index_sets)]
    letters = "abcdefgh"[:d]
    spec = letters + "," + ",".join(f"t{c}" for c in letters) + "->t"
    out = np.zeros(rows.shape[0], dtype=np.complex128)
    for perm in itertools.permutations(range(d)):
        sign = _perm_sign(perm)
        ops = [rows[:, perm[k], :][:, index_sets[k]] for k in range(d)]
        out += sign * np.einsum(spec, sub, *ops)
    return out


def _perm_sign(perm) -> int:
    sign, seen = 1, list(perm)
    for i in range(len(seen)):
        while seen[i] != i:
            j = seen[i]
            seen[i], seen[j] = seen[j], seen[i]
            sign = -sign
    return sign


def _first_rows(spec: BlockEnsembleSpec, n: int, trials: int, seed) -> np.ndarray:
    # row s, column d*l + t holds x_{st;l}: the first d rows of the block-interleaved matrix
    tup = block_tuples(spec, seed, np.arange(trials)[:, None], np.arange(n)[None, :])  # (d, d, T, n)
    d = spec.d
    return tup.transpose(2, 0, 3, 1).reshape(trials, d, n * d)


def default_coefficients(d: int, n: int) -> np.ndarray:
    """a_{i1..id} = 1 on strictly increasing index tuples, 0 elsewhere."""
    dn = d * n
    grids = np.meshgrid(*([np.arange(dn)] * d), indexing="ij")
    inc = np.ones(grids[0].shape, dtype=bool)
    for a, b in zip(grids, grids[1:]):
        inc &= a < b
    return inc.astype(np.complex128)


def _concentration(values: np.ndarray, beta: float) -> float:
    values = np.asarray(values)
    if np.all(values.imag == 0) or not np.iscomplexobj(values):
        mass, _ = _best_window_1d(np.sort(values.real), np.ones(len(values), dtype=np.int64),
                                  beta, _tolerance(values))
        return mass / len(values)
    grouped, w = _group(values, np.ones(len(values), dtype=np.int64))
    if len(grouped) > 5000:
        # pinned centers at a subsample of observed values: a lower bound on the sup
        sub = grouped[np.argsort(-w, kind="stable")[:2000]]
        tol = _tolerance(values)
        best = max(int(np.sum(np.abs(values - c) <= beta + tol)) for c in sub)
        return best / len(values)
    mass, _ = _best_disc(grouped, w, beta, _tolerance(values))
    return mass / len(values)


def decoupling_check(spec: BlockEnsembleSpec, n: int, beta: float, trials: int, seed: int,
                     coefficients=None, partition=None) -> DecouplingReport:
    """Monte Carlo estimate of both sides of the decoupling inequality.

    The original form is sum a_{i1..id} det[c_{i1}..c_{id}] over the columns of
    the first d rows of the block matrix.  The decoupled form restricts i_k to
    the columns B(U_k) of the k-th partition class and replaces each entry by
    the difference of two independent copies.
    """
    d = spec.d
    if partition is None:
        if n < d:
            raise ValueError(f"cannot split {n} column blocks into {d} nonempty classes")
        partition = tuple(tuple(int(i) for i in c) for c in np.array_split(np.arange(n), d))
    partition = tuple(tuple(c) for c in partition)
    if len(partition) != d or any(len(c) == 0 for c in partition):
        raise ValueError("partition must consist of d nonempty classes")
    coeffs = default_coefficients(d, n) if coefficients is None else np.asarray(coefficients, dtype=np.complex128)
    full = [np.arange(d * n)] * d
    blocks = [np.array([d * l + t for l in cls for t in range(d)]) for cls in partition]

    rows = _first_rows(spec, n, trials, rng.derive_seed(seed, 1))
    original = _det_form(rows, coeffs, full)
    r1 = _first_rows(spec, n, trials, rng.derive_seed(seed, 2))
    r2 = _first_rows(spec, n, trials, rng.derive_seed(seed, 3))
    decoupled = _det_form(r1 - r2, coeffs, blocks)

    rho = _concentration(original, beta)
    rho_dec = _concentration(decoupled, beta)
    power = rho ** (2 * d)
    ci = lambda p: 1.96 * math.sqrt(max(p * (1 - p), 1.0 / trials) / trials)
    return DecouplingReport(
        rho_hat=float(rho), rho_decoupled_hat=float(rho_dec), rho_power=float(power),
        ratio=float(rho_dec / power) if power > 0 else math.inf,
        ci_halfwidth=ci(rho), ci_halfwidth_decoupled=ci(rho_dec),
        partition=partition, trials=trials,
    )
