"""Generalized arithmetic progressions and integer relations among their elements."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import reduce

import numpy as np

from .errors import CapExceededError

VOLUME_CAP = 10**6


@dataclass(frozen=True)
class Gap:
    """{g0 + sum_i k_i g_i : lower_i <= k_i <= upper_i} in C^dim."""

    generators: tuple  # r generators, each a tuple of dim complex numbers
    lower: tuple
    upper: tuple
    offset: tuple | None = None

    def __post_init__(self):
        gens = tuple(tuple(complex(c) for c in np.atleast_1d(g)) for g in self.generators)
        if len(gens) != len(self.lower) or len(gens) != len(self.upper):
            raise ValueError("need one (lower, upper) bound pair per generator")
        if any(int(lo) > int(hi) for lo, hi in zip(self.lower, self.upper)):
            raise ValueError("lower bounds must not exceed upper bounds")
        dim = len(gens[0]) if gens else (len(np.atleast_1d(self.offset)) if self.offset is not None else 1)
        if any(len(g) != dim for g in gens):
            raise ValueError("generators must share one dimension")
        off = (0j,) * dim if self.offset is None else tuple(complex(c) for c in np.atleast_1d(self.offset))
        object.__setattr__(self, "generators", gens)
        object.__setattr__(self, "lower", tuple(int(k) for k in self.lower))
        object.__setattr__(self, "upper", tuple(int(k) for k in self.upper))
        object.__setattr__(self, "offset", off)

    @classmethod
    def symmetric(cls, generators, bounds) -> "Gap":
        bounds = tuple(int(k) for k in bounds)
        if any(k < 0 for k in bounds):
            raise ValueError("symmetric bounds must be nonnegative")
        return cls(tuple(generators), tuple(-k for k in bounds), bounds)

    @property
    def rank(self) -> int:
        return len(self.generators)

    @property
    def dim(self) -> int:
        return len(self.offset)

    @property
    def volume(self) -> int:
        return reduce(lambda acc, b: acc * (b[1] - b[0] + 1), zip(self.lower, self.upper), 1)

    @property
    def is_symmetric(self) -> bool:
        return all(c == 0 for c in self.offset) and all(lo == -hi for lo, hi in zip(self.lower, self.upper))

    def coefficient_tuples(self):
        """All (k_1..k_r) in lexicographic order."""
        return itertools.product(*(range(lo, hi + 1) for lo, hi in zip(self.lower, self.upper)))

    def _check_cap(self):
        if self.volume > VOLUME_CAP:
            raise CapExceededError(f"GAP volume {self.volume} exceeds enumeration cap {VOLUME_CAP}")

    def coefficient_array(self) -> np.ndarray:
        self._check_cap()
        if self.rank == 0:
            return np.zeros((1, 0), dtype=np.int64)
        grids = np.meshgrid(*(np.arange(lo, hi + 1) for lo, hi in zip(self.lower, self.upper)), indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    def points(self) -> np.ndarray:
        """Element for every coefficient tuple, in lexicographic tuple order; shape (Vol, dim)."""
        coeffs = self.coefficient_array()
        gens = np.array(self.generators, dtype=np.complex128).reshape(self.rank, self.dim)
        return np.asarray(self.offset)[None, :] + coeffs @ gens

    def elements(self) -> set:
        """The distinct elements as tuples (scalars for dim 1)."""
        keys = _point_keys(self.points())
        return set(keys)

    @property
    def size(self) -> int:
        return len(self.elements())

    @property
    def is_proper(self) -> bool:
        return self.size == self.volume

    def dilate(self, n: int) -> "Gap":
        return gap_dilate(self, n)

    def __contains__(self, x) -> bool:
        return gap_membership(self, x, 1e-9) is not None


def _point_keys(points: np.ndarray, decimals: int = 9):
    pts = np.round(np.asarray(points, dtype=np.complex128), decimals) + 0.0  # folds -0.0
    if pts.ndim == 2 and pts.shape[1] == 1:
        return [complex(p) for p in pts[:, 0]]
    return [tuple(complex(c) for c in row) for row in pts]


def gap_elements(q: Gap) -> set:
    return q.elements()


@dataclass(frozen=True)
class Membership:
    point: tuple
    coefficients: tuple
    distance: float


def gap_membership(q: Gap, x, delta: float) -> Membership | None:
    """Closest element of Q to x when within distance delta (inclusive), else None.

    Ties go to the lexicographically smallest coefficient tuple.
    """
    pts = q.points()
    x = np.atleast_1d(np.asarray(x, dtype=np.complex128))
    dist = np.linalg.norm(pts - x[None, :], axis=1)
    best = dist.min()
    scale = 1e-12 * max(1.0, float(np.abs(pts).max(initial=0.0)))
    idx = int(np.flatnonzero(dist <= best + scale)[0])
    if dist[idx] > delta + scale:
        return None
    coeffs = tuple(int(c) for c in q.coefficient_array()[idx])
    return Membership(point=tuple(complex(c) for c in pts[idx]), coefficients=coeffs, distance=float(dist[idx]))


def gap_dilate(q: Gap, n: int) -> Gap:
    """nQ for a symmetric GAP: bounds scaled by n, generators unchanged."""
    if not q.is_symmetric:
        raise ValueError("dilation is defined here for symmetric GAPs only")
    if n < 0:
        raise ValueError("dilation factor must be nonnegative")
    return Gap(q.generators, tuple(n * k for k in q.lower), tuple(n * k for k in q.upper))


# -- integer relations ---------------------------------------------------------

def _bareiss_det(rows) -> int:
    """Exact determinant of a square integer matrix (fraction-free elimination)."""
    m = [list(map(int, r)) for r in rows]
    n = len(m)
    if n == 0:
        return 1
    sign, prev = 1, 1
    for k in range(n - 1):
        if m[k][k] == 0:
            swap = next((i for i in range(k + 1, n) if m[i][k] != 0), None)
            if swap is None:
                return 0
            m[k], m[swap] = m[swap], m[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) // prev
        prev = m[k][k]
    return sign * m[n - 1][n - 1]


def _normalize(alpha):
    g = reduce(math.gcd, (abs(a) for a in alpha), 0)
    alpha = [a // g for a in alpha] if g > 1 else list(alpha)
    first = next(a for a in alpha if a != 0)
    return tuple(-a for a in alpha) if first < 0 else tuple(alpha)


def gap_integer_relation(coords) -> tuple[int, ...]:
    """Nonzero integers alpha with sum_i alpha_i q_i = 0 for r+1 vectors q_i in Z^r.

    alpha_i = (-1)^i det(coordinate matrix with row i removed): the relation is
    the Laplace expansion of an (r+1) x (r+1) determinant with a repeated
    column.  When every minor vanishes the rows are rank deficient and an
    exact integer kernel vector is used instead.  The result is divided by the
    gcd and signed so its first nonzero entry is positive.
    """
    rows = [tuple(int(c) for c in np.atleast_1d(q)) for q in coords]
    r = len(rows) - 1
    if r < 1 or any(len(q) != r for q in rows):
        raise ValueError("need r+1 coordinate vectors of length r")
    if all(c == 0 for q in rows for c in q):
        raise ValueError("all-zero coordinates admit no informative relation")
    alpha = [(-1) ** i * _bareiss_det(rows[:i] + rows[i + 1:]) for i in range(r + 1)]
    if all(a == 0 for a in alpha):
        alpha = _integer_kernel_vector(rows)
    return _normalize(alpha)


def _integer_kernel_vector(rows) -> list[int]:
    import sympy

    mat = sympy.Matrix(rows).T  # columns are the q_i
    basis = mat.nullspace()
    vec = basis[0]
    den = reduce(lambda a, b: a * b // math.gcd(a, b), (sympy.fraction(c)[1] for c in vec), 1)
    return [int(c * den) for c in vec]


def annihilates(alpha, coords) -> bool:
    rows = [tuple(int(c) for c in np.atleast_1d(q)) for q in coords]
    r = len(rows[0])
    return all(sum(a * q[j] for a, q in zip(alpha, rows)) == 0 for j in range(r))
