"""Samplers for block ensembles with dependent but uncorrelated entries."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import rng
from .errors import ShapeError
from .linalg import as_matrix

ATOM_KINDS = ("bernoulli-real", "gaussian-real", "gaussian-complex", "discrete-custom")
MODES = ("independent", "quaternionic", "correlated-demo")


def _as_fraction(p) -> Fraction:
    if isinstance(p, Fraction):
        return p
    if isinstance(p, float):
        return Fraction(repr(p))
    return Fraction(p)


@dataclass(frozen=True)
class AtomDistribution:
    """A mean-zero atom variable normalized to variance 1/d.

    For ``discrete-custom`` the given support is rescaled by a positive factor
    so that the variance becomes 1/d; the probabilities are kept exactly as
    fractions.
    """

    kind: str
    d: int = 1
    support: tuple = ()
    probabilities: tuple = ()

    def __post_init__(self):
        if self.kind not in ATOM_KINDS:
            raise ValueError(f"unknown atom kind {self.kind!r}")
        if self.d < 1:
            raise ValueError("d must be positive")
        if self.kind == "discrete-custom":
            if len(self.support) == 0 or len(self.support) != len(self.probabilities):
                raise ValueError("discrete-custom needs matching support and probabilities")
            probs = tuple(_as_fraction(p) for p in self.probabilities)
            if any(p <= 0 for p in probs) or sum(probs) != 1:
                raise ValueError("probabilities must be positive and sum to 1")
            vals = np.asarray(self.support, dtype=np.complex128)
            pf = np.array([float(p) for p in probs])
            mean = np.sum(pf * vals)
            var = float(np.sum(pf * np.abs(vals) ** 2))
            if abs(mean) > 1e-12 * max(1.0, math.sqrt(var)):
                raise ValueError(f"discrete atom must have mean zero (got {mean})")
            if var <= 0:
                raise ValueError("discrete atom is degenerate")
            object.__setattr__(self, "probabilities", probs)
            object.__setattr__(self, "_raw_variance", var)

    @property
    def variance(self) -> float:
        return 1.0 / self.d

    @property
    def scale(self) -> float:
        """Multiplier applied to the unit-free base law."""
        if self.kind == "discrete-custom":
            return math.sqrt(self.variance / self._raw_variance)
        return math.sqrt(self.variance)

    @property
    def is_complex(self) -> bool:
        if self.kind == "gaussian-complex":
            return True
        if self.kind == "discrete-custom":
            return bool(np.any(np.imag(np.asarray(self.support, dtype=complex)) != 0))
        return False

    @property
    def is_finite(self) -> bool:
        return self.kind in ("bernoulli-real", "discrete-custom")

    def values(self) -> np.ndarray:
        """Support points after normalization (finite atoms only)."""
        if self.kind == "bernoulli-real":
            s = 1.0 if self.d == 1 else 1.0 / math.sqrt(self.d)
            return np.array([-s, s])
        if self.kind == "discrete-custom":
            vals = np.asarray(self.support, dtype=np.complex128) * self.scale
            return vals if self.is_complex else vals.real
        raise ValueError(f"{self.kind} atom has no finite support")

    def exact_probabilities(self) -> tuple[Fraction, ...]:
        if self.kind == "bernoulli-real":
            return (Fraction(1, 2), Fraction(1, 2))
        if self.kind == "discrete-custom":
            return self.probabilities
        raise ValueError(f"{self.kind} atom has no finite support")

    def second_moment(self) -> complex:
        """E[xi^2] (zero is required for quaternionic use)."""
        if self.kind == "gaussian-complex":
            return 0.0
        if self.kind in ("bernoulli-real", "gaussian-real"):
            return self.variance
        p = np.array([float(q) for q in self.probabilities])
        return complex(np.sum(p * self.values() ** 2))

    def absolute_moment(self, order: float) -> float:
        """E|xi|^order in closed form."""
        sigma = math.sqrt(self.variance)
        if self.kind == "gaussian-real":
            return sigma ** order * 2 ** (order / 2) * math.gamma((order + 1) / 2) / math.sqrt(math.pi)
        if self.kind == "gaussian-complex":
            return sigma ** order * math.gamma(1 + order / 2)
        p = np.array([float(q) for q in self.exact_probabilities()])
        return float(np.sum(p * np.abs(self.values()) ** order))

    def draw(self, seed, *keys) -> np.ndarray:
        """Samples as a pure function of (seed, keys); keys broadcast."""
        if self.kind == "bernoulli-real":
            u = rng.uniform(seed, *keys, 0)
            s = 1.0 if self.d == 1 else 1.0 / math.sqrt(self.d)
            return np.where(u < 0.5, -s, s)
        if self.kind == "gaussian-real":
            g, _ = rng.normal_pair(seed, *keys)
            return g * self.scale
        if self.kind == "gaussian-complex":
            g1, g2 = rng.normal_pair(seed, *keys)
            return (g1 + 1j * g2) * (self.scale / math.sqrt(2.0))
        u = rng.uniform(seed, *keys, 0)
        cdf = np.cumsum([float(p) for p in self.probabilities])
        idx = np.minimum(np.searchsorted(cdf, u, side="right"), len(cdf) - 1)
        return self.values()[idx]


def bernoulli(d=1) -> AtomDistribution:
    return AtomDistribution("bernoulli-real", d)


def gaussian(d=1, complex_=False) -> AtomDistribution:
    return AtomDistribution("gaussian-complex" if complex_ else "gaussian-real", d)


def heavy_discrete(d=2, complex_=False) -> AtomDistribution:
    """{+-1 w.p. 0.45 each, +-10 w.p. 0.05 each}, normalized to variance 1/d.

    With ``complex_`` the atom is (h1 + i h2)/sqrt(2) for independent copies
    h1, h2: a 16-point law with E[xi^2] = 0, usable in quaternionic mode.
    """
    support = (-1.0, 1.0, -10.0, 10.0)
    probs = (Fraction(9, 20), Fraction(9, 20), Fraction(1, 20), Fraction(1, 20))
    if complex_:
        pairs = [(complex(a, b), p * q) for a, p in zip(support, probs) for b, q in zip(support, probs)]
        return AtomDistribution("discrete-custom", d, support=tuple(v for v, _ in pairs),
                                probabilities=tuple(p for _, p in pairs))
    return AtomDistribution("discrete-custom", d, support=support, probabilities=probs)


@dataclass(frozen=True)
class BlockEnsembleSpec:
    d: int
    atoms: tuple  # d x d grid of AtomDistribution
    mode: str = "independent"
    moment_eta: float = 1.0

    def __post_init__(self):
        if self.d < 2:
            raise ValueError("block parameter d must be >= 2")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        grid = tuple(tuple(row) for row in self.atoms)
        if len(grid) != self.d or any(len(row) != self.d for row in grid):
            raise ShapeError("atoms must form a d x d grid")
        for row in grid:
            for a in row:
                if a.d != self.d:
                    raise ValueError("every atom must be normalized to variance 1/d")
        if self.mode in ("quaternionic", "correlated-demo") and self.d != 2:
            raise ValueError(f"{self.mode} mode requires d = 2")
        if self.mode == "quaternionic":
            for a in (grid[0][0], grid[0][1]):
                if abs(a.second_moment()) > 1e-12:
                    raise ValueError("quaternionic mode requires E[xi^2] = 0")
        if self.moment_eta <= 0:
            raise ValueError("moment_eta must be positive")
        object.__setattr__(self, "atoms", grid)

    @classmethod
    def uniform(cls, d, kind="gaussian-complex", mode="independent", **atom_kw):
        atom = AtomDistribution(kind, d, **atom_kw)
        return cls(d, tuple(tuple(atom for _ in range(d)) for _ in range(d)), mode)

    @property
    def c0_compliant(self) -> bool:
        return self.mode != "correlated-demo"


def block_tuples(spec: BlockEnsembleSpec, seed, ii, jj) -> np.ndarray:
    """Atom tuples (x_{st;ij})_{s,t} at positions (ii, jj); shape (d, d, *ii.shape)."""
    ii, jj = np.broadcast_arrays(np.asarray(ii), np.asarray(jj))
    d = spec.d
    out = np.zeros((d, d) + ii.shape, dtype=np.complex128)
    if spec.mode == "independent":
        for s in range(d):
            for t in range(d):
                out[s, t] = spec.atoms[s][t].draw(seed, s * d + t, ii, jj)
    elif spec.mode == "quaternionic":
        a = spec.atoms[0][0].draw(seed, 0, ii, jj)
        b = spec.atoms[0][1].draw(seed, 1, ii, jj)
        out[0, 0], out[0, 1] = a, b
        out[1, 0], out[1, 1] = -np.conj(b), np.conj(a)
    else:
        a = spec.atoms[0][0].draw(seed, 0, ii, jj)
        b = spec.atoms[1][1].draw(seed, 3, ii, jj)
        out[0, 0] = out[0, 1] = out[1, 0] = a
        out[1, 1] = b
    return out


def assemble_blocks(blocks: np.ndarray) -> np.ndarray:
    """(d, d, n, n) block array -> dn x dn matrix."""
    d, _, n, _ = blocks.shape
    return blocks.transpose(0, 2, 1, 3).reshape(d * n, d * n)


def sample_c0_matrix(spec: BlockEnsembleSpec, n: int, seed: int) -> np.ndarray:
    """A dn x dn block matrix; block (s, t) position (i, j) holds x_{st;ij}."""
    if n < 1:
        raise ValueError("n must be >= 1")
    ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    return assemble_blocks(block_tuples(spec, seed, ii, jj))


def sample_iid_matrix(atom: AtomDistribution, n: int, seed: int) -> np.ndarray:
    """n x n matrix of iid atoms (Ginibre-type when the atom is Gaussian)."""
    ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    return atom.draw(seed, 0, ii, jj).astype(np.complex128)


def _same_square(a, b):
    a, b = as_matrix(a), as_matrix(b)
    if a.shape != b.shape or a.shape[0] != a.shape[1]:
        raise ShapeError(f"need two square matrices of equal size, got {a.shape} and {b.shape}")
    return a, b


def quaternion_embed(a, b) -> np.ndarray:
    """Complex adjoint [[A, B], [-conj(B), conj(A)]] of the quaternion matrix A + B j."""
    a, b = _same_square(a, b)
    return np.block([[a, b], [-b.conj(), a.conj()]])


def build_correlated_demo(a, b) -> np.ndarray:
    """[[A, A], [A, B]]: uncorrelatedness deliberately broken."""
    a, b = _same_square(a, b)
    return np.block([[a, a], [a, b]])


@dataclass
class CovarianceReport:
    max_cross: float
    tolerance: float
    table: dict = field(repr=False)
    variances: np.ndarray = field(repr=False)

    @property
    def passed(self) -> bool:
        return self.max_cross <= self.tolerance

    @property
    def worst_pair(self):
        return max(self.table, key=lambda k: abs(self.table[k]))


def covariance_check(spec: BlockEnsembleSpec, trials: int, seed: int) -> CovarianceReport:
    """Empirical E[xi_st conj(xi_uv)] over ``trials`` iid block tuples."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    d = spec.d
    tup = block_tuples(spec, seed, np.arange(trials), 0).reshape(d * d, trials)
    gram = (tup @ tup.conj().T) / trials
    table = {}
    for p in range(d * d):
        for q in range(d * d):
            if p != q:
                table[(divmod(p, d), divmod(q, d))] = complex(gram[p, q])
    max_cross = max(abs(v) for v in table.values())
    return CovarianceReport(
        max_cross=float(max_cross),
        tolerance=4.0 / math.sqrt(trials) / d,
        table=table,
        variances=np.real(np.diag(gram)).copy(),
    )


@dataclass(frozen=True)
class PerturbationSpec:
    rank_exponent: float  # epsilon in (0, 1]
    entry_bound_exponent: float = 0.0  # alpha
    hs_budget: float = 1.0  # C with ||N||_2^2 <= C n^2

    def __post_init__(self):
        if not 0 < self.rank_exponent <= 1:
            raise ValueError("rank_exponent must lie in (0, 1]")
        if self.entry_bound_exponent < 0:
            raise ValueError("entry_bound_exponent must be >= 0")
        if self.hs_budget < 0:
            raise ValueError("hs_budget must be >= 0")

    def rank_cap(self, n: int) -> int:
        # tolerance guards against n**(1-eps) landing a hair above an integer
        return max(1, math.ceil(n ** (1.0 - self.rank_exponent) - 1e-9))


def low_rank_perturbation(p: PerturbationSpec, d: int, n: int, seed: int = 0) -> np.ndarray:
    """Deterministic dn x dn matrix with rank <= ceil(n^(1-eps)), entries <= n^alpha,
    and ||N||_2^2 <= C n^2.

    Built as sum_j c e_{r_j} e_{c_j}^T over k = ceil(n^(1-eps)) distinct rows r_j and
    columns c_j chosen by the seed, so the rank is exactly k.  c is n^alpha unless
    the HS budget forces it smaller.
    """
    dim = d * n
    k = p.rank_cap(n)
    if k > dim:
        raise ValueError(f"rank {k} exceeds matrix dimension {dim}")
    out = np.zeros((dim, dim), dtype=np.complex128)
    if p.hs_budget == 0:
        return out
    c = min(n ** p.entry_bound_exponent, math.sqrt(p.hs_budget * n * n / k))
    rows = np.argsort(rng.hash_keys(seed, np.arange(dim), 7), kind="stable")[:k]
    cols = np.argsort(rng.hash_keys(seed, np.arange(dim), 11), kind="stable")[:k]
    out[rows, cols] = c
    return out


def sample_perturbed(spec: BlockEnsembleSpec, n: int, seed: int, perturbation=None) -> np.ndarray:
    x = sample_c0_matrix(spec, n, seed)
    if perturbation is not None:
        x = x + low_rank_perturbation(perturbation, spec.d, n, seed)
    return x


def atom_grid(d: int, atoms: Sequence) -> tuple:
    """Normalize a flat list of d*d atoms or a nested grid into a tuple grid."""
    atoms = list(atoms)
    if len(atoms) == d * d and isinstance(atoms[0], AtomDistribution):
        return tuple(tuple(atoms[s * d:(s + 1) * d]) for s in range(d))
    return tuple(tuple(r) for r in atoms)
