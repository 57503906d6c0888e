"""Truncate-center-rescale operators for atom variables and block matrices.

For a threshold T = n^delta the tilde atom is xi 1{|xi| <= T} minus its mean
and the hat atom divides that by sqrt(d Var).  Truncated moments are exact:
finite sums for discrete atoms, erf/exp closed forms for Gaussians.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .ensembles import AtomDistribution, BlockEnsembleSpec, assemble_blocks, block_tuples
from .errors import DegenerateTruncationError, ShapeError
from .linalg import as_matrix


@dataclass(frozen=True)
class TruncationParams:
    delta: float
    eta: float
    n: int
    m2eta: float | None = None  # max E|xi|^(2+eta); derived from the atoms when None

    def __post_init__(self):
        if self.delta <= 0 or self.eta <= 0:
            raise ValueError("delta and eta must be positive")
        if self.n < 1:
            raise ValueError("n must be >= 1")

    @property
    def threshold(self) -> float:
        return float(self.n) ** self.delta

    @property
    def feeds_cubic_theorem(self) -> bool:
        return self.delta < 0.01

    def moment(self, atoms) -> float:
        if self.m2eta is not None:
            return self.m2eta
        return max(a.absolute_moment(2 + self.eta) for a in atoms)


@dataclass(frozen=True)
class TruncatedAtom:
    source: AtomDistribution
    threshold: float
    center: complex
    variance_tilde: float
    conjugated: bool = False
    sign: float = 1.0

    @property
    def scale_hat(self) -> float:
        return 1.0 / math.sqrt(self.source.d * self.variance_tilde)

    @property
    def n0_satisfied(self) -> bool:
        """Var(tilde) > 1/(2d); this implies d Var(tilde) >= 1/4, which gives |hat| <= 4 n^delta."""
        return self.source.d * self.variance_tilde > 0.5

    def apply(self, x) -> np.ndarray:
        x = np.asarray(x)
        kept = np.where(np.abs(x) <= self.threshold, x, 0.0)
        return (kept - self.center) * self.scale_hat

    def sample(self, seed, *keys) -> np.ndarray:
        x = self.source.draw(seed, *keys)
        if self.conjugated:
            x = np.conj(x)
        return self.apply(self.sign * x)


def _truncated_moments(a: AtomDistribution, t: float) -> tuple[complex, float]:
    """(E[xi 1{|xi|<=t}], E[|xi|^2 1{|xi|<=t}])."""
    sigma2 = a.variance
    if a.is_finite:
        vals = a.values()
        probs = np.array([float(p) for p in a.exact_probabilities()])
        keep = np.abs(vals) <= t
        return complex(np.sum(probs[keep] * vals[keep])), float(np.sum(probs[keep] * np.abs(vals[keep]) ** 2))
    sigma = math.sqrt(sigma2)
    if a.kind == "gaussian-real":
        r = t / sigma
        pdf = math.exp(-0.5 * r * r) / math.sqrt(2 * math.pi)
        return 0.0, sigma2 * (math.erf(r / math.sqrt(2)) - 2 * r * pdf)
    # |xi|^2 is exponential with mean sigma2
    u = t * t / sigma2
    return 0.0, sigma2 * (1.0 - math.exp(-u) * (1.0 + u)) if u < 700 else sigma2


def truncate_atom(a: AtomDistribution, p: TruncationParams) -> TruncatedAtom:
    t = p.threshold
    c, m2 = _truncated_moments(a, t)
    var = m2 - abs(c) ** 2
    if var <= 0:
        raise DegenerateTruncationError(
            f"threshold n^delta = {t:.4g} removes all mass of the atom; n must exceed n0"
        )
    return TruncatedAtom(source=a, threshold=t, center=complex(c), variance_tilde=float(var))


def position_truncations(spec: BlockEnsembleSpec, p: TruncationParams) -> list[list[TruncatedAtom]]:
    """Hat operators for each block position, honoring the mode's entry laws."""
    d = spec.d
    if spec.mode == "independent":
        return [[truncate_atom(spec.atoms[s][t], p) for t in range(d)] for s in range(d)]
    ta = truncate_atom(spec.atoms[0][0], p)
    if spec.mode == "quaternionic":
        tb = truncate_atom(spec.atoms[0][1], p)
        neg_conj_b = TruncatedAtom(tb.source, tb.threshold, -np.conj(tb.center), tb.variance_tilde,
                                   conjugated=True, sign=-1.0)
        conj_a = TruncatedAtom(ta.source, ta.threshold, np.conj(ta.center), ta.variance_tilde,
                               conjugated=True)
        return [[ta, tb], [neg_conj_b, conj_a]]
    tb = truncate_atom(spec.atoms[1][1], p)
    return [[ta, ta], [ta, tb]]


def truncate_matrix(x, spec: BlockEnsembleSpec, p: TruncationParams) -> np.ndarray:
    """Entrywise hat transform of a matrix sampled from ``spec``."""
    x = as_matrix(x)
    d = spec.d
    if x.shape[0] != x.shape[1] or x.shape[0] % d:
        raise ShapeError(f"matrix of shape {x.shape} is not a d x d block matrix for d={d}")
    n = x.shape[0] // d
    ops = position_truncations(spec, p)
    out = np.empty_like(x)
    for s in range(d):
        for t in range(d):
            sl = (slice(s * n, (s + 1) * n), slice(t * n, (t + 1) * n))
            out[sl] = ops[s][t].apply(x[sl])
    return out


def sample_truncated_matrix(spec: BlockEnsembleSpec, n: int, seed: int, p: TruncationParams) -> np.ndarray:
    from .ensembles import sample_c0_matrix

    return truncate_matrix(sample_c0_matrix(spec, n, seed), spec, p)


@dataclass
class TruncationReport:
    var_gap: float
    var_bound: float
    corr_gap: float
    corr_bound: float
    corr_method: str
    m2eta: float
    n0_satisfied: bool
    hat_max: float
    hat_bound: float
    pairs: dict = field(default_factory=dict, repr=False)

    @property
    def var_pass(self) -> bool:
        return self.var_gap <= self.var_bound

    @property
    def corr_pass(self) -> bool:
        return self.corr_gap <= self.corr_bound

    @property
    def hat_pass(self) -> bool:
        return self.hat_max <= self.hat_bound

    @property
    def passed(self) -> bool:
        return self.var_pass and self.corr_pass


def _analytic_corr(spec: BlockEnsembleSpec):
    """Exact cross-correlations of hat atoms when a closed form is known."""
    if spec.mode == "independent":
        return 0.0
    if spec.mode == "quaternionic":
        a, b = spec.atoms[0][0], spec.atoms[0][1]
        # only E[hat(a)^2] and E[hat(b)^2] can be nonzero; both vanish for
        # rotation-invariant Gaussians
        if a.kind == "gaussian-complex" and b.kind == "gaussian-complex":
            return 0.0
    return None


def truncation_bound_report(target, p: TruncationParams, trials: int = 10**6, seed: int = 0,
                            method: str = "monte-carlo") -> TruncationReport:
    """Check the variance-gap and cross-correlation bounds for a truncation.

    ``target`` is an atom (placed on every position of an independent d x d
    ensemble) or a full BlockEnsembleSpec.  ``method`` selects how the
    cross-correlation is evaluated: ``"analytic"`` (falls back to Monte Carlo
    when no closed form is known) or ``"monte-carlo"``.
    """
    if isinstance(target, AtomDistribution):
        spec = BlockEnsembleSpec(target.d, tuple(tuple(target for _ in range(target.d))
                                                 for _ in range(target.d)))
    else:
        spec = target
    d = spec.d
    atoms = [spec.atoms[s][t] for s in range(d) for t in range(d)]
    m = p.moment(atoms)
    ops = position_truncations(spec, p)
    flat = [ops[s][t] for s in range(d) for t in range(d)]
    var_gap = max(abs(1.0 / d - op.variance_tilde) for op in flat)
    var_bound = 2.0 * m / p.n ** (p.delta * p.eta)
    corr_bound = 10.0 * math.sqrt(m) / p.n ** (p.delta * p.eta / 2.0)
    hat_bound = 4.0 * p.threshold

    analytic = _analytic_corr(spec) if method == "analytic" else None
    tup = block_tuples(spec, seed, np.arange(trials), 0).reshape(d * d, trials)
    hats = np.stack([flat[k].apply(tup[k]) for k in range(d * d)])
    hat_max = float(np.max(np.abs(hats)))
    pairs = {}
    if analytic is not None:
        corr_gap, corr_method = analytic, "analytic"
    else:
        gram = hats @ hats.conj().T / trials
        for i in range(d * d):
            for j in range(d * d):
                if i != j:
                    pairs[(divmod(i, d), divmod(j, d))] = complex(gram[i, j])
        corr_gap, corr_method = max(abs(v) for v in pairs.values()), "monte-carlo"
    return TruncationReport(
        var_gap=float(var_gap), var_bound=float(var_bound),
        corr_gap=float(corr_gap), corr_bound=float(corr_bound), corr_method=corr_method,
        m2eta=float(m), n0_satisfied=all(op.n0_satisfied for op in flat),
        hat_max=hat_max, hat_bound=hat_bound, pairs=pairs,
    )


def hs_gap(spec: BlockEnsembleSpec, n: int, seed: int, p: TruncationParams) -> float:
    """(1/n^2) ||X - X_hat||_2^2 for one sample."""
    from .ensembles import sample_c0_matrix

    x = sample_c0_matrix(spec, n, seed)
    return float(np.sum(np.abs(x - truncate_matrix(x, spec, p)) ** 2) / n**2)


def truncation_levy(spec: BlockEnsembleSpec, n: int, seed: int, delta: float, eta: float = 1.0,
                    z: complex = 0.0) -> float:
    """Levy distance between the ESDs of H_n(z) and its truncated counterpart."""
    from .ensembles import sample_c0_matrix
    from .spectral import levy_distance, symmetrized_singular_measure

    p = TruncationParams(delta=delta, eta=eta, n=n)
    x = sample_c0_matrix(spec, n, seed)
    xh = truncate_matrix(x, spec, p)
    norm = math.sqrt(n)
    f = symmetrized_singular_measure(x, z, norm).cdf()
    g = symmetrized_singular_measure(xh, z, norm).cdf()
    return levy_distance(f, g)
