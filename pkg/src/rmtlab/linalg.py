"""Dense complex linear algebra with explicit accuracy contracts.

Two eigenvalue backends are available.  ``"qr"`` is the in-tree
Householder-Hessenberg reduction followed by a single-shift complex QR
iteration with Wilkinson shifts.  ``"lapack"`` (the default) hands the same
problem to LAPACK through numpy; both are held to identical residual
contracts by the test suite.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, NotHermitianError, ShapeError

DEFLATION_TOL = 1e-14
MAX_SWEEPS_PER_EIGENVALUE = 40
HERMITIAN_TOL = 1e-12

_BACKENDS = ("lapack", "qr")


@dataclass(frozen=True)
class Spectrum:
    values: np.ndarray
    residual_bound: float

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class SingularSpectrum:
    values: np.ndarray  # descending, nonnegative

    def __len__(self):
        return len(self.values)

    @property
    def smallest(self) -> float:
        return float(self.values[-1]) if len(self.values) else 0.0


def as_matrix(m) -> np.ndarray:
    """Validate and convert to a 2-D complex128 array with finite entries."""
    a = np.asarray(m)
    if a.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got shape {a.shape}")
    a = a.astype(np.complex128, copy=False)
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def _square(m) -> np.ndarray:
    a = as_matrix(m)
    if a.shape[0] != a.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {a.shape}")
    return a


def _check_backend(backend):
    if backend not in _BACKENDS:
        raise ValueError(f"unknown backend {backend!r}; choose from {_BACKENDS}")


# -- in-tree QR algorithm -----------------------------------------------------

def hessenberg(m) -> np.ndarray:
    """Unitarily similar upper Hessenberg form via Householder reflections."""
    h = _square(m).copy()
    n = h.shape[0]
    for k in range(n - 2):
        x = h[k + 1:, k]
        alpha = np.linalg.norm(x)
        if alpha == 0.0:
            continue
        phase = x[0] / abs(x[0]) if x[0] != 0 else 1.0
        v = x.copy()
        v[0] += phase * alpha
        v /= np.linalg.norm(v)
        h[k + 1:, k:] -= 2.0 * np.outer(v, v.conj() @ h[k + 1:, k:])
        h[:, k + 1:] -= 2.0 * np.outer(h[:, k + 1:] @ v, v.conj())
        h[k + 2:, k] = 0.0
    return h


def _wilkinson_shift(a, b, c, d):
    # eigenvalue of [[a, b], [c, d]] closest to d
    tr_half = 0.5 * (a + d)
    disc = np.sqrt(0.25 * (a - d) ** 2 + b * c)
    l1, l2 = tr_half + disc, tr_half - disc
    return l1 if abs(l1 - d) <= abs(l2 - d) else l2


def _qr_sweep(w: np.ndarray, mu: complex) -> None:
    """One explicitly shifted QR step on the Hessenberg window ``w`` (in place)."""
    m = w.shape[0]
    idx = np.arange(m)
    w[idx, idx] -= mu
    rots = []
    for k in range(m - 1):
        a, b = w[k, k], w[k + 1, k]
        r = np.hypot(abs(a), abs(b))
        if r == 0.0:
            rots.append(None)
            continue
        c, s = a / r, b / r
        rk, rk1 = w[k, k:].copy(), w[k + 1, k:]
        w[k, k:] = c.conjugate() * rk + s.conjugate() * rk1
        w[k + 1, k:] = -s * rk + c * rk1
        w[k + 1, k] = 0.0
        rots.append((c, s))
    for k, rot in enumerate(rots):
        if rot is None:
            continue
        c, s = rot
        top = min(k + 2, m - 1) + 1
        ck, ck1 = w[:top, k].copy(), w[:top, k + 1]
        w[:top, k] = c * ck + s * ck1
        w[:top, k + 1] = -s.conjugate() * ck + c.conjugate() * ck1
    w[idx, idx] += mu


def qr_eigenvalues(m) -> np.ndarray:
    """Eigenvalues by Hessenberg reduction + Wilkinson-shifted complex QR.

    Raises ConvergenceError when an eigenvalue fails to deflate within
    MAX_SWEEPS_PER_EIGENVALUE sweeps.
    """
    h = hessenberg(m)
    n = h.shape[0]
    eig = np.zeros(n, dtype=np.complex128)
    if n == 0:
        return eig
    scale = np.linalg.norm(h) or 1.0
    floor = np.finfo(float).eps * scale
    hi = n - 1
    its = 0
    total = 0
    while hi >= 0:
        if hi == 0:
            eig[0] = h[0, 0]
            break
        lo = hi
        while lo > 0:
            ref = abs(h[lo - 1, lo - 1]) + abs(h[lo, lo])
            tol = DEFLATION_TOL * ref if ref > 0 else floor
            if abs(h[lo, lo - 1]) <= max(tol, 1e-300):
                h[lo, lo - 1] = 0.0
                break
            lo -= 1
        if lo == hi:
            eig[hi] = h[hi, hi]
            hi -= 1
            its = 0
            continue
        its += 1
        total += 1
        if its > MAX_SWEEPS_PER_EIGENVALUE:
            raise ConvergenceError(
                f"QR iteration did not deflate eigenvalue {hi} after "
                f"{MAX_SWEEPS_PER_EIGENVALUE} sweeps ({total} sweeps total)",
                iterations=total,
            )
        if its % 10 == 0:
            # exceptional shift breaks symmetric stagnation cycles
            mu = h[hi, hi] + abs(h[hi, hi - 1]) * (0.75 + 0.5j)
        else:
            mu = _wilkinson_shift(h[hi - 1, hi - 1], h[hi - 1, hi], h[hi, hi - 1], h[hi, hi])
        window = h[lo:hi + 1, lo:hi + 1]
        _qr_sweep(window, mu)
    return eig


# -- public operations ---------------------------------------------------------

def hermitian_eigen(h, backend: str = "lapack") -> np.ndarray:
    """Real eigenvalues of a Hermitian matrix, ascending."""
    _check_backend(backend)
    a = _square(h)
    norm = np.linalg.norm(a)
    if a.size and np.max(np.abs(a - a.conj().T)) > HERMITIAN_TOL * max(norm, 1e-300):
        raise NotHermitianError("matrix is not Hermitian within tolerance")
    if backend == "lapack":
        return np.linalg.eigvalsh(a)
    a = 0.5 * (a + a.conj().T)
    return np.sort(qr_eigenvalues(a).real)


def complex_eigen(m, backend: str = "lapack") -> Spectrum:
    """All eigenvalues of a square complex matrix (multiset, unordered)."""
    _check_backend(backend)
    a = _square(m)
    n = a.shape[0]
    if backend == "lapack":
        vals = np.linalg.eigvals(a)
    else:
        vals = qr_eigenvalues(a)
    vals = np.asarray(vals, dtype=np.complex128)
    trace_gap = abs(vals.sum() - np.trace(a)) if n else 0.0
    bound = max(float(trace_gap), n * np.finfo(float).eps * float(np.linalg.norm(a)))
    return Spectrum(values=vals, residual_bound=bound)


def hermitize(m) -> np.ndarray:
    """The 2-block Hermitian matrix [[0, M], [M*, 0]]."""
    a = as_matrix(m)
    r, c = a.shape
    out = np.zeros((r + c, r + c), dtype=np.complex128)
    out[:r, r:] = a
    out[r:, :r] = a.conj().T
    return out


def singular_values(m, backend: str = "lapack") -> SingularSpectrum:
    """Singular values as the nonnegative half of the Hermitization spectrum."""
    a = as_matrix(m)
    k = min(a.shape)
    if k == 0:
        return SingularSpectrum(values=np.zeros(0))
    ev = hermitian_eigen(hermitize(a), backend=backend)
    top = np.clip(ev[::-1][:k], 0.0, None)
    return SingularSpectrum(values=top)


def norms(m) -> tuple[float, float]:
    """(Hilbert-Schmidt norm, spectral norm)."""
    a = as_matrix(m)
    hs = float(np.sqrt(np.sum(np.abs(a) ** 2)))
    sv = singular_values(a).values
    spectral = float(sv[0]) if len(sv) else 0.0
    return hs, min(spectral, hs) if hs > 0 else 0.0
