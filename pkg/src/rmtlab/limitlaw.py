"""Limiting objects: the cubic fixed point m(z, w), the density of nu_z by
Stieltjes inversion, the function g(s, t) and the circular-law reference.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre

from .errors import BranchAmbiguityError, ConvergenceError

START_HEIGHT = 1e4
INVERSION_OFFSET = 1e-6
DENSITY_FLOOR = 1e-9
RESIDUAL_TOL = 1e-12
MAX_STEP_HALVINGS = 60


def cubic_coefficients(z: complex, w: complex) -> tuple[complex, complex, complex, complex]:
    """Coefficients of m^3 + 2w m^2 + (w^2 - |z|^2 + 1) m + w."""
    return 1.0, 2.0 * w, w * w - abs(z) ** 2 + 1.0, w


def cubic_residual(m: complex, z: complex, w: complex) -> float:
    _, b, c, d = cubic_coefficients(z, w)
    return abs(((m + b) * m + c) * m + d)


def fixed_point_residual(m: complex, z: complex, w: complex) -> complex:
    """m + (m + w) / ((m + w)^2 - |z|^2), the rational form of the relation."""
    u = m + w
    return m + u / (u * u - abs(z) ** 2)


@dataclass(frozen=True)
class CubicSolution:
    z: complex
    w: complex
    m: complex
    residual: float
    branch_path_points: int
    separation: float  # distance from m to the nearest other root


def _newton(m, b, c, d, iters=8):
    for _ in range(iters):
        p = ((m + b) * m + c) * m + d
        dp = (3.0 * m + 2.0 * b) * m + c
        if dp == 0:
            break
        step = p / dp
        m -= step
        if abs(step) <= 1e-16 * (1.0 + abs(m)):
            break
    return m


def _other_roots(m, b, c):
    # deflate the monic cubic by (x - m): x^2 + (b + m) x + (c + (b + m) m)
    p = b + m
    q = c + p * m
    disc = cmath.sqrt(p * p - 4.0 * q)
    return (-p + disc) / 2.0, (-p - disc) / 2.0


def _correct(m_pred, z, w):
    _, b, c, d = cubic_coefficients(z, w)
    m = _newton(m_pred, b, c, d, iters=30)
    r1, r2 = _other_roots(m, b, c)
    sep = min(abs(m - r1), abs(m - r2))
    return m, sep, (r1, r2)


def solve_cubic_m(z: complex, w: complex) -> CubicSolution:
    """The Stieltjes-branch root of the cubic (the one with Im m > 0).

    The branch is identified at w0 = i*START_HEIGHT, where m ~ -1/w0, and the
    root is tracked along the straight segment w0 -> w.  Points approach w
    geometrically; a step is accepted only when the corrected root is much
    closer to the prediction than to either competing root.
    """
    z, w = complex(z), complex(w)
    if not w.imag > 0:
        raise ValueError("w must lie in the upper half-plane")
    w0 = complex(0.0, max(START_HEIGHT, 10.0 * abs(w)))
    span = w0 - w
    t = 1.0
    m, _, _ = _correct(-1.0 / w0, z, w0)
    dm_prev = 0.0
    ratio = 0.5
    steps = 0
    while t > 0.0:
        if abs(span) * t <= 0.05 * w.imag:
            t_new = 0.0
        else:
            t_new = t * ratio
        halvings = 0
        while True:
            w_new = w + span * t_new
            m_pred = m + dm_prev * ((t - t_new) / max(t, 1e-300)) if dm_prev else m
            m_new, sep, _ = _correct(m_pred, z, w_new)
            jump = abs(m_new - m_pred)
            if jump < 0.25 * sep and cubic_residual(m_new, z, w_new) <= 1e-9 * (1 + abs(w_new)) ** 3:
                break
            halvings += 1
            if halvings > MAX_STEP_HALVINGS:
                raise BranchAmbiguityError(
                    f"lost track of the Stieltjes branch near w={w_new:.6g} (z={z:.6g})"
                )
            t_new = t - 0.5 * (t - t_new)
        dm_prev = (m_new - m) * (t_new / t) if t > 0 and t_new > 0 else 0.0
        ratio = 0.5 if halvings == 0 else min(0.9, 1 - 0.5 * (1 - ratio))
        m, t = m_new, t_new
        steps += 1
    m, sep, others = _correct(m, z, w)
    res = cubic_residual(m, z, w)
    if not m.imag > 0:
        raise BranchAmbiguityError(f"tracked root has Im m = {m.imag:.3g} <= 0 at w={w}")
    if any(r.imag > 0 and abs(r - m) < 1e-10 for r in others):
        raise BranchAmbiguityError(f"two upper-half-plane roots coincide within 1e-10 at w={w}")
    if res > RESIDUAL_TOL * (1 + abs(w)) ** 3:
        raise ConvergenceError(f"cubic residual {res:.3g} above tolerance at z={z}, w={w}")
    return CubicSolution(z=z, w=w, m=m, residual=res, branch_path_points=steps, separation=sep)


def stieltjes_m(z: complex, w: complex) -> complex:
    return solve_cubic_m(z, w).m


def _boundary_root(z: complex, x: float, near: complex) -> complex | None:
    """Root of the cubic at real w = x continuing the branch value ``near``."""
    roots = np.roots(cubic_coefficients(z, complex(x)))
    dist = np.abs(roots - near)
    k = int(np.argmin(dist))
    others = np.delete(dist, k)
    # accept only when the continuation is unambiguous
    if dist[k] <= 1e-2 and (len(others) == 0 or others.min() > 4 * dist[k]):
        return complex(roots[k])
    return None


def density_rho(z: complex, x: float, offset: float = INVERSION_OFFSET) -> float:
    """rho_z(x) = Im m(z, x + i 0+) / pi, clamped to zero below DENSITY_FLOOR.

    The branch is identified at x + i*offset.  When the root at real w = x that
    continues it is unambiguous its imaginary part is the exact boundary
    value (real roots give an exact zero outside the support); otherwise the
    value at the offset is used.
    """
    near = solve_cubic_m(z, complex(x, offset)).m
    edge = _boundary_root(z, x, near)
    m = near if edge is None else edge
    val = abs(m.imag) / math.pi if edge is not None else m.imag / math.pi
    return val if val >= DENSITY_FLOOR else 0.0


# -- cumulative distribution of nu_z by adaptive Gauss-Legendre panels --------

_GL_ORDER = 16
_GL_NODES, _GL_WEIGHTS = legendre.leggauss(_GL_ORDER)
PANEL_TOL = 1e-12
TAIL_TOL = 1e-8


class LimitMeasure:
    """nu_z discretized into adaptively refined panels.

    Each accepted panel stores the Legendre series of the density on it, so
    the CDF at any x costs one series evaluation.
    """

    def __init__(self, z: complex, offset: float = INVERSION_OFFSET):
        self.z = complex(z)
        self.offset = offset
        self.evaluations = 0
        self._panels: list[tuple[float, float, np.ndarray]] = []
        half = 2.0 * (1.0 + abs(self.z))
        core = self._integrate(-half, half)
        self.total_mass = core
        left, right = -half, half
        while True:
            shell = self._integrate(2 * left, left) + self._integrate(right, 2 * right)
            left, right = 2 * left, 2 * right
            self.total_mass += shell
            if shell < TAIL_TOL or right > 1e4:
                break
        self.support = (left, right)
        self._panels.sort(key=lambda p: p[0])
        self._edges = np.array([p[0] for p in self._panels] + [self._panels[-1][1]])
        masses = np.array([self._panel_mass(p) for p in self._panels])
        self._cum = np.concatenate([[0.0], np.cumsum(masses)])

    def _density_many(self, xs):
        self.evaluations += len(xs)
        return np.array([density_rho(self.z, float(x), self.offset) for x in xs])

    def _fit(self, a, b):
        xs = 0.5 * (b - a) * _GL_NODES + 0.5 * (a + b)
        ys = self._density_many(xs)
        coef = legendre.legfit(_GL_NODES, ys, _GL_ORDER - 1)
        return ys, coef

    def _integrate(self, a, b, ys=None, coef=None, depth=0):
        if ys is None:
            ys, coef = self._fit(a, b)
        whole = 0.5 * (b - a) * float(np.dot(_GL_WEIGHTS, ys))
        mid = 0.5 * (a + b)
        ly, lc = self._fit(a, mid)
        ry, rc = self._fit(mid, b)
        left = 0.5 * (mid - a) * float(np.dot(_GL_WEIGHTS, ly))
        right = 0.5 * (b - mid) * float(np.dot(_GL_WEIGHTS, ry))
        if abs(whole - (left + right)) <= PANEL_TOL or (b - a) < 1e-10 or depth > 60:
            self._panels.append((a, mid, lc))
            self._panels.append((mid, b, rc))
            return left + right
        return (self._integrate(a, mid, ly, lc, depth + 1)
                + self._integrate(mid, b, ry, rc, depth + 1))

    @staticmethod
    def _panel_mass(panel):
        a, b, coef = panel
        anti = legendre.legint(coef)
        return 0.5 * (b - a) * float(legendre.legval(1.0, anti) - legendre.legval(-1.0, anti))

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        flat = np.atleast_1d(x).ravel()
        out = np.empty(flat.shape)
        for k, xv in enumerate(flat):
            if xv <= self._edges[0]:
                out[k] = 0.0
                continue
            if xv >= self._edges[-1]:
                out[k] = self._cum[-1]
                continue
            i = int(np.searchsorted(self._edges, xv, side="right")) - 1
            a, b, coef = self._panels[i]
            anti = legendre.legint(coef)
            u = 2.0 * (xv - a) / (b - a) - 1.0
            part = 0.5 * (b - a) * float(legendre.legval(u, anti) - legendre.legval(-1.0, anti))
            out[k] = self._cum[i] + part
        return out.reshape(x.shape) if x.ndim else float(out[0])

    __call__ = cdf

    def density_grid(self, xs):
        return self._density_many(np.asarray(xs, dtype=float))


@lru_cache(maxsize=32)
def limit_measure(z: complex) -> LimitMeasure:
    return LimitMeasure(complex(z))


def nu_z_cdf(z: complex, x):
    """CDF of nu_z at x (vectorized in x), integrated from the far left tail."""
    return limit_measure(complex(z)).cdf(x)


def semicircle_cdf(x):
    x = np.clip(np.asarray(x, dtype=float), -2.0, 2.0)
    return 0.5 + (x * np.sqrt(4.0 - x * x) + 4.0 * np.arcsin(x / 2.0)) / (4.0 * np.pi)


def g_limit(s: float, t: float) -> float:
    """2s/(s^2+t^2) outside the closed unit disk, 2s inside."""
    r2 = s * s + t * t
    return 2.0 * s / r2 if r2 > 1.0 else 2.0 * s


def circular_radial_cdf(r):
    """P(|lambda| <= r) under the uniform law on the unit disk."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("radius must be nonnegative")
    out = np.minimum(r, 1.0) ** 2
    return float(out) if out.ndim == 0 else out
