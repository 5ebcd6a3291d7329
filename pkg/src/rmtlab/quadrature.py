"""Vectorized quadrature for Laplace-type integrals with a power-law exponent.

Every scalar integral in the limiting-law computations reduces to

    I(q, a, b, kappa) = int_0^inf r**q * exp(-a*r - b*r**kappa) dr

with complex ``a``, ``b`` in the closed right half plane and ``kappa > 1``.
The integrand is analytic in ``r``, so the ray of integration is rotated to
kill the oscillation of the ``b`` term where possible.  The rotated integral
is evaluated on a fixed reference mesh: geometrically graded Gauss-Legendre
panels near the origin (absorbing the ``r**q`` and ``r**kappa`` endpoint
behaviour) followed by uniform panels whose count adapts to the phase.

An independent adaptive route (QUADPACK via :func:`scipy.integrate.quad`) on
a different ray is provided for cross-checks.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy import integrate

DECAY = 46.0
_N_GEO = 44
_GEO_START = 3
_GEO_NODES = 10
_UNI_NODES = 16
_UNI_BUCKETS = (8, 16, 32, 64, 128, 256, 512)
_ANGLE_CANDIDATES = np.linspace(0.0, 1.0, 11)


class QuadratureError(RuntimeError):
    """Raised when a quadrature cannot meet its tolerance."""


@lru_cache(maxsize=None)
def _reference_mesh(n_uniform: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on [0, 1] (before scaling by the truncation point)."""
    xg, wg = np.polynomial.legendre.leggauss(_GEO_NODES)
    xu, wu = np.polynomial.legendre.leggauss(_UNI_NODES)
    nodes, weights = [], []
    top = 2.0 ** -_GEO_START
    for k in range(_N_GEO):
        hi = top * 2.0 ** -k
        lo = hi / 2.0
        nodes.append(lo + (hi - lo) * (xg + 1) / 2)
        weights.append(wg * (hi - lo) / 2)
    edges = np.linspace(top, 1.0, n_uniform + 1)
    for lo, hi in zip(edges[:-1], edges[1:]):
        nodes.append(lo + (hi - lo) * (xu + 1) / 2)
        weights.append(wu * (hi - lo) / 2)
    return np.concatenate(nodes), np.concatenate(weights)


def _head_length() -> float:
    return 2.0 ** -(_GEO_START + _N_GEO)


def _choose_rotation(a, b, kappa):
    """Pick a rotation angle per element minimising the accumulated phase.

    Returns (psi, L, phase): the ray angle in the r-plane, the truncation
    point along the rotated ray and the total phase accumulated on [0, L].
    """
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    psi_star = -np.angle(b) / kappa
    best_psi = np.zeros(a.shape)
    best_L = np.full(a.shape, np.inf)
    best_phase = np.full(a.shape, np.inf)
    arg_a = np.where(a == 0, 0.0, np.angle(a))
    for f in _ANGLE_CANDIDATES:
        psi = f * psi_star
        ok = np.abs(arg_a + psi) <= math.pi / 2 - 1e-9
        ok |= a == 0
        A = a * np.exp(1j * psi)
        B = b * np.exp(1j * kappa * psi)
        ra = np.maximum(A.real, 0.0)
        rb = np.maximum(B.real, 0.0)
        with np.errstate(divide="ignore"):
            La = np.where(ra > 0, DECAY / np.where(ra > 0, ra, 1.0), np.inf)
            Lb = np.where(rb > 0, (DECAY / np.where(rb > 0, rb, 1.0)) ** (1 / kappa), np.inf)
        L = np.minimum(La, Lb)
        phase = np.abs(A.imag) * L + np.abs(B.imag) * L**kappa
        better = ok & np.isfinite(L) & (phase < best_phase)
        best_psi = np.where(better, psi, best_psi)
        best_L = np.where(better, L, best_L)
        best_phase = np.where(better, phase, best_phase)
    if not np.all(np.isfinite(best_L)):
        raise QuadratureError("integrand does not decay along any admissible ray")
    return best_psi, best_L, best_phase


def laplace_power(q: float, a, b, kappa: float) -> np.ndarray:
    """Evaluate ``int_0^inf r**q exp(-a r - b r**kappa) dr`` elementwise.

    ``a`` and ``b`` broadcast together; both need nonnegative real part and
    ``b`` must be nonzero.  ``q > -1``.
    """
    if q <= -1:
        raise ValueError("q must exceed -1")
    if kappa <= 1:
        raise ValueError("kappa must exceed 1")
    a, b = np.broadcast_arrays(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))
    shape = a.shape
    a = a.ravel()
    b = b.ravel()
    if np.any(a.real < -1e-14) or np.any(b.real < -1e-14):
        raise ValueError("a and b must lie in the closed right half plane")
    if np.any(b == 0):
        raise ValueError("b must be nonzero")
    psi, L, phase = _choose_rotation(a, b, kappa)
    need = np.maximum(phase / 4.0, 1.0)
    bucket = np.searchsorted(np.array(_UNI_BUCKETS), need)
    if np.any(bucket >= len(_UNI_BUCKETS)):
        raise QuadratureError(f"phase {phase.max():.3g} too large for the panel budget")
    out = np.empty(a.shape, dtype=complex)
    for k in np.unique(bucket):
        sel = bucket == k
        t, w = _reference_mesh(_UNI_BUCKETS[k])
        rot = np.exp(1j * psi[sel])
        Ls = L[sel]
        r = Ls[:, None] * t[None, :]
        A = (a[sel] * rot)[:, None]
        B = (b[sel] * rot**kappa)[:, None]
        f = r**q * np.exp(-A * r - B * r**kappa)
        val = f @ w * Ls
        eps = Ls * _head_length()
        val = val + eps ** (q + 1) / (q + 1)
        out[sel] = val * rot ** (q + 1)
    return out.reshape(shape)


def laplace_power_adaptive(q: float, a: complex, b: complex, kappa: float,
                           epsrel: float = 1e-11) -> tuple[complex, float]:
    """Scalar reference evaluation with QUADPACK on an independent ray.

    The ray is half the rotation used by :func:`laplace_power`, and the
    integral is taken in the variable ``r`` with an algebraic endpoint weight
    on [0, 1].  Returns (value, absolute error estimate).
    """
    psi, _, _ = _choose_rotation(np.array([a]), np.array([b]), kappa)
    psi = 0.5 * float(psi[0])
    rot = np.exp(1j * psi)
    A = a * rot
    B = b * rot**kappa

    def g(r):
        return np.exp(-A * r - B * r**kappa)

    parts = []
    err = 0.0
    for fn in (lambda r: g(r).real, lambda r: g(r).imag):
        v1, e1 = integrate.quad(fn, 0.0, 1.0, weight="alg", wvar=(q, 0.0),
                                epsabs=0.0, epsrel=epsrel, limit=500)
        v2, e2 = integrate.quad(lambda r: r**q * fn(r), 1.0, np.inf,
                                epsabs=1e-300, epsrel=epsrel, limit=1000)
        parts.append(v1 + v2)
        err += e1 + e2
    return complex(parts[0], parts[1]) * rot ** (q + 1), err


def gauss_jacobi_unit(n: int, alpha_exp: float, beta_exp: float = 0.0):
    """Gauss-Jacobi rule on [0, 1] for the weight ``x**alpha_exp (1-x)**beta_exp``."""
    from scipy.special import roots_jacobi

    x, w = roots_jacobi(n, beta_exp, alpha_exp)
    scale = 2.0 ** -(alpha_exp + beta_exp + 1)
    return (x + 1) / 2, w * scale
