"""Limiting Stieltjes transform of Levy matrices, semicircle law, free convolution.

The heavy-tailed limit is computed from the scalar fixed point ``y = phi(y)``
where

    phi(x) = Gamma(a/2)^-1 int_0^inf t^(a/2-1) e^{itz} e^{-Gamma(1-a/2) t^(a/2) x} dt
    psi(x) = int_0^inf e^{itz} e^{-Gamma(1-a/2) t^(a/2) x} dt

and ``m_alpha(z) = i psi(y(z))``.  Both integrals are instances of
:func:`rmtlab.quadrature.laplace_power` after the substitution
``t = u^(2/a)``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gamma

from rmtlab.quadrature import QuadratureError, laplace_power, laplace_power_adaptive

log = logging.getLogger(__name__)


class ConvergenceError(RuntimeError):
    """A fixed-point iteration failed to reach its tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class SpectralPoint:
    E: float
    eta: float

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError("eta must be positive")

    @property
    def z(self) -> complex:
        return complex(self.E, self.eta)


@dataclass
class FixedPointResult:
    """Solution of ``y = phi_{alpha,z}(y)``; fields are arrays shaped like ``z``."""

    z: np.ndarray
    y: np.ndarray
    m_alpha: np.ndarray
    residual: np.ndarray
    iterations: int
    converged: bool


def _check_alpha(alpha):
    if not 0 < alpha < 2:
        raise ValueError("alpha must lie in (0, 2)")


def _check_z(z):
    z = np.asarray(z, dtype=complex)
    if np.any(z.imag <= 0):
        raise ValueError("z must lie in the upper half plane")
    return z


def stable_integral(alpha, p, z, x, method="fixed"):
    """``Gamma(p)^-1 int_0^inf y^(p-1) exp(i y z - x y^(a/2)) dy``.

    This is ``s_{p,z}(x)`` with the convergent sign convention; ``phi`` and
    ``psi`` are the cases ``p = alpha/2`` and ``p = 1`` evaluated at
    ``Gamma(1 - alpha/2) x``.
    """
    _check_alpha(alpha)
    z = _check_z(z)
    x = np.asarray(x, dtype=complex)
    if np.any(x.real < -1e-14):
        raise ValueError("x must satisfy Re x >= 0")
    kappa = 2.0 / alpha
    q = 2.0 * p / alpha - 1.0
    pref = kappa / gamma(p)
    if method == "fixed":
        return pref * laplace_power(q, x, -1j * z, kappa)
    if method == "adaptive":
        zb, xb = np.broadcast_arrays(z, x)
        out = np.empty(zb.shape, dtype=complex)
        for idx in np.ndindex(zb.shape):
            val, err = laplace_power_adaptive(q, complex(xb[idx]), complex(-1j * zb[idx]), kappa)
            if err > 1e-8 * max(abs(val), 1e-300) and err > 1e-13:
                raise QuadratureError(
                    f"adaptive quadrature error {err:.2e} above tolerance at z={complex(zb[idx])}")
            out[idx] = val
        return pref * out
    raise ValueError(f"unknown quadrature method {method!r}")


def phi(alpha, z, x, method="fixed"):
    """The map whose fixed point defines ``y(z)``."""
    return stable_integral(alpha, alpha / 2, z, gamma(1 - alpha / 2) * np.asarray(x), method)


def psi_fn(alpha, z, x, method="fixed"):
    return stable_integral(alpha, 1.0, z, gamma(1 - alpha / 2) * np.asarray(x), method)


def phi_derivative(alpha, z, x):
    g = gamma(1 - alpha / 2)
    return -g * gamma(alpha) / gamma(alpha / 2) * stable_integral(alpha, alpha, z, g * np.asarray(x))


def _iterate(alpha, z, y, tol, max_iter, newton):
    """Damped Picard iteration with optional Newton polishing, vectorized over z."""
    damping = np.full(z.shape, 0.5)
    f = phi(alpha, z, y)
    res = np.abs(f - y)
    it = 0
    while np.any(res > tol) and it < max_iter:
        it += 1
        active = res > tol
        za, ya, fa, ra = z[active], y[active], f[active], res[active]
        step = damping[active] * (fa - ya)
        if newton:
            dphi = phi_derivative(alpha, za, ya)
            nstep = -(ya - fa) / (1 - dphi)
            use = ra < 1e-2
            step = np.where(use, nstep, step)
        cand = ya + step
        bad = cand.real <= 0
        while np.any(bad):
            step = np.where(bad, step / 2, step)
            cand = ya + step
            bad = cand.real <= 0
        fc = phi(alpha, za, cand)
        rc = np.abs(fc - cand)
        accept = rc < ra
        # a rejected step halves the damping, an accepted one relaxes it
        d = damping[active]
        d = np.where(accept, np.minimum(1.0, d * 1.25), d / 2)
        damping[active] = np.maximum(d, 1e-3)
        ya = np.where(accept, cand, ya)
        fa = np.where(accept, fc, fa)
        ra = np.where(accept, rc, ra)
        # rejected Picard steps still move when the damping is already tiny
        stuck = ~accept & (damping[active] <= 1e-3)
        ya = np.where(stuck, cand, ya)
        fa = np.where(stuck, fc, fa)
        ra = np.where(stuck, rc, ra)
        y[active], f[active], res[active] = ya, fa, ra
    return y, res, it


def solve_y(alpha, z, tolerance=1e-12, max_iter=400, init=None, continuation=True,
            newton=True, eta_start=10.0, eta_factor=0.7, raise_on_failure=True) -> FixedPointResult:
    """Solve ``y = phi_{alpha,z}(y)`` for scalar or array ``z``.

    With ``continuation`` the solve walks down from ``Im z = eta_start`` in
    geometric steps, warm-starting each level.  ``init`` (same shape as
    ``z``) bypasses the continuation start value.
    """
    _check_alpha(alpha)
    z = _check_z(z)
    zz = np.atleast_1d(z).astype(complex).ravel()
    E, eta = zz.real, zz.imag
    total = 0
    if init is not None:
        y = np.atleast_1d(np.asarray(init, dtype=complex)).ravel().copy() * np.ones_like(zz)
        levels = [eta]
    else:
        levels = []
        top = np.maximum(eta_start, eta)
        k = 0
        while True:
            lev = np.maximum(top * eta_factor**k, eta)
            levels.append(lev)
            if np.all(lev == eta):
                break
            k += 1
        y = phi(alpha, E + 1j * levels[0], np.zeros_like(zz))
        if not continuation:
            levels = [eta]
    for i, lev in enumerate(levels):
        final = i == len(levels) - 1
        tol = tolerance if final else max(1e-8, tolerance)
        y, res, it = _iterate(alpha, E + 1j * lev, y, tol, max_iter, newton)
        total += it
    converged = bool(np.all(res <= tolerance))
    if not converged:
        msg = (f"fixed point did not converge: max residual {res.max():.3e} "
               f"after {total} iterations")
        if raise_on_failure:
            raise ConvergenceError(msg, residual=res)
        log.warning(msg)
    m = 1j * psi_fn(alpha, zz, y)
    shape = z.shape
    return FixedPointResult(z=z, y=y.reshape(shape), m_alpha=m.reshape(shape),
                            residual=res.reshape(shape), iterations=total, converged=converged)


def verify_residual(alpha, result: FixedPointResult) -> np.ndarray:
    """Re-evaluate ``|y - phi(y)|`` with the independent adaptive rule."""
    return np.abs(result.y - phi(alpha, result.z, result.y, method="adaptive"))


def m_alpha(alpha, z, **kwargs):
    """Limiting Stieltjes transform ``m_alpha(z) = i psi(y(z))``."""
    res = solve_y(alpha, z, **kwargs)
    m = res.m_alpha
    return complex(m) if np.ndim(m) == 0 else m


def density_rho_alpha(alpha, E, eta_pair=(1e-3, 5e-4), return_details=False):
    """Density of the limiting law by linear extrapolation of Im m / pi to eta = 0."""
    e1, e2 = eta_pair
    if not (e1 > e2 > 0 and e1 <= 1e-2):
        raise ValueError("eta_pair must be decreasing, positive and at most 1e-2")
    E = np.asarray(E, dtype=float)
    flat = np.atleast_1d(E).ravel()
    r1 = solve_y(alpha, flat + 1j * e1)
    r2 = solve_y(alpha, flat + 1j * e2)
    im1, im2 = r1.m_alpha.imag, r2.m_alpha.imag
    slope = (im1 - im2) / (e1 - e2)
    im0 = im2 - e2 * slope
    rho = im0 / math.pi
    if np.any(rho < -1e-6):
        log.warning("density extrapolation dipped to %.3e; clipping", rho.min())
    rho = np.maximum(rho, 0.0)
    if E.ndim == 0:
        rho_out = float(rho[0])
    else:
        rho_out = rho.reshape(E.shape)
    if return_details:
        return rho_out, {"im_m": im2.reshape(E.shape), "residual": np.maximum(r1.residual, r2.residual)}
    return rho_out


def density_tail(alpha, x):
    """Leading tail of the limiting density, ``alpha / (2 |x|^(alpha+1))``."""
    return alpha / (2.0 * np.abs(x) ** (alpha + 1))


def density_mass(alpha, L=30.0, panel=0.5, nodes=8):
    """Total mass: ``2 int_0^L rho_alpha`` by Gauss-Legendre panels plus the tail ``L^-alpha``."""
    x, w = np.polynomial.legendre.leggauss(nodes)
    edges = np.linspace(0.0, L, int(round(L / panel)) + 1)
    lo, hi = edges[:-1, None], edges[1:, None]
    pts = (lo + hi) / 2 + (hi - lo) / 2 * x[None, :]
    rho = density_rho_alpha(alpha, pts.ravel()).reshape(pts.shape)
    body = 2 * float(np.sum(rho @ w * (edges[1:] - edges[:-1]) / 2))
    return body + L ** (-alpha)


def density_table(alpha, energies, eta_pair=(1e-3, 5e-4)):
    energies = np.sort(np.asarray(energies, dtype=float))
    rho, det = density_rho_alpha(alpha, energies, eta_pair, return_details=True)
    return {"E": energies, "rho_alpha": rho, "im_m": det["im_m"], "residual": det["residual"]}


def write_density_csv(table, path):
    from rmtlab.reports import write_csv

    return write_csv(path, ["E", "rho_alpha", "im_m", "residual"],
                     zip(table["E"], table["rho_alpha"], table["im_m"], table["residual"]))


def m_semicircle(z):
    """Stieltjes transform of the semicircle law (root of m^2 + z m + 1 = 0 in H)."""
    z = _check_z(z)
    d = np.sqrt(z * z - 4 + 0j)
    r1 = (-z + d) / 2
    r2 = (-z - d) / 2
    m = np.where(r1.imag > 0, r1, r2)
    return complex(m) if m.ndim == 0 else m


def rho_semicircle(E):
    E = np.asarray(E, dtype=float)
    out = np.where(np.abs(E) < 2, np.sqrt(np.clip(4 - E * E, 0, None)) / (2 * math.pi), 0.0)
    return float(out) if out.ndim == 0 else out


def free_convolution_mfc(eigenvalues, s, z, tol=1e-13, max_iter=500):
    """Solve ``m = N^-1 sum_j 1/(lambda_j - z - s m)`` in the upper half plane.

    Returns ``{"m_fc", "g", "residual", "iterations"}`` with
    ``g_j = 1/(lambda_j - z - s m_fc)``.
    """
    lam = np.asarray(eigenvalues, dtype=float)
    if lam.size == 0:
        raise ValueError("empty spectrum")
    if s < 0:
        raise ValueError("s must be nonnegative")
    z = complex(z)
    if z.imag <= 0:
        raise ValueError("z must lie in the upper half plane")
    if s == 0:
        g = 1.0 / (lam - z)
        return {"m_fc": complex(g.mean()), "g": g, "residual": 0.0, "iterations": 0}
    m = complex(np.mean(1.0 / (lam - z)))
    res = np.inf
    for it in range(1, max_iter + 1):
        g = 1.0 / (lam - z - s * m)
        f = g.mean()
        res = abs(f - m)
        if res <= tol:
            break
        dfdm = s * np.mean(g * g)
        newton = m - (m - f) / (1 - dfdm)
        m = newton if newton.imag > 0 else 0.5 * (m + f)
    g = 1.0 / (lam - z - s * m)
    res = abs(g.mean() - m)
    if res > 1e-12:
        raise ConvergenceError(f"free convolution did not converge (residual {res:.2e})", res)
    return {"m_fc": complex(m), "g": g, "residual": float(res), "iterations": it}
