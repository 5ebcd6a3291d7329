"""Function-space fixed point for the limiting law at small spectral parameter.

Functions on the positive quarter plane that are homogeneous of degree
``w = alpha/2`` are stored by their values on a Gauss-Jacobi grid of angles
in (0, pi/2); the homogeneous extension is ``g(lam * u) = lam**w g(u)``.

The operator

    F_{h,g}(u) = int dtheta (sin 2 theta)^(a/2-1) int dy y^(-a/2-1)
                 [K(e^{i theta}) - K(e^{i theta} + y u)],
    K(q)       = int_0^inf r^(a/2-1) exp(-r^(a/2) g(q) - (r h | q)) dr

is evaluated with ``K`` tabulated on the angle grid: ``K`` is homogeneous of
degree ``-alpha/2`` so one angular profile determines it everywhere.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import gamma

from rmtlab.limit_law import ConvergenceError, solve_y, stable_integral
from rmtlab.quadrature import gauss_jacobi_unit, laplace_power

log = logging.getLogger(__name__)


def bracket(u, v):
    """``(u|v) = u Re v + conj(u) Im v``; real-linear in both arguments."""
    u = np.asarray(u, dtype=complex)
    v = np.asarray(v, dtype=complex)
    out = u * v.real + np.conj(u) * v.imag
    return complex(out) if out.ndim == 0 else out


def c_alpha(alpha):
    return alpha / (2 ** (alpha / 2) * gamma(alpha / 2) ** 2)


def theta_grid(alpha, n, exponent=None):
    """Nodes and weights for ``int_0^{pi/2} f(theta) (sin 2theta)^e dtheta``.

    ``e`` defaults to ``alpha/2 - 1``.  Nodes are mapped Gauss-Jacobi
    (Gegenbauer) points, symmetric about pi/4.
    """
    from scipy.special import roots_jacobi

    e = alpha / 2 - 1 if exponent is None else exponent
    x, w = roots_jacobi(n, e, e)
    theta = math.pi / 4 * (1 + x)
    smooth = (np.cos(math.pi * x / 2) / (1 - x * x)) ** e
    return theta, math.pi / 4 * w * smooth


@dataclass
class HalfQuadrantFunction:
    """A degree-``degree`` homogeneous function sampled at angles ``theta_nodes``."""

    theta_nodes: np.ndarray
    values: np.ndarray
    degree: float
    _spline: CubicSpline = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        self.theta_nodes = np.asarray(self.theta_nodes, dtype=float)
        self.values = np.asarray(self.values, dtype=complex)
        if self.theta_nodes.shape != self.values.shape:
            raise ValueError("nodes and values differ in shape")
        if np.any(np.diff(self.theta_nodes) <= 0):
            raise ValueError("theta nodes must be increasing")
        self._spline = CubicSpline(self.theta_nodes, self.values)

    @classmethod
    def from_callable(cls, fn, theta_nodes, degree):
        theta_nodes = np.asarray(theta_nodes, dtype=float)
        return cls(theta_nodes, fn(np.exp(1j * theta_nodes)), degree)

    def at_angle(self, theta):
        """Values on the unit circle at angles ``theta`` (cubic in theta)."""
        theta = np.asarray(theta, dtype=float)
        out = np.array(self._spline(theta), dtype=complex)
        # exact at nodes: the spline already interpolates, but keep bitwise values
        idx = np.searchsorted(self.theta_nodes, theta)
        idx = np.clip(idx, 0, len(self.theta_nodes) - 1)
        hit = self.theta_nodes[idx] == theta
        out = np.where(hit, self.values[idx], out)
        return out

    def __call__(self, w):
        return eval_homogeneous(self, w)

    def is_admissible(self, delta=0.0):
        return bool(np.all(self.values.real > delta))

    def with_values(self, values):
        return HalfQuadrantFunction(self.theta_nodes, values, self.degree)


def eval_homogeneous(g: HalfQuadrantFunction, w):
    """``g(w) = |w|**degree * g(w/|w|)`` for ``w`` in the closed quarter plane."""
    w = np.asarray(w, dtype=complex)
    ang = np.angle(w)
    if np.any((ang < -1e-12) | (ang > math.pi / 2 + 1e-12)):
        raise ValueError("argument outside the positive quarter plane")
    r = np.abs(w)
    vals = g.at_angle(np.clip(ang, 0.0, math.pi / 2))
    out = np.where(r == 0, 0.0, r**g.degree * vals)
    return complex(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class QuadratureSpec:
    """Resolution of the y-integral in ``F`` (nodes per half)."""

    n_y: int = 48


def _kernel_profile(alpha, h, g: HalfQuadrantFunction):
    """Spline of ``K`` on the unit quarter circle, tabulated at the grid plus endpoints."""
    ang = np.concatenate([[0.0], g.theta_nodes, [math.pi / 2]])
    gv = g.at_angle(ang)
    if np.any(gv.real < 0):
        raise ValueError("g is not admissible: Re g must be nonnegative")
    q = np.exp(1j * ang)
    b = bracket(h, q)
    K = (2 / alpha) * laplace_power(0.0, gv, b, 2 / alpha)
    return CubicSpline(ang, K)


def _F_from_profile(alpha, Kspl, theta, wtheta, u, spec: QuadratureSpec):
    """Evaluate F at points ``u`` (1-D array on the unit quarter circle)."""
    u = np.atleast_1d(np.asarray(u, dtype=complex))
    v = np.exp(1j * theta)
    Kv = Kspl(theta)
    y1, w1 = gauss_jacobi_unit(spec.n_y, -alpha / 2)
    x2, w2 = gauss_jacobi_unit(spec.n_y, alpha - 1)
    V = v[None, :, None]
    U = u[:, None, None]
    # y in (0, 1]:  y^(-a/2) * [K(v) - K(v + y u)] / y
    q = V + y1[None, None, :] * U
    Kq = np.abs(q) ** (-alpha / 2) * Kspl(np.angle(q))
    part1 = ((Kv[None, :, None] - Kq) / y1[None, None, :]) @ w1
    # y in [1, inf): the K(v) piece integrates to (2/a) K(v); the other piece
    # after y = 1/x carries the weight x^(a-1)
    q2 = x2[None, None, :] * V + U
    K2 = np.abs(q2) ** (-alpha / 2) * Kspl(np.angle(q2))
    part2 = (2 / alpha) * Kv[None, :] - K2 @ w2
    return (part1 + part2) @ wtheta


def eval_F(alpha, h, g: HalfQuadrantFunction, u, spec: QuadratureSpec = QuadratureSpec(),
           theta_rule=None, check=True):
    """``F_{h,g}(u)`` for ``Re h > 0`` and admissible ``g``; vectorized over ``u``.

    ``check=False`` accepts ``Re g >= 0`` (the boundary case ``g = 0`` has a
    closed form used in tests).
    """
    h = complex(h)
    if h.real <= 0:
        raise ValueError("Re h must be positive")
    if check and not g.is_admissible():
        raise ValueError("g is not admissible: Re g must be positive at every node")
    if theta_rule is None:
        theta_rule = theta_grid(alpha, len(g.theta_nodes))
    Kspl = _kernel_profile(alpha, h, g)
    u_arr = np.asarray(u, dtype=complex)
    out = _F_from_profile(alpha, Kspl, theta_rule[0], theta_rule[1], u_arr.ravel(), spec)
    return complex(out[0]) if u_arr.ndim == 0 else out.reshape(u_arr.shape)


def _upsilon_at(alpha, z, f: HalfQuadrantFunction, u, spec, theta_rule):
    h = -1j * complex(z)
    Kspl = _kernel_profile(alpha, h, f)
    ut = 1j * np.conj(np.asarray(u, dtype=complex))
    return c_alpha(alpha) * _F_from_profile(alpha, Kspl, theta_rule[0], theta_rule[1], ut, spec)


def upsilon(alpha, z, f: HalfQuadrantFunction, spec: QuadratureSpec = QuadratureSpec()):
    """``Upsilon_f(u) = c_alpha F_{-iz, f}(i conj u)`` at every node of ``f``."""
    z = complex(z)
    if z.imag <= 0:
        raise ValueError("z must lie in the upper half plane")
    rule = _rule_for(alpha, f)
    vals = _upsilon_at(alpha, z, f, np.exp(1j * f.theta_nodes), spec, rule)
    return f.with_values(vals)


def upsilon_point(alpha, z, f: HalfQuadrantFunction, u, spec: QuadratureSpec = QuadratureSpec()):
    """``Upsilon_f`` at arbitrary points ``u`` of the unit quarter circle."""
    u = np.asarray(u, dtype=complex)
    vals = _upsilon_at(alpha, complex(z), f, u.ravel(), spec, _rule_for(alpha, f))
    return complex(vals[0]) if u.ndim == 0 else vals.reshape(u.shape)


def _rule_for(alpha, f):
    theta, w = theta_grid(alpha, len(f.theta_nodes))
    if not np.allclose(theta, f.theta_nodes, rtol=0, atol=1e-13):
        raise ValueError("function is not sampled on the Gauss-Jacobi grid for this alpha")
    return theta, w


def s_pz(alpha, p, z, x, method="fixed"):
    """``Gamma(p)^-1 int_0^inf y^(p-1) exp(i y z - x y^(a/2)) dy`` (convergent sign)."""
    return stable_integral(alpha, p, z, x, method)


def r_pz(alpha, p, z, f, n_theta=64, check=True):
    """Double integral giving the absolute moment of order ``p``.

    ``f`` is a :class:`HalfQuadrantFunction` or a callable on the unit circle.
    ``check=False`` allows non-admissible ``f`` (used by closed-form tests).
    """
    z = complex(z)
    if z.imag <= 0:
        raise ValueError("z must lie in the upper half plane")
    theta, w = theta_grid(alpha, n_theta, exponent=p / 2 - 1)
    v = np.exp(1j * theta)
    fv = f.at_angle(theta) if isinstance(f, HalfQuadrantFunction) else np.asarray(f(v), dtype=complex)
    fv = np.broadcast_to(fv, v.shape)
    if check and np.any(fv.real <= 0):
        raise ValueError("f is not admissible")
    b = -bracket(1j * z, v)
    inner = (2 / alpha) * laplace_power(2 * p / alpha - 1, fv, b, 2 / alpha)
    return 2 ** (1 - p / 2) / gamma(p / 2) ** 2 * complex(inner @ w)


def initial_omega(alpha, z, n, y=None):
    """Start value ``Gamma(1-a/2) y(z) (1|u)^(a/2)`` on the grid."""
    if y is None:
        y = complex(solve_y(alpha, z).y)
    theta, _ = theta_grid(alpha, n)
    u = np.exp(1j * theta)
    vals = gamma(1 - alpha / 2) * y * bracket(1, u) ** (alpha / 2)
    return HalfQuadrantFunction(theta, vals, alpha / 2)


def norm_r(f: HalfQuadrantFunction, r):
    """Sup norm plus the ``|(i|u)|^r``-weighted gradient sup on the grid.

    The gradient of a homogeneous function on the unit circle has Cartesian
    norm ``sqrt(|w G|^2 + |G'|^2)`` with ``G`` the angular profile; ``G'`` is
    taken by second-order finite differences on the nodes.
    """
    if not 0 < r < 1:
        raise ValueError("r must lie in (0, 1)")
    if len(f.theta_nodes) < 32:
        raise ValueError("norm_r needs at least 32 nodes")
    G = f.values
    dG = np.gradient(G, f.theta_nodes, edge_order=2)
    u = np.exp(1j * f.theta_nodes)
    weight = np.abs(bracket(1j, u)) ** r
    grad = weight * np.sqrt(np.abs(f.degree * G) ** 2 + np.abs(dG) ** 2)
    return float(np.max(np.abs(G)) + np.max(grad))


@dataclass
class OmegaResult:
    omega: HalfQuadrantFunction
    residual_sup: float
    residual_r: float
    iterations: int
    alpha: float
    z: complex
    omega_at_one: complex


def solve_omega(alpha, z, grid_size=64, tolerance=1e-7, max_iter=200, damping=0.5,
                spec: QuadratureSpec = QuadratureSpec(), init: HalfQuadrantFunction | None = None):
    """Solve ``f = Upsilon_{z,f}`` by damped Picard iteration from ``initial_omega``.

    Raises :class:`ConvergenceError` on divergence, loss of admissibility or
    when ``max_iter`` is exhausted.
    """
    z = complex(z)
    if z.imag <= 0:
        raise ValueError("z must lie in the upper half plane")
    f = init if init is not None else initial_omega(alpha, z, grid_size)
    rule = _rule_for(alpha, f)
    u = np.exp(1j * f.theta_nodes)
    d = damping
    prev = np.inf
    for it in range(1, max_iter + 1):
        up = _upsilon_at(alpha, z, f, u, spec, rule)
        diff = up - f.values
        res = float(np.max(np.abs(diff)))
        if not np.isfinite(res):
            raise ConvergenceError("omega iteration produced non-finite values", res)
        if res <= tolerance:
            break
        if res > prev:
            d = max(d / 2, 0.05)
        prev = res
        new = f.values + d * diff
        if np.any(new.real <= 0):
            raise ConvergenceError("omega iteration left the admissible class", res)
        f = f.with_values(new)
    else:
        raise ConvergenceError(f"omega iteration did not converge: residual {res:.3e}", res)
    resid = f.with_values(diff)
    mid = complex(f.at_angle(math.pi / 4))
    if mid.real <= 0:
        raise ConvergenceError("Omega_z(e^{i pi/4}) lost positivity", res)
    one = complex(_upsilon_at(alpha, z, f, np.array([1.0 + 0j]), spec, rule)[0])
    return OmegaResult(omega=f, residual_sup=res, residual_r=norm_r(resid, 0.5) if len(u) >= 32 else float("nan"),
                       iterations=it, alpha=alpha, z=z, omega_at_one=one)


def m_alpha_small(alpha, z, grid_size=64, **kwargs):
    """``m_alpha(z) = i s_{1,z}(Omega_z(1))`` from the function-space route."""
    res = solve_omega(alpha, z, grid_size=grid_size, **kwargs)
    return complex(1j * s_pz(alpha, 1.0, z, res.omega_at_one))


def write_omega(result: OmegaResult, csv_path, json_path):
    from rmtlab.reports import write_csv

    write_csv(csv_path, ["theta", "re_omega", "im_omega"],
              [(th, v.real, v.imag) for th, v in zip(result.omega.theta_nodes, result.omega.values)])
    with open(json_path, "w") as fh:
        json.dump({"alpha": result.alpha, "z": [result.z.real, result.z.imag],
                   "residual_sup": result.residual_sup, "residual_r": result.residual_r,
                   "iterations": result.iterations}, fh, indent=2)
    return csv_path
