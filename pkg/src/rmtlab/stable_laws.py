"""Symmetric alpha-stable laws, their removals and derived scalars."""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np
from scipy.special import gamma

from rmtlab.rng import stream


class DegenerateEstimateError(ValueError):
    """Too few samples fell in the region a Monte Carlo estimate needs."""


def stable_sigma(alpha: float) -> float:
    return (math.pi / (2 * math.sin(math.pi * alpha / 2) * gamma(alpha))) ** (1 / alpha)


@dataclass(frozen=True)
class StableParams:
    alpha: float
    sigma: float = 1.0

    def __post_init__(self):
        if not 0 < self.alpha < 2:
            raise ValueError(f"alpha must lie in (0, 2), got {self.alpha}")
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")

    @classmethod
    def normalized(cls, alpha: float) -> "StableParams":
        return cls(alpha, stable_sigma(alpha))


@dataclass(frozen=True)
class DeformationSpec:
    """``variant`` is ``"none"`` or ``"bounded_symmetric"`` (uniform on [-w, w])."""

    variant: str = "none"
    half_width: float = 0.0

    def __post_init__(self):
        if self.variant not in ("none", "bounded_symmetric"):
            raise ValueError(f"unknown deformation {self.variant!r}")
        if self.variant == "bounded_symmetric" and not self.half_width > 0:
            raise ValueError("bounded_symmetric needs a positive half_width")

    @classmethod
    def from_dict(cls, d):
        if d is None:
            return cls()
        return cls(d.get("variant", "none"), float(d.get("half_width", 0.0)))

    def to_dict(self):
        return {"variant": self.variant, "half_width": self.half_width}


@dataclass(frozen=True)
class RemovalSplit:
    small: float
    large: float


def sample_stable(params: StableParams, rng: np.random.Generator, size=None):
    """Chambers-Mallows-Stuck draws with characteristic function exp(-sigma^a |t|^a)."""
    a = params.alpha
    U = rng.uniform(-math.pi / 2, math.pi / 2, size)
    W = rng.standard_exponential(size)
    if a == 1.0:
        X = np.tan(U)
    else:
        X = (np.sin(a * U) / np.cos(U) ** (1 / a)
             * (np.cos((1 - a) * U) / W) ** ((1 - a) / a))
    return params.sigma * X


def sample_deformation(deformation: DeformationSpec, rng, size=None):
    if deformation.variant == "none":
        return np.zeros(size) if size is not None else 0.0
    return rng.uniform(-deformation.half_width, deformation.half_width, size)


def sample_entry(params: StableParams, deformation: DeformationSpec, rng, size=None,
                 return_parts=False):
    """``Z + J`` with ``J`` independent of ``Z``.  ``return_parts`` also gives ``Z``."""
    Z = sample_stable(params, rng, size)
    if deformation.variant == "none":
        out = Z + 0.0
    else:
        out = Z + sample_deformation(deformation, rng, size)
    return (out, Z) if return_parts else out


def split_removal(value: float, cutoff: float) -> RemovalSplit:
    if not cutoff > 0:
        raise ValueError("cutoff must be positive")
    if abs(value) <= cutoff:
        return RemovalSplit(value, 0.0)
    return RemovalSplit(0.0, value)


def removal_large_part(values, cutoff):
    """Vectorized large part: ``values * 1{|values| > cutoff}``."""
    values = np.asarray(values, dtype=float)
    return np.where(np.abs(values) > cutoff, values, 0.0)


def truncated_second_moment(params, deformation, R, n_samples, rng, chunk=1_000_000):
    """Monte Carlo ``E[z^2 1{|z| < R}]``; returns ``(estimate, standard_error)``."""
    if not R > 0:
        raise ValueError("R must be positive")
    if n_samples < 10_000:
        raise ValueError("n_samples must be at least 1e4")
    s1 = s2 = 0.0
    below = 0
    done = 0
    while done < n_samples:
        m = min(chunk, n_samples - done)
        z = sample_entry(params, deformation, rng, m)
        keep = np.abs(z) < R
        v = np.where(keep, z * z, 0.0)
        s1 += v.sum()
        s2 += (v * v).sum()
        below += int(keep.sum())
        done += m
    if below < 100:
        raise DegenerateEstimateError(f"only {below} of {n_samples} samples below R={R}")
    mean = s1 / n_samples
    var = max(s2 / n_samples - mean * mean, 0.0)
    return mean, math.sqrt(var / n_samples)


@dataclass(frozen=True)
class CouplingTime:
    t: float
    se: float
    numerator: float
    small_mass: float


_T_CACHE: dict = {}
_T_LOCK = threading.Lock()


def coupling_time_t(config, n_samples: int = 10_000_000, rng=None, chunk=1_000_000) -> CouplingTime:
    """``t = N E[H^2 1{|H| < N^-nu}] / P[|H| < N^-rho]`` by Monte Carlo.

    Without an explicit ``rng`` the draws come from a stream derived from the
    config seed and the result is cached for the config.
    """
    key = None
    if rng is None:
        key = (config.N, config.alpha, config.b, config.nu, config.rho, config.seed,
               config.deformation, n_samples)
        with _T_LOCK:
            hit = _T_CACHE.get(key)
        if hit is not None:
            return hit
        rng = stream(config.seed, "t")
    N = config.N
    params = StableParams.normalized(config.alpha)
    scale = N ** (-1 / config.alpha)
    lo, hi = N ** (-config.nu), N ** (-config.rho)
    s1 = s2 = 0.0
    n_hi = 0
    done = 0
    while done < n_samples:
        m = min(chunk, n_samples - done)
        h = scale * sample_entry(params, config.deformation, rng, m)
        ah = np.abs(h)
        v = np.where(ah < lo, h * h, 0.0)
        s1 += v.sum()
        s2 += (v * v).sum()
        n_hi += int((ah < hi).sum())
        done += m
    num = s1 / n_samples
    num_se = math.sqrt(max(s2 / n_samples - num * num, 0.0) / n_samples)
    p = n_hi / n_samples
    p_se = math.sqrt(p * (1 - p) / n_samples)
    t = N * num / p
    se = t * math.hypot(num_se / num, p_se / p)
    out = CouplingTime(t, se, num, p)
    if key is not None:
        with _T_LOCK:
            _T_CACHE.setdefault(key, out)
    return out


def empirical_char_function(samples, t: float) -> complex:
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise ValueError("samples must be nonempty")
    return complex(np.mean(np.exp(1j * t * x)))


def char_function_with_se(samples, t: float):
    """``(E cos(tX), SE)``: the real part carries all signal for symmetric laws."""
    c = np.cos(t * np.asarray(samples, dtype=float))
    return float(c.mean()), float(c.std(ddof=1) / math.sqrt(c.size))


def removal_char_check(config, coefficients, t, n_samples, rng, chunk=20_000_000):
    """Monte Carlo ``E exp(i t sum c_j X_j)`` for i.i.d. removals vs the stable term."""
    c = np.asarray(coefficients, dtype=float)
    if not np.all(np.isfinite(c)):
        raise ValueError("coefficients must be finite")
    a = config.alpha
    params = StableParams.normalized(a)
    rhs = math.exp(-params.sigma**a * abs(t) ** a * np.sum(np.abs(c) ** a) / config.N)
    if t == 0 or not np.any(c):
        return {"lhs": 1.0 + 0j, "rhs": rhs, "discrepancy": abs(math.log(rhs)), "se": 0.0}
    scale = config.N ** (-1 / a)
    cut = config.N ** (-config.nu)
    rows = max(1, chunk // c.size)
    vals = []
    done = 0
    while done < n_samples:
        m = min(rows, n_samples - done)
        h = scale * sample_entry(params, config.deformation, rng, (m, c.size))
        s = removal_large_part(h, cut) @ c
        vals.append(np.exp(1j * t * s))
        done += m
    v = np.concatenate(vals)
    lhs = complex(v.mean())
    se = float(v.real.std(ddof=1) / math.sqrt(v.size))
    disc = abs(np.log(lhs) - math.log(rhs)) if lhs != 0 else math.inf
    return {"lhs": lhs, "rhs": rhs, "discrepancy": float(disc), "se": se}
