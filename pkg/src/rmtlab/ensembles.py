"""Coupled Levy / removal matrices, their three-level labels, GOE and the interpolating family."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from rmtlab.rng import trial_stream
from rmtlab.stable_laws import DeformationSpec, StableParams, sample_entry

MAX_N = 8192


class ParameterError(ValueError):
    """A parameter set violates one of the admissibility inequalities."""


@dataclass(frozen=True)
class ConstraintCheck:
    name: str
    ok: bool
    margin: float

    def __str__(self):
        return f"{self.name}: {'pass' if self.ok else 'FAIL'} (margin {self.margin:+.4g})"


def validate_params(alpha, b, nu, rho, consistency_tol=1e-9):
    """Report every admissibility inequality with the signed margin (positive = satisfied)."""
    def upper(alpha):
        return 1 / (4 - 2 * alpha)

    out = []
    gap = abs(nu - (1 / alpha - b))
    out.append(ConstraintCheck("ν = 1/α − b > 0", gap <= consistency_tol and nu > 0,
                               nu if gap <= consistency_tol else -gap))
    out.append(ConstraintCheck("0 < ρ < ν", 0 < rho < nu, min(rho, nu - rho)))
    out.append(ConstraintCheck("ν < 1/2", nu < 0.5, 0.5 - nu))
    out.append(ConstraintCheck("1/(4−α) < ν", 1 / (4 - alpha) < nu, nu - 1 / (4 - alpha)))
    out.append(ConstraintCheck("ν < 1/(4−2α)", nu < upper(alpha), upper(alpha) - nu))
    out.append(ConstraintCheck("αρ < (2−α)ν", alpha * rho < (2 - alpha) * nu,
                               (2 - alpha) * nu - alpha * rho))
    return out


def suggest_params(alpha):
    """Midpoint heuristic: returns ``(b, nu, rho)``."""
    if not 0 < alpha < 2:
        raise ValueError("alpha must lie in (0, 2)")
    lo = 1 / (4 - alpha)
    hi = min(0.5, 1 / (4 - 2 * alpha))
    nu = 0.5 * (lo + hi)
    rho = 0.5 * min(nu, (2 - alpha) * nu / alpha)
    return 1 / alpha - nu, nu, rho


@dataclass(frozen=True)
class EnsembleConfig:
    N: int
    alpha: float
    b: float
    nu: float
    rho: float
    seed: int = 0
    deformation: DeformationSpec = field(default_factory=DeformationSpec)
    max_n: int = MAX_N

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ParameterError("N must be a positive integer")
        if self.N > self.max_n:
            raise ParameterError(f"N = {self.N} exceeds the size guard {self.max_n}")
        if not 0 < self.alpha < 2:
            raise ParameterError("alpha must lie in (0, 2)")
        bad = [c for c in validate_params(self.alpha, self.b, self.nu, self.rho) if not c.ok]
        if bad:
            raise ParameterError("violated: " + "; ".join(str(c) for c in bad))

    @classmethod
    def build(cls, N, alpha, b=None, nu=None, rho=None, seed=0, deformation=None, max_n=MAX_N):
        """Fill missing parameters: ``b``/``nu`` from each other, else the suggested triple."""
        sb, snu, srho = suggest_params(alpha)
        if nu is None and b is None:
            b, nu = sb, snu
        elif nu is None:
            nu = 1 / alpha - b
        elif b is None:
            b = 1 / alpha - nu
        if rho is None:
            rho = 0.5 * min(nu, (2 - alpha) * nu / alpha)
        deformation = deformation if isinstance(deformation, DeformationSpec) else DeformationSpec.from_dict(deformation)
        return cls(int(N), float(alpha), float(b), float(nu), float(rho), int(seed), deformation, max_n)

    @property
    def stable(self) -> StableParams:
        return StableParams.normalized(self.alpha)

    @property
    def removal_cutoff(self):
        return self.N ** (-self.nu)

    @property
    def label_cutoff(self):
        return self.N ** (-self.rho)

    def lemma_scale(self):
        """``N^{(2-alpha)(b - 1/alpha)}``, the removal error scale."""
        return self.N ** ((2 - self.alpha) * (self.b - 1 / self.alpha))


@dataclass
class LevyMatrixPair:
    """``H`` and its removal ``X`` on the same randomness.

    ``Z`` holds the stable part of the entries (identical to ``H`` without
    deformation).  Labels: ``Psi`` marks ``|H| >= N^-rho``; ``Chi`` marks
    ``N^-nu < |H| < N^-rho`` and is 0 wherever ``Psi`` is 1.
    """

    config: EnsembleConfig
    H: np.ndarray
    Z: np.ndarray

    @cached_property
    def _abs(self):
        return np.abs(self.H)

    @cached_property
    def Psi(self):
        return self._abs >= self.config.label_cutoff

    @cached_property
    def Chi(self):
        return (self._abs > self.config.removal_cutoff) & ~self.Psi

    @cached_property
    def A(self):
        return np.where(self._abs <= self.config.removal_cutoff, self.H, 0.0)

    @cached_property
    def B(self):
        return np.where(self.Chi, self.H, 0.0)

    @cached_property
    def C(self):
        return np.where(self.Psi, self.H, 0.0)

    @cached_property
    def X(self):
        return np.where(self._abs > self.config.removal_cutoff, self.H, 0.0)

    @property
    def N(self):
        return self.config.N


def _symmetric_from_upper(vals, N):
    M = np.empty((N, N))
    iu = np.triu_indices(N)
    M[iu] = vals
    M.T[iu] = vals
    return M


def sample_pair(config: EnsembleConfig, rng=None, trial: int = 0) -> LevyMatrixPair:
    """Draw the upper triangle in row-major order, then symmetrize.

    The default stream is keyed by ``(config.seed, trial)``, so entry ``k`` of
    a trial always uses the same counter block.
    """
    if rng is None:
        rng = trial_stream(config.seed, trial, "entries")
    N = config.N
    n = N * (N + 1) // 2
    scale = N ** (-1 / config.alpha)
    z, zs = sample_entry(config.stable, config.deformation, rng, n, return_parts=True)
    H = _symmetric_from_upper(scale * z, N)
    Z = H if config.deformation.variant == "none" else _symmetric_from_upper(scale * zs, N)
    return LevyMatrixPair(config, H, Z)


@dataclass
class GOEMatrix:
    W: np.ndarray


def sample_goe(N: int, rng) -> GOEMatrix:
    if N < 1:
        raise ValueError("N must be positive")
    G = rng.standard_normal((N, N))
    W = (G + G.T) / math.sqrt(2 * N)
    return GOEMatrix(W)


def interpolate_gamma(pair: LevyMatrixPair, goe: GOEMatrix, t: float, gamma: float):
    """``gamma A + X + sqrt(1 - gamma^2) sqrt(t) W``."""
    if not 0 <= gamma <= 1:
        raise ValueError("gamma must lie in [0, 1]")
    if t < 0:
        raise ValueError("t must be nonnegative")
    if goe.W.shape != pair.H.shape:
        raise ValueError("dimension mismatch")
    if gamma == 1:
        return pair.A + pair.X
    return gamma * pair.A + pair.X + math.sqrt(1 - gamma * gamma) * math.sqrt(t) * goe.W


def write_matrix(path, M):
    """Little-endian uint64 dimension header, then float64 entries row-major."""
    M = np.ascontiguousarray(M, dtype="<f8")
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("square matrix expected")
    with open(path, "wb") as fh:
        fh.write(np.uint64(M.shape[0]).astype("<u8").tobytes())
        fh.write(M.tobytes(order="C"))
    return path


def read_matrix(path):
    with open(path, "rb") as fh:
        n = int(np.frombuffer(fh.read(8), dtype="<u8")[0])
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != n * n:
        raise ValueError("truncated matrix file")
    return data.reshape(n, n).copy()
