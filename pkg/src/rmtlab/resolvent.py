"""Resolvents, minors, Schur-complement quantities and resolvent-based functionals."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.special import gamma

from rmtlab.limit_law import SpectralPoint
from rmtlab.ensembles import LevyMatrixPair, sample_pair
from rmtlab.rng import trial_stream
from rmtlab.small_alpha import HalfQuadrantFunction, bracket


class ResolventError(RuntimeError):
    pass


def _as_point(z):
    if isinstance(z, SpectralPoint):
        return z
    z = complex(z)
    return SpectralPoint(z.real, z.imag)


@dataclass
class ResolventRecord:
    z: SpectralPoint
    G: np.ndarray
    M: np.ndarray

    @property
    def m_N(self) -> complex:
        return complex(np.trace(self.G) / self.G.shape[0])

    @property
    def diagonal(self):
        return np.diag(self.G)

    def residual(self) -> float:
        """``max |(M - z) G - I|`` relative to ``max(1, |M| |G|)``."""
        N = self.G.shape[0]
        R = (self.M - self.z.z * np.eye(N)) @ self.G - np.eye(N)
        scale = max(1.0, np.abs(self.M).max() * np.abs(self.G).max())
        return float(np.abs(R).max() / scale)

    def ward_residual(self) -> float:
        lhs = np.sum(np.abs(self.G) ** 2, axis=1)
        rhs = self.diagonal.imag / self.z.eta
        return float(np.max(np.abs(lhs - rhs) / np.maximum(np.abs(rhs), 1e-300)))

    def entry_bound_excess(self) -> float:
        """``max |G_ij| - 1/eta``; nonpositive when the deterministic bound holds."""
        return float(np.abs(self.G).max() - 1 / self.z.eta)


def _check_matrix(M):
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("square matrix expected")
    if M.shape[0] > 8192:
        raise ValueError("matrix exceeds the size guard")
    return M


def resolvent(M, z) -> ResolventRecord:
    M = _check_matrix(M)
    p = _as_point(z)
    if p.eta <= 0:
        raise ValueError("eta must be positive")
    N = M.shape[0]
    try:
        lu = linalg.lu_factor(M - p.z * np.eye(N), check_finite=True)
        G = linalg.lu_solve(lu, np.eye(N, dtype=complex))
    except (linalg.LinAlgError, ValueError) as exc:
        raise ResolventError(f"resolvent failed at z={p.z}: {exc}") from exc
    return ResolventRecord(p, G, M)


def resolvent_diagonals(M, zs, eig=None):
    """``diag (M - z)^-1`` for many ``z`` via one spectral decomposition."""
    M = _check_matrix(M)
    lam, U = eig if eig is not None else np.linalg.eigh(M)
    U2 = U * U
    zs = np.atleast_1d(np.asarray(zs, dtype=complex))
    return U2 @ (1.0 / (lam[:, None] - zs[None, :]))


def retained(N, removed):
    removed = sorted(set(int(i) for i in removed))
    if any(i < 0 or i >= N for i in removed):
        raise IndexError("removed index out of range")
    mask = np.ones(N, dtype=bool)
    mask[removed] = False
    return np.flatnonzero(mask)


def minor_resolvent(M, z, removed=()):
    """Resolvent of the principal submatrix on the retained indices.

    Returns ``(G_minor, keep)``; row ``a`` of ``G_minor`` belongs to index
    ``keep[a]`` of the full matrix.
    """
    M = _check_matrix(M)
    keep = retained(M.shape[0], removed)
    if keep.size == 0:
        return np.zeros((0, 0), dtype=complex), keep
    return resolvent(M[np.ix_(keep, keep)], z).G, keep


def minor_from_full(G, j):
    """Rank-one update: resolvent with index ``j`` removed, embedded with a zero row/column."""
    g = G[:, j]
    R = G - np.outer(g, g) / G[j, j]
    R[j, :] = 0
    R[:, j] = 0
    return R


@dataclass(frozen=True)
class SchurQuantities:
    S: complex
    T: complex
    U: complex
    S_frak: complex
    R_ii: complex
    schur_residual: float


def schur_quantities(pair, z, i, removed=()):
    """Schur-complement quantities for index ``i`` of ``X`` with minor ``removed``.

    ``pair`` is a :class:`LevyMatrixPair` (``X`` and ``Z`` read) or a plain
    symmetric matrix (then ``Z`` is taken to be the matrix itself).
    """
    if isinstance(pair, LevyMatrixPair):
        X, Zm = pair.X, pair.Z
    else:
        X = Zm = _check_matrix(pair)
    removed = set(int(r) for r in removed)
    if i in removed:
        raise ValueError("i must not be removed")
    p = _as_point(z)
    R, keep = minor_resolvent(X, p, removed | {i})
    x = X[i, keep]
    zz = Zm[i, keep]
    dR = np.diag(R)
    S = complex(np.sum(x * x * dR))
    U = complex(x @ R @ x) - S
    S_frak = complex(np.sum(zz * zz * dR))
    T = complex(X[i, i] - U)
    Gfull, keep_i = minor_resolvent(X, p, removed)
    a = int(np.flatnonzero(keep_i == i)[0])
    R_ii = complex(Gfull[a, a])
    pred = 1 / (T - p.z - S)
    res = abs(pred - R_ii) / max(abs(R_ii), 1e-300)
    return SchurQuantities(S, T, U, S_frak, R_ii, float(res))


def schur_all(X, G, Z=None):
    """``S_j, U_j, T_j, Sfrak_j`` for every ``j`` from one full resolvent ``G`` of ``X``.

    Uses ``R^(j)_kl = G_kl - G_kj G_jl / G_jj``.
    """
    Xo = X - np.diag(np.diag(X))
    dG = np.diag(G)
    XG = Xo @ G
    quad = np.einsum("jk,jk->j", XG, Xo) - np.diag(XG) ** 2 / dG
    X2 = Xo * Xo
    S = X2 @ dG - np.einsum("jk,jk->j", X2, G * G) / dG
    U = quad - S
    T = np.diag(X) - U
    out = {"S": S, "U": U, "T": T}
    if Z is not None:
        Zo = Z - np.diag(np.diag(Z))
        Z2 = Zo * Zo
        out["S_frak"] = Z2 @ dG - np.einsum("jk,jk->j", Z2, G * G) / dG
    return out


def resolvent_identity_check(K, M, z) -> float:
    """``max |G_K - G_M - G_K (M - K) G_M|`` for ``G_A = (A - z)^-1``."""
    K = _check_matrix(K)
    M = _check_matrix(M)
    GK = resolvent(K, z).G
    GM = resolvent(M, z).G
    return float(np.abs(GK - GM - GK @ (M - K) @ GM).max())


def minor_perturbation(M, z, i):
    """``(N^-1 sum |R_jj - R^(i)_jj|, N^-1 sum |.|^2)`` over ``j != i``."""
    M = _check_matrix(M)
    N = M.shape[0]
    G = resolvent(M, z).G
    R, keep = minor_resolvent(M, z, [i])
    d = np.abs(np.diag(G)[keep] - np.diag(R))
    return float(d.sum() / N), float((d * d).sum() / N)


def lambda_floor(N, alpha):
    return math.log(N) ** (-30 / (alpha - 1))


def lambda_event_stats(pair, z, sample_indices=None, n_sample=32, full=False, rng=None):
    """Minima of ``Im(S_j + z)``, ``Im(Sfrak_j + z)``, ``Im(S_j - T_j + z)`` over sampled ``j``."""
    p = _as_point(z)
    X = pair.X if isinstance(pair, LevyMatrixPair) else _check_matrix(pair)
    Z = pair.Z if isinstance(pair, LevyMatrixPair) else X
    N = X.shape[0]
    if full:
        idx = np.arange(N)
    elif sample_indices is not None:
        idx = np.asarray(sample_indices, dtype=int)
    else:
        rng = rng if rng is not None else np.random.default_rng(0)
        idx = np.sort(rng.choice(N, size=min(n_sample, N), replace=False))
    G = resolvent(X, p).G
    q = schur_all(X, G, Z)
    zi = p.eta
    return {
        "min_im_S": float(np.min(q["S"][idx].imag) + zi),
        "min_im_S_frak": float(np.min(q["S_frak"][idx].imag) + zi),
        "min_im_S_minus_T": float(np.min((q["S"][idx] - q["T"][idx]).imag) + zi),
        "indices": idx,
    }


def gamma_z_empirical(config, z, theta_nodes, trials, seed=None, matrix="X", indices=None):
    """Monte Carlo ``Gamma(1-a/2) E[(-i R_jj | u)^{a/2}]`` on unit directions.

    Averages over ``indices`` (default all ``j``) and ``trials`` matrices;
    returns ``(HalfQuadrantFunction, standard_errors)`` with errors across trials.
    """
    a = config.alpha
    theta_nodes = np.asarray(theta_nodes, dtype=float)
    u = np.exp(1j * theta_nodes)
    seed = config.seed if seed is None else seed
    per_trial = []
    for k in range(trials):
        pair = sample_pair(config, trial_stream(seed, k, "entries"))
        M = pair.X if matrix == "X" else pair.H
        d = resolvent_diagonals(M, [z])[:, 0]
        if indices is not None:
            d = d[np.asarray(indices)]
        vals = bracket(-1j * d[:, None], u[None, :]) ** (a / 2)
        per_trial.append(vals.mean(axis=0))
    arr = gamma(1 - a / 2) * np.array(per_trial)
    mean = arr.mean(axis=0)
    se = arr.std(axis=0, ddof=1) / math.sqrt(trials) if trials > 1 else np.full(mean.shape, np.nan)
    return HalfQuadrantFunction(theta_nodes, mean, a / 2), np.abs(se)
