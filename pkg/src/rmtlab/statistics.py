"""Eigenvalue and resolvent statistics for the experiments."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from rmtlab.ensembles import EnsembleConfig, interpolate_gamma, sample_goe, sample_pair
from rmtlab.limit_law import density_rho_alpha, m_alpha, rho_semicircle
from rmtlab.parallel import map_trials
from rmtlab.resolvent import resolvent, resolvent_diagonals, schur_all
from rmtlab.rng import trial_stream
from rmtlab.stable_laws import coupling_time_t, removal_large_part, sample_entry


@dataclass
class SpectralDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def residual(self, M):
        """``max_k |M u_k - lam_k u_k| / |M|``."""
        R = M @ self.eigenvectors - self.eigenvectors * self.eigenvalues
        return float(np.linalg.norm(R, axis=0).max() / max(np.linalg.norm(M, 2), 1e-300))

    def orthonormality(self):
        U = self.eigenvectors
        return float(np.abs(U.T @ U - np.eye(U.shape[1])).max())


def eigs(M, vectors=True) -> SpectralDecomposition:
    M = np.asarray(M, dtype=float)
    if M.shape[0] > 8192:
        raise ValueError("matrix exceeds the size guard")
    try:
        if vectors:
            lam, U = np.linalg.eigh(M)
        else:
            lam, U = np.linalg.eigvalsh(M), None
    except np.linalg.LinAlgError as exc:
        raise RuntimeError(f"eigensolver failed: {exc}") from exc
    return SpectralDecomposition(lam, U)


def bin_masses(density, edges, nodes=6):
    """Gauss-Legendre integral of ``density`` over every bin."""
    x, w = np.polynomial.legendre.leggauss(nodes)
    lo, hi = edges[:-1], edges[1:]
    pts = (lo[:, None] + hi[:, None]) / 2 + (hi - lo)[:, None] / 2 * x[None, :]
    vals = np.asarray(density(pts.ravel())).reshape(pts.shape)
    return vals @ w * (hi - lo) / 2


def esd_compare(eigenvalues, alpha=None, bins=50, range=(-5.0, 5.0), density=None):
    """Histogram of the spectrum against bin masses of ``rho_alpha`` (or ``density``)."""
    lam = np.asarray(eigenvalues, dtype=float)
    if density is None:
        if alpha is None:
            raise ValueError("give alpha or a density")
        density = lambda E: density_rho_alpha(alpha, E)
    edges = np.linspace(range[0], range[1], bins + 1)
    counts, _ = np.histogram(lam, edges)
    emp = counts / lam.size
    ref = bin_masses(density, edges)
    d = np.abs(emp - ref)
    return {"edges": edges, "empirical": emp, "reference": ref,
            "sup": float(d.max()), "l1": float(d.sum())}


def _m_alpha_grid(alpha, zs):
    zs = np.asarray(zs, dtype=complex)
    return np.asarray(m_alpha(alpha, zs), dtype=complex).reshape(zs.shape)


@dataclass
class LocalLawReport:
    energies: np.ndarray
    etas: np.ndarray
    mean_abs_dev: np.ndarray  # (n_eta, n_E)
    se_abs_dev: np.ndarray
    max_R_q95: np.ndarray
    max_R_median: np.ndarray
    m_alpha: np.ndarray
    trials: int
    per_trial_dev: np.ndarray = field(repr=False)
    per_trial_maxR: np.ndarray = field(repr=False)


def local_law_sweep(config: EnsembleConfig, energies, etas, trials, seed=None, matrix="X",
                    threads=None):
    """``|m_N(z) - m_alpha(z)|`` and ``max_j |R_jj(z)|`` on the grid ``etas x energies``."""
    energies = np.asarray(energies, dtype=float)
    etas = np.asarray(etas, dtype=float)
    if config.alpha > 1 and np.any(energies == 0):
        raise ValueError("the domain must exclude E = 0 for alpha in (1, 2)")
    Z = energies[None, :] + 1j * etas[:, None]
    ma = _m_alpha_grid(config.alpha, Z)
    seed = config.seed if seed is None else seed

    def one(k):
        pair = sample_pair(config, trial_stream(seed, k, "entries"))
        M = {"X": pair.X, "H": pair.H}[matrix]
        D = resolvent_diagonals(M, Z.ravel())
        mN = D.mean(axis=0).reshape(Z.shape)
        return np.abs(mN - ma), np.abs(D).max(axis=0).reshape(Z.shape)

    out = map_trials(one, range(trials), threads)
    dev = np.array([o[0] for o in out])
    mx = np.array([o[1] for o in out])
    se = dev.std(axis=0, ddof=1) / math.sqrt(trials) if trials > 1 else np.zeros(Z.shape)
    return LocalLawReport(energies, etas, dev.mean(axis=0), se,
                          np.quantile(mx, 0.95, axis=0), np.median(mx, axis=0), ma, trials, dev, mx)


def delocalization_report(decomp: SpectralDecomposition, window):
    lo, hi = window
    sel = (decomp.eigenvalues >= lo) & (decomp.eigenvalues <= hi)
    if not np.any(sel):
        raise ValueError("no eigenvalues in the window")
    N = decomp.eigenvectors.shape[0]
    v = math.sqrt(N) * np.abs(decomp.eigenvectors[:, sel]).max(axis=0)
    return {"eigenvalues": decomp.eigenvalues[sel], "scaled_sup": v, "max": float(v.max()),
            "q50": float(np.quantile(v, 0.5)), "q95": float(np.quantile(v, 0.95))}


@dataclass
class GapSample:
    spacings: np.ndarray
    E: float
    window: tuple

    @property
    def mean(self):
        return float(self.spacings.mean())


def unfolded_gaps(eigenvalues, E, k, density, N=None) -> GapSample:
    """The ``k`` consecutive gaps nearest ``E`` scaled by ``N density(E)``.

    ``density`` is a number or a callable; the local density is taken constant
    across the window.
    """
    lam = np.sort(np.asarray(eigenvalues, dtype=float))
    N = lam.size if N is None else N
    if lam.size < k + 1:
        raise ValueError(f"need {k + 1} eigenvalues, have {lam.size}")
    rho = float(density(E)) if callable(density) else float(density)
    if not rho > 0:
        raise ValueError("density at E must be positive")
    c = int(np.argmin(np.abs(lam - E)))
    start = min(max(c - k // 2, 0), lam.size - k - 1)
    window = lam[start:start + k + 1]
    return GapSample(N * rho * np.diff(window), float(E), (float(window[0]), float(window[-1])))


def ks_distance(sample_a, sample_b) -> float:
    a = np.asarray(sample_a, dtype=float)
    b = np.asarray(sample_b, dtype=float)
    if a.size == 0 or b.size == 0:
        raise ValueError("samples must be nonempty")
    return float(stats.ks_2samp(a, b).statistic)


def wigner_surmise_cdf(s):
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise ValueError("s must be nonnegative")
    out = 1 - np.exp(-math.pi * s * s / 4)
    return float(out) if out.ndim == 0 else out


def wigner_surmise_pdf(s):
    s = np.asarray(s, dtype=float)
    return math.pi * s / 2 * np.exp(-math.pi * s * s / 4)


def gap_experiment(config: EnsembleConfig, E, trials, seed=None, k=None, goe_E=0.0, threads=None,
                   matrix="H"):
    """Pooled unfolded gaps of the Levy ensemble at ``E`` and of GOE at ``goe_E``."""
    N = config.N
    k = int(math.floor(N**0.6)) if k is None else k
    seed = config.seed if seed is None else seed
    rho_E = density_rho_alpha(config.alpha, E)
    rho_0 = rho_semicircle(goe_E)

    def one(j):
        pair = sample_pair(config, trial_stream(seed, j, "entries"))
        M = {"X": pair.X, "H": pair.H}[matrix]
        lam = np.linalg.eigvalsh(M)
        W = sample_goe(N, trial_stream(seed, j, "goe")).W
        mu = np.linalg.eigvalsh(W)
        return (unfolded_gaps(lam, E, k, rho_E).spacings, unfolded_gaps(mu, goe_E, k, rho_0).spacings)

    out = map_trials(one, range(trials), threads)
    levy = np.concatenate([o[0] for o in out])
    goe = np.concatenate([o[1] for o in out])
    return {"levy": levy, "goe": goe, "ks": ks_distance(levy, goe),
            "ks_levy_surmise": float(stats.kstest(levy, wigner_surmise_cdf).statistic),
            "ks_goe_surmise": float(stats.kstest(goe, wigner_surmise_cdf).statistic),
            "mean_levy": float(levy.mean()), "mean_goe": float(goe.mean()), "k": k,
            "rho_E": float(rho_E)}


def tail_slope(values, thresholds, min_count=20):
    """Empirical survival function at ``thresholds`` and its log-log least-squares slope."""
    v = np.asarray(values, dtype=float)
    th = np.asarray(thresholds, dtype=float)
    surv = np.array([(v >= x).mean() for x in th])
    counts = surv * v.size
    ok = counts >= min_count
    if ok.sum() < 2:
        return surv, float("nan")
    slope = np.polyfit(np.log(th[ok]), np.log(surv[ok]), 1)[0]
    return surv, float(slope)


def ti_tail_test(config: EnsembleConfig, z, n_samples, seed=None, per_matrix=500,
                 thresholds=None, threads=None):
    """Tail of ``|T_i| (N eta^2)^{1/2}``; ``per_matrix`` indices are used per matrix."""
    z = complex(z)
    N = config.N
    per_matrix = min(per_matrix, N)
    n_mat = math.ceil(n_samples / per_matrix)
    seed = config.seed if seed is None else seed

    def one(k):
        pair = sample_pair(config, trial_stream(seed, k, "entries"))
        X = pair.X
        G = resolvent(X, z).G
        q = schur_all(X, G)
        idx = trial_stream(seed, k, "rows").choice(N, size=per_matrix, replace=False)
        return q["T"][idx]

    T = np.concatenate(map_trials(one, range(n_mat), threads))[:n_samples]
    scaled = np.abs(T) * math.sqrt(N * z.imag**2)
    if thresholds is None:
        thresholds = 2.0 ** np.arange(1, 9)
    surv, slope = tail_slope(scaled, thresholds)
    re = T.real
    return {"T": T, "scaled": scaled, "thresholds": np.asarray(thresholds, dtype=float),
            "survival": surv, "slope": slope, "mean_T": complex(T.mean()),
            "se_T": float(re.std(ddof=1) / math.sqrt(re.size)),
            "median_re_T": float(np.median(re)), "positive_fraction": float((re > 0).mean())}


def _removal_vectors(config, rng, shape):
    scale = config.N ** (-1 / config.alpha)
    h = scale * sample_entry(config.stable, config.deformation, rng, shape)
    return removal_large_part(h, config.removal_cutoff)


def quadratic_form_laplace_test(config: EnsembleConfig, weights, t, trials, seed=None, chunk=2_000_000):
    """``E exp(-t^2 <A X, X>/2)`` vs ``E exp(-sigma^a |t|^a |A^{1/2} Y|_a^a / N)`` (diagonal ``A``)."""
    a = np.asarray(weights, dtype=float)
    if np.any(a < 0):
        raise ValueError("weights must be nonnegative")
    if t == 0:
        return {"lhs": 1.0, "rhs": 1.0, "ratio": 1.0, "log_ratio": 0.0, "scale": 0.0,
                "se_lhs": 0.0, "se_rhs": 0.0}
    seed = config.seed if seed is None else seed
    al = config.alpha
    sig_a = config.stable.sigma ** al
    n = a.size
    rows = max(1, chunk // n)
    rx = trial_stream(seed, 0, "laplace")
    ry = trial_stream(seed, 1, "laplace")
    lhs_v, rhs_v = [], []
    done = 0
    sq = np.sqrt(a)
    while done < trials:
        m = min(rows, trials - done)
        X = _removal_vectors(config, rx, (m, n))
        lhs_v.append(np.exp(-t * t / 2 * (X * X) @ a))
        Y = ry.standard_normal((m, n))
        rhs_v.append(np.exp(-sig_a * abs(t) ** al * np.sum(np.abs(sq * Y) ** al, axis=1) / config.N))
        done += m
    L = np.concatenate(lhs_v)
    R = np.concatenate(rhs_v)
    lhs, rhs = float(L.mean()), float(R.mean())
    return {"lhs": lhs, "rhs": rhs, "ratio": lhs / rhs, "log_ratio": math.log(lhs / rhs),
            "scale": t * t * config.lemma_scale(),
            "se_lhs": float(L.std(ddof=1) / math.sqrt(L.size)),
            "se_rhs": float(R.std(ddof=1) / math.sqrt(R.size))}


def dbm_regularization_check(config: EnsembleConfig, s=None, E=1.0, eta=None, trials=50, seed=None,
                             threads=None):
    """``max_ij |T_ij|`` for ``T = (X + sqrt(s) W - z)^-1``, with the ``s = 0`` control."""
    N = config.N
    if s is None:
        s = coupling_time_t(config).t
    eta = 2 * N ** (-0.75) if eta is None else eta
    z = complex(E, eta)
    seed = config.seed if seed is None else seed

    def one(k):
        pair = sample_pair(config, trial_stream(seed, k, "entries"))
        W = sample_goe(N, trial_stream(seed, k, "goe")).W
        T = resolvent(pair.X + math.sqrt(s) * W, z).G
        C = resolvent(pair.X, z).G
        return float(np.abs(T).max()), float(np.abs(C).max())

    out = np.array(map_trials(one, range(trials), threads))
    return {"max_T": out[:, 0], "max_control": out[:, 1], "s": s, "eta": eta, "z": z,
            "ceiling": 1 / eta}


def comparison_statistic(config: EnsembleConfig, z, gamma_grid, trials, seed=None, threads=None,
                         t=None):
    """``|mean Im G^gamma_aa - mean Im T_aa|`` per gamma, on coupled samples.

    Every trial draws one pair and one GOE matrix shared by all gammas.
    """
    z = complex(z)
    if z.imag < 1 / config.N:
        raise ValueError("eta must be at least 1/N")
    N = config.N
    gam = np.asarray(gamma_grid, dtype=float)
    t = coupling_time_t(config).t if t is None else t
    seed = config.seed if seed is None else seed

    def one(k):
        pair = sample_pair(config, trial_stream(seed, k, "entries"))
        goe = sample_goe(N, trial_stream(seed, k, "goe"))
        def im_diag(g):
            lam, U = np.linalg.eigh(interpolate_gamma(pair, goe, t, g))
            return ((U * U) @ (1 / (lam - z))).imag.mean()

        base = im_diag(0.0)
        return np.array([base if g == 0 else im_diag(g) for g in gam]), base

    res = map_trials(one, range(trials), threads)
    G = np.array([r[0] for r in res])
    T0 = np.array([r[1] for r in res])
    diff = G - T0[:, None]
    se = diff.std(axis=0, ddof=1) / math.sqrt(trials) if trials > 1 else np.zeros(gam.size)
    return {"gamma": gam, "gap": np.abs(diff.mean(axis=0)), "se": se, "t": t,
            "mean_G": G.mean(axis=0), "mean_T": float(T0.mean())}
