"""Experiment runners used by the command line.

Every runner takes a :class:`RunConfig` and an output directory and returns
``(files, checks)``: a mapping of statistic name to written path and a list
of :class:`Check` records.
"""

from __future__ import annotations

import math
import os

import numpy as np
from scipy.special import gamma

from rmtlab import plotting
from rmtlab.ensembles import (EnsembleConfig, interpolate_gamma, sample_goe, sample_pair,
                              validate_params, write_matrix)
from rmtlab.limit_law import density_rho_alpha, m_semicircle, psi_fn, rho_semicircle, solve_y
from rmtlab.reports import Check, write_csv
from rmtlab.rng import trial_stream
from rmtlab.small_alpha import s_pz, solve_omega, write_omega
from rmtlab.stable_laws import removal_char_check
from rmtlab import statistics as st


def _path(out, name):
    return os.path.join(out, name)


def _dump(cfg, out, files):
    pair = sample_pair(cfg.ensemble, trial_stream(cfg.seed, 0, "entries"))
    files["matrix_H"] = write_matrix(_path(out, "H_trial0.bin"), pair.H)
    files["matrix_X"] = write_matrix(_path(out, "X_trial0.bin"), pair.X)


def run_density(cfg, out):
    p = cfg.params
    a = cfg.ensemble.alpha
    E = np.linspace(p["E_min"], p["E_max"], p["n_E"])
    rho, d = density_rho_alpha(a, E, tuple(p["eta_pair"]), return_details=True)
    files = {"density": write_csv(_path(out, "density.csv"), ["E", "rho_alpha", "im_m", "residual"],
                                  zip(E, rho, d["im_m"], d["residual"]))}
    checks = [Check("density nonnegative", bool(np.all(rho >= 0)), float(rho.min()), ">= 0")]
    lam = np.concatenate([np.linalg.eigvalsh(sample_pair(cfg.ensemble, trial_stream(cfg.seed, k, "entries")).H)
                          for k in range(cfg.trials)])
    cmp = st.esd_compare(lam, a, bins=p["bins"], range=(p["E_min"], p["E_max"]))
    e = cmp["edges"]
    files["esd"] = write_csv(_path(out, "esd.csv"), ["bin_lo", "bin_hi", "empirical", "reference"],
                             zip(e[:-1], e[1:], cmp["empirical"], cmp["reference"]))
    files["density_plot"] = plotting.density_overlay(_path(out, "density.svg"), E, rho, e, cmp["empirical"])
    checks.append(Check("ESD L1 discrepancy", cmp["l1"] <= p["esd_l1_max"], cmp["l1"],
                        f"<= {p['esd_l1_max']}"))
    return files, checks


def run_locallaw(cfg, out):
    p = cfg.params
    c = cfg.ensemble
    E = np.linspace(p["E_min"], p["E_max"], p["n_E"])
    eta_small = c.N ** (-p["max_R_eta_exponent"])
    etas = list(p["etas"]) + [eta_small]
    rep = st.local_law_sweep(c, E, etas, cfg.trials, matrix=p["matrix"], threads=cfg.threads)
    rows = []
    for i, eta in enumerate(etas):
        for j, e in enumerate(E):
            rows.append((e, eta, rep.mean_abs_dev[i, j], rep.se_abs_dev[i, j],
                         rep.max_R_median[i, j], rep.max_R_q95[i, j]))
    files = {"locallaw": write_csv(_path(out, "locallaw.csv"),
                                   ["E", "eta", "mean_abs_dev", "se", "max_R_median", "max_R_q95"], rows)}
    files["locallaw_plot"] = plotting.heatmap(_path(out, "locallaw.svg"), E, etas, rep.mean_abs_dev)
    # the bound applies per z, so the worst grid point decides
    dev = float(rep.mean_abs_dev[: len(p["etas"])].max())
    bound = math.log(c.N) ** (30 / (c.alpha - 1)) if c.alpha > 1 else math.inf
    q95 = float(rep.max_R_q95[-1].max())
    checks = [Check("max over z of mean |m_N - m_alpha|", dev <= p["mean_dev_max"], dev, f"<= {p['mean_dev_max']}"),
              Check("q95 max_j |R_jj| at small eta", q95 <= bound, q95, f"<= {bound:.4g}")]
    return files, checks


def deloc_trials(c, trials, window, goe_window=None, threads=None):
    from rmtlab.parallel import map_trials

    def one(k):
        pair = sample_pair(c, trial_stream(c.seed, k, "entries"))
        rep = st.delocalization_report(st.eigs(pair.H), window)
        W = sample_goe(c.N, trial_stream(c.seed, k, "goe")).W
        g = st.delocalization_report(st.eigs(W), goe_window or window)
        return rep, g

    return map_trials(one, range(trials), threads)


def run_deloc(cfg, out):
    p = cfg.params
    c = cfg.ensemble
    res = deloc_trials(c, cfg.trials, (p["E_min"], p["E_max"]), threads=cfg.threads)
    bound = c.N ** p["bound_exponent"]
    gbound = 1.5 * math.sqrt(2 * math.log(c.N))
    rows = [(k, r.get("max"), g.get("max")) for k, (r, g) in enumerate(res)]
    files = {"deloc": write_csv(_path(out, "deloc.csv"), ["trial", "levy_max", "goe_max"], rows)}
    r0 = res[0][0]
    files["deloc_plot"] = plotting.scatter(_path(out, "deloc.svg"), r0["eigenvalues"], r0["scaled_sup"], bound)
    frac = float(np.mean([r["max"] <= bound for r, _ in res]))
    checks = [Check("delocalization fraction", frac >= p["fraction"], frac, f">= {p['fraction']}")]
    if p["goe_control"]:
        gf = float(np.mean([g["max"] <= gbound for _, g in res]))
        checks.append(Check("GOE control fraction", gf >= p["fraction"], gf, f">= {p['fraction']}"))
    return files, checks


def run_gaps(cfg, out):
    p = cfg.params
    c = cfg.ensemble
    k = int(math.floor(c.N ** p["k_exponent"]))
    g = st.gap_experiment(c, p["E"], cfg.trials, k=k, goe_E=p["goe_E"], threads=cfg.threads,
                          matrix=p["matrix"])
    rows = [("levy", s) for s in g["levy"]] + [("goe", s) for s in g["goe"]]
    files = {"gaps": write_csv(_path(out, "gaps.csv"), ["ensemble", "spacing"], rows)}
    files["gaps_plot"] = plotting.spacing_histogram(_path(out, "gaps.svg"), g["levy"], g["goe"])
    checks = [Check("two-sample KS", g["ks"] <= p["ks_max"], g["ks"], f"<= {p['ks_max']}"),
              Check("mean spacing (Levy)", 0.9 <= g["mean_levy"] <= 1.1, g["mean_levy"], "in [0.9, 1.1]"),
              Check("mean spacing (GOE)", 0.9 <= g["mean_goe"] <= 1.1, g["mean_goe"], "in [0.9, 1.1]")]
    return files, checks


def run_compare(cfg, out):
    p = cfg.params
    z = complex(*p["z"])
    r = st.comparison_statistic(cfg.ensemble, z, p["gamma_grid"], cfg.trials, threads=cfg.threads)
    files = {"compare": write_csv(_path(out, "compare.csv"), ["gamma", "gap", "se"],
                                  zip(r["gamma"], r["gap"], r["se"]))}
    top = float(r["gap"][-1])
    return files, [Check("comparison gap at largest gamma", top <= p["gap_max"], top, f"<= {p['gap_max']}")]


def run_fixedpoint(cfg, out):
    p = cfg.params
    a = cfg.ensemble.alpha
    z = complex(*p["z"])
    y = solve_y(a, z)
    m1 = complex(y.m_alpha)
    om = solve_omega(a, z, grid_size=p["grid_size"], tolerance=p["tolerance"])
    m2 = complex(1j * s_pz(a, 1.0, z, om.omega_at_one))
    write_omega(om, _path(out, "omega.csv"), _path(out, "omega.json"))
    files = {"omega": _path(out, "omega.csv"), "omega_meta": _path(out, "omega.json")}
    files["fixedpoint"] = write_csv(
        _path(out, "fixedpoint.csv"),
        ["alpha", "re_z", "im_z", "re_y", "im_y", "re_m_alpha", "im_m_alpha", "re_m_small", "im_m_small",
         "re_omega1", "im_omega1", "residual_y", "residual_omega"],
        [(a, z.real, z.imag, y.y.real, y.y.imag, m1.real, m1.imag, m2.real, m2.imag,
          om.omega_at_one.real, om.omega_at_one.imag, y.residual, om.residual_sup)])
    d1 = abs(m1 - m2)
    d2 = abs(om.omega_at_one - gamma(1 - a / 2) * y.y)
    tol = p["cross_tol"]
    return files, [Check("m_alpha cross-route", d1 <= tol, d1, f"<= {tol}"),
                   Check("Omega(1) vs Gamma(1-a/2) y", d2 <= tol, d2, f"<= {tol}")]


def run_titail(cfg, out):
    p = cfg.params
    c = cfg.ensemble
    r = st.ti_tail_test(c, complex(p["E"], p["eta"]), p["samples"], threads=cfg.threads)
    files = {"titail": write_csv(_path(out, "titail.csv"), ["threshold", "survival"],
                                 zip(r["thresholds"], r["survival"]))}
    target = -c.alpha / 2
    ok = abs(r["slope"] - target) <= p["slope_tol"]
    return files, [Check("T_i tail exponent", ok, r["slope"], f"{target:g} +- {p['slope_tol']}")]


def run_laplace(cfg, out):
    p = cfg.params
    c = cfg.ensemble
    q = st.quadratic_form_laplace_test(c, np.ones(c.N), p["t"], p["samples"])
    rc = removal_char_check(c, np.ones(c.N), p["t"], max(p["samples"] // 10, 1000),
                            trial_stream(c.seed, 2, "laplace"))
    scale = c.lemma_scale()
    files = {"laplace": write_csv(_path(out, "laplace.csv"), ["check", "lhs", "rhs", "log_discrepancy", "bound"],
                                  [("quadratic_form", q["lhs"], q["rhs"], abs(q["log_ratio"]), p["slack"] + q["scale"]),
                                   ("removal_char", abs(rc["lhs"]), rc["rhs"], rc["discrepancy"], p["char_slack"] * scale)])}
    return files, [
        Check("quadratic-form |log ratio|", abs(q["log_ratio"]) <= p["slack"] + q["scale"],
              abs(q["log_ratio"]), f"<= {p['slack'] + q['scale']:.4g}"),
        Check("removal char-function discrepancy", rc["discrepancy"] <= p["char_slack"] * scale,
              rc["discrepancy"], f"<= {p['char_slack'] * scale:.4g}")]


def run_dbm(cfg, out):
    p = cfg.params
    c = cfg.ensemble
    eta = p["eta_factor"] * c.N ** (-p["eta_exponent"])
    r = st.dbm_regularization_check(c, E=p["E"], eta=eta, trials=cfg.trials, threads=cfg.threads)
    bound = c.N ** p["bound_exponent"]
    files = {"dbm": write_csv(_path(out, "dbm.csv"), ["trial", "max_T", "max_X_control"],
                              [(k, a, b) for k, (a, b) in enumerate(zip(r["max_T"], r["max_control"]))])}
    frac = float(np.mean(r["max_T"] <= bound))
    return files, [Check("max |T_ij| fraction", frac >= p["fraction"], frac, f">= {p['fraction']}"),
                   Check("deterministic ceiling", bool(np.all(r["max_T"] <= r["ceiling"])),
                         float(r["max_T"].max()), f"<= {r['ceiling']:.4g}")]


def run_validate(cfg, out):
    c = cfg.ensemble
    diags = validate_params(c.alpha, c.b, c.nu, c.rho)
    files = {"validate": write_csv(_path(out, "validate.csv"), ["constraint", "pass", "margin"],
                                   [(d.name, d.ok, d.margin) for d in diags])}
    return files, [Check(d.name, d.ok, d.margin, "> 0 margin") for d in diags]


def selftest_checks():
    """Closed-form identity checks; each returns a :class:`Check`."""
    from rmtlab.resolvent import resolvent, resolvent_identity_check, schur_quantities
    from rmtlab.small_alpha import bracket
    from rmtlab.stable_laws import stable_sigma, split_removal

    out = []

    def add(name, err, tol=1e-12):
        out.append(Check(name, bool(err <= tol), float(err), f"<= {tol:g}"))

    r = resolvent(np.zeros((3, 3)), 1j)
    add("resolvent of zero matrix", float(np.abs(r.G - 1j * np.eye(3)).max()))
    add("1x1 resolvent", abs(resolvent(np.array([[2.0]]), 1 + 1j).G[0, 0] - (1 + 1j) / 2))
    q = schur_quantities(np.array([[0.7]]), 0.3 + 0.5j, 0)
    add("1x1 Schur quantities", abs(q.S) + abs(q.U) + abs(q.R_ii - 1 / (0.7 - 0.3 - 0.5j)))
    rng = np.random.default_rng(1)
    A = rng.standard_normal((40, 40)); A = A + A.T
    E = 1e-3 * rng.standard_normal((40, 40)); E = E + E.T
    add("resolvent identity", resolvent_identity_check(A + E, A, 0.2 + 0.7j), 1e-9)
    rr = resolvent(A, 0.1 + 0.2j)
    add("Ward identity", rr.ward_residual(), 1e-9)
    add("bracket (u|1) = u", abs(bracket(3 + 4j, 1) - (3 + 4j)))
    add("bracket (-iu|e^{i pi/4})", abs(bracket(-1j * (2 + 5j), np.exp(1j * np.pi / 4)) - 5 * np.sqrt(2)))
    add("sigma(1) = pi/2", abs(stable_sigma(1.0) - np.pi / 2))
    sp = split_removal(-2.0, 1.0)
    add("removal split", abs(sp.small) + abs(sp.large + 2.0) + abs(split_removal(1.0, 1.0).large))
    add("m_sc(i)", abs(m_semicircle(1j) - 1j * (np.sqrt(5) - 1) / 2))
    add("rho_sc(0) = 1/pi", abs(rho_semicircle(0.0) - 1 / np.pi))
    from rmtlab.limit_law import free_convolution_mfc
    fc = free_convolution_mfc(np.zeros(10), 1.0, 1j)
    add("free convolution semicircle reduction", abs(fc["m_fc"] - m_semicircle(1j)), 1e-9)
    lam = rng.standard_normal(50)
    fc0 = free_convolution_mfc(lam, 0.0, 0.5 + 0.5j)
    add("free convolution s = 0", abs(fc0["m_fc"] - np.mean(1 / (lam - 0.5 - 0.5j))), 1e-14)
    add("Wigner surmise median", abs(st.wigner_surmise_cdf(np.sqrt(4 * np.log(2) / np.pi)) - 0.5))
    bad = [d for d in validate_params(1.5, 1 / 1.5 - 0.39, 0.39, 0.1) if not d.ok]
    out.append(Check("invalid nu detected", [d.name for d in bad] == ["1/(4−α) < ν"], len(bad), "exactly one"))
    c = EnsembleConfig.build(60, 1.5, seed=3)
    pair = sample_pair(c)
    W = sample_goe(60, trial_stream(3, 0, "goe"))
    add("H^1 = H", float(np.abs(interpolate_gamma(pair, W, 0.3, 1.0) - pair.H).max()), 0.0)
    add("H^0 = X + sqrt(t) W", float(np.abs(interpolate_gamma(pair, W, 0.3, 0.0) - (pair.X + np.sqrt(0.3) * W.W)).max()), 0.0)
    add("label decomposition", float(np.abs(pair.A + pair.B + pair.C - pair.H).max()), 0.0)
    add("psi_{z}(0) = i/z", abs(complex(psi_fn(1.5, 1 + 1j, 0.0)) - 1j / (1 + 1j)), 1e-9)
    return out


def run_selftest(cfg, out):
    checks = selftest_checks()
    files = {}
    if out is not None:
        files["selftest"] = write_csv(_path(out, "selftest.csv"), ["check", "pass", "value"],
                                      [(c.name, c.passed, c.value) for c in checks])
    return files, checks


RUNNERS = {
    "density": run_density, "locallaw": run_locallaw, "deloc": run_deloc, "gaps": run_gaps,
    "compare": run_compare, "fixedpoint": run_fixedpoint, "titail": run_titail,
    "laplace": run_laplace, "dbm": run_dbm, "validate": run_validate, "selftest": run_selftest,
}
