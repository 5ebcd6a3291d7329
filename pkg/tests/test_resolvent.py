import math

import numpy as np
import pytest

from rmtlab.ensembles import EnsembleConfig, sample_pair
from rmtlab.limit_law import SpectralPoint
from rmtlab.resolvent import (
    gamma_z_empirical,
    lambda_event_stats,
    lambda_floor,
    minor_from_full,
    minor_perturbation,
    minor_resolvent,
    resolvent,
    resolvent_diagonals,
    resolvent_identity_check,
    schur_all,
    schur_quantities,
)
from rmtlab.rng import stream, trial_stream
from rmtlab.small_alpha import solve_omega


def sym(N, seed):
    A = np.random.default_rng(seed).standard_normal((N, N))
    return (A + A.T) / math.sqrt(2 * N)


@pytest.fixture(scope="module")
def cfg200():
    return EnsembleConfig.build(200, 1.5, seed=3)


def test_zero_matrix():
    rec = resolvent(np.zeros((3, 3)), 1j)
    assert np.allclose(rec.G, 1j * np.eye(3), atol=1e-15)
    assert rec.m_N == pytest.approx(1j)


def test_one_by_one():
    rec = resolvent(np.array([[2.0]]), 1 + 1j)
    assert rec.G[0, 0] == pytest.approx((1 + 1j) / 2, abs=1e-15)


def test_random_identities():
    M = sym(50, 0)
    rec = resolvent(M, SpectralPoint(0.3, 0.1))
    assert rec.residual() <= 1e-8
    assert rec.ward_residual() <= 1e-10
    assert rec.entry_bound_excess() <= 0
    assert rec.m_N.imag > 0
    assert rec.m_N == np.trace(rec.G) / 50
    assert np.allclose(rec.G, rec.G.T, atol=1e-13)


def test_rejects_real_z():
    with pytest.raises(ValueError):
        resolvent(np.eye(2), 1.0 + 0j)


def test_conjugate_symmetry():
    M = sym(60, 1)
    z = 0.4 + 0.2j
    G = resolvent(M, z).G
    Gc = np.linalg.inv(M - np.conj(z) * np.eye(60))
    assert abs(np.trace(Gc) / 60 - np.conj(np.trace(G) / 60)) < 1e-13


def test_diagonals_match_dense():
    M = sym(80, 2)
    zs = [0.1 + 0.05j, 1 + 1j, -2 + 0.3j]
    D = resolvent_diagonals(M, zs)
    for k, z in enumerate(zs):
        assert np.allclose(D[:, k], np.diag(resolvent(M, z).G), atol=1e-11)


def test_minor_empty_equals_full():
    M = sym(30, 4)
    R, keep = minor_resolvent(M, 0.5 + 0.5j, ())
    assert np.array_equal(keep, np.arange(30))
    assert np.allclose(R, resolvent(M, 0.5 + 0.5j).G, atol=1e-14)


def test_minor_rank_one_formula():
    M = sym(40, 5)
    z = 0.2 + 0.3j
    G = resolvent(M, z).G
    R, keep = minor_resolvent(M, z, [7])
    assert np.allclose(minor_from_full(G, 7)[np.ix_(keep, keep)], R, atol=1e-11)


@pytest.mark.parametrize("eta", [0.5, 0.1, 0.02])
def test_minor_perturbation_bounds(cfg200, eta):
    pair = sample_pair(cfg200, trial=0)
    z = SpectralPoint(1.0, eta)
    i = int(stream(0, "minor").integers(200))
    mean_abs, mean_sq = minor_perturbation(pair.X, z, i)
    assert mean_abs <= 4 / (200 * eta)
    assert mean_sq <= 8 / (200 * eta**2)


def test_schur_one_by_one():
    h = 0.7
    q = schur_quantities(np.array([[h]]), 0.3 + 0.4j, 0)
    assert q.S == 0 and q.U == 0 and q.T == h
    assert q.R_ii == pytest.approx(1 / (h - (0.3 + 0.4j)), abs=1e-15)


def test_schur_residual_n500():
    cfg = EnsembleConfig.build(500, 1.5, seed=11)
    pair = sample_pair(cfg, trial=0)
    for i in (0, 137, 499):
        q = schur_quantities(pair, 1 + 0.05j, i)
        assert q.schur_residual <= 1e-8
        assert q.S.imag >= 0 and q.S_frak.imag >= 0
        assert (q.S - q.T).imag >= 0


def test_schur_with_removed_set(cfg200):
    pair = sample_pair(cfg200, trial=1)
    q = schur_quantities(pair, 0.5 + 0.1j, 3, removed=[0, 10, 50])
    assert q.schur_residual <= 1e-8
    with pytest.raises(ValueError):
        schur_quantities(pair, 0.5 + 0.1j, 3, removed=[3])


def test_schur_all_matches_direct(cfg200):
    pair = sample_pair(cfg200, trial=2)
    z = 0.8 + 0.1j
    G = resolvent(pair.X, z).G
    q = schur_all(pair.X, G, pair.Z)
    for i in (0, 99, 199):
        d = schur_quantities(pair, z, i)
        assert q["S"][i] == pytest.approx(d.S, abs=1e-9)
        assert q["T"][i] == pytest.approx(d.T, abs=1e-9)
        assert q["S_frak"][i] == pytest.approx(d.S_frak, abs=1e-9)


def test_im_s_nonnegative_1000_trials(cfg200):
    z = SpectralPoint(1.0, 0.05)
    worst = np.inf
    for k in range(1000):
        pair = sample_pair(cfg200, trial_stream(77, k))
        G = resolvent(pair.X, z).G
        i = k % 200
        S = schur_all(pair.X, G)["S"][i]
        worst = min(worst, S.imag)
    assert worst >= -1e-12


def test_resolvent_identity():
    M = sym(100, 6)
    assert resolvent_identity_check(M, M, 0.1 + 0.2j) == 0.0
    E = 1e-3 * sym(100, 7)
    assert resolvent_identity_check(M + E, M, 0.1 + 0.2j) <= 1e-9


def test_resolvent_identity_diagonal_2x2():
    K = np.diag([1.0, -1.0])
    M = np.diag([0.5, 2.0])
    z = 1j
    # diagonal: 1/(k-z) - 1/(m-z) = (m-k)/((k-z)(m-z)) entrywise
    GK = np.diag(1 / (np.diag(K) - z))
    GM = np.diag(1 / (np.diag(M) - z))
    hand = np.diag((np.diag(M) - np.diag(K)) / ((np.diag(K) - z) * (np.diag(M) - z)))
    assert np.allclose(GK - GM, hand, atol=1e-16)
    assert resolvent_identity_check(K, M, z) < 1e-15


def test_lambda_floor_slack():
    cfg = EnsembleConfig.build(1000, 1.5, seed=5)
    floor = 0.1 * lambda_floor(1000, 1.5)
    hits = 0
    for k in range(50):
        pair = sample_pair(cfg, trial=k)
        st = lambda_event_stats(pair, 1 + 0.05j, rng=stream(5, k, "idx"))
        assert st["min_im_S"] >= 0.05 - 1e-12
        assert st["min_im_S_frak"] >= 0.05 - 1e-12
        assert st["min_im_S_minus_T"] >= 0.05 - 1e-12
        hits += min(st["min_im_S"], st["min_im_S_frak"], st["min_im_S_minus_T"]) >= floor
    assert hits >= 48


def test_lambda_monotone_in_eta(cfg200):
    pair = sample_pair(cfg200, trial=4)
    prev = None
    for eta in (0.01, 0.03, 0.1, 0.3, 1.0):
        st = lambda_event_stats(pair, SpectralPoint(1.0, eta), full=True)
        cur = np.array([st["min_im_S"], st["min_im_S_frak"], st["min_im_S_minus_T"]])
        if prev is not None:
            assert np.all(cur >= prev - 1e-12)
        prev = cur


def test_gamma_z_positive_and_vs_omega():
    z = 0.05 + 0.5j
    om = solve_omega(0.8, z)
    cfg = EnsembleConfig.build(1000, 0.8, seed=1)
    g, se = gamma_z_empirical(cfg, z, om.omega.theta_nodes, 10)
    assert np.all(g.values.real > 0)
    assert np.max(np.abs(g.values - om.omega.values)) <= 0.05


def test_gamma_z_exchangeable():
    cfg = EnsembleConfig.build(100, 1.2, seed=9)
    nodes = np.linspace(0.05, math.pi / 2 - 0.05, 6)
    g1, s1 = gamma_z_empirical(cfg, 0.5 + 0.3j, nodes, 300, indices=[0])
    g2, s2 = gamma_z_empirical(cfg, 0.5 + 0.3j, nodes, 300, indices=[50])
    assert np.all(np.abs(g1.values - g2.values) <= 3 * np.hypot(s1, s2))


def test_m_n_concentration():
    cfg = EnsembleConfig.build(500, 1.5, seed=21)
    z = 1 + 0.3j
    ms = []
    for k in range(100):
        lam = np.linalg.eigvalsh(sample_pair(cfg, trial=k).X)
        ms.append(np.mean(1 / (lam - z)))
    ms = np.array(ms)
    bound = 4 * math.log(500) / math.sqrt(500 * 0.3**2)
    assert np.sum(np.abs(ms - ms.mean()) > bound) <= 5
