import cmath

import numpy as np
import pytest

from risnoma import (ChannelSet, SystemConfig, effective_channel,
                     residual_coeff, sample_channels, steering_ula,
                     steering_upa)


def test_ula_zero_phase_case():
    # cos(pi/2) = 0: every element is 1/sqrt(M)
    v = steering_ula(np.pi / 2, 4)
    assert np.allclose(v, 0.5 * np.ones(4), atol=1e-15)


def test_ula_broadside():
    v = steering_ula(0.0, 2)
    assert np.allclose(v, np.array([1.0, -1.0]) / np.sqrt(2), atol=1e-15)


def test_ula_matches_independent_evaluation():
    # direct scalar evaluation of the defining formula, element by element
    theta, M = np.pi / 3, 8
    v = steering_ula(theta, M)
    expected = [cmath.exp(-1j * cmath.pi * i * cmath.cos(theta)) / cmath.sqrt(M)
                for i in range(M)]
    assert np.allclose(v, expected, atol=1e-14)
    assert abs(np.linalg.norm(v) - 1.0) < 1e-12
    assert abs(cmath.phase(v[1]) - (-np.pi * np.cos(np.pi / 3))) < 1e-12


@pytest.mark.parametrize("theta", np.linspace(-3.0, 3.0, 7))
def test_ula_unit_norm(theta):
    assert abs(np.linalg.norm(steering_ula(theta, 16)) - 1.0) < 1e-12


def test_upa_all_equal_case():
    v = steering_upa(np.pi / 2, np.pi / 2, 4, 2)
    assert np.allclose(v, np.ones(8) / np.sqrt(8), atol=1e-14)


def test_upa_degenerate_grid():
    assert np.allclose(steering_upa(0.7, -0.3, 1, 1), [1.0])


def test_upa_termwise_kron_oracle():
    theta, phi = np.pi / 4, 0.0
    v = steering_upa(theta, phi, 2, 2)
    ah = [1.0, cmath.exp(-1j * np.pi * np.cos(theta))]
    av = [1.0, cmath.exp(-1j * np.pi * np.cos(phi) * np.sin(theta))]
    expected = np.array([ah[i] * av[j] for i in range(2) for j in range(2)]) / 2.0
    assert np.allclose(v, expected, atol=1e-14)
    assert abs(np.linalg.norm(v) - 1.0) < 1e-12


def _cfg(**kw):
    base = dict(M=4, N_H=2, N_V=4, K=3, S1=3, S2=3, sigma2=1.0,
                sigma_eps2=0.0, P_s=10.0)
    base.update(kw)
    base.setdefault("R_th", (0.0,) * base["K"])
    return SystemConfig(**base)


def test_perfect_csi_means_identical_channels():
    chs = sample_channels(_cfg(), np.random.default_rng(0))
    assert np.array_equal(chs.H_est, chs.H_true)
    assert np.array_equal(chs.h_est, chs.h_true)


def test_estimate_differs_under_csi_error():
    chs = sample_channels(_cfg(sigma_eps2=0.1), np.random.default_rng(0))
    assert not np.allclose(chs.H_est, chs.H_true)


def test_sampling_reproducible_bitwise():
    a = sample_channels(_cfg(sigma_eps2=0.05), np.random.default_rng(123))
    b = sample_channels(_cfg(sigma_eps2=0.05), np.random.default_rng(123))
    for x, y in ((a.H_true, b.H_true), (a.h_true, b.h_true),
                 (a.H_est, b.H_est), (a.h_est, b.h_est)):
        assert np.array_equal(x, y)


def test_single_path_gives_rank_one_outer_product():
    # S1 = 1: H must be a scaled outer product of two constant-modulus
    # steering vectors, so rank 1 with flat singular-vector profiles.
    cfg = _cfg(S1=1)
    chs = sample_channels(cfg, np.random.default_rng(5))
    s = np.linalg.svd(chs.H_true, compute_uv=False)
    assert s[0] > 0 and np.all(s[1:] < 1e-12 * s[0])
    U, _, Vh = np.linalg.svd(chs.H_true)
    assert np.ptp(np.abs(U[:, 0])) < 1e-12      # |u_i| = 1/sqrt(N)
    assert np.ptp(np.abs(Vh[0])) < 1e-12        # |v_j| = 1/sqrt(M)
    # Frobenius norm = |alpha| sqrt(N): consistent with unit-variance gain
    assert np.linalg.norm(chs.H_true) == pytest.approx(s[0])


def test_mean_channel_energy_matches_sv_expectation():
    # E||H||_F^2 = N and E||h_k||^2 = N under the model scaling
    cfg = _cfg()
    rng = np.random.default_rng(7)
    nH = nh = 0.0
    draws = 10_000
    for _ in range(draws):
        chs = sample_channels(cfg, rng)
        nH += np.linalg.norm(chs.H_true) ** 2
        nh += np.linalg.norm(chs.h_true[0]) ** 2
    assert nH / draws == pytest.approx(cfg.N, rel=0.03)
    assert nh / draws == pytest.approx(cfg.N, rel=0.03)


def test_effective_channel_scalar_case():
    chs = ChannelSet(H_true=np.array([[2.0 + 1j]]), h_true=np.array([[1.0 - 1j]]),
                     H_est=np.array([[2.0 + 1j]]), h_est=np.array([[1.0 - 1j]]),
                     sigma_eps2=0.0)
    g = effective_channel(chs, np.ones(1), 0)
    assert np.allclose(g, np.conj(1.0 - 1j) * (2.0 + 1j))


def test_effective_channel_psi_form_identity():
    cfg = _cfg()
    chs = sample_channels(cfg, np.random.default_rng(3))
    rng = np.random.default_rng(4)
    psi = np.exp(1j * rng.uniform(0, 2 * np.pi, cfg.N))
    f = rng.standard_normal(cfg.M) + 1j * rng.standard_normal(cfg.M)
    for k in range(cfg.K):
        lhs = effective_channel(chs, psi, k) @ f
        cascade = (chs.h_est[k].conj()[:, None] * chs.H_est) @ f
        assert abs(lhs - cascade @ psi) < 1e-12 * max(1.0, abs(lhs))


def test_effective_channel_against_triple_loop():
    cfg = _cfg(M=4, N_H=2, N_V=4, K=2)
    chs = sample_channels(cfg, np.random.default_rng(11))
    psi = np.exp(1j * np.linspace(0.1, 5.0, cfg.N))
    for k in range(cfg.K):
        g = effective_channel(chs, psi, k)
        for m in range(cfg.M):
            acc = 0.0 + 0.0j
            for i in range(cfg.N):
                acc += np.conj(chs.h_est[k][i]) * psi[i] * chs.H_est[i, m]
            assert abs(g[m] - acc) < 1e-12 * max(1.0, abs(acc))


def test_effective_channel_index_error():
    chs = sample_channels(_cfg(), np.random.default_rng(0))
    with pytest.raises(IndexError):
        effective_channel(chs, np.ones(8), 3)


def test_residual_coeff_zero_without_error():
    cfg = _cfg()
    chs = sample_channels(cfg, np.random.default_rng(0))
    f = np.ones(cfg.M) / 2.0
    assert np.all(residual_coeff(chs, f, cfg) == 0.0)


def test_residual_coeff_isolated_quartic_term():
    cfg = _cfg(M=4, N_H=2, N_V=4, K=1, sigma_eps2=0.3, R_th=(0.0,))
    zero_H = np.zeros((cfg.N, cfg.M), dtype=complex)
    zero_h = np.zeros((cfg.K, cfg.N), dtype=complex)
    chs = ChannelSet(zero_H, zero_h, zero_H, zero_h, cfg.sigma_eps2)
    f = np.ones(cfg.M) / 2.0  # unit norm
    r = residual_coeff(chs, f, cfg)
    assert r[0] == pytest.approx(cfg.N * cfg.sigma_eps2 ** 2, rel=1e-12)


def test_residual_coeff_scales_quadratically_in_f():
    cfg = _cfg(sigma_eps2=0.2)
    chs = sample_channels(cfg, np.random.default_rng(1))
    f = np.random.default_rng(2).standard_normal(cfg.M) + 0j
    assert np.allclose(residual_coeff(chs, 2.0 * f, cfg),
                       4.0 * residual_coeff(chs, f, cfg), rtol=1e-12)


def test_residual_coeff_matches_monte_carlo_variance():
    # empirical E|v_k|^2 per unit total power over resampled error matrices
    cfg = _cfg(M=4, N_H=2, N_V=4, K=1, sigma_eps2=0.1, R_th=(0.0,))
    rng = np.random.default_rng(42)
    chs = sample_channels(cfg, rng)
    f = rng.standard_normal(cfg.M) + 1j * rng.standard_normal(cfg.M)
    f /= np.linalg.norm(f)
    psi = np.exp(1j * rng.uniform(0, 2 * np.pi, cfg.N))
    r = residual_coeff(chs, f, cfg)[0]

    S = 100_000
    se = np.sqrt(cfg.sigma_eps2 / 2)
    acc = 0.0
    batch = 10_000
    Hf = chs.H_est @ f
    hk = chs.h_est[0]
    for _ in range(S // batch):
        Lk = se * (rng.standard_normal((batch, cfg.N)) + 1j * rng.standard_normal((batch, cfg.N)))
        Lm = se * (rng.standard_normal((batch, cfg.N, cfg.M)) + 1j * rng.standard_normal((batch, cfg.N, cfg.M)))
        t1 = np.einsum("sn,n->s", Lk.conj(), psi * Hf)
        t2 = np.einsum("n,snm,m->s", hk.conj() * psi, Lm, f)
        t3 = np.einsum("sn,sn->s", Lk.conj(), psi * np.einsum("snm,m->sn", Lm, f))
        acc += float(np.sum(np.abs(t1 + t2 + t3) ** 2))
    assert acc / S == pytest.approx(r, rel=0.02)
