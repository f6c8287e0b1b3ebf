"""Acceptance criteria, one test per criterion.

Each test prints a `[ACCEPTANCE] ...` line with the measured quantities.
Trend criteria run Monte Carlo sweeps at desk scale; the shared SVD-WF
comparison sweep (criteria 5 and 6) is the long pole. Run with `-s` to see
the lines live.
"""
import time

import numpy as np
import pytest

from risnoma import (AoSettings, ExperimentConfig, SolverSettings,
                     SystemConfig, algorithm1_sum_rate, algorithm2_ee,
                     aux_update_f, aux_update_p, aux_update_psi,
                     brute_force_oracle, build_beamformer_coeffs,
                     build_pa_coeffs, build_ris_coeffs, check_feasibility,
                     decode_order, emit_csv, qt_sinr_f, qt_sinr_p,
                     qt_sinr_psi, rate_report, run_experiment,
                     sample_channels, sinr, solve_ris_sdp, waterfill,
                     wmse_oracle)
from risnoma.channel import Design


def _report(num, detail):
    print(f"\n[ACCEPTANCE] criterion {num}: PASS — {detail}")


def _random_feasible_design(cfg, chs, rng):
    f = rng.standard_normal(cfg.M) + 1j * rng.standard_normal(cfg.M)
    f /= np.linalg.norm(f)
    psi = np.exp(1j * rng.uniform(0, 2 * np.pi, cfg.N))
    w = rng.uniform(0.1, 1.0, cfg.K)
    p = cfg.P_s * w / np.sum(w)
    return Design(f=f, psi=psi, p=p, order=decode_order(chs, psi, f))


@pytest.fixture(scope="session")
def qt_designs():
    """100 random feasible designs at M=8, N=16, K=3, half with CSI error."""
    out = []
    rng = np.random.default_rng(20240)
    for i in range(100):
        se2 = 0.0 if i % 2 == 0 else 0.05
        cfg = SystemConfig(M=8, N_H=4, N_V=4, K=3, sigma_eps2=se2,
                           P_s=10.0, R_th=(0.0, 0.0, 0.0))
        chs = sample_channels(cfg, rng)
        out.append((cfg, chs, _random_feasible_design(cfg, chs, rng)))
    return out


def test_criterion_1_qt_identity_suite(qt_designs):
    t0 = time.perf_counter()
    worst = 0.0
    for cfg, chs, d in qt_designs:
        gamma = sinr(d, chs, cfg)
        bc = build_beamformer_coeffs(chs, d.psi, d.p, d.order, cfg)
        y = aux_update_f(bc, d.f)
        nu = aux_update_psi(chs, d.f, d.psi, d.p, d.order, cfg)
        ris = build_ris_coeffs(chs, d.f, d.p, nu, d.order, cfg,
                               enforce_min_rate=False)
        pc = build_pa_coeffs(chs, d.f, d.psi, d.order, cfg)
        x = aux_update_p(pc, d.p)
        for form in (qt_sinr_f(bc, d.f, y), qt_sinr_psi(ris, d.psi),
                     qt_sinr_p(pc, d.p, x)):
            err = float(np.max(np.abs(form - gamma)))
            worst = max(worst, err)
            assert err <= 1e-10 * max(1.0, float(np.max(np.abs(gamma))))
    elapsed = time.perf_counter() - t0
    assert elapsed < 10.0
    _report(1, f"QT identities on 100 designs, worst abs err {worst:.2e}, "
               f"{elapsed:.2f}s (< 10 s)")


def test_criterion_2_wmse_equivalence(qt_designs):
    t0 = time.perf_counter()
    worst = 0.0
    for cfg, chs, d in qt_designs:
        gamma = sinr(d, chs, cfg)
        st = wmse_oracle(d, chs, cfg)
        err = float(np.max(np.abs(st.e_mmse * (1.0 + gamma) - 1.0)))
        worst = max(worst, err)
        assert err <= 1e-10
    elapsed = time.perf_counter() - t0
    assert elapsed < 5.0
    _report(2, f"WMSE identity on 100 designs, worst |e*(1+g)-1| {worst:.2e}, "
               f"{elapsed:.2f}s (< 5 s)")


def test_criterion_3_ao_monotonicity():
    t0 = time.perf_counter()
    settings = AoSettings(max_outer=25, warmup_iters=4, outer_tol=1e-5,
                          solver=SolverSettings(abs_tol=1e-3, rel_tol=1e-3,
                                                max_iters=750))
    checked = 0
    for seed in range(20):
        cfg = SystemConfig(M=16, N_H=4, N_V=4, K=3, sigma_eps2=0.0,
                           P_s=10.0, R_th=(0.3,) * 3)
        chs = sample_channels(cfg, np.random.default_rng(1000 + seed))
        for fn in (algorithm1_sum_rate, algorithm2_ee):
            d, tr = fn(chs, cfg, settings, np.random.default_rng(seed))
            obj = np.array(tr.objective)
            acc = np.array(tr.accepted, dtype=bool)
            if np.any(acc):
                assert np.all(np.diff(obj[acc]) >= -1e-6)
                checked += int(np.sum(acc))
            assert check_feasibility(d, chs, cfg, tol=1e-6) == []
    elapsed = time.perf_counter() - t0
    assert elapsed < 600.0
    _report(3, f"20 seeds x 2 algorithms monotone on {checked} accepted "
               f"iterations, all designs feasible, {elapsed:.0f}s (< 600 s)")


def test_criterion_4_brute_force_near_optimality():
    t0 = time.perf_counter()
    settings = AoSettings(max_outer=20, warmup_iters=3)
    ratios = []
    for seed in range(10):
        cfg = SystemConfig(M=2, N_H=1, N_V=2, K=2, S1=2, S2=2,
                           sigma_eps2=0.0, P_s=10.0, R_th=(0.0, 0.0))
        chs = sample_channels(cfg, np.random.default_rng(3000 + seed))
        oracle = brute_force_oracle(chs, cfg)
        d, _ = algorithm1_sum_rate(chs, cfg, settings,
                                   np.random.default_rng(seed))
        got = rate_report(d, chs, cfg).sum_rate
        ratios.append(got / oracle["best_sum_rate"])
        assert got >= 0.95 * oracle["best_sum_rate"]
    elapsed = time.perf_counter() - t0
    assert elapsed < 900.0
    _report(4, f"AO/oracle ratio over 10 seeds: min {min(ratios):.3f} "
               f"(>= 0.95), {elapsed:.0f}s (< 900 s)")


@pytest.fixture(scope="session")
def svd_comparison_sweep():
    """Shared sweep for criteria 5 and 6: N=64, M=16, K=4, 25 trials."""
    exp = ExperimentConfig(
        snr_db=(-10.0, 0.0, 30.0), n_ris=(64,), k_users=(4,),
        sigma_eps2=(0.0,), trials=25, algorithms=("sr", "ee", "svd_wf"),
        master_seed=2024, m_antennas=16, max_outer=10, warmup_iters=3,
        outer_tol=1e-4, solver_tol=1e-3)
    t0 = time.perf_counter()
    records = run_experiment(exp, jobs=2)
    return records, time.perf_counter() - t0


def _mean(records, alg, snr, field):
    vals = [getattr(r, field) for r in records
            if r.algorithm == alg and r.snr_db == snr]
    assert vals and all(np.isfinite(v) for v in vals)
    return float(np.mean(vals))


def test_criterion_5_sum_rate_crossover(svd_comparison_sweep):
    records, elapsed = svd_comparison_sweep
    assert elapsed < 7200.0
    lines = []
    for snr in (-10.0, 0.0):
        ours = _mean(records, "sr", snr, "sum_rate")
        theirs = _mean(records, "svd_wf", snr, "sum_rate")
        assert ours > theirs
        lines.append(f"{snr:g} dB: {ours:.2f} > {theirs:.2f}")
    ours30 = _mean(records, "sr", 30.0, "sum_rate")
    theirs30 = _mean(records, "svd_wf", 30.0, "sum_rate")
    assert ours30 < theirs30
    lines.append(f"30 dB: {ours30:.2f} < {theirs30:.2f}")
    _report(5, "mean sum rate NOMA-analog vs SVD-WF — " + "; ".join(lines)
               + f"; sweep {elapsed:.0f}s (< 7200 s)")


def test_criterion_6_ee_dominance(svd_comparison_sweep):
    records, _ = svd_comparison_sweep
    lines = []
    for snr in (-10.0, 0.0, 30.0):
        ours = _mean(records, "ee", snr, "ee")
        theirs = _mean(records, "svd_wf", snr, "ee")
        assert ours > theirs
        lines.append(f"{snr:g} dB: {ours:.4f} > {theirs:.4f}")
    _report(6, "mean EE analog-RIS vs fully digital — " + "; ".join(lines))


def test_criterion_7_saturation_under_csi_error():
    exp = ExperimentConfig(
        snr_db=(25.0, 30.0), n_ris=(16,), k_users=(4,),
        sigma_eps2=(0.0, 0.05), trials=25, algorithms=("sr",),
        master_seed=777, m_antennas=16, max_outer=15, warmup_iters=4,
        outer_tol=1e-4, solver_tol=1e-3)
    records = run_experiment(exp, jobs=2)

    def mean_sr(se2, snr):
        vals = [r.sum_rate for r in records
                if r.sigma_eps2 == se2 and r.snr_db == snr]
        assert vals and all(np.isfinite(v) for v in vals)
        return float(np.mean(vals))

    icsi_gain = (mean_sr(0.05, 30.0) - mean_sr(0.05, 25.0)) / mean_sr(0.05, 25.0)
    pcsi_gain = (mean_sr(0.0, 30.0) - mean_sr(0.0, 25.0)) / mean_sr(0.0, 25.0)
    assert abs(icsi_gain) < 0.05
    assert pcsi_gain > 0.10
    _report(7, f"25->30 dB sum-rate gain: {icsi_gain*100:+.1f}% under CSI error "
               f"(|.| < 5%), {pcsi_gain*100:+.1f}% under perfect CSI (> 10%)")


def test_criterion_8_monotone_in_ris_size():
    exp = ExperimentConfig(
        snr_db=(10.0,), n_ris=(16, 32, 64), k_users=(4,), sigma_eps2=(0.0,),
        trials=25, algorithms=("sr", "ee"), master_seed=888, m_antennas=16,
        max_outer=10, warmup_iters=3, outer_tol=1e-4, solver_tol=1e-3)
    records = run_experiment(exp, jobs=2)

    def curve(alg, field):
        return [
            float(np.mean([getattr(r, field) for r in records
                           if r.algorithm == alg and r.n_ris == n]))
            for n in (16, 32, 64)
        ]

    sr_curve = curve("sr", "sum_rate")
    ee_curve = curve("ee", "ee")
    assert np.all(np.isfinite(sr_curve)) and np.all(np.isfinite(ee_curve))
    assert sr_curve[0] < sr_curve[1] < sr_curve[2]
    assert ee_curve[0] < ee_curve[1] < ee_curve[2]
    _report(8, f"sum rate {['%.2f' % v for v in sr_curve]} and "
               f"EE {['%.4f' % v for v in ee_curve]} strictly increase over "
               f"N in (16, 32, 64)")


def test_criterion_9_noma_beats_oma_paired():
    exp = ExperimentConfig(
        snr_db=(10.0,), n_ris=(16, 64), k_users=(4,), sigma_eps2=(0.0, 0.05),
        trials=50, algorithms=("sr", "oma"), master_seed=999, m_antennas=16,
        max_outer=10, warmup_iters=3, outer_tol=1e-4, solver_tol=1e-3)
    records = run_experiment(exp, jobs=2)
    lines = []
    for n in (16, 64):
        for se2 in (0.0, 0.05):
            noma = {r.trial: r.sum_rate for r in records
                    if r.algorithm == "sr" and r.n_ris == n and r.sigma_eps2 == se2}
            oma = {r.trial: r.sum_rate for r in records
                   if r.algorithm == "oma" and r.n_ris == n and r.sigma_eps2 == se2}
            assert len(noma) == 50 and len(oma) == 50
            wins = sum(1 for t in noma
                       if np.isfinite(noma[t]) and noma[t] >= oma[t] - 1e-9)
            frac = wins / 50.0
            assert frac >= 0.90
            lines.append(f"N={n},se2={se2:g}: {frac*100:.0f}%")
    _report(9, "paired NOMA >= OMA win rate — " + "; ".join(lines)
               + " (all >= 90%)")


def test_criterion_10_waterfill_kkt_and_sdp_feasibility():
    rng = np.random.default_rng(4040)
    # water-filling KKT on random instances
    for _ in range(50):
        gains = rng.uniform(0.05, 8.0, rng.integers(2, 6))
        P = float(rng.uniform(0.5, 20.0))
        q = waterfill(gains, P, 1.0)
        levels = q + 1.0 / gains
        active = q > 1e-12
        assert np.ptp(levels[active]) <= 1e-9
        assert abs(np.sum(q) - P) <= 1e-9
    # RIS SDP feasibility on 50 random subproblems at N=16
    settings = SolverSettings()
    worst_diag, worst_eig = 0.0, np.inf
    for seed in range(50):
        cfg = SystemConfig(M=8, N_H=4, N_V=4, K=3, sigma_eps2=0.05,
                           P_s=10.0, R_th=(0.0,) * 3)
        chs = sample_channels(cfg, np.random.default_rng(5000 + seed))
        d = _random_feasible_design(cfg, chs, np.random.default_rng(seed))
        nu = aux_update_psi(chs, d.f, d.psi, d.p, d.order, cfg)
        ris = build_ris_coeffs(chs, d.f, d.p, nu, d.order, cfg,
                               enforce_min_rate=False)
        out = solve_ris_sdp(ris, settings)
        assert out.ok
        Psi = out.solution
        diag_err = float(np.max(np.abs(np.real(np.diag(Psi)) - 1.0)))
        min_eig = float(np.linalg.eigvalsh(Psi)[0])
        worst_diag = max(worst_diag, diag_err)
        worst_eig = min(worst_eig, min_eig)
        assert diag_err <= 1e-7
        assert min_eig >= -1e-7
    _report(10, f"waterfill KKT to 1e-9 on 50 draws; SDP worst diag err "
                f"{worst_diag:.1e} (<= 1e-7), worst min-eig {worst_eig:.1e} "
                f"(>= -1e-7) on 50 subproblems")


def test_criterion_11_byte_determinism(tmp_path):
    exp = ExperimentConfig(
        snr_db=(0.0, 10.0), n_ris=(8,), k_users=(2,), sigma_eps2=(0.05,),
        trials=3, algorithms=("sr", "ee", "svd_wf", "oma"), master_seed=31,
        m_antennas=4, s1=2, s2=2, max_outer=8, warmup_iters=2,
        outer_tol=1e-4, solver_tol=1e-3)
    paths = [tmp_path / f"{name}.csv" for name in ("a", "b", "c")]
    emit_csv(run_experiment(exp, jobs=1), str(paths[0]))
    emit_csv(run_experiment(exp, jobs=1), str(paths[1]))
    emit_csv(run_experiment(exp, jobs=2), str(paths[2]))
    b0 = paths[0].read_bytes()
    assert b0 == paths[1].read_bytes()
    assert b0 == paths[2].read_bytes()
    _report(11, f"CSV byte-identical across reruns and jobs 1 vs 2 "
                f"({len(b0)} bytes)")
