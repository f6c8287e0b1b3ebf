"""Fast internal consistency checks behind the `selftest` CLI command."""
from __future__ import annotations

import numpy as np


def run_selftest() -> int:
    from .algorithms import dps_decompose, initialize_design
    from .baselines import waterfill, wmse_oracle
    from .channel import Design, sample_channels, steering_ula, steering_upa
    from .config import SystemConfig
    from .metrics import decode_order, rate_report, sinr
    from .solvers import SolverSettings, solve_ris_sdp
    from .subproblems import (aux_update_f, aux_update_p, aux_update_psi,
                              build_beamformer_coeffs, build_pa_coeffs,
                              build_ris_coeffs, pa_sinr, qt_sinr_f, qt_sinr_p,
                              qt_sinr_psi)

    passed = failed = 0

    def check(name, ok, detail=""):
        nonlocal passed, failed
        if ok:
            passed += 1
            print(f"  PASS {name}")
        else:
            failed += 1
            print(f"  FAIL {name} {detail}")

    rng = np.random.default_rng(7)
    check("steering_ula unit norm",
          abs(np.linalg.norm(steering_ula(0.7, 8)) - 1) < 1e-12)
    check("steering_upa unit norm",
          abs(np.linalg.norm(steering_upa(0.7, 0.2, 4, 2)) - 1) < 1e-12)

    cfg = SystemConfig(M=4, N_H=2, N_V=4, K=3, sigma_eps2=0.05, P_s=100.0,
                       R_th=(0.0,) * 3)
    chs = sample_channels(cfg, rng)
    design = initialize_design(chs, cfg, rng)
    gamma = sinr(design, chs, cfg)

    nu = aux_update_psi(chs, design.f, design.psi, design.p, design.order, cfg)
    bc = build_beamformer_coeffs(chs, design.psi, design.p, design.order, cfg)
    y = aux_update_f(bc, design.f)
    check("shared auxiliary nu == y", np.allclose(nu, y, atol=1e-12))
    check("QT recovery (beam)", np.allclose(qt_sinr_f(bc, design.f, y), gamma, atol=1e-9))
    ris = build_ris_coeffs(chs, design.f, design.p, nu, design.order, cfg)
    check("QT recovery (RIS lifted)",
          np.allclose(qt_sinr_psi(ris, design.psi), gamma, atol=1e-9))
    pc = build_pa_coeffs(chs, design.f, design.psi, design.order, cfg)
    x = aux_update_p(pc, design.p)
    check("QT recovery (power)", np.allclose(qt_sinr_p(pc, design.p, x), gamma, atol=1e-9))
    check("PA coefficients match metrics", np.allclose(pa_sinr(pc, design.p), gamma,
                                                       atol=1e-9))

    st = wmse_oracle(design, chs, cfg)
    check("WMSE identity e_mmse*(1+gamma) == 1",
          np.allclose(st.e_mmse * (1 + gamma), 1.0, atol=1e-10))

    q = waterfill(np.array([4.0, 1.0, 0.25]), 10.0, 1.0)
    lv = q + 1.0 / np.array([4.0, 1.0, 0.25])
    active = q > 0
    check("water-filling level equality",
          np.ptp(lv[active]) < 1e-9 and abs(q.sum() - 10.0) < 1e-9)

    out = solve_ris_sdp(ris, SolverSettings())
    check("RIS SDP unit diagonal / PSD",
          out.ok and out.residuals["diag"] < 1e-7 and out.residuals["min_eig"] < 1e-7)

    rng_a = np.random.default_rng(3)
    rng_b = np.random.default_rng(3)
    ca = sample_channels(cfg, rng_a)
    cb = sample_channels(cfg, rng_b)
    check("channel sampling reproducible",
          np.array_equal(ca.H_true, cb.H_true) and np.array_equal(ca.h_est, cb.h_est))

    t1, t2 = dps_decompose(design.f)
    check("DPS reconstruction",
          np.allclose(np.exp(1j * t1) + np.exp(1j * t2), design.f, atol=1e-12))

    print(f"selftest: {passed} passed, {failed} failed")
    return 0 if failed == 0 else 1
