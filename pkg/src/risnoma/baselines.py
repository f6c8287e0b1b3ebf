"""Reference schemes: the WMSE oracle that independently cross-checks the
QT machinery, the fully digital SVD + water-filling benchmark, and the
orthogonal (TDMA) multiple-access baseline.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelSet, Design, cascade_matrix, residual_coeff
from .config import SystemConfig
from .metrics import ANALOG_RIS, FULLY_DIGITAL, circuit_power, later_power


@dataclass
class WmseState:
    """Per-user MSE receivers, weights and (M)MSE values.

    Invariants: e_mmse_k = 1/(1+gamma_k) and w_k * e_mmse_k = 1.
    """

    u: np.ndarray          # (K,) complex MMSE receivers
    w: np.ndarray          # (K,) positive weights 1/e_mmse
    e: np.ndarray          # (K,) MSE evaluated at u (quadratic form)
    e_mmse: np.ndarray     # (K,) MMSE via the rational closed form


def wmse_oracle(design: Design, chs: ChannelSet, cfg: SystemConfig) -> WmseState:
    """Evaluate the weighted-MSE quantities for a fixed design.

    The MSE of user k under receiver u is
    e = 1 + sigma2|u|^2 - 2Re{u g_k f sqrt(p_k)} + sum_{i decoded at/after k}
    |u g_k f|^2 p_i + |u|^2 r_k sum(p); the optimal receiver gives the MMSE,
    which must equal 1/(1+gamma_k). Both routes are returned so tests can
    compare them.
    """
    K = cfg.K
    p = design.p
    p_tot = float(np.sum(p))
    r = residual_coeff(chs, design.f, cfg)
    p_after = later_power(p, design.order)
    u = np.zeros(K, dtype=complex)
    w = np.zeros(K)
    e = np.zeros(K)
    e_mmse = np.zeros(K)
    for k in range(K):
        gf = complex(design.psi @ (cascade_matrix(chs, k) @ design.f))
        g2 = abs(gf) ** 2
        # own-signal power counts in the MMSE denominator (i decoded at or after k)
        den = cfg.sigma2 + g2 * (p[k] + p_after[k]) + r[k] * p_tot
        u[k] = np.conj(gf) * np.sqrt(p[k]) / den
        e[k] = (1.0 + cfg.sigma2 * abs(u[k]) ** 2
                - 2.0 * np.real(u[k] * gf * np.sqrt(p[k]))
                + abs(u[k]) ** 2 * g2 * (p[k] + p_after[k])
                + abs(u[k]) ** 2 * r[k] * p_tot)
        e_mmse[k] = 1.0 - g2 * p[k] / den
        w[k] = 1.0 / e_mmse[k]
    return WmseState(u=u, w=w, e=e, e_mmse=e_mmse)


def waterfill(gains: np.ndarray, P: float, sigma2: float) -> np.ndarray:
    """Water-filling over parallel streams with squared singular values.

    q_i = max(0, mu - sigma2/gains_i), mu found by bisection so sum(q) = P.
    """
    gains = np.asarray(gains, dtype=float)
    if P <= 0:
        raise ValueError("power budget must be > 0")
    if np.all(gains <= 0):
        raise ValueError("at least one stream gain must be positive")
    floors = np.where(gains > 0, sigma2 / np.maximum(gains, 1e-300), np.inf)
    lo = float(np.min(floors))
    hi = lo + P
    for _ in range(200):
        mu = 0.5 * (lo + hi)
        tot = float(np.sum(np.maximum(0.0, mu - floors)))
        if tot > P:
            hi = mu
        else:
            lo = mu
    mu = 0.5 * (lo + hi)
    q = np.maximum(0.0, mu - floors)
    s = float(np.sum(q))
    if s > 0:
        q *= P / s
    return q


def _one_shot_ris_alignment(chs: ChannelSet, cfg: SystemConfig) -> np.ndarray:
    """Baseline RIS configuration: phases of the principal eigenvector of
    the summed cascade Gram matrix sum_k E_k E_k^H."""
    S = np.zeros((cfg.N, cfg.N), dtype=complex)
    for k in range(cfg.K):
        E = cascade_matrix(chs, k)
        S += E @ E.conj().T
    _, U = np.linalg.eigh(0.5 * (S + S.conj().T))
    return np.exp(1j * np.angle(U[:, -1]))


def svd_wf_baseline(chs: ChannelSet, cfg: SystemConfig) -> dict:
    """Fully digital benchmark: stack the effective per-user rows for a
    one-shot aligned RIS, then SVD precoding with water-filled powers.

    Returns sum rate (capacity of the parallel streams) and EE under the
    fully digital circuit-power model.
    """
    psi = _one_shot_ris_alignment(chs, cfg)
    G = np.stack([psi @ cascade_matrix(chs, k) for k in range(cfg.K)])
    sv = np.linalg.svd(G, compute_uv=False)
    lam2 = sv[: min(cfg.K, cfg.M)] ** 2
    q = waterfill(lam2, cfg.P_s, cfg.sigma2)
    sum_rate = float(np.sum(np.log2(1.0 + lam2 * q / cfg.sigma2)))
    total_power = cfg.P_s + circuit_power(cfg, FULLY_DIGITAL)
    return {"sum_rate": sum_rate, "ee": sum_rate / total_power}


def oma_tdma_baseline(chs: ChannelSet, cfg: SystemConfig) -> dict:
    """Orthogonal baseline: equal time shares, one user per slot at full
    power with a per-user aligned RIS and matched-filter beam.

    Slot construction starts from the dominant right singular vector of the
    estimated BS-RIS channel, aligns the phases to the slot's user, then
    matches the beam to the resulting cascade row.
    """
    _, _, Vh = np.linalg.svd(chs.H_est)
    f0 = Vh[0].conj()
    f0 = f0 / np.linalg.norm(f0)
    K = cfg.K
    rates = np.zeros(K)
    for k in range(K):
        E = cascade_matrix(chs, k)
        psi_k = np.exp(-1j * np.angle(E @ f0))
        g = psi_k @ E
        gn = np.linalg.norm(g)
        f_k = g.conj() / gn if gn > 0 else f0
        r_k = residual_coeff(chs, f_k, cfg)[k]
        g2 = abs(g @ f_k) ** 2
        gamma = g2 * cfg.P_s / (cfg.sigma2 + r_k * cfg.P_s)
        rates[k] = np.log2(1.0 + gamma) / K
    sum_rate = float(np.sum(rates))
    total_power = cfg.P_s + circuit_power(cfg, ANALOG_RIS)
    return {"sum_rate": sum_rate, "ee": sum_rate / total_power}
