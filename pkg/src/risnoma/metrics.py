"""Ground-truth evaluation of SINR, rates, energy efficiency, feasibility.

Every algorithm and every test ultimately scores designs through this
module, so nothing here may depend on the optimization machinery.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelSet, Design, effective_channel, residual_coeff
from .config import SystemConfig

ANALOG_RIS = "analog_ris"
FULLY_DIGITAL = "fully_digital"


@dataclass
class RateReport:
    gamma: np.ndarray           # (K,) linear SINR
    rate: np.ndarray            # (K,) bits/s/Hz
    sum_rate: float
    ee: float                   # bits/s/Hz per W
    total_power: float          # sum(p) + P_c
    feasible: bool
    violations: list[tuple[str, float]]


def circuit_power(cfg: SystemConfig, architecture: str = ANALOG_RIS) -> float:
    """Static power draw of the transmitter architecture.

    analog_ris: P'_BS + P_RF + N*P_RIS (one RF chain plus the surface);
    fully_digital: P'_BS + M*P_RF (one chain per antenna, no surface).
    """
    if architecture == ANALOG_RIS:
        return cfg.P_BS_prime + cfg.P_RF + cfg.N * cfg.P_RIS
    if architecture == FULLY_DIGITAL:
        return cfg.P_BS_prime + cfg.M * cfg.P_RF
    raise ValueError(f"unknown architecture {architecture!r}")


def effective_gains(chs: ChannelSet, psi: np.ndarray, f: np.ndarray) -> np.ndarray:
    """|g_k f| for every user, shape (K,)."""
    K = chs.h_est.shape[0]
    return np.array([abs(effective_channel(chs, psi, k) @ f) for k in range(K)])


def decode_order(chs: ChannelSet, psi: np.ndarray, f: np.ndarray) -> np.ndarray:
    """SIC decode order: users sorted by |g_k f| ascending, stable ties."""
    return np.argsort(effective_gains(chs, psi, f), kind="stable")


def later_power(p: np.ndarray, order: np.ndarray) -> np.ndarray:
    """For each user, total power of users decoded after it."""
    K = len(p)
    out = np.zeros(K)
    tail = 0.0
    for pos in range(K - 1, -1, -1):
        out[order[pos]] = tail
        tail += p[order[pos]]
    return out


def sinr(design: Design, chs: ChannelSet, cfg: SystemConfig) -> np.ndarray:
    """Post-SIC SINR per user.

    gamma_k = |g_k f|^2 p_k / (sigma2 + |g_k f|^2 * P_after(k) + r_k * sum(p))
    where P_after(k) sums powers of users decoded after k.
    """
    g2 = effective_gains(chs, design.psi, design.f) ** 2
    r = residual_coeff(chs, design.f, cfg)
    p_after = later_power(design.p, design.order)
    p_tot = float(np.sum(design.p))
    den = cfg.sigma2 + g2 * p_after + r * p_tot
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(den > 0, g2 * design.p / den, np.inf)


def rate_report(design: Design, chs: ChannelSet, cfg: SystemConfig,
                tol: float = 1e-6) -> RateReport:
    gamma = sinr(design, chs, cfg)
    rate = np.log2(1.0 + gamma)
    sum_rate = float(np.sum(rate))
    total_power = float(np.sum(design.p)) + circuit_power(cfg, ANALOG_RIS)
    violations = check_feasibility(design, chs, cfg, tol)
    return RateReport(
        gamma=gamma,
        rate=rate,
        sum_rate=sum_rate,
        ee=sum_rate / total_power,
        total_power=total_power,
        feasible=not violations,
        violations=violations,
    )


def check_feasibility(design: Design, chs: ChannelSet, cfg: SystemConfig,
                      tol: float = 1e-6) -> list[tuple[str, float]]:
    """All constraint breaches beyond tol, each with its magnitude."""
    out: list[tuple[str, float]] = []
    mod_err = float(np.max(np.abs(np.abs(design.psi) - 1.0)))
    if mod_err > tol:
        out.append(("ris_unit_modulus", mod_err))
    norm_err = abs(float(np.vdot(design.f, design.f).real) - 1.0)
    if norm_err > tol:
        out.append(("beam_norm", norm_err))
    dps_err = float(np.max(np.abs(design.f))) - 2.0
    if dps_err > tol:
        out.append(("beam_dps_bound", dps_err))
    budget = float(np.sum(design.p)) - cfg.P_s
    if budget > tol:
        out.append(("power_budget", budget))
    neg = -float(np.min(design.p))
    if neg > tol:
        out.append(("power_nonneg", neg))
    gamma = sinr(design, chs, cfg)
    for k, (g, e) in enumerate(zip(gamma, cfg.eta)):
        if e - g > tol:
            out.append((f"min_rate_user{k}", float(e - g)))
    return out
