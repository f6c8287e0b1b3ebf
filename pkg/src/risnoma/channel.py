"""mmWave channel sampling and derived channel quantities.

Channels follow the extended Saleh-Valenzuela model: a sparse sum of
planar-wave paths with complex Gaussian gains and uniformly drawn
azimuth/elevation angles. Imperfect CSI is modeled by an additive
Gaussian error on every entry, so the optimizer only ever sees the
estimated matrices while rate evaluation can use either set.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import SystemConfig


@dataclass
class ChannelSet:
    """True and estimated channels for one realization.

    H_* has shape (N, M) (BS -> RIS); h_* has shape (K, N) with row k the
    RIS -> user-k vector. sigma_eps2 == 0 implies estimated == true.
    """

    H_true: np.ndarray
    h_true: np.ndarray
    H_est: np.ndarray
    h_est: np.ndarray
    sigma_eps2: float


@dataclass
class Design:
    """Decision variables: beamformer, RIS phases, powers, SIC order.

    order[pos] is the user decoded at position pos (ascending effective
    gain); interference at a user comes from users decoded after it.
    """

    f: np.ndarray               # (M,) complex, ||f|| = 1, |f_i| <= 2
    psi: np.ndarray             # (N,) complex, unit modulus
    p: np.ndarray               # (K,) nonneg, sum <= P_s
    order: np.ndarray           # permutation of 0..K-1

    def copy(self) -> "Design":
        return Design(self.f.copy(), self.psi.copy(), self.p.copy(), self.order.copy())


def steering_ula(theta: float, M: int) -> np.ndarray:
    """Unit-norm ULA steering vector, element i = exp(-j*pi*i*cos(theta))/sqrt(M)."""
    if M < 1:
        raise ValueError("M must be >= 1")
    i = np.arange(M)
    return np.exp(-1j * np.pi * i * np.cos(theta)) / np.sqrt(M)


def steering_upa(theta: float, phi: float, N_H: int, N_V: int) -> np.ndarray:
    """Unit-norm UPA steering vector as a Kronecker product.

    Horizontal factor phases step with cos(theta), vertical factor phases
    with cos(phi)*sin(theta); overall scale 1/sqrt(N_H*N_V).
    """
    if N_H < 1 or N_V < 1:
        raise ValueError("grid dimensions must be >= 1")
    ah = np.exp(-1j * np.pi * np.arange(N_H) * np.cos(theta))
    av = np.exp(-1j * np.pi * np.arange(N_V) * np.cos(phi) * np.sin(theta))
    return np.kron(ah, av) / np.sqrt(N_H * N_V)


def _cn(rng: np.random.Generator, shape, var: float = 1.0) -> np.ndarray:
    """iid complex Gaussian CN(0, var) draws."""
    return np.sqrt(var / 2.0) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def sample_channels(cfg: SystemConfig, rng: np.random.Generator) -> ChannelSet:
    """Draw one Saleh-Valenzuela realization plus its noisy estimate.

    H_true = sqrt(N/S1) * sum_j alpha_j a_N(theta_j^r, phi_j^r) a_M(theta_j^t)^H
    and analogously for each RIS-user vector with S2 paths. Gains are
    CN(0,1); all angles are U[-pi/2, pi/2]. The estimate is
    H_est = H_true - Lambda with Lambda entries iid CN(0, sigma_eps2).
    """
    N, M, K = cfg.N, cfg.M, cfg.K

    H = np.zeros((N, M), dtype=complex)
    gains = _cn(rng, cfg.S1)
    ang = rng.uniform(-np.pi / 2, np.pi / 2, size=(cfg.S1, 3))  # theta_t, theta_r, phi_r
    for j in range(cfg.S1):
        a_r = steering_upa(ang[j, 1], ang[j, 2], cfg.N_H, cfg.N_V)
        a_t = steering_ula(ang[j, 0], M)
        H += gains[j] * np.outer(a_r, a_t.conj())
    H *= np.sqrt(N / cfg.S1)

    h = np.zeros((K, N), dtype=complex)
    for k in range(K):
        gains_k = _cn(rng, cfg.S2)
        ang_k = rng.uniform(-np.pi / 2, np.pi / 2, size=(cfg.S2, 2))  # theta_t, phi_t
        for j in range(cfg.S2):
            h[k] += gains_k[j] * steering_upa(ang_k[j, 0], ang_k[j, 1], cfg.N_H, cfg.N_V)
        h[k] *= np.sqrt(N / cfg.S2)

    if cfg.sigma_eps2 > 0:
        H_est = H - _cn(rng, (N, M), cfg.sigma_eps2)
        h_est = h - _cn(rng, (K, N), cfg.sigma_eps2)
    else:
        H_est = H.copy()
        h_est = h.copy()
    return ChannelSet(H_true=H, h_true=h, H_est=H_est, h_est=h_est, sigma_eps2=cfg.sigma_eps2)


def effective_channel(chs: ChannelSet, psi: np.ndarray, k: int) -> np.ndarray:
    """Cascaded row vector g_k = h_hat_k^H diag(psi) H_hat, shape (M,)."""
    if not 0 <= k < chs.h_est.shape[0]:
        raise IndexError(f"user index {k} out of range")
    return (chs.h_est[k].conj() * psi) @ chs.H_est


def cascade_matrix(chs: ChannelSet, k: int) -> np.ndarray:
    """E_k = diag(h_hat_k^*) H_hat, the (N, M) cascade of user k.

    Satisfies g_k f = psi^T E_k f for any psi, f.
    """
    return chs.h_est[k].conj()[:, None] * chs.H_est


def residual_coeff(chs: ChannelSet, f: np.ndarray, cfg: SystemConfig) -> np.ndarray:
    """Per-unit-total-power CSI-error interference coefficient r_k, shape (K,).

    r_k = sigma_eps2*(||h_hat_k||^2 ||f||^2 + ||H_hat f||^2) + N*sigma_eps2^2*||f||^2.
    The total residual interference power is r_k * sum(p).
    """
    se2 = cfg.sigma_eps2
    if se2 == 0.0:
        return np.zeros(cfg.K)
    f2 = float(np.vdot(f, f).real)
    Hf2 = float(np.vdot(chs.H_est @ f, chs.H_est @ f).real)
    hn2 = np.sum(np.abs(chs.h_est) ** 2, axis=1)
    return se2 * (hn2 * f2 + Hf2) + cfg.N * se2 ** 2 * f2
