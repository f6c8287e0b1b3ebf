"""Coefficient builders and closed-form auxiliary updates for the four
quadratic-transform subproblems (beamformer, RIS phases, power allocation
for sum rate, power allocation for energy efficiency).

Each SINR is rewritten as a ratio in one decision block with the others
frozen; the quadratic transform replaces the ratio by
2*Re{aux^* num} - |aux|^2 * den, exact at aux = num/den. The builders here
produce the frozen-coefficient structures the convex solvers consume, and
the aux updates return the closed-form optimizers.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelSet, cascade_matrix, residual_coeff
from .config import SystemConfig
from .metrics import later_power


class MinRateDegenerate(ValueError):
    """p_k - eta_k * P_after(k) <= 0 with eta_k > 0: the min-rate constraint
    cannot hold for any RIS phase vector; power allocation must be repaired."""


class ZeroGainChannel(ValueError):
    """|g_k f| = 0: user k is unreachable with the current beam/phases."""


@dataclass
class BeamformerCoeffs:
    """Per-user coefficients of the SINR as a function of f.

    gamma_k(f) = |a_k f|^2 / (sigma2 + f^H A_k f), with
    a_k = g_k*sqrt(p_k), A_k = g_k^H g_k * P_after(k) + Z_k * sum(p),
    Z_k = sigma_eps2*(||h_hat_k||^2 I + H_hat^H H_hat) + sigma_eps2^2*N*I,
    and B_k = a_k^H a_k - eta_k A_k carries the min-rate quadratic.
    """

    a: np.ndarray               # (K, M) rows g_k*sqrt(p_k)
    A: np.ndarray               # (K, M, M) Hermitian PSD
    Z: np.ndarray               # (K, M, M) Hermitian PSD
    B: np.ndarray               # (K, M, M) Hermitian, possibly indefinite
    sigma2: float
    eta: np.ndarray             # (K,)


@dataclass
class RisCoeffs:
    """Lifted-SDP data for the RIS phase subproblem.

    With psi~ = [psi; 1], the QT objective term of user k is
    psi~^H C_k psi~ - c_k and the min-rate cut is psi~^H D_k psi~ >= d_k.
    E holds the cascade matrices so aux updates can be recomputed.
    """

    E: np.ndarray               # (K, N, M)
    C: np.ndarray               # (K, N+1, N+1) Hermitian
    c: np.ndarray               # (K,)
    D: np.ndarray               # (K, N+1, N+1) Hermitian PSD
    d: np.ndarray               # (K,) thresholds; -inf disables the cut
    sigma2: float


@dataclass
class PaCoeffs:
    """Scalar SINR coefficients as a function of p.

    gamma_k(p) = p_k / (a_k + P_after(k) + b_k*sum(p)),
    a_k = sigma2/|g_k f|^2, b_k = r_k/|g_k f|^2 (per unit total power).
    later[k, i] is True when user i is decoded after user k.
    """

    a: np.ndarray               # (K,)
    b: np.ndarray               # (K,)
    eta: np.ndarray             # (K,)
    later: np.ndarray           # (K, K) bool
    P_s: float
    P_c: float


@dataclass
class AuxState:
    """Auxiliary variables: shared nu for the f/psi blocks, x for power,
    z for the outer energy-efficiency ratio."""

    nu: np.ndarray
    x: np.ndarray
    z: float = 0.0


def _hermitize(X: np.ndarray) -> np.ndarray:
    """Numerical symmetrization (X + X^H)/2 along the last two axes."""
    return 0.5 * (X + np.conj(np.swapaxes(X, -1, -2)))


def later_mask(order: np.ndarray) -> np.ndarray:
    """later[k, i] True iff user i is decoded after user k."""
    K = len(order)
    pos = np.empty(K, dtype=int)
    pos[order] = np.arange(K)
    return pos[None, :] > pos[:, None]


def qt_opt_aux(numerator: complex, denominator: float) -> complex:
    """Optimal scalar auxiliary num/den of 2*Re{aux^* num} - |aux|^2 * den."""
    if denominator <= 0:
        raise ValueError("quadratic-transform denominator must be > 0")
    return numerator / denominator


def build_beamformer_coeffs(chs: ChannelSet, psi: np.ndarray, p: np.ndarray,
                            order: np.ndarray, cfg: SystemConfig) -> BeamformerCoeffs:
    K, M = cfg.K, cfg.M
    p_after = later_power(p, order)
    p_tot = float(np.sum(p))
    se2 = cfg.sigma_eps2
    HH = chs.H_est.conj().T @ chs.H_est
    a = np.zeros((K, M), dtype=complex)
    A = np.zeros((K, M, M), dtype=complex)
    Z = np.zeros((K, M, M), dtype=complex)
    B = np.zeros((K, M, M), dtype=complex)
    eye = np.eye(M)
    for k in range(K):
        g = (chs.h_est[k].conj() * psi) @ chs.H_est
        a[k] = g * np.sqrt(p[k])
        hn2 = float(np.sum(np.abs(chs.h_est[k]) ** 2))
        Z[k] = se2 * hn2 * eye + se2 * HH + se2 ** 2 * cfg.N * eye
        A[k] = np.outer(g.conj(), g) * p_after[k] + Z[k] * p_tot
        B[k] = np.outer(a[k].conj(), a[k]) - cfg.eta[k] * A[k]
    return BeamformerCoeffs(a=a, A=_hermitize(A), Z=_hermitize(Z),
                            B=_hermitize(B), sigma2=cfg.sigma2, eta=cfg.eta)


def aux_update_f(coeffs: BeamformerCoeffs, f: np.ndarray) -> np.ndarray:
    """Closed-form y_k = a_k f / (sigma2 + f^H A_k f)."""
    y = np.zeros(len(coeffs.a), dtype=complex)
    for k in range(len(y)):
        den = coeffs.sigma2 + float(np.real(f.conj() @ coeffs.A[k] @ f))
        y[k] = qt_opt_aux(complex(coeffs.a[k] @ f), den)
    return y


def qt_sinr_f(coeffs: BeamformerCoeffs, f: np.ndarray, y: np.ndarray) -> np.ndarray:
    """QT surrogate 2Re{y_k^* a_k f} - |y_k|^2 (sigma2 + f^H A_k f)."""
    out = np.zeros(len(y))
    for k in range(len(y)):
        quad = coeffs.sigma2 + float(np.real(f.conj() @ coeffs.A[k] @ f))
        out[k] = 2.0 * np.real(np.conj(y[k]) * (coeffs.a[k] @ f)) - abs(y[k]) ** 2 * quad
    return out


@dataclass
class MinRateCuts:
    """Affine surrogate Re{grad_k^H f} >= rhs_k of the quadratic min-rate
    constraint, linearized at an expansion point f_o."""

    grad: np.ndarray            # (K, M) = 2 B_k f_o
    rhs: np.ndarray             # (K,) = f_o^H B_k f_o + eta_k sigma2


def sca_linearize_minrate(coeffs: BeamformerCoeffs, f_o: np.ndarray) -> MinRateCuts:
    K, M = coeffs.a.shape
    grad = np.zeros((K, M), dtype=complex)
    rhs = np.zeros(K)
    for k in range(K):
        Bf = coeffs.B[k] @ f_o
        grad[k] = 2.0 * Bf
        rhs[k] = float(np.real(f_o.conj() @ Bf)) + coeffs.eta[k] * coeffs.sigma2
    return MinRateCuts(grad=grad, rhs=rhs)


def build_ris_coeffs(chs: ChannelSet, f: np.ndarray, p: np.ndarray,
                     nu: np.ndarray, order: np.ndarray, cfg: SystemConfig,
                     enforce_min_rate: bool = True) -> RisCoeffs:
    """Assemble the lifted objective blocks C_k, c_k and min-rate blocks
    D_k, d_k. With enforce_min_rate=False every d_k is -inf (cut disabled).

    Raises MinRateDegenerate when a cut is requested but
    p_k - eta_k * P_after(k) <= 0 with eta_k > 0.
    """
    K, N = cfg.K, cfg.N
    p_after = later_power(p, order)
    p_tot = float(np.sum(p))
    r = residual_coeff(chs, f, cfg)
    C = np.zeros((K, N + 1, N + 1), dtype=complex)
    c = np.zeros(K)
    D = np.zeros((K, N + 1, N + 1), dtype=complex)
    d = np.full(K, -np.inf)
    for k in range(K):
        e = (cascade_matrix(chs, k) @ f).conj()     # E_k^* f^*, length N
        outer = np.outer(e, e.conj())
        C[k, :N, :N] = -abs(nu[k]) ** 2 * outer * p_after[k]
        C[k, :N, N] = nu[k] * e * np.sqrt(p[k])
        C[k, N, :N] = np.conj(C[k, :N, N])
        c[k] = abs(nu[k]) ** 2 * (cfg.sigma2 + r[k] * p_tot)
        D[k, :N, :N] = outer
        if enforce_min_rate:
            margin = p[k] - cfg.eta[k] * p_after[k]
            if cfg.eta[k] == 0.0:
                d[k] = 0.0
            elif margin <= 0:
                raise MinRateDegenerate(
                    f"user {k}: p_k - eta_k*P_after = {margin:.3e} <= 0")
            else:
                d[k] = cfg.eta[k] * (cfg.sigma2 + r[k] * p_tot) / margin
    return RisCoeffs(E=np.stack([cascade_matrix(chs, k) for k in range(K)]),
                     C=_hermitize(C), c=c, D=_hermitize(D), d=d,
                     sigma2=cfg.sigma2)


def aux_update_psi(chs: ChannelSet, f: np.ndarray, psi: np.ndarray,
                   p: np.ndarray, order: np.ndarray, cfg: SystemConfig) -> np.ndarray:
    """Closed-form nu_k; numerically identical to aux_update_f at the same
    design because f^H A_k f == |g_k f|^2 P_after(k) + r_k sum(p)."""
    K = cfg.K
    p_after = later_power(p, order)
    p_tot = float(np.sum(p))
    r = residual_coeff(chs, f, cfg)
    nu = np.zeros(K, dtype=complex)
    for k in range(K):
        gf = complex(psi @ (cascade_matrix(chs, k) @ f))
        den = cfg.sigma2 + abs(gf) ** 2 * p_after[k] + r[k] * p_tot
        nu[k] = qt_opt_aux(gf * np.sqrt(p[k]), den)
    return nu


def qt_sinr_psi(coeffs: RisCoeffs, psi: np.ndarray) -> np.ndarray:
    """Lifted QT surrogate psi~^H C_k psi~ - c_k for unit-modulus psi."""
    lifted = np.concatenate([psi, [1.0]])
    out = np.zeros(len(coeffs.c))
    for k in range(len(out)):
        out[k] = float(np.real(lifted.conj() @ coeffs.C[k] @ lifted)) - coeffs.c[k]
    return out


def build_pa_coeffs(chs: ChannelSet, f: np.ndarray, psi: np.ndarray,
                    order: np.ndarray, cfg: SystemConfig, P_c: float = 0.0) -> PaCoeffs:
    K = cfg.K
    r = residual_coeff(chs, f, cfg)
    g2 = np.zeros(K)
    for k in range(K):
        g2[k] = abs(complex(psi @ (cascade_matrix(chs, k) @ f))) ** 2
    if np.any(g2 == 0.0):
        dead = int(np.argmin(g2))
        raise ZeroGainChannel(f"user {dead} has zero effective gain")
    return PaCoeffs(a=cfg.sigma2 / g2, b=r / g2, eta=cfg.eta,
                    later=later_mask(order), P_s=cfg.P_s, P_c=P_c)


def pa_sinr(coeffs: PaCoeffs, p: np.ndarray) -> np.ndarray:
    """gamma_k(p) from the scalar coefficients; equals metrics.sinr."""
    p_after = coeffs.later @ p
    return p / (coeffs.a + p_after + coeffs.b * np.sum(p))


def aux_update_p(coeffs: PaCoeffs, p: np.ndarray, printed_form: bool = False) -> np.ndarray:
    """Closed-form x_k = sqrt(p_k) / (a_k + P_after(k) + b_k*sum(p)).

    printed_form=True drops the sum(p) factor on b_k; that variant does not
    satisfy the recovery identity and exists only for comparison.
    """
    p_after = coeffs.later @ p
    den = coeffs.a + p_after + (coeffs.b if printed_form else coeffs.b * np.sum(p))
    if np.any(den <= 0):
        raise ValueError("power-allocation QT denominator must be > 0")
    return np.sqrt(np.maximum(p, 0.0)) / den


def qt_sinr_p(coeffs: PaCoeffs, p: np.ndarray, x: np.ndarray) -> np.ndarray:
    """QT surrogate 2 x_k sqrt(p_k) - x_k^2 (a_k + P_after(k) + b_k sum(p))."""
    p_after = coeffs.later @ p
    return 2.0 * x * np.sqrt(np.maximum(p, 0.0)) - x ** 2 * (
        coeffs.a + p_after + coeffs.b * np.sum(p))


def aux_update_z(coeffs: PaCoeffs, p: np.ndarray, x: np.ndarray,
                 clamp: bool = False) -> float:
    """Closed-form z = sqrt(sum_k log2(1+qt_sinr)) / (sum(p) + P_c).

    With clamp=True each 1+qt_sinr term is floored at 1e-12 so mid-iteration
    dips of the surrogate keep the square root real; without it a negative
    bracketed sum raises.
    """
    terms = 1.0 + qt_sinr_p(coeffs, p, x)
    if clamp:
        terms = np.maximum(terms, 1e-12)
    if np.any(terms <= 0):
        raise ValueError("QT surrogate left the log domain; clamp or fix x")
    s = float(np.sum(np.log2(terms)))
    if not clamp and s < 0:
        raise ValueError("negative rate sum under the square root")
    s = max(s, 0.0)
    den = float(np.sum(p)) + coeffs.P_c
    if den <= 0:
        raise ValueError("total power must be > 0")
    return np.sqrt(s) / den


def ee_qt_objective(coeffs: PaCoeffs, p: np.ndarray, x: np.ndarray, z: float,
                    clamp: bool = True) -> float:
    """Outer EE surrogate 2 z sqrt(sum log2(1+qt_sinr)) - z^2 (sum(p)+P_c)."""
    terms = 1.0 + qt_sinr_p(coeffs, p, x)
    if clamp:
        terms = np.maximum(terms, 1e-12)
    s = max(float(np.sum(np.log2(terms))), 0.0)
    return 2.0 * z * np.sqrt(s) - z ** 2 * (float(np.sum(p)) + coeffs.P_c)
