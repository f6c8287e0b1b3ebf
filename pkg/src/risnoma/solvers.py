"""Convex solvers for the three canonical subproblem shapes.

The contract is a tolerance, a status, and a solution whose recomputed
objective matches the reported one; the mechanism is cvxpy with cached
parametrized problems (CLARABEL for the small exp-cone programs, SCS for
the lifted RIS SDP, which interior-point solvers cannot handle at N=64).

All solves run with warm_start=False: warm starting would make results
depend on the order solves happen inside a worker process and break
byte-level reproducibility of sweeps.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import cvxpy as cp
import numpy as np

from .subproblems import (BeamformerCoeffs, MinRateCuts, PaCoeffs, RisCoeffs,
                          ee_qt_objective, qt_sinr_f, qt_sinr_p)

OPTIMAL = "optimal"
INACCURATE = "inaccurate"
INFEASIBLE = "infeasible"
ITER_LIMIT = "iter_limit"

_LN2 = float(np.log(2.0))


@dataclass
class SolverSettings:
    abs_tol: float = 1e-6
    rel_tol: float = 1e-6
    max_iters: int = 5000
    feasibility_tol: float = 1e-7

    def __post_init__(self):
        if min(self.abs_tol, self.rel_tol, self.feasibility_tol) <= 0 or self.max_iters <= 0:
            raise ValueError("solver settings must be positive")


@dataclass
class SolveOutcome:
    status: str
    objective: float
    solution: Optional[np.ndarray]
    residuals: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status in (OPTIMAL, INACCURATE) and self.solution is not None


def _map_status(cvxpy_status: str) -> str:
    if cvxpy_status == cp.OPTIMAL:
        return OPTIMAL
    if cvxpy_status == cp.OPTIMAL_INACCURATE:
        return INACCURATE
    if cvxpy_status in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE):
        return INFEASIBLE
    return ITER_LIMIT


def _psd_factor(A: np.ndarray) -> np.ndarray:
    """L with L^H L = A for Hermitian PSD A (eigenvalues clipped at 0)."""
    lam, U = np.linalg.eigh(A)
    lam = np.maximum(lam, 0.0)
    return (np.sqrt(lam)[:, None] * U.conj().T)


# ---------------------------------------------------------------------------
# cached parametrized problems, one per shape per process
# ---------------------------------------------------------------------------

_BEAM_CACHE: dict = {}
_SDP_CACHE: dict = {}
_PA_CACHE: dict = {}
_EE_CACHE: dict = {}
_MINPOW_CACHE: dict = {}


def _beam_problem(M: int, K: int) -> dict:
    key = (M, K)
    if key not in _BEAM_CACHE:
        f = cp.Variable(M, complex=True)
        q = cp.Variable(K)
        w = [cp.Parameter(M, complex=True) for _ in range(K)]
        s = cp.Parameter(K)
        t = cp.Parameter(K, nonneg=True)
        L = [cp.Parameter((M, M), complex=True) for _ in range(K)]
        cg = [cp.Parameter(M, complex=True) for _ in range(K)]
        cr = cp.Parameter(K)
        lins = cp.hstack([2 * cp.real(cp.sum(cp.multiply(w[k], f))) for k in range(K)])
        cons = [cp.sum_squares(f) <= 1, cp.abs(f) <= 2]
        # sum_squares of a complex expr inside log breaks cvxpy
        # canonicalization; epigraph variables keep the logs affine.
        cons += [q[k] >= cp.sum_squares(cp.hstack([cp.real(L[k] @ f), cp.imag(L[k] @ f)]))
                 for k in range(K)]
        cons += [cp.real(cp.sum(cp.multiply(cp.conj(cg[k]), f))) >= cr[k] for k in range(K)]
        obj = cp.Maximize(cp.sum(cp.log(t + lins - s - q)))
        _BEAM_CACHE[key] = dict(prob=cp.Problem(obj, cons), f=f, w=w, s=s, t=t,
                                L=L, cg=cg, cr=cr)
    return _BEAM_CACHE[key]


def _sdp_problem(N: int, K: int) -> dict:
    key = (N, K)
    if key not in _SDP_CACHE:
        n = N + 1
        Psi = cp.Variable((n, n), hermitian=True)
        C = [cp.Parameter((n, n), hermitian=True) for _ in range(K)]
        b = cp.Parameter(K)
        D = [cp.Parameter((n, n), hermitian=True) for _ in range(K)]
        d = cp.Parameter(K)
        cons = [Psi >> 0, cp.diag(Psi) == 1]
        cons += [cp.real(cp.trace(Psi @ D[k])) >= d[k] for k in range(K)]
        obj = cp.Maximize(cp.sum(cp.hstack(
            [cp.log(b[k] + cp.real(cp.trace(Psi @ C[k]))) for k in range(K)])))
        _SDP_CACHE[key] = dict(prob=cp.Problem(obj, cons), Psi=Psi, C=C, b=b, D=D, d=d)
    return _SDP_CACHE[key]


def _pa_problem(K: int) -> dict:
    if K not in _PA_CACHE:
        p = cp.Variable(K, nonneg=True)
        u = cp.Parameter(K, nonneg=True)
        t = cp.Parameter(K, nonneg=True)
        off = cp.Parameter(K)
        Q = cp.Parameter((K, K), nonneg=True)
        G = cp.Parameter((K, K))
        g = cp.Parameter(K)
        Ps = cp.Parameter(nonneg=True)
        cons = [cp.sum(p) <= Ps, G @ p <= g]
        obj = cp.Maximize(cp.sum(cp.log(t + cp.multiply(u, cp.sqrt(p)) - off - Q @ p)))
        _PA_CACHE[K] = dict(prob=cp.Problem(obj, cons), p=p, u=u, t=t, off=off,
                            Q=Q, G=G, g=g, Ps=Ps)
    return _PA_CACHE[K]


def _ee_problem(K: int) -> dict:
    if K not in _EE_CACHE:
        p = cp.Variable(K, nonneg=True)
        tau = cp.Variable()
        u = cp.Parameter(K, nonneg=True)
        off = cp.Parameter(K)
        Q = cp.Parameter((K, K), nonneg=True)
        G = cp.Parameter((K, K))
        g = cp.Parameter(K)
        Ps = cp.Parameter(nonneg=True)
        v = cp.Parameter(nonneg=True)      # 2z
        w2 = cp.Parameter(nonneg=True)     # z^2
        rate_sum = cp.sum(cp.log(1 + cp.multiply(u, cp.sqrt(p)) - off - Q @ p)) / _LN2
        cons = [cp.sum(p) <= Ps, G @ p <= g, tau <= cp.sqrt(rate_sum)]
        obj = cp.Maximize(v * tau - w2 * cp.sum(p))
        _EE_CACHE[K] = dict(prob=cp.Problem(obj, cons), p=p, tau=tau, u=u,
                            off=off, Q=Q, G=G, g=g, Ps=Ps, v=v, w2=w2)
    return _EE_CACHE[K]


def _minpow_problem(K: int) -> dict:
    if K not in _MINPOW_CACHE:
        p = cp.Variable(K, nonneg=True)
        G = cp.Parameter((K, K))
        g = cp.Parameter(K)
        Ps = cp.Parameter(nonneg=True)
        prob = cp.Problem(cp.Minimize(cp.sum(p)), [cp.sum(p) <= Ps, G @ p <= g])
        _MINPOW_CACHE[K] = dict(prob=prob, p=p, G=G, g=g, Ps=Ps)
    return _MINPOW_CACHE[K]


def _pa_cut_data(coeffs: PaCoeffs, enforce: bool) -> tuple[np.ndarray, np.ndarray]:
    """Linear min-rate cuts G p <= g; trivial when not enforced.

    eta_k*P_after(k) - p_k + eta_k*(a_k + b_k*sum(p)) <= 0.
    """
    K = len(coeffs.a)
    if not enforce or np.all(coeffs.eta == 0):
        return np.zeros((K, K)), np.ones(K)
    G = coeffs.eta[:, None] * (coeffs.later.astype(float) + coeffs.b[:, None])
    G -= np.eye(K)
    g = -coeffs.eta * coeffs.a
    return G, g


def _solve(prob: cp.Problem, solver: str, settings: SolverSettings) -> str:
    # statuses are inspected programmatically; cvxpy's inaccuracy warning is noise
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            warnings.simplefilter("ignore", RuntimeWarning)
            if solver == "SCS":
                prob.solve(solver=cp.SCS, warm_start=False, eps_abs=settings.abs_tol,
                           eps_rel=settings.rel_tol, max_iters=settings.max_iters,
                           verbose=False)
            else:
                prob.solve(solver=cp.CLARABEL, warm_start=False,
                           max_iter=settings.max_iters, verbose=False)
    except cp.error.SolverError:
        return ITER_LIMIT
    return _map_status(prob.status)


# ---------------------------------------------------------------------------
# beamformer subproblem
# ---------------------------------------------------------------------------

def solve_beamformer(coeffs: BeamformerCoeffs, y: np.ndarray,
                     cuts: Optional[MinRateCuts], settings: SolverSettings,
                     f_o: Optional[np.ndarray] = None) -> SolveOutcome:
    """Maximize sum_k log2(1 + QT-SINR_k(f, y)) over the relaxed unit ball
    with DPS bounds and linearized min-rate cuts.

    The norm equality is relaxed to ||f|| <= 1; an interior optimum is
    rescaled to the sphere only when every cut survives the rescale. When
    f_o is supplied the returned objective never falls below the objective
    at f_o by more than abs_tol (fallback to f_o otherwise).
    """
    K, M = coeffs.a.shape
    box = _beam_problem(M, K)
    w_val = [np.conj(y[k]) * coeffs.a[k] for k in range(K)]
    scale = np.ones(K)
    if f_o is not None:
        arg0 = 1.0 + qt_sinr_f(coeffs, f_o, y)
        scale = 1.0 / np.maximum(1.0, arg0)
        scale[arg0 <= 0] = 1.0
    for k in range(K):
        box["w"][k].value = scale[k] * w_val[k]
        box["L"][k].value = np.sqrt(scale[k]) * abs(y[k]) * _psd_factor(coeffs.A[k])
        if cuts is None:
            box["cg"][k].value = np.zeros(M, dtype=complex)
        else:
            box["cg"][k].value = cuts.grad[k]
    box["s"].value = scale * (np.abs(y) ** 2 * coeffs.sigma2)
    box["t"].value = scale
    box["cr"].value = np.full(K, -1.0) if cuts is None else cuts.rhs.astype(float)

    status = _solve(box["prob"], "CLARABEL", settings)
    if status == INFEASIBLE or box["f"].value is None:
        return SolveOutcome(status=INFEASIBLE if status == INFEASIBLE else ITER_LIMIT,
                            objective=-np.inf, solution=None)

    f = np.asarray(box["f"].value, dtype=complex)
    norm = float(np.linalg.norm(f))
    residuals: dict = {}
    if norm > 0 and norm < 1.0 - settings.feasibility_tol:
        f_resc = f / norm
        if cuts is None or np.all(
                np.real(np.sum(np.conj(cuts.grad) * f_resc, axis=1))
                >= cuts.rhs - settings.feasibility_tol):
            f = f_resc
        else:
            residuals["interior_norm"] = 1.0 - norm
    elif norm > 1.0:
        f = f / norm

    def qt_obj(fv):
        return float(np.sum(np.log2(np.maximum(1.0 + qt_sinr_f(coeffs, fv, y), 1e-300))))

    obj = qt_obj(f)
    if f_o is not None and obj < qt_obj(f_o) - settings.abs_tol:
        f, obj = f_o.copy(), qt_obj(f_o)
        residuals["ascent_fallback"] = 1.0
        status = INACCURATE if status == OPTIMAL else status

    if cuts is not None:
        cut_res = float(np.max(cuts.rhs - np.real(np.sum(np.conj(cuts.grad) * f, axis=1))))
        residuals["min_rate_cut"] = max(cut_res, 0.0)
        if residuals["min_rate_cut"] > settings.feasibility_tol * 10 and status == OPTIMAL:
            status = INACCURATE
    residuals["norm"] = abs(float(np.linalg.norm(f)) - 1.0)
    return SolveOutcome(status=status, objective=obj, solution=f, residuals=residuals)


# ---------------------------------------------------------------------------
# RIS phase-shift SDP
# ---------------------------------------------------------------------------

def solve_ris_sdp(coeffs: RisCoeffs, settings: SolverSettings) -> SolveOutcome:
    """Maximize sum_k log2(1 - c_k + Re tr(Psi C_k)) over PSD Psi with unit
    diagonal and the lifted min-rate trace cuts (d_k = -inf disables one).

    The returned matrix is cleaned by PSD projection plus diagonal
    renormalization, so its unit diagonal and eigenvalue floor hold to
    roundoff; trace-cut residuals are re-verified afterwards.
    """
    K = len(coeffs.c)
    N = coeffs.C.shape[1] - 1
    box = _sdp_problem(N, K)
    enabled = np.isfinite(coeffs.d)
    # log(s*x) = log s + log x: per-user scales fix the 1e9 coefficient
    # spread at high SNR without moving the argmax.
    scale = 1.0 / np.maximum(1.0, 1.0 + coeffs.c)
    for k in range(K):
        box["C"][k].value = scale[k] * coeffs.C[k]
        box["D"][k].value = coeffs.D[k]
    box["b"].value = scale * (1.0 - coeffs.c)
    box["d"].value = np.where(enabled, coeffs.d, -1.0)

    status = _solve(box["prob"], "SCS", settings)
    if box["Psi"].value is None or status == INFEASIBLE:
        return SolveOutcome(status=INFEASIBLE if status == INFEASIBLE else ITER_LIMIT,
                            objective=-np.inf, solution=None)

    Psi = np.asarray(box["Psi"].value)
    Psi = 0.5 * (Psi + Psi.conj().T)
    lam, U = np.linalg.eigh(Psi)
    Psi = (U * np.maximum(lam, 0.0)) @ U.conj().T
    diag = np.maximum(np.real(np.diag(Psi)), 1e-12)
    scale_d = 1.0 / np.sqrt(diag)
    Psi = scale_d[:, None] * Psi * scale_d[None, :]
    Psi = 0.5 * (Psi + Psi.conj().T)
    np.fill_diagonal(Psi, 1.0)

    args = 1.0 - coeffs.c + np.real(
        np.einsum("ij,kji->k", Psi, coeffs.C))
    residuals = {
        "diag": float(np.max(np.abs(np.real(np.diag(Psi)) - 1.0))),
        "min_eig": max(0.0, -float(np.linalg.eigvalsh(Psi)[0])),
        "log_domain": max(0.0, -float(np.min(args))),
    }
    if np.any(enabled):
        tr_d = np.real(np.einsum("ij,kji->k", Psi, coeffs.D))
        gap = (coeffs.d - tr_d)[enabled]
        residuals["trace_cut"] = float(np.max(np.maximum(gap, 0.0)))
        if residuals["trace_cut"] > settings.feasibility_tol * np.maximum(
                1.0, np.max(np.abs(coeffs.d[enabled]))) and status == OPTIMAL:
            status = INACCURATE
    obj = float(np.sum(np.log2(np.maximum(args, 1e-300))))
    return SolveOutcome(status=status, objective=obj, solution=Psi, residuals=residuals)


# ---------------------------------------------------------------------------
# power allocation
# ---------------------------------------------------------------------------

def _min_power_point(coeffs: PaCoeffs, enforce_cuts: bool,
                     settings: SolverSettings) -> SolveOutcome:
    """Deterministic tie-break for degenerate objectives: min sum(p)."""
    K = len(coeffs.a)
    G, g = _pa_cut_data(coeffs, enforce_cuts)
    if not enforce_cuts or np.all(coeffs.eta == 0):
        return SolveOutcome(status=OPTIMAL, objective=0.0, solution=np.zeros(K))
    box = _minpow_problem(K)
    box["G"].value = G
    box["g"].value = g
    box["Ps"].value = coeffs.P_s
    status = _solve(box["prob"], "CLARABEL", settings)
    if status == INFEASIBLE or box["p"].value is None:
        return SolveOutcome(status=INFEASIBLE, objective=-np.inf, solution=None)
    p = np.maximum(np.asarray(box["p"].value, dtype=float), 0.0)
    return SolveOutcome(status=status, objective=0.0, solution=p)


def _pa_common_values(box: dict, coeffs: PaCoeffs, x: np.ndarray,
                      enforce_cuts: bool, scale: np.ndarray) -> None:
    K = len(coeffs.a)
    later = coeffs.later.astype(float)
    Q = (x ** 2)[:, None] * (later + coeffs.b[:, None]) * scale[:, None]
    G, g = _pa_cut_data(coeffs, enforce_cuts)
    box["u"].value = scale * 2.0 * x
    box["off"].value = scale * (x ** 2) * coeffs.a
    box["Q"].value = np.maximum(Q, 0.0)
    box["G"].value = G
    box["g"].value = g
    box["Ps"].value = coeffs.P_s


def _clean_power(p: np.ndarray, P_s: float) -> np.ndarray:
    p = np.maximum(np.asarray(p, dtype=float), 0.0)
    total = float(np.sum(p))
    if total > P_s:
        p *= P_s / total
    return p


def solve_pa_sr(coeffs: PaCoeffs, x: np.ndarray, settings: SolverSettings,
                enforce_cuts: bool = True,
                p0: Optional[np.ndarray] = None) -> SolveOutcome:
    """Maximize sum_k log2(1 + QT-SINR_k(p, x)) over the power simplex with
    the linear min-rate cuts. A zero auxiliary makes the objective constant;
    the minimum-power feasible point is returned then."""
    K = len(coeffs.a)
    if np.all(x == 0.0):
        return _min_power_point(coeffs, enforce_cuts, settings)
    box = _pa_problem(K)
    scale = np.ones(K)
    if p0 is not None:
        arg0 = 1.0 + qt_sinr_p(coeffs, p0, x)
        good = arg0 > 0
        scale[good] = 1.0 / np.maximum(1.0, arg0[good])
    _pa_common_values(box, coeffs, x, enforce_cuts, scale)
    box["t"].value = scale
    status = _solve(box["prob"], "CLARABEL", settings)
    if status == INFEASIBLE or box["p"].value is None:
        return SolveOutcome(status=INFEASIBLE if status == INFEASIBLE else ITER_LIMIT,
                            objective=-np.inf, solution=None)
    p = _clean_power(box["p"].value, coeffs.P_s)
    obj = float(np.sum(np.log2(np.maximum(1.0 + qt_sinr_p(coeffs, p, x), 1e-300))))
    G, g = _pa_cut_data(coeffs, enforce_cuts)
    residuals = {"min_rate_cut": max(0.0, float(np.max(G @ p - g)))}
    return SolveOutcome(status=status, objective=obj, solution=p, residuals=residuals)


def solve_pa_ee(coeffs: PaCoeffs, x: np.ndarray, z: float,
                settings: SolverSettings, enforce_cuts: bool = True,
                p0: Optional[np.ndarray] = None) -> SolveOutcome:
    """Maximize 2 z sqrt(sum_k log2(1+QT-SINR_k)) - z^2 (sum(p)+P_c) over the
    same feasible set as solve_pa_sr."""
    K = len(coeffs.a)
    if z == 0.0 or np.all(x == 0.0):
        out = _min_power_point(coeffs, enforce_cuts, settings)
        if out.solution is not None:
            out.objective = ee_qt_objective(coeffs, out.solution, x, z)
        return out
    box = _ee_problem(K)
    _pa_common_values(box, coeffs, x, enforce_cuts, np.ones(K))
    box["v"].value = 2.0 * z
    box["w2"].value = z ** 2
    status = _solve(box["prob"], "CLARABEL", settings)
    if status == INFEASIBLE or box["p"].value is None:
        return SolveOutcome(status=INFEASIBLE if status == INFEASIBLE else ITER_LIMIT,
                            objective=-np.inf, solution=None)
    p = _clean_power(box["p"].value, coeffs.P_s)
    obj = ee_qt_objective(coeffs, p, x, z)
    G, g = _pa_cut_data(coeffs, enforce_cuts)
    residuals = {"min_rate_cut": max(0.0, float(np.max(G @ p - g)))}
    return SolveOutcome(status=status, objective=obj, solution=p, residuals=residuals)
