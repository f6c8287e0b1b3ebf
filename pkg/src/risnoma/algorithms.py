"""Alternating-optimization drivers for sum-rate and energy-efficiency
maximization, plus initialization, rank-1 recovery from the lifted SDP
solution, and the double-phase-shifter decomposition of the beamformer.

Each outer iteration updates the shared auxiliary, the RIS phases (SDP +
rank-1 extraction), the beamformer (QT + SCA cuts), then runs the power
allocation QT loop to convergence. Every block update is accepted
lexicographically on (min-rate feasibility, true objective), so the
retained design never degrades; rank-1 extraction and solver hiccups fall
back to the previous block value.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .channel import ChannelSet, Design, cascade_matrix
from .config import SystemConfig
from .metrics import (ANALOG_RIS, circuit_power, decode_order, effective_gains,
                      rate_report)
from .solvers import (INFEASIBLE, OPTIMAL, SolverSettings, solve_beamformer,
                      solve_pa_ee, solve_pa_sr, solve_ris_sdp)
from .subproblems import (MinRateDegenerate, ZeroGainChannel, aux_update_p,
                          aux_update_psi, aux_update_z, build_beamformer_coeffs,
                          build_pa_coeffs, build_ris_coeffs,
                          sca_linearize_minrate)


class InfeasibleProblem(RuntimeError):
    """No min-rate feasible design was found after warm-up."""


@dataclass
class AoSettings:
    outer_tol: float = 1e-5      # relative objective change stopping rule
    max_outer: int = 100
    inner_tol: float = 1e-6      # power-allocation QT loop
    inner_max: int = 50
    warmup_iters: int = 5        # outer iterations without min-rate cuts
    rank1_samples: int = 100     # Gaussian randomization candidates
    resort_order: bool = False   # re-sort SIC order each outer iteration
    solver: SolverSettings = field(default_factory=SolverSettings)

    def __post_init__(self):
        if self.warmup_iters > self.max_outer:
            raise ValueError("warmup_iters must be <= max_outer")
        if min(self.outer_tol, self.inner_tol) <= 0:
            raise ValueError("tolerances must be positive")
        if min(self.max_outer, self.inner_max, self.rank1_samples) < 1:
            raise ValueError("iteration counts must be >= 1")


@dataclass
class AoTrace:
    objective: list = field(default_factory=list)   # retained design, per iteration
    sum_rate: list = field(default_factory=list)
    accepted: list = field(default_factory=list)
    feasible: list = field(default_factory=list)
    statuses: list = field(default_factory=list)
    inner_iters: list = field(default_factory=list)
    converged: bool = False
    wall_time_s: float = 0.0

    @property
    def n_outer(self) -> int:
        return len(self.objective)


_SLACK = 1e-9


def _min_rate_violation(rep) -> float:
    """Total min-rate SINR shortfall of a report; 0 when feasible."""
    return sum(v for name, v in rep.violations if name.startswith("min_rate"))


def _lex_improves(new_feas: bool, new_obj: float, old_feas: bool, old_obj: float,
                  new_viol: float = 0.0, old_viol: float = 0.0) -> bool:
    """Feasibility first, then (post warm-up) smaller min-rate violation,
    then objective within slack."""
    if new_feas != old_feas:
        return new_feas
    if new_viol < old_viol - _SLACK:
        return True
    if new_viol > old_viol + _SLACK:
        return False
    return new_obj >= old_obj - _SLACK


def initialize_design(chs: ChannelSet, cfg: SystemConfig,
                      rng: np.random.Generator) -> Design:
    """Deterministic starting point: beam along the dominant right singular
    vector of the estimated BS-RIS channel, RIS phases aligned to the
    strongest user's cascade, uniform power split. rng is accepted for
    interface symmetry with randomized initializers."""
    del rng
    _, _, Vh = np.linalg.svd(chs.H_est)
    f = Vh[0].conj()
    f = f / np.linalg.norm(f)
    kappa = int(np.argmax(np.sum(np.abs(chs.h_est) ** 2, axis=1)))
    psi = np.exp(-1j * np.angle(cascade_matrix(chs, kappa) @ f))
    p = np.full(cfg.K, cfg.P_s / cfg.K)
    order = decode_order(chs, psi, f)
    return Design(f=f, psi=psi, p=p, order=order)


def rank1_extract(Psi: np.ndarray, chs: ChannelSet, f: np.ndarray,
                  p: np.ndarray, order: np.ndarray, cfg: SystemConfig,
                  L: int, rng: np.random.Generator) -> tuple[np.ndarray, bool]:
    """Recover a unit-modulus phase vector from the lifted SDP matrix.

    Candidates are the principal eigenvector plus L Gaussian samples drawn
    from CN(0, Psi), each reduced to phases relative to the last (lifting)
    coordinate. Returns the best feasible candidate by true sum rate, or
    the best overall with feasible=False when none meets the min rates.
    """
    n = Psi.shape[0]
    N = n - 1
    lam, U = np.linalg.eigh(0.5 * (Psi + Psi.conj().T))
    lam = np.maximum(lam, 0.0)
    cands = [U[:, -1]]
    if L > 0:
        z = (rng.standard_normal((n, L)) + 1j * rng.standard_normal((n, L))) / np.sqrt(2)
        cands.extend(((U * np.sqrt(lam)) @ z).T)

    best_feas: tuple[float, np.ndarray] | None = None
    best_any: tuple[float, np.ndarray] | None = None
    for v in cands:
        ref = np.angle(v[N]) if abs(v[N]) > 0 else 0.0
        psi = np.exp(1j * (np.angle(v[:N]) - ref))
        rep = rate_report(Design(f=f, psi=psi, p=p, order=order), chs, cfg)
        min_rate_ok = not any(name.startswith("min_rate") for name, _ in rep.violations)
        if best_any is None or rep.sum_rate > best_any[0]:
            best_any = (rep.sum_rate, psi)
        if min_rate_ok and (best_feas is None or rep.sum_rate > best_feas[0]):
            best_feas = (rep.sum_rate, psi)
    if best_feas is not None:
        return best_feas[1], True
    return best_any[1], False


def dps_decompose(f: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split each beamformer entry into two unit phasors.

    theta1 = arg(f_i) + arccos(|f_i|/2), theta2 = arg(f_i) - arccos(|f_i|/2),
    so exp(j theta1) + exp(j theta2) = f_i.
    """
    mag = np.abs(f)
    if np.any(mag > 2.0 + 1e-12):
        raise ValueError("DPS bound violated: |f_i| must be <= 2")
    delta = np.arccos(np.clip(mag / 2.0, -1.0, 1.0))
    base = np.angle(f)
    return base + delta, base - delta


class _AoState:
    """Retained design plus the block-acceptance gate.

    A candidate replaces the retained design only when it improves
    lexicographically: min-rate feasibility, then (post warm-up) smaller
    total min-rate violation, then the objective within slack. The gate is
    what makes the recorded trace monotone on accepted iterations.
    """

    def __init__(self, chs, cfg, design, maximize_ee):
        self.chs, self.cfg, self.maximize_ee = chs, cfg, maximize_ee
        self.design = design
        self.report = rate_report(design, chs, cfg)
        self.best: tuple[float, Design] | None = None
        self._track_best()

    @property
    def obj(self) -> float:
        return self.report.ee if self.maximize_ee else self.report.sum_rate

    @property
    def feas(self) -> bool:
        return self.report.feasible

    def _track_best(self):
        if self.report.feasible and (self.best is None or self.obj > self.best[0]):
            self.best = (self.obj, self.design.copy())

    def offer(self, cand: Design, use_violation: bool) -> bool:
        rep = rate_report(cand, self.chs, self.cfg)
        obj = rep.ee if self.maximize_ee else rep.sum_rate
        nv = _min_rate_violation(rep) if use_violation else 0.0
        ov = _min_rate_violation(self.report) if use_violation else 0.0
        if _lex_improves(rep.feasible, obj, self.feas, self.obj, nv, ov):
            self.design, self.report = cand, rep
            self._track_best()
            return True
        return False

    def refresh(self):
        self.report = rate_report(self.design, self.chs, self.cfg)
        self._track_best()


def _partition_alignment(chs: ChannelSet, f: np.ndarray, cfg: SystemConfig) -> np.ndarray:
    """Fairness-oriented RIS phases: elements are assigned to users round
    robin and each element coherently aligns its user's cascade, giving
    every user about N/K coherent elements."""
    psi = np.empty(cfg.N, dtype=complex)
    for k in range(cfg.K):
        idx = np.arange(k, cfg.N, cfg.K)
        c = (cascade_matrix(chs, k) @ f)[idx]
        psi[idx] = np.exp(-1j * np.angle(c))
    return psi


def _chain_power(g2: np.ndarray, order: np.ndarray, cfg: SystemConfig) -> np.ndarray:
    """Power vector meeting the min SINRs with equality at gains g2, scaled
    into the budget. Margins p_k - eta_k*P_after stay positive under any
    positive scaling, which is what the lifted SDP cuts need."""
    K = len(g2)
    p = np.zeros(K)
    tail = 0.0
    for pos in range(K - 1, -1, -1):
        u = order[pos]
        p[u] = cfg.eta[u] * (cfg.sigma2 / g2[u] + tail) if cfg.eta[u] > 0 else 0.0
        tail += p[u]
    total = float(np.sum(p))
    if total > cfg.P_s:
        p *= 0.999 * cfg.P_s / total
    if np.all(p == 0):
        p = np.full(K, cfg.P_s / K)
    return p


def _run_ao(chs: ChannelSet, cfg: SystemConfig, settings: AoSettings,
            rng: np.random.Generator, maximize_ee: bool) -> tuple[Design, AoTrace]:
    t_start = time.perf_counter()
    sset = settings.solver
    P_c = circuit_power(cfg, ANALOG_RIS)
    state = _AoState(chs, cfg, initialize_design(chs, cfg, rng), maximize_ee)
    trace = AoTrace()
    reset_used = False

    def _min_power_repair(base: Design):
        """Minimum-power point of the cut polytope at the design's
        phases/beam (the zero-auxiliary tie-break takes the LP path)."""
        try:
            pc = build_pa_coeffs(chs, base.f, base.psi, base.order, cfg, P_c=P_c)
        except ZeroGainChannel:
            return None
        out = solve_pa_sr(pc, np.zeros(cfg.K), sset, enforce_cuts=True)
        if out.solution is None:
            return None
        return replace(base, p=out.solution)

    for it in range(settings.max_outer):
        enforce = it >= settings.warmup_iters
        statuses: dict = {}
        adopted_all = True

        # warm-up can strand the design outside the min-rate region: repair
        # by minimum power at the current phases, once at fallback phase
        # configurations, or scaffold a positive-margin allocation so the
        # lifted SDP cuts below can pull the phases toward feasibility.
        if enforce and not state.feas and np.any(cfg.eta > 0):
            cand = _min_power_repair(state.design)
            if cand is None and not reset_used:
                reset_used = True
                from .baselines import _one_shot_ris_alignment
                base = initialize_design(chs, cfg, rng)
                for psi_alt in (base.psi,
                                _partition_alignment(chs, base.f, cfg),
                                _one_shot_ris_alignment(chs, cfg)):
                    alt = replace(base, psi=psi_alt)
                    alt = replace(alt, order=decode_order(chs, alt.psi, alt.f))
                    cand = _min_power_repair(alt)
                    if cand is not None:
                        break
            if cand is not None and state.offer(cand, use_violation=True):
                statuses["repair"] = "min_power"
            elif cand is None:
                g2 = effective_gains(chs, state.design.psi, state.design.f) ** 2
                if np.all(g2 > 0):
                    scaffold = replace(state.design,
                                       p=_chain_power(g2, state.design.order, cfg))
                    if state.offer(scaffold, use_violation=True):
                        statuses["repair"] = "chain_scaffold"

        start_feas = state.feas

        if settings.resort_order:
            state.design = replace(state.design,
                                   order=decode_order(chs, state.design.psi,
                                                      state.design.f))
            state.refresh()

        design = state.design
        # shared auxiliary for the psi and f blocks
        nu = aux_update_psi(chs, design.f, design.psi, design.p, design.order, cfg)

        # --- RIS phase block: SDP + rank-1 recovery -----------------------
        rank1_ok = True
        try:
            ris = build_ris_coeffs(chs, design.f, design.p, nu, design.order,
                                   cfg, enforce_min_rate=enforce)
        except MinRateDegenerate:
            ris = build_ris_coeffs(chs, design.f, design.p, nu, design.order,
                                   cfg, enforce_min_rate=False)
            statuses["ris_cuts"] = "degenerate"
        out_psi = solve_ris_sdp(ris, sset)
        statuses["psi"] = out_psi.status
        if out_psi.solution is not None:
            cand_psi, extract_feas = rank1_extract(
                out_psi.solution, chs, design.f, design.p, design.order, cfg,
                settings.rank1_samples, rng)
            if state.offer(replace(design, psi=cand_psi), use_violation=enforce):
                rank1_ok = extract_feas or not enforce
            else:
                rank1_ok = False
                adopted_all = False
        else:
            adopted_all = False

        # --- beamformer block: QT objective with SCA min-rate cuts --------
        design = state.design
        bc = build_beamformer_coeffs(chs, design.psi, design.p, design.order, cfg)
        cuts = sca_linearize_minrate(bc, design.f) if enforce else None
        out_f = solve_beamformer(bc, nu, cuts, sset, f_o=design.f)
        statuses["f"] = out_f.status
        if out_f.solution is not None:
            if not state.offer(replace(design, f=out_f.solution),
                               use_violation=enforce):
                adopted_all = False
        else:
            adopted_all = False

        # --- power allocation block: inner QT loop ------------------------
        design = state.design
        inner_used = 0
        try:
            pc = build_pa_coeffs(chs, design.f, design.psi, design.order, cfg, P_c=P_c)
        except ZeroGainChannel:
            pc = None
            statuses["pa"] = "zero_gain"
            adopted_all = False
        if pc is not None:
            p_work = design.p.copy()
            prev_qt = None
            pa_status = OPTIMAL
            for inner_used in range(1, settings.inner_max + 1):
                x = aux_update_p(pc, p_work)
                if maximize_ee:
                    z = aux_update_z(pc, p_work, x, clamp=True)
                    out_p = solve_pa_ee(pc, x, z, sset, enforce_cuts=enforce, p0=p_work)
                else:
                    out_p = solve_pa_sr(pc, x, sset, enforce_cuts=enforce, p0=p_work)
                if out_p.status == INFEASIBLE and enforce:
                    statuses["pa_cuts"] = "relaxed"
                    if maximize_ee:
                        out_p = solve_pa_ee(pc, x, z, sset, enforce_cuts=False, p0=p_work)
                    else:
                        out_p = solve_pa_sr(pc, x, sset, enforce_cuts=False, p0=p_work)
                pa_status = out_p.status
                if out_p.solution is None:
                    break
                p_work = out_p.solution
                if prev_qt is not None and abs(out_p.objective - prev_qt) <= \
                        settings.inner_tol * max(1.0, abs(prev_qt)):
                    break
                prev_qt = out_p.objective
            statuses.setdefault("pa", pa_status)
            if not state.offer(replace(design, p=p_work), use_violation=enforce):
                adopted_all = False

        # --- bookkeeping ---------------------------------------------------
        solver_clean = all(statuses.get(k) == OPTIMAL for k in ("psi", "f", "pa"))
        trace.objective.append(state.obj)
        trace.sum_rate.append(state.report.sum_rate)
        trace.feasible.append(state.feas)
        trace.accepted.append(bool(solver_clean and adopted_all and rank1_ok
                                   and start_feas and state.feas))
        trace.statuses.append(statuses)
        trace.inner_iters.append(inner_used)

        if it >= settings.warmup_iters and len(trace.objective) >= 2:
            prev = trace.objective[-2]
            if abs(state.obj - prev) <= settings.outer_tol * max(1.0, abs(prev)):
                trace.converged = True
                break

    trace.wall_time_s = time.perf_counter() - t_start
    if state.best is None:
        raise InfeasibleProblem(
            "no min-rate feasible design found; thresholds appear unattainable")
    return state.best[1], trace


def algorithm1_sum_rate(chs: ChannelSet, cfg: SystemConfig,
                        settings: AoSettings | None = None,
                        rng: np.random.Generator | None = None) -> tuple[Design, AoTrace]:
    """Sum-rate maximization by alternating QT subproblems."""
    return _run_ao(chs, cfg, settings or AoSettings(),
                   rng or np.random.default_rng(0), maximize_ee=False)


def algorithm2_ee(chs: ChannelSet, cfg: SystemConfig,
                  settings: AoSettings | None = None,
                  rng: np.random.Generator | None = None) -> tuple[Design, AoTrace]:
    """Energy-efficiency maximization; same outer structure, doubly nested
    QT (rate ratio inside, efficiency ratio outside) in the power block."""
    return _run_ao(chs, cfg, settings or AoSettings(),
                   rng or np.random.default_rng(0), maximize_ee=True)
