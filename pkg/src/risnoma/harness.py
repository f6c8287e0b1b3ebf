"""Monte Carlo experiment harness: config parsing, seeded sweeps, CSV
emission, static plots, and the tiny-instance brute-force oracle.

Sweeps are reproducible to the byte: every trial derives its generators
from (master seed, axis values, trial index), workers never share state,
and records are sorted on (axis, trial, algorithm) before emission so the
worker count cannot change the output.
"""
from __future__ import annotations

import concurrent.futures
import csv
import os
import struct
import time
from dataclasses import dataclass, fields

import numpy as np

from .algorithms import (AoSettings, InfeasibleProblem, algorithm1_sum_rate,
                         algorithm2_ee)
from .baselines import oma_tdma_baseline, svd_wf_baseline
from .channel import ChannelSet, Design, sample_channels
from .config import SystemConfig, ris_grid
from .metrics import rate_report
from .solvers import SolverSettings

ALGORITHMS = ("sr", "ee", "svd_wf", "oma")
_ALG_INDEX = {name: i for i, name in enumerate(ALGORITHMS)}

CSV_BASE_HEADER = ("trial,seed,snr_db,n_ris,k_users,sigma_eps2,algorithm,"
                   "objective,sum_rate,ee,total_tx_power,iters,runtime_ms,feasible")


@dataclass
class ExperimentConfig:
    snr_db: tuple = (-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0)
    n_ris: tuple = (64,)
    k_users: tuple = (4,)
    sigma_eps2: tuple = (0.0,)
    trials: int = 100
    algorithms: tuple = ALGORITHMS
    master_seed: int = 1
    m_antennas: int = 16
    s1: int = 3
    s2: int = 3
    sigma2: float = 1.0
    r_th: float = 0.3
    p_bs_prime: float = 100.0
    p_rf: float = 40.0
    p_ris: float = 0.5
    max_outer: int = 40
    outer_tol: float = 1e-4
    warmup_iters: int = 5
    rank1_samples: int = 100
    solver_tol: float = 1e-3   # sweep default; SDP cost scales steeply with this
    out_csv: str = "results.csv"

    def __post_init__(self):
        if not (self.snr_db and self.n_ris and self.k_users and self.sigma_eps2):
            raise ValueError("sweep axes must be non-empty")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        bad = set(self.algorithms) - set(ALGORITHMS)
        if bad:
            raise ValueError(f"unknown algorithms: {sorted(bad)}")

    def axis_points(self) -> list[tuple]:
        return [(snr, n, k, se2)
                for snr in self.snr_db for n in self.n_ris
                for k in self.k_users for se2 in self.sigma_eps2]

    def system_config(self, snr_db: float, n_ris: int, k_users: int,
                      sigma_eps2: float) -> SystemConfig:
        n_h, n_v = ris_grid(n_ris)
        return SystemConfig(
            M=self.m_antennas, N_H=n_h, N_V=n_v, K=k_users,
            S1=self.s1, S2=self.s2, sigma2=self.sigma2,
            sigma_eps2=sigma_eps2,
            P_s=self.sigma2 * 10.0 ** (snr_db / 10.0),
            R_th=(self.r_th,) * k_users,
            P_BS_prime=self.p_bs_prime, P_RF=self.p_rf, P_RIS=self.p_ris,
            seed=self.master_seed)

    def ao_settings(self) -> AoSettings:
        # loose SDP tolerance with a hard iteration cap: the AO drivers
        # accept candidates through a true-objective gate, so inaccurate
        # phase solutions cost quality at worst, never correctness
        solver = SolverSettings(abs_tol=self.solver_tol, rel_tol=self.solver_tol,
                                max_iters=750)
        return AoSettings(outer_tol=self.outer_tol, max_outer=self.max_outer,
                          warmup_iters=min(self.warmup_iters, self.max_outer),
                          rank1_samples=self.rank1_samples, solver=solver)


_INT_KEYS = {"trials", "master_seed", "m_antennas", "s1", "s2", "max_outer",
             "warmup_iters", "rank1_samples"}
_FLOAT_KEYS = {"sigma2", "r_th", "p_bs_prime", "p_rf", "p_ris", "outer_tol",
               "solver_tol"}
_FLOAT_LIST_KEYS = {"snr_db", "sigma_eps2"}
_INT_LIST_KEYS = {"n_ris", "k_users"}


def parse_experiment_config(text: str) -> ExperimentConfig:
    """Flat `key = value` lines; lists comma-separated; # starts a comment."""
    known = {f.name for f in fields(ExperimentConfig)}
    kw: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in known:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
        if key in _INT_KEYS:
            kw[key] = int(val)
        elif key in _FLOAT_KEYS:
            kw[key] = float(val)
        elif key in _FLOAT_LIST_KEYS:
            kw[key] = tuple(float(v) for v in val.split(","))
        elif key in _INT_LIST_KEYS:
            kw[key] = tuple(int(v) for v in val.split(","))
        elif key == "algorithms":
            names = tuple(v.strip() for v in val.split(","))
            kw[key] = ALGORITHMS if names == ("all",) else names
        else:
            kw[key] = val
    return ExperimentConfig(**kw)


def load_experiment_config(path: str) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_experiment_config(fh.read())


@dataclass
class TrialRecord:
    trial: int
    seed: int
    snr_db: float
    n_ris: int
    k_users: int
    sigma_eps2: float
    algorithm: str
    objective: float
    sum_rate: float
    ee: float
    total_tx_power: float
    iters: int
    runtime_ms: float
    feasible: bool
    rates: tuple = ()          # per-user rates; empty for stream baselines

    def sort_key(self):
        return (self.snr_db, self.n_ris, self.k_users, self.sigma_eps2,
                self.trial, _ALG_INDEX.get(self.algorithm, 99), self.algorithm)


def _float_bits(x: float) -> int:
    return struct.unpack("<Q", struct.pack("<d", float(x)))[0]


def _axis_entropy(master_seed: int, axis: tuple, trial: int, stream: int) -> np.random.SeedSequence:
    snr, n, k, se2 = axis
    return np.random.SeedSequence(
        [master_seed, _float_bits(snr), n, k, _float_bits(se2), trial, stream])


def trial_channel_seed(master_seed: int, axis: tuple, trial: int) -> int:
    """Stable integer label of the trial's channel generator state."""
    return int(_axis_entropy(master_seed, axis, trial, 0).generate_state(1, np.uint64)[0])


def run_trial(exp: ExperimentConfig, axis: tuple, trial: int,
              timings: bool = False) -> list[TrialRecord]:
    """Run every selected algorithm on one shared channel realization."""
    snr, n, k, se2 = axis
    cfg = exp.system_config(snr, n, k, se2)
    rng = np.random.default_rng(_axis_entropy(exp.master_seed, axis, trial, 0))
    seed_label = trial_channel_seed(exp.master_seed, axis, trial)
    chs = sample_channels(cfg, rng)
    settings = exp.ao_settings()
    records = []
    for alg in exp.algorithms:
        rng_alg = np.random.default_rng(
            _axis_entropy(exp.master_seed, axis, trial, 1 + _ALG_INDEX[alg]))
        t0 = time.perf_counter()
        try:
            if alg == "sr":
                design, trace = algorithm1_sum_rate(chs, cfg, settings, rng_alg)
                rep = rate_report(design, chs, cfg)
                rec = dict(objective=rep.sum_rate, sum_rate=rep.sum_rate,
                           ee=rep.ee, total_tx_power=float(np.sum(design.p)),
                           iters=trace.n_outer, feasible=rep.feasible,
                           rates=tuple(float(r) for r in rep.rate))
            elif alg == "ee":
                design, trace = algorithm2_ee(chs, cfg, settings, rng_alg)
                rep = rate_report(design, chs, cfg)
                rec = dict(objective=rep.ee, sum_rate=rep.sum_rate,
                           ee=rep.ee, total_tx_power=float(np.sum(design.p)),
                           iters=trace.n_outer, feasible=rep.feasible,
                           rates=tuple(float(r) for r in rep.rate))
            elif alg == "svd_wf":
                res = svd_wf_baseline(chs, cfg)
                rec = dict(objective=res["sum_rate"], sum_rate=res["sum_rate"],
                           ee=res["ee"], total_tx_power=cfg.P_s, iters=0,
                           feasible=True, rates=())
            else:
                res = oma_tdma_baseline(chs, cfg)
                rec = dict(objective=res["sum_rate"], sum_rate=res["sum_rate"],
                           ee=res["ee"], total_tx_power=cfg.P_s, iters=0,
                           feasible=True, rates=())
        except (InfeasibleProblem, ValueError, RuntimeError):
            rec = dict(objective=float("nan"), sum_rate=float("nan"),
                       ee=float("nan"), total_tx_power=float("nan"),
                       iters=0, feasible=False, rates=())
        runtime = (time.perf_counter() - t0) * 1e3 if timings else 0.0
        records.append(TrialRecord(
            trial=trial, seed=seed_label, snr_db=snr, n_ris=n, k_users=k,
            sigma_eps2=se2, algorithm=alg, runtime_ms=runtime, **rec))
    return records


def _run_point(args) -> list[TrialRecord]:
    exp, axis, trial, timings = args
    return run_trial(exp, axis, trial, timings)


def run_experiment(exp: ExperimentConfig, jobs: int = 1,
                   timings: bool = False) -> list[TrialRecord]:
    """Full sweep; output is independent of jobs by construction."""
    work = [(exp, axis, trial, timings)
            for axis in exp.axis_points() for trial in range(exp.trials)]
    if jobs <= 1:
        results = [_run_point(w) for w in work]
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_point, work, chunksize=1))
    records = [rec for batch in results for rec in batch]
    records.sort(key=TrialRecord.sort_key)
    return records


# ---------------------------------------------------------------------------
# CSV round trip
# ---------------------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, float):
        return repr(x)
    return str(x)


def emit_csv(records: list[TrialRecord], path: str) -> None:
    """Fixed base header plus rate_1..rate_Kmax columns, blank-padded."""
    if not records:
        raise ValueError("no records to emit")
    k_max = max(r.k_users for r in records)
    header = CSV_BASE_HEADER + "".join(f",rate_{i+1}" for i in range(k_max))
    lines = [header]
    for r in records:
        cells = [str(r.trial), str(r.seed), repr(float(r.snr_db)), str(r.n_ris),
                 str(r.k_users), repr(float(r.sigma_eps2)), r.algorithm,
                 repr(float(r.objective)), repr(float(r.sum_rate)),
                 repr(float(r.ee)), repr(float(r.total_tx_power)),
                 str(r.iters), repr(float(r.runtime_ms)), _fmt(bool(r.feasible))]
        cells += [repr(float(v)) for v in r.rates]
        cells += [""] * (k_max - len(r.rates))
        lines.append(",".join(cells))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_csv(path: str) -> list[TrialRecord]:
    with open(path, "r", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or ",".join(rows[0]).split(",rate_1")[0] != CSV_BASE_HEADER:
        raise ValueError(f"{path}: unexpected CSV header")
    out = []
    for row in rows[1:]:
        base, rates = row[:14], [v for v in row[14:] if v != ""]
        out.append(TrialRecord(
            trial=int(base[0]), seed=int(base[1]), snr_db=float(base[2]),
            n_ris=int(base[3]), k_users=int(base[4]), sigma_eps2=float(base[5]),
            algorithm=base[6], objective=float(base[7]), sum_rate=float(base[8]),
            ee=float(base[9]), total_tx_power=float(base[10]), iters=int(base[11]),
            runtime_ms=float(base[12]), feasible=base[13] == "1",
            rates=tuple(float(v) for v in rates)))
    return out


def emit_plot(csv_path: str, x: str, y: str, series: str, out_path: str) -> None:
    """Line chart of mean +/- std of column y vs column x, one line per
    distinct value of the series column. Vector output (svg/pdf)."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    records = read_csv(csv_path)

    def col(rec, name):
        return getattr(rec, name)

    fig, ax = plt.subplots(figsize=(6, 4))
    for sval in sorted({col(r, series) for r in records}, key=str):
        grp = [r for r in records if col(r, series) == sval]
        xs = sorted({col(r, x) for r in grp})
        means, stds = [], []
        for xv in xs:
            ys = np.array([col(r, y) for r in grp if col(r, x) == xv], dtype=float)
            ys = ys[np.isfinite(ys)]
            means.append(np.mean(ys) if len(ys) else np.nan)
            stds.append(np.std(ys) if len(ys) else np.nan)
        ax.errorbar(xs, means, yerr=stds, marker="o", capsize=3,
                    label=f"{series}={sval}")
    ax.set_xlabel(x)
    ax.set_ylabel(y)
    ax.grid(True, alpha=0.4)
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)


# ---------------------------------------------------------------------------
# brute-force oracle for tiny instances
# ---------------------------------------------------------------------------

@dataclass
class OracleGrids:
    q_psi: int = 64            # phases per RIS element
    q_f: int = 256             # beam codebook size (M = 2)
    q_p: int = 64              # power grid points


def _beam_codebook(M: int, q_f: int) -> np.ndarray:
    """Unit-norm codebook; for M = 2 a (amplitude split) x (relative phase)
    grid, global phase fixed."""
    if M == 1:
        return np.ones((1, 1), dtype=complex)
    n = max(2, int(round(np.sqrt(q_f))))
    beta = np.linspace(0.0, np.pi / 2, n)
    phi = np.arange(n) * 2.0 * np.pi / n
    B, P = np.meshgrid(beta, phi, indexing="ij")
    return np.stack([np.cos(B).ravel(),
                     np.sin(B).ravel() * np.exp(1j * P.ravel())], axis=1)


def _power_grid(K: int, q_p: int, P_s: float) -> np.ndarray:
    if K == 1:
        return np.linspace(P_s / q_p, P_s, q_p)[:, None]
    n = max(2, int(round(np.sqrt(q_p))))
    frac = np.linspace(0.0, 1.0, n)
    scale = np.linspace(1.0 / n, 1.0, n)
    F, S = np.meshgrid(frac, scale, indexing="ij")
    p1 = (F * S * P_s).ravel()
    p2 = ((1.0 - F) * S * P_s).ravel()
    return np.stack([p1, p2], axis=1)


def brute_force_oracle(chs: ChannelSet, cfg: SystemConfig,
                       grids: OracleGrids | None = None) -> dict:
    """Exhaustive search over phase/beam/power grids for tiny instances.

    Guarded to M <= 2, N <= 2, K <= 2. The grid is scored by a vectorized
    rate evaluator that is cross-checked against metrics.rate_report; the
    returned best value is the metrics evaluation of the arg-max design.
    """
    grids = grids or OracleGrids()
    if cfg.M > 2 or cfg.N > 2 or cfg.K > 2:
        raise ValueError("brute_force_oracle is limited to M,N,K <= 2")
    from .channel import cascade_matrix, residual_coeff

    Q, N, K, M = grids.q_psi, cfg.N, cfg.K, cfg.M
    phases = np.exp(2j * np.pi * np.arange(Q) / Q)
    if N == 1:
        psi_combos = phases[:, None]
    else:
        A, B = np.meshgrid(phases, phases, indexing="ij")
        psi_combos = np.stack([A.ravel(), B.ravel()], axis=1)
    fbook = _beam_codebook(M, grids.q_f)
    pgrid = _power_grid(K, grids.q_p, cfg.P_s)

    # |g_k f| for every (psi, f) pair, flattened
    E = [cascade_matrix(chs, k) for k in range(K)]
    g = [ (psi_combos @ E[k]) @ fbook.T for k in range(K) ]   # (P, F) each
    g2 = np.stack([np.abs(gk.ravel()) ** 2 for gk in g])      # (K, P*F)
    # r_k depends only on f; broadcast across the psi axis
    r_cols = np.stack([residual_coeff(chs, fbook[j], cfg) for j in range(len(fbook))]).T
    r = np.repeat(r_cols[:, None, :], len(psi_combos), axis=1).reshape(K, -1)

    eta = cfg.eta
    best_val = -np.inf
    best_idx = (0, 0)
    for pi, p in enumerate(pgrid):
        p_tot = float(np.sum(p))
        if K == 1:
            gamma = g2[0] * p[0] / (cfg.sigma2 + r[0] * p_tot)
            sr = np.log2(1.0 + gamma)
            feas = gamma >= eta[0] - 1e-12
        else:
            # decode weaker user first; the stronger sees no interference
            first_is_0 = g2[0] <= g2[1]
            inter0 = np.where(first_is_0, p[1], 0.0)
            inter1 = np.where(first_is_0, 0.0, p[0])
            gam0 = g2[0] * p[0] / (cfg.sigma2 + g2[0] * inter0 + r[0] * p_tot)
            gam1 = g2[1] * p[1] / (cfg.sigma2 + g2[1] * inter1 + r[1] * p_tot)
            sr = np.log2(1.0 + gam0) + np.log2(1.0 + gam1)
            feas = (gam0 >= eta[0] - 1e-12) & (gam1 >= eta[1] - 1e-12)
        sr = np.where(feas, sr, -np.inf)
        j = int(np.argmax(sr))
        if sr[j] > best_val:
            best_val = float(sr[j])
            best_idx = (pi, j)

    if not np.isfinite(best_val):
        raise InfeasibleProblem("no grid point satisfies the minimum rates")
    pi, j = best_idx
    psi_best = psi_combos[j // len(fbook)]
    f_best = fbook[j % len(fbook)]
    p_best = pgrid[pi]
    gains = np.array([abs((psi_best @ E[k]) @ f_best) for k in range(K)])
    order = np.argsort(gains, kind="stable")
    design = Design(f=f_best.copy(), psi=psi_best.copy(), p=p_best.copy(), order=order)
    rep = rate_report(design, chs, cfg)
    if abs(rep.sum_rate - best_val) > 1e-8 * max(1.0, abs(best_val)):
        raise AssertionError("vectorized oracle disagrees with metrics evaluation")
    return {"best_sum_rate": rep.sum_rate, "best_design": design}
