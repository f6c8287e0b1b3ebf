"""RIS-assisted NOMA downlink optimizer for a single-RF-chain analog
transmitter: quadratic-transform subproblems, SDR phase optimization,
alternating sum-rate / energy-efficiency maximization, baselines, and a
reproducible Monte Carlo harness."""

from .algorithms import (AoSettings, AoTrace, InfeasibleProblem,
                         algorithm1_sum_rate, algorithm2_ee, dps_decompose,
                         initialize_design, rank1_extract)
from .baselines import (WmseState, oma_tdma_baseline, svd_wf_baseline,
                        waterfill, wmse_oracle)
from .channel import (ChannelSet, Design, cascade_matrix, effective_channel,
                      residual_coeff, sample_channels, steering_ula,
                      steering_upa)
from .config import SystemConfig, ris_grid
from .harness import (ExperimentConfig, OracleGrids, TrialRecord,
                      brute_force_oracle, emit_csv, emit_plot,
                      load_experiment_config, parse_experiment_config,
                      read_csv, run_experiment, run_trial)
from .metrics import (ANALOG_RIS, FULLY_DIGITAL, RateReport, check_feasibility,
                      circuit_power, decode_order, rate_report, sinr)
from .solvers import (INACCURATE, INFEASIBLE, ITER_LIMIT, OPTIMAL,
                      SolveOutcome, SolverSettings, solve_beamformer,
                      solve_pa_ee, solve_pa_sr, solve_ris_sdp)
from .subproblems import (AuxState, BeamformerCoeffs, MinRateCuts,
                          MinRateDegenerate, PaCoeffs, RisCoeffs,
                          ZeroGainChannel, aux_update_f, aux_update_p,
                          aux_update_psi, aux_update_z,
                          build_beamformer_coeffs, build_pa_coeffs,
                          build_ris_coeffs, ee_qt_objective, pa_sinr,
                          qt_opt_aux, qt_sinr_f, qt_sinr_p, qt_sinr_psi,
                          sca_linearize_minrate)

__version__ = "0.1.0"
