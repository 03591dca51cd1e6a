"""Mutual-information driven design of phase retrieval measurement matrices."""

from .analysis import (MmseEstimate, NecessaryConditionReport, kron_sym_trace, lmmse_matrix,
                       mi_low_snr_proxy, mmse_matrix_importance_sampling, mode_condition_report,
                       necessary_condition_residual)
from .design import (DesignBudget, DesignCollapsedError, DesignOutput, EigenvalueTieError,
                     MeasurementMatrix, alternating_design, coded_diffraction_matrix,
                     design_from_target, low_snr_optimal_matrix, masked_fourier_masks,
                     nearest_krp_rows, procrustes_align, random_gaussian_matrix, waterfill_lifted)
from .harness import (ExperimentConfig, ResultTable, emit_results, run_complexity_sweep,
                      run_frobenius_comparison, run_snr_sweep)
from .kron import (NotRankOneError, apply_lifted_fast, lift_signal, row_wise_krp, unlift_signal,
                   unvec, vec)
from .retrieval import (Observation, RecoveryResult, altmin_recover, forward_observe,
                        phase_aligned_error, taf_recover)
from .soi import (CovariancePair, ProperGaussian, RngStream, SumExponentials, analytic_pair,
                  empirical_lifted_covariance)

__version__ = "0.1.0"
