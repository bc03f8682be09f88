"""Non-separable spatio-temporal Gaussian fields on rectangles.

Spectral-in-space, ARMA-in-time discretization of a fractional SPDE, with
sequential Kalman filtering, maximum likelihood estimation, simulation,
prediction, and numerical verification drivers.
"""

__version__ = "0.1.0"

from .params import (NaturalParams, SpdeParams, to_spde, to_natural,
                     to_opt, from_opt, OPT_NAMES)
from .spectral import (RectangleDomain, SpectralBasis, build_basis,
                       eval_basis, design_matrix)
from .covariance import (frequency_coeffs, temporal_corr, temporal_cov,
                         marginal_var, normalization_constant,
                         with_normalization, space_time_cov)
from .rational import RationalApprox, fit_rational, eval_rational, disc_error
from .arma import (ArmaCoeffs, FrequencyBlock, arma_coefficients, companion,
                   stationary_init, arma_acvf, frac_ma_weights)
from .statespace import (TimeGrid, BlockStateSpace, assemble, rational_for,
                         simulate_statespace, simulate_exact, field_at)
from .kalman import (ObservationSet, FilterOutput, predict_step,
                     sequential_update, run_filter, forecast)
from .inference import (FitResult, ols_fixed_effects, fit_mle, crps_gaussian,
                        score_predictions, SIMPLE_MODEL_FIXED)
from .harness import (VerifyConfig, SimStudyConfig, CvConfig,
                      verify_covariance, spatial_rate_check, simstudy,
                      block_cv, stripe_folds, read_observations_csv,
                      write_observations_csv, run_manifest)
