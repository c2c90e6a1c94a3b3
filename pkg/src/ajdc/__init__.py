"""Blind source separation by approximate joint diagonalization of Fourier cospectra."""
from .ajd import Diagonalizer, ajd_nonorthogonal, ajd_orthogonal, gevd_two_matrix, off_criterion
from .config import RunConfig
from .diagset import (DiagonalizationSet, apply_weighting, build_set, condition_average,
                      nondiagonality_weight)
from .errors import AJDCError, DegenerateWarning, NumericalError, ValidationError
from .evaluation import align_components, performance_index, system_matrix
from .pipeline import (SeparatingModel, SubspaceReducer, assemble_model, bss_filter,
                       explained_variance, extract_sources, fit_set, reduce_set, separate,
                       whitening_from_total)
from .sim import (GroundTruth, Recording, SourceSignal, gen_ar_source, gen_envelope_source,
                  mix, random_mixing)
from .spectral import (CospectraStack, FrequencyGrid, band_sum, cospectra_epoch,
                       covariance_from_cospectra, dft_coefficients, frequency_grid,
                       welch_cospectra)

__version__ = "0.1.0"
