"""Random acoustic and elastic sources: sampling, radiated fields, band averages, inversion."""

__version__ = "0.1.0"

from .estimator import FrequencySweep, StrengthProfile, analytic_strength, band_average, covariance_moment
from .forward import GeometryError, acoustic_field, elastic_field
from .greens import AcousticParams, ElasticParams, navier_green, phi
from .inversion import assemble_kernel, laplacian_consistency, spherical_mean, tikhonov_solve
from .randfield import FieldSample, FieldSpec, Grid, SmoothBump, SpecError, sample_field
from .specialfn import HankelTruncation, bessel, hankel1, hankel1_trunc

__all__ = [
    "AcousticParams", "ElasticParams", "FieldSample", "FieldSpec", "FrequencySweep", "GeometryError",
    "Grid", "HankelTruncation", "SmoothBump", "SpecError", "StrengthProfile", "acoustic_field",
    "analytic_strength", "assemble_kernel", "band_average", "bessel", "covariance_moment",
    "elastic_field", "hankel1", "hankel1_trunc", "laplacian_consistency", "navier_green", "phi",
    "sample_field", "spherical_mean", "tikhonov_solve",
]
