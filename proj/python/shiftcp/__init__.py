"""Conformal prediction sets for classification under covariate shift.

The compiled core exposes nonconformity scoring, weighted quantile
calibration, Gaussian-kernel density estimation with cross-validated
bandwidths, likelihood-ratio weighting, an energy-regularized MLP
classifier, dissimilarity-based dataset splitting, and the end-to-end
pipeline with its synthetic covariate-shift oracle.
"""

from ._core import *  # noqa: F401,F403

__all__ = [name for name in dir() if not name.startswith("_")]
