"""torusdrift: drift asymptotics of periodic flows X' = b(X) on the torus.

Simulates the lifted flow in R^d, estimates rotation vectors and empirical
invariant measures, and compares them against closed-form predictions
(harmonic means of the scalar factor, rectified and current fields).
"""

from ._kernels import BACKEND
from .analytic import DriftPrediction, harmonic_mean, line_harmonic_mean, predict_drift
from .ergodic import (
    CbProbe,
    DriftEstimate,
    EmpiricalMeasure,
    birkhoff_average,
    cb_probe,
    drift_estimate,
    empirical_measure,
    measure_average,
    measure_vector_average,
)
from .fields import (
    CurrentField,
    Diffeomorphism,
    DirectionField,
    GenericField,
    Indeterminate,
    MatrixField,
    OneDField,
    RationalPeriod,
    RectifiedField,
    ScalarField,
    TotallyIrrational,
    classify_direction,
)
from .flow import PeriodReport, Trajectory, detect_torus_period, exact_line_solve, integrate
from .invariance import (
    DensityField,
    TestFunction,
    divcurl_residual,
    harmonic_density_1d,
    rectified_density,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "CbProbe",
    "CurrentField",
    "DensityField",
    "Diffeomorphism",
    "DirectionField",
    "DriftEstimate",
    "DriftPrediction",
    "EmpiricalMeasure",
    "GenericField",
    "Indeterminate",
    "MatrixField",
    "OneDField",
    "PeriodReport",
    "RationalPeriod",
    "RectifiedField",
    "ScalarField",
    "TestFunction",
    "TotallyIrrational",
    "Trajectory",
    "birkhoff_average",
    "cb_probe",
    "classify_direction",
    "detect_torus_period",
    "divcurl_residual",
    "drift_estimate",
    "empirical_measure",
    "exact_line_solve",
    "harmonic_density_1d",
    "harmonic_mean",
    "integrate",
    "line_harmonic_mean",
    "measure_average",
    "measure_vector_average",
    "predict_drift",
    "rectified_density",
]
