"""Closed-form drift predictions: the oracle side of every comparison.

The large-time drift of a direction field b = a xi is governed by harmonic
means of the scalar factor: the global harmonic mean for totally
irrational directions, the one-period line harmonic mean through the start
point for rational directions, and zero whenever the factor vanishes on
the relevant set.  Rectified fields map these predictions through the
diffeomorphism; current fields always drift to zero.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .errors import DimensionMismatch, VanishesOnLine, VanishingField
from .fields import (
    NEGATIVE,
    POSITIVE,
    SIGN_CHANGING,
    VANISHING,
    CurrentField,
    DirectionClass,
    DirectionField,
    FieldSpec,
    GenericField,
    Indeterminate,
    OneDField,
    RationalPeriod,
    RectifiedField,
    ScalarField,
    TotallyIrrational,
    project_off_direction,
)
from .quadrature import LineQuadrature, refine_tensor_integral, refined_line_minimum

CASE_ONED_POSITIVE = "oned-positive"
CASE_ONED_VANISHING = "oned-vanishing"
CASE_IRRATIONAL_POSITIVE = "irrational-positive"
CASE_IRRATIONAL_VANISHING = "irrational-vanishing"
CASE_RATIONAL_LINE_POSITIVE = "rational-line-positive"
CASE_RATIONAL_LINE_VANISHING = "rational-line-vanishing"
CASE_RECTIFIED = "rectified"
CASE_CURRENT = "current"
CASE_UNSUPPORTED = "unsupported"


@dataclass(frozen=True)
class DriftPrediction:
    """Predicted limit of X(t, x)/t with its case tag and input digest."""
    value: Tuple[float, ...]
    case_tag: str
    digest: str

    @property
    def vector(self) -> np.ndarray:
        return np.asarray(self.value, dtype=np.float64)

    @property
    def supported(self) -> bool:
        return self.case_tag != CASE_UNSUPPORTED


def harmonic_mean(a: ScalarField, *, n0: int = 64, rel_tol: float = 1e-12,
                  eps_zero: float = 1e-12) -> float:
    """Harmonic mean (integral of 1/a over the unit cell)^{-1}, a > 0.

    Tensor Gauss-Legendre quadrature, resolution doubled until the value
    is stable to ``rel_tol`` relative.
    """
    rep = a.positivity
    if rep.kind != POSITIVE or (not rep.certified and rep.min_value <= eps_zero):
        raise VanishingField("harmonic mean requires a strictly positive field")
    integral = refine_tensor_integral(lambda p: 1.0 / a.values(p), a.dim,
                                      n0=n0, rel_tol=rel_tol)
    return 1.0 / integral


def signed_harmonic_mean(b: ScalarField) -> float:
    """(integral of 1/b)^{-1} for sign-definite b; negative when b < 0."""
    rep = b.positivity
    if rep.kind == POSITIVE:
        return harmonic_mean(b)
    if rep.kind == NEGATIVE:
        return -harmonic_mean(b.negated())
    raise VanishingField("field is not sign-definite")


def line_harmonic_mean(a: ScalarField, xi, T: float, x, *,
                       rel_tol: float = 1e-12, eps_zero: float = 1e-12) -> float:
    """Harmonic mean of s -> a(s xi + P x) over one period T.

    Raises VanishesOnLine when the factor vanishes somewhere on the line
    (the drift prediction is then zero).
    """
    xi = np.atleast_1d(np.asarray(xi, dtype=np.float64))
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if a.dim != xi.shape[0] or x.shape != xi.shape:
        raise DimensionMismatch("a, xi, x disagree on dimension")
    perp = project_off_direction(x, xi)

    def a_line(s):
        s = np.atleast_1d(np.asarray(s, dtype=np.float64))
        return a.values(s[:, None] * xi[None, :] + perp[None, :])

    per_unit = 64.0 * (1.0 + a.max_frequency())
    if refined_line_minimum(a_line, 0.0, T, per_unit) <= eps_zero:
        raise VanishesOnLine("scalar factor vanishes on the sampled line")
    quad = LineQuadrature(lambda s: 1.0 / a_line(s), 0.0, T,
                          panels_per_unit=max(4.0, 4.0 * (1.0 + a.max_frequency())),
                          rel_tol=rel_tol)
    return T / quad.total


def _factor_is_positive(a: ScalarField) -> bool:
    rep = a.positivity
    return rep.kind == POSITIVE


def _input_digest(spec: FieldSpec, x, direction_class) -> str:
    h = hashlib.sha256()
    h.update(spec.digest().encode())
    h.update(np.asarray(x, dtype=np.float64).tobytes())
    h.update(repr(direction_class).encode())
    return h.hexdigest()[:12]


def predict_drift(spec: FieldSpec, x,
                  direction_class: Optional[DirectionClass] = None) -> DriftPrediction:
    """Full case analysis of the closed-form drift at start point x.

    Direction and rectified specs require a ``direction_class`` (from
    ``classify_direction``).  Generic specs and indeterminate directions
    yield an ``unsupported`` prediction rather than a guess.  The result
    is a pure function of its inputs.
    """
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if x.shape != (spec.dim,):
        raise DimensionMismatch("start point dim mismatch")
    digest = _input_digest(spec, x, direction_class)
    zero = (0.0,) * spec.dim

    if isinstance(spec, CurrentField):
        return DriftPrediction(zero, CASE_CURRENT, digest)

    if isinstance(spec, GenericField):
        return DriftPrediction(zero, CASE_UNSUPPORTED, digest)

    if isinstance(spec, OneDField):
        kind = spec.b.positivity.kind
        if kind in (VANISHING, SIGN_CHANGING):
            # equilibria trap every trajectory between zeros of b
            return DriftPrediction(zero, CASE_ONED_VANISHING, digest)
        return DriftPrediction((signed_harmonic_mean(spec.b),),
                               CASE_ONED_POSITIVE, digest)

    if isinstance(spec, (DirectionField, RectifiedField)):
        if direction_class is None:
            raise ValueError("direction_class is required for direction-type specs")
        if isinstance(spec, RectifiedField):
            point = spec.phi.forward(x)
            push = spec.phi.lattice_inv.astype(np.float64)
        else:
            point = x
            push = None
        a, xi = spec.a, spec.xi

        if isinstance(direction_class, Indeterminate):
            return DriftPrediction(zero, CASE_UNSUPPORTED, digest)
        if isinstance(direction_class, TotallyIrrational):
            if _factor_is_positive(a):
                scale = harmonic_mean(a)
                tag = CASE_IRRATIONAL_POSITIVE
            else:
                scale = 0.0
                tag = CASE_IRRATIONAL_VANISHING
        else:
            assert isinstance(direction_class, RationalPeriod)
            try:
                scale = line_harmonic_mean(a, xi, direction_class.T, point)
                tag = CASE_RATIONAL_LINE_POSITIVE
            except VanishesOnLine:
                scale = 0.0
                tag = CASE_RATIONAL_LINE_VANISHING
        if push is None:
            value = scale * xi
        else:
            value = scale * (push @ xi)
            tag = CASE_RECTIFIED
        return DriftPrediction(tuple(float(v) for v in value), tag, digest)

    raise TypeError(f"unknown spec type {type(spec).__name__}")
