"""Divergence-curl invariance tests and analytic invariant densities.

A probability measure mu is invariant for the flow of b exactly when
integral of b . grad(psi) d(mu) vanishes for every periodic C^1 test
function psi.  This module evaluates that residual against empirical
histogram measures and against analytic densities (the 1D harmonic
density and the rectified-field density), which are represented on
midpoint evaluation grids because they are not trigonometric polynomials.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .analytic import signed_harmonic_mean
from .errors import DimensionMismatch, VanishingField
from .ergodic import EmpiricalMeasure, grid_centers
from .fields import (
    NEGATIVE,
    POSITIVE,
    SQUARED,
    Diffeomorphism,
    FieldSpec,
    ScalarField,
)


@dataclass(frozen=True)
class TestFunction:
    """Periodic C^1 test function psi with its analytic gradient."""
    psi: ScalarField

    def __post_init__(self):
        if self.psi.mode != "raw":
            raise ValueError("test functions must be raw trig polynomials")

    @property
    def dim(self) -> int:
        return self.psi.dim

    def values(self, pts) -> np.ndarray:
        return self.psi.values(pts)

    def gradients(self, pts) -> np.ndarray:
        return self.psi.gradients(pts)

    def sup_bound(self) -> float:
        return self.psi.sup_bound()


def random_test_panel(dim: int, count: int = 10, freq_bound: int = 3,
                      seed: int = 0) -> list:
    """Deterministic panel of random trig test functions, unit coefficient norm.

    Frequencies run over a half-lattice with |k|_inf <= freq_bound (one of
    each +-k pair); cos/sin coefficients are standard normal, then scaled
    so the coefficient vector has Euclidean norm 1.
    """
    rng = np.random.default_rng(seed)
    freqs = []
    rngs = np.arange(-freq_bound, freq_bound + 1)
    grids = np.meshgrid(*([rngs] * dim), indexing="ij")
    lattice = np.stack([g.ravel() for g in grids], axis=-1)
    for k in lattice:
        if not np.any(k):
            continue
        nz = k[np.flatnonzero(k)[0]]
        if nz > 0:  # canonical representative of the +-k pair
            freqs.append(tuple(int(v) for v in k))
    panel = []
    for _ in range(count):
        coef = rng.standard_normal((len(freqs), 2))
        coef /= np.linalg.norm(coef)
        terms = [(k, c, s) for k, (c, s) in zip(freqs, coef)]
        panel.append(TestFunction(ScalarField(dim, terms)))
    return panel


class DensityField:
    """Probability density on the torus, tabulated on a midpoint grid."""

    def __init__(self, dim: int, n: int, values: np.ndarray, source=None):
        values = np.asarray(values, dtype=np.float64).reshape((n,) * dim)
        if float(values.min()) < 0.0:
            raise ValueError("density values must be nonnegative")
        total = float(values.mean())  # midpoint rule on the unit cell
        if abs(total - 1.0) > 1e-10:
            raise ValueError(f"density must integrate to 1, got {total!r}")
        self.dim = dim
        self.n = n
        self.values = values
        self.values.setflags(write=False)
        self.source = source  # optional callable, for diagnostics

    @classmethod
    def from_callable(cls, fn, dim: int, n: int) -> "DensityField":
        pts = grid_centers(dim, n)
        raw = np.asarray(fn(pts), dtype=np.float64)
        norm = raw.mean()
        if norm <= 0.0:
            raise ValueError("density normalization is not positive")
        return cls(dim, n, raw / norm, source=fn)

    def centers(self) -> np.ndarray:
        return grid_centers(self.dim, self.n)

    def bin_weights(self) -> np.ndarray:
        """Midpoint-rule weights per bin (flat, sums to 1)."""
        w = self.values.ravel()
        return w / w.sum()


Measure = Union[EmpiricalMeasure, DensityField]


def divcurl_residual(spec: FieldSpec, mu: Measure,
                     psi: Union[TestFunction, ScalarField]) -> float:
    """Residual integral of b . grad(psi) against the measure.

    Zero (up to quadrature) for invariant measures; for an empirical
    measure along a trajectory it equals (psi(X(t)) - psi(x))/t up to
    binning error.
    """
    field = psi.psi if isinstance(psi, TestFunction) else psi
    if field.dim != spec.dim or mu.dim != spec.dim:
        raise DimensionMismatch("spec, measure and test function must share dim")
    pts = mu.centers()
    integrand = np.sum(spec.velocities(pts) * field.gradients(pts), axis=1)
    if isinstance(mu, EmpiricalMeasure):
        return float(mu.weights.ravel() @ integrand)
    return float(mu.bin_weights() @ integrand)


def harmonic_density_1d(b: ScalarField, *, n: int = 1024) -> DensityField:
    """Invariant density bbar/b for a nonvanishing 1D field b.

    Raises VanishingField when b vanishes or changes sign (no invariant
    density exists; limiting measures concentrate on equilibria).
    """
    if b.dim != 1:
        raise DimensionMismatch("harmonic density requires a 1D field")
    kind = b.positivity.kind
    if kind not in (POSITIVE, NEGATIVE):
        raise VanishingField("1D field vanishes; no invariant density exists")
    bbar = signed_harmonic_mean(b)
    return DensityField.from_callable(lambda pts: bbar / b.values(pts), 1, n)


def rectified_density(a: ScalarField, phi: Diffeomorphism, *,
                      n: int = 256) -> DensityField:
    """Invariant density det(grad Phi) / (a o Phi), normalized on the grid.

    Requires a strictly positive factor: squared mode with offset 0 is
    rejected outright, raw fields need a positive grid certificate.
    """
    if a.dim != phi.dim:
        raise DimensionMismatch("factor and diffeomorphism disagree on dim")
    if a.mode == SQUARED and a.offset == 0.0:
        raise VanishingField("squared-mode factor with zero offset may vanish")
    if a.positivity.kind != POSITIVE:
        raise VanishingField("factor must be strictly positive")

    def sigma(pts):
        dets = np.linalg.det(phi.jacobians(pts))
        return dets / a.values(phi.forward_many(pts))

    pts = grid_centers(phi.dim, n)
    raw = sigma(pts)
    if raw.mean() < 0.0:  # orientation-reversing Phi: flip once, globally
        flipped = lambda q: -sigma(q)
        return DensityField.from_callable(flipped, phi.dim, n)
    return DensityField.from_callable(sigma, phi.dim, n)
