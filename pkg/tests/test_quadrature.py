"""Quadrature helpers: nodes, refinement, line tables, minimum polish."""

import math

import numpy as np
import pytest

from torusdrift.quadrature import (
    LineQuadrature,
    gauss_legendre_01,
    refine_tensor_integral,
    refined_line_minimum,
    tensor_integral,
)


def test_gauss_legendre_unit_interval_polynomials():
    x, w = gauss_legendre_01(8)
    assert w.sum() == pytest.approx(1.0, rel=1e-14)
    for p in range(0, 15):  # exact through degree 2n-1
        assert np.dot(w, x**p) == pytest.approx(1.0 / (p + 1), rel=1e-13)


def test_tensor_integral_separable():
    f = lambda pts: np.sin(2 * np.pi * pts[:, 0]) ** 2 * np.cos(
        2 * np.pi * pts[:, 1]) ** 2
    # integral = 1/2 * 1/2
    assert tensor_integral(f, 2, 64) == pytest.approx(0.25, rel=1e-12)


def test_refinement_converges():
    f = lambda pts: 1.0 / (2.0 + np.sin(2 * np.pi * pts[:, 0]))
    got = refine_tensor_integral(f, 1, n0=8)
    assert got == pytest.approx(1.0 / math.sqrt(3.0), rel=1e-12)


def test_line_quadrature_cumulative_matches_trapezoid_oracle():
    f = lambda s: np.exp(np.sin(2 * np.pi * np.asarray(s)))
    quad = LineQuadrature(f, 0.0, 3.0)
    s = np.linspace(0.0, 3.0, 300_001)
    vals = f(s)
    cum = np.concatenate([[0.0], np.cumsum((vals[1:] + vals[:-1]) * 0.5
                                           * np.diff(s))])
    for u in (0.37, 1.0, 2.218, 3.0):
        oracle = float(np.interp(u, s, cum))
        assert quad.integral_from_base(u) == pytest.approx(oracle, abs=1e-9)


def test_refined_line_minimum_off_grid_tangency():
    # zero tangency strictly between any grid points
    star = 0.371234567
    f = lambda s: (np.asarray(s) - star) ** 2
    got = refined_line_minimum(f, 0.0, 1.0, per_unit=64)
    assert got <= 1e-15


def test_refined_line_minimum_polishes_secondary_dip():
    # the sampled argmin sits in the wide dip; the tangential zero in the
    # narrow dip must still be found by polishing secondary minima
    star = 0.75012345
    f = lambda s: np.minimum((np.asarray(s) - 0.25) ** 2 + 1e-4,
                             40.0 * (np.asarray(s) - star) ** 2)
    got = refined_line_minimum(f, 0.0, 1.0, per_unit=64)
    assert got <= 1e-12
