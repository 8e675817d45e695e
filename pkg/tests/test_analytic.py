"""Closed-form drift predictions: harmonic means and the full case split."""

import math

import numpy as np
import pytest

import torusdrift as td
from torusdrift.analytic import (
    CASE_CURRENT,
    CASE_IRRATIONAL_POSITIVE,
    CASE_IRRATIONAL_VANISHING,
    CASE_ONED_POSITIVE,
    CASE_ONED_VANISHING,
    CASE_RATIONAL_LINE_POSITIVE,
    CASE_RATIONAL_LINE_VANISHING,
    CASE_RECTIFIED,
    CASE_UNSUPPORTED,
    signed_harmonic_mean,
)
from torusdrift.errors import VanishesOnLine, VanishingField

from conftest import (
    ABAR_2D,
    SQRT3,
    irrational_xi,
    make_peirone_field,
    make_shear_diffeo,
    make_sincos_field,
    make_sin_field,
    midpoint_integral,
    random_raw_field,
)


class TestHarmonicMean:
    def test_constant(self):
        assert td.harmonic_mean(td.ScalarField.constant(2.5, 2)) == \
            pytest.approx(2.5, rel=1e-13)

    def test_closed_form_1d(self):
        # integral of 1/(2+sin) over a period = 1/sqrt(3)
        assert td.harmonic_mean(make_sin_field()) == pytest.approx(SQRT3,
                                                                   rel=1e-12)

    def test_2d_frozen_oracle_value(self):
        a = make_sincos_field()
        got = td.harmonic_mean(a)
        assert got == pytest.approx(ABAR_2D, abs=1e-13)
        # independent midpoint oracle agrees
        oracle = 1.0 / midpoint_integral(lambda p: 1.0 / a.values(p), 2, 512)
        assert got == pytest.approx(oracle, rel=1e-12)

    def test_vanishing_raises(self):
        with pytest.raises(VanishingField):
            td.harmonic_mean(make_peirone_field())

    def test_signed_negative(self):
        b = td.ScalarField(1, [((1,), 0.0, -1.0)], const=-2.0)
        assert signed_harmonic_mean(b) == pytest.approx(-SQRT3, rel=1e-12)

    def test_harmonic_le_arithmetic(self, rng):
        for _ in range(10):
            a = random_raw_field(rng, 2, amp=0.5, const=2.0)
            hm = td.harmonic_mean(a)
            am = midpoint_integral(a.values, 2, 256)
            assert hm <= am + 1e-12

    def test_scaling_equivariance(self, rng):
        a = random_raw_field(rng, 1, amp=0.5, const=2.0)
        c = 3.7
        assert td.harmonic_mean(a.scaled(c)) == pytest.approx(
            c * td.harmonic_mean(a), rel=1e-12)


class TestLineHarmonicMean:
    def test_constant(self):
        a = td.ScalarField.constant(1.7, 2)
        assert td.line_harmonic_mean(a, [1.0, 0.0], 1.0, [0.0, 0.3]) == \
            pytest.approx(1.7, rel=1e-13)

    def test_quarter_offset_makes_line_constant(self):
        # cos(2 pi / 4) = 0 kills the oscillation along the line
        a = make_sincos_field()
        assert td.line_harmonic_mean(a, [1.0, 0.0], 1.0, [0.0, 0.25]) == \
            pytest.approx(2.0, rel=1e-12)

    def test_closed_form_family(self):
        a = make_sincos_field()
        for x2 in (0.0, 0.125, 0.2, 0.4):
            expect = math.sqrt(4.0 - math.cos(2 * math.pi * x2) ** 2)
            got = td.line_harmonic_mean(a, [1.0, 0.0], 1.0, [0.0, x2])
            assert got == pytest.approx(expect, rel=1e-12)

    def test_line_reduction_to_point_value(self):
        # a independent of the line parameter: harmonic mean = point value
        a = td.ScalarField(2, [((0, 1), 0.5, 0.0)], const=2.0)
        got = td.line_harmonic_mean(a, [1.0, 0.0], 1.0, [0.7, 0.2])
        assert got == pytest.approx(a.value([0.0, 0.2]), rel=1e-12)

    def test_vanishing_line_raises(self):
        a = make_peirone_field(dim=2)
        with pytest.raises(VanishesOnLine):
            td.line_harmonic_mean(a, [1.0, 0.0], 1.0, [0.0, 0.3])


class TestPredictDrift:
    def test_oned_positive(self):
        p = td.predict_drift(td.OneDField(make_sin_field()), [0.0])
        assert p.case_tag == CASE_ONED_POSITIVE
        assert p.value[0] == pytest.approx(SQRT3, rel=1e-12)

    def test_oned_negative(self):
        b = td.ScalarField(1, [((1,), 0.0, -1.0)], const=-2.0)
        p = td.predict_drift(td.OneDField(b), [0.0])
        assert p.case_tag == CASE_ONED_POSITIVE
        assert p.value[0] == pytest.approx(-SQRT3, rel=1e-12)

    def test_oned_vanishing(self):
        p = td.predict_drift(td.OneDField(make_peirone_field()), [0.2])
        assert p.case_tag == CASE_ONED_VANISHING and p.value == (0.0,)

    def test_oned_sign_changing(self):
        b = td.ScalarField(1, [((1,), 0.0, 1.0)], const=0.5)
        p = td.predict_drift(td.OneDField(b), [0.0])
        assert p.case_tag == CASE_ONED_VANISHING and p.value == (0.0,)

    def test_irrational_positive(self):
        xi = irrational_xi()
        spec = td.DirectionField(make_sincos_field(), xi)
        dclass = td.classify_direction(xi, 64)
        p = td.predict_drift(spec, [0.3, 0.9], dclass)
        assert p.case_tag == CASE_IRRATIONAL_POSITIVE
        assert np.allclose(p.vector, ABAR_2D * xi, rtol=1e-12)

    def test_irrational_vanishing(self):
        xi = irrational_xi()
        spec = td.DirectionField(make_peirone_field(dim=2), xi)
        p = td.predict_drift(spec, [0.3, 0.9], td.classify_direction(xi, 64))
        assert p.case_tag == CASE_IRRATIONAL_VANISHING
        assert p.value == (0.0, 0.0)

    def test_rational_line_positive_depends_on_start(self):
        spec = td.DirectionField(make_sincos_field(), [1.0, 0.0])
        dclass = td.classify_direction([1.0, 0.0], 8)
        p0 = td.predict_drift(spec, [0.0, 0.0], dclass)
        p1 = td.predict_drift(spec, [0.0, 0.25], dclass)
        assert p0.case_tag == CASE_RATIONAL_LINE_POSITIVE
        assert p0.value[0] == pytest.approx(SQRT3, rel=1e-12)
        assert p1.value[0] == pytest.approx(2.0, rel=1e-12)

    def test_rational_line_vanishing(self):
        # every e1-line through the cos^2 factor crosses a zero
        spec = td.DirectionField(make_peirone_field(dim=2), [1.0, 0.0])
        dclass = td.classify_direction([1.0, 0.0], 8)
        p = td.predict_drift(spec, [0.0, 0.3], dclass)
        assert p.case_tag == CASE_RATIONAL_LINE_VANISHING
        assert p.value == (0.0, 0.0)

    def test_rectified_integer_inverse_applied(self):
        a = td.ScalarField(2, [((1, 0), 0.0, 1.0)], const=2.0)
        spec = td.RectifiedField(a, [1.0, 0.0], make_shear_diffeo())
        dclass = td.classify_direction([1.0, 0.0], 8)
        p = td.predict_drift(spec, [0.1, 0.2], dclass)
        assert p.case_tag == CASE_RECTIFIED
        # A^{-1} e1 = (1, 0); the line harmonic mean is sqrt(3)
        assert np.allclose(p.vector, [SQRT3, 0.0], rtol=1e-12)

    def test_rectified_identity_matches_direction(self):
        a = make_sincos_field()
        dclass = td.classify_direction([1.0, 0.0], 8)
        x = [0.17, 0.31]
        pr = td.predict_drift(
            td.RectifiedField(a, [1.0, 0.0], td.Diffeomorphism.identity(2)),
            x, dclass)
        pd = td.predict_drift(td.DirectionField(a, [1.0, 0.0]), x, dclass)
        assert np.max(np.abs(pr.vector - pd.vector)) <= 1e-12

    def test_current_always_zero(self):
        v = make_sincos_field()
        spec = td.CurrentField(td.MatrixField.isotropic(2, 0.5), v)
        p = td.predict_drift(spec, [0.4, 0.4])
        assert p.case_tag == CASE_CURRENT and p.value == (0.0, 0.0)

    def test_generic_unsupported(self):
        spec = td.GenericField([td.ScalarField.constant(1.0, 2)] * 2)
        p = td.predict_drift(spec, [0.0, 0.0])
        assert p.case_tag == CASE_UNSUPPORTED and not p.supported

    def test_indeterminate_unsupported(self):
        spec = td.DirectionField(td.ScalarField.constant(1.0, 2), [1.0, 0.0])
        p = td.predict_drift(spec, [0.0, 0.0], td.Indeterminate(8))
        assert p.case_tag == CASE_UNSUPPORTED

    def test_requires_direction_class(self):
        spec = td.DirectionField(td.ScalarField.constant(1.0, 2), [1.0, 0.0])
        with pytest.raises(ValueError, match="direction_class"):
            td.predict_drift(spec, [0.0, 0.0])

    def test_pure_and_deterministic(self):
        xi = irrational_xi()
        spec = td.DirectionField(make_sincos_field(), xi)
        dclass = td.classify_direction(xi, 64)
        p1 = td.predict_drift(spec, [0.3, 0.9], dclass)
        p2 = td.predict_drift(spec, [0.3, 0.9], dclass)
        assert p1 == p2  # bit-for-bit, digest included
