"""Field types: evaluation, gradients, diffeomorphisms, classification."""

import math

import numpy as np
import pytest

import torusdrift as td
from torusdrift.errors import DimensionMismatch, SingularJacobian
from torusdrift.fields import (
    NEGATIVE,
    POSITIVE,
    SIGN_CHANGING,
    VANISHING,
    VanishingOrNegative,
    classify_positivity,
)

from conftest import (
    fd_gradient,
    irrational_xi,
    make_peirone_field,
    make_shear_diffeo,
    make_sin_field,
    make_sincos_field,
    random_raw_field,
    random_spec,
)


class TestScalarField:
    def test_constant_value(self):
        f = td.ScalarField.constant(1.0, dim=3)
        assert f.value([0.2, 0.4, 0.9]) == 1.0

    def test_sin_at_quarter(self):
        # 2 + sin(2 pi y) at y = 1/4 -> 3
        f = make_sin_field()
        assert f.value([0.25]) == pytest.approx(3.0, abs=1e-15)

    def test_peirone_vanishes_at_half(self):
        a = make_peirone_field()
        assert abs(a.value([0.5])) <= 1e-12
        # and equals cos^2(pi y)/pi elsewhere
        y = 0.17
        assert a.value([y]) == pytest.approx(math.cos(math.pi * y) ** 2 / math.pi,
                                             rel=1e-14)

    def test_squared_half_integer_value_is_periodic(self, rng):
        a = make_peirone_field()
        for _ in range(20):
            y = rng.uniform(-2, 2, 1)
            k = rng.integers(-2, 3, 1).astype(float)
            assert a.value(y + k) == pytest.approx(a.value(y), abs=1e-14)

    def test_gradient_constant_is_zero(self):
        f = td.ScalarField.constant(4.0, dim=2)
        assert np.all(f.gradient([0.3, 0.7]) == 0.0)

    def test_gradient_sin_at_zero(self):
        f = td.ScalarField(1, [((1,), 0.0, 1.0)])
        assert f.gradient([0.0])[0] == pytest.approx(2.0 * math.pi, rel=1e-15)

    def test_gradient_matches_finite_differences(self, rng):
        for _ in range(25):
            dim = int(rng.integers(1, 4))
            f = random_raw_field(rng, dim)
            x = rng.random(dim)
            assert np.allclose(f.gradient(x), fd_gradient(f, x), atol=1e-7)

    def test_squared_gradient_chain_rule(self, rng):
        a = make_peirone_field()
        for _ in range(10):
            x = rng.random(1)
            assert np.allclose(a.gradient(x), fd_gradient(a, x), atol=1e-7)

    def test_validation_rejects_duplicates(self):
        with pytest.raises(ValueError, match="duplicate"):
            td.ScalarField(1, [((1,), 1.0, 0.0), ((1,), 0.0, 1.0)])

    def test_validation_rejects_zero_frequency_term(self):
        with pytest.raises(ValueError, match="const"):
            td.ScalarField(2, [((0, 0), 1.0, 0.0)])

    def test_raw_mode_rejects_half_integer(self):
        with pytest.raises(ValueError, match="integer"):
            td.ScalarField(1, [((0.5,), 1.0, 0.0)])

    def test_squared_mode_rejects_mixed_parity(self):
        with pytest.raises(ValueError, match="parity|periodic"):
            td.ScalarField.squared(1, [((0.5,), 1.0, 0.0), ((1,), 0.5, 0.0)])

    def test_squared_mode_rejects_const_with_half_integer(self):
        with pytest.raises(ValueError):
            td.ScalarField.squared(1, [((0.5,), 1.0, 0.0)], const=0.3)

    def test_offset_only_in_squared_mode(self):
        with pytest.raises(ValueError):
            td.ScalarField(1, [((1,), 1.0, 0.0)], offset=0.5)

    def test_sup_bound(self, rng):
        for _ in range(10):
            f = random_raw_field(rng, 2)
            pts = rng.random((200, 2))
            assert np.max(np.abs(f.values(pts))) <= f.sup_bound() + 1e-12

    def test_dimension_mismatch(self):
        f = make_sin_field(dim=2)
        with pytest.raises(DimensionMismatch):
            f.value([0.1])


class TestPositivity:
    def test_positive_raw(self):
        assert make_sin_field().positivity.kind == POSITIVE

    def test_vanishing_peirone(self):
        rep = make_peirone_field().positivity
        assert rep.kind == VANISHING
        assert rep.min_value <= 1e-12

    def test_sign_changing(self):
        f = td.ScalarField(1, [((1,), 0.0, 1.0)])  # sin(2 pi y)
        assert f.positivity.kind == SIGN_CHANGING

    def test_negative(self):
        f = td.ScalarField(1, [((1,), 0.0, -1.0)], const=-2.0)
        assert f.positivity.kind == NEGATIVE

    def test_squared_with_ridge_certified(self):
        f = td.ScalarField.squared(1, [((1,), 1.0, 0.0)], offset=0.5)
        rep = f.positivity
        assert rep.kind == POSITIVE and rep.certified

    def test_hidden_zero_detected_between_grid_points(self):
        # sin^2 touches zero at 0 and 1/2 exactly on the grid; shift it
        f = td.ScalarField.squared(1, [((1,), 0.31830988618, 0.417)])
        rep = classify_positivity(f)
        assert rep.kind == VANISHING

    def test_squared_grid_nonnegativity(self, rng):
        # squared-mode values are >= 0 on a fine grid, and >= m with ridge
        for _ in range(10):
            dim = int(rng.integers(1, 3))
            inner = random_raw_field(rng, dim, amp=0.5, const=0.2)
            m = float(rng.uniform(0.0, 0.4))
            f = td.ScalarField.squared(dim, inner.terms, const=inner.const,
                                       offset=m)
            n = 256 if dim == 1 else 64
            axes = [np.arange(n) / n] * dim
            pts = np.stack([g.ravel() for g in np.meshgrid(*axes,
                                                           indexing="ij")],
                           axis=-1)
            vals = f.values(pts)
            assert float(vals.min()) >= 0.0
            assert float(vals.min()) >= m


class TestFieldSpecs:
    def test_direction_constant_unit(self):
        spec = td.DirectionField(td.ScalarField.constant(1.0, 2), [1.0, 0.0])
        assert np.allclose(spec.velocity([0.37, 0.91]), [1.0, 0.0])

    def test_direction_requires_unit_xi(self):
        with pytest.raises(ValueError, match="unit"):
            td.DirectionField(td.ScalarField.constant(1.0, 2), [1.0, 1.0])

    def test_direction_rejects_negative_factor(self):
        f = td.ScalarField(2, [((1, 0), 0.0, 2.0)], const=-3.0)
        with pytest.raises(VanishingOrNegative):
            td.DirectionField(f, [1.0, 0.0])

    def test_current_identity_matrix_gradient(self):
        # A = I, v = sin(2 pi x1)/(2 pi): b(0) = (cos(0), 0) = e1
        v = td.ScalarField(2, [((1, 0), 0.0, 1.0 / (2 * math.pi))])
        spec = td.CurrentField(td.MatrixField.isotropic(2, 1.0), v)
        assert np.allclose(spec.velocity([0.0, 0.0]), [1.0, 0.0], atol=1e-15)

    def test_rectified_identity_reduces_to_direction(self, rng):
        a = make_sincos_field()
        direction = td.DirectionField(a, [1.0, 0.0])
        rectified = td.RectifiedField(a, [1.0, 0.0], td.Diffeomorphism.identity(2))
        pts = rng.random((100, 2))
        assert np.max(np.abs(rectified.velocities(pts)
                             - direction.velocities(pts))) <= 1e-14

    def test_field_periodicity(self, rng):
        # |b(x + k) - b(x)| <= 1e-12 for 100 random (x, k in {-2..2}^d)
        for _ in range(10):
            spec = random_spec(rng)
            for _ in range(10):
                x = rng.uniform(-1, 2, spec.dim)
                k = rng.integers(-2, 3, spec.dim).astype(float)
                assert np.max(np.abs(spec.velocity(x + k)
                                     - spec.velocity(x))) <= 1e-12

    def test_velocity_within_sup_bound(self, rng):
        for _ in range(10):
            spec = random_spec(rng)
            pts = rng.random((100, spec.dim))
            speeds = np.linalg.norm(spec.velocities(pts), axis=1)
            assert np.max(speeds) <= spec.sup_bound() + 1e-9


class TestMatrixField:
    def test_symmetry_and_ridge_definiteness(self, rng):
        entries = [[random_raw_field(rng, 2, const=0.0) for _ in range(2)]
                   for _ in range(2)]
        m = td.MatrixField(2, entries, ridge=0.3)
        pts = rng.random((50, 2))
        vals = m.values(pts)
        assert np.max(np.abs(vals - np.swapaxes(vals, 1, 2))) == 0.0
        for _ in range(20):
            z = rng.standard_normal(2)
            x = rng.random(2)
            quad = z @ m.value(x) @ z
            assert quad >= 0.3 * z @ z - 1e-12

    def test_isotropic(self):
        m = td.MatrixField.isotropic(3, 2.0)
        assert np.allclose(m.value([0.1, 0.2, 0.3]), 2.0 * np.eye(3))


class TestDiffeomorphism:
    def test_identity_inverse(self, rng):
        phi = td.Diffeomorphism.identity(2)
        y = rng.random(2)
        assert np.allclose(phi.inverse(y), y, atol=1e-14)

    def test_linear_unimodular_inverse(self):
        phi = td.Diffeomorphism(np.array([[1, 1], [0, 1]]))
        y = np.array([0.7, 0.3])
        # A^{-1} = [[1,-1],[0,1]]
        assert np.allclose(phi.inverse(y), [0.4, 0.3], atol=1e-12)
        assert np.array_equal(phi.lattice_inv, [[1, -1], [0, 1]])

    def test_round_trip(self, rng):
        phi = make_shear_diffeo(0.08)
        for _ in range(20):
            x = rng.uniform(-1, 2, 2)
            assert np.max(np.abs(phi.inverse(phi.forward(x)) - x)) <= 1e-10

    def test_equivariance(self, rng):
        phi = make_shear_diffeo()
        A = phi.lattice.astype(float)
        for _ in range(25):
            x = rng.random(2)
            k = rng.integers(-2, 3, 2).astype(float)
            assert np.max(np.abs(phi.forward(x + k) - phi.forward(x)
                                 - A @ k)) <= 1e-12

    def test_rejects_non_unimodular(self):
        with pytest.raises(ValueError, match="det"):
            td.Diffeomorphism(np.array([[2, 0], [0, 1]]))

    def test_rejects_degenerate_jacobian(self):
        # Phi_sharp large enough that det(grad Phi) changes sign
        big = td.ScalarField(2, [((1, 0), 0.0, 0.5)])
        zero = td.ScalarField.constant(0.0, 2)
        with pytest.raises(SingularJacobian):
            td.Diffeomorphism(np.eye(2, dtype=int), [big, zero])

    def test_jacobian_matches_finite_differences(self, rng):
        phi = make_shear_diffeo()
        x = rng.random(2)
        jac = phi.jacobian(x)
        h = 1e-6
        for j in range(2):
            xp, xm = x.copy(), x.copy()
            xp[j] += h
            xm[j] -= h
            col = (phi.forward(xp) - phi.forward(xm)) / (2 * h)
            assert np.allclose(jac[:, j], col, atol=1e-8)


class TestClassifyDirection:
    def test_axis_direction(self):
        got = td.classify_direction([1.0, 0.0], 8)
        assert isinstance(got, td.RationalPeriod)
        assert got.k == (1, 0) and got.T == pytest.approx(1.0)

    def test_diagonal(self):
        xi = np.array([1.0, 1.0]) / math.sqrt(2.0)
        got = td.classify_direction(xi, 8)
        assert isinstance(got, td.RationalPeriod)
        assert got.k == (1, 1) and got.T == pytest.approx(math.sqrt(2.0))

    def test_totally_irrational(self):
        got = td.classify_direction(irrational_xi(), 64, tol=1e-9)
        assert isinstance(got, td.TotallyIrrational)

    def test_indeterminate_in_3d(self):
        # orthogonal to (1, 1, -1) but not parallel to any lattice vector
        xi = np.array([1.0, math.sqrt(2.0), 1.0 + math.sqrt(2.0)])
        xi /= np.linalg.norm(xi)
        got = td.classify_direction(xi, 8, tol=1e-9)
        assert isinstance(got, td.Indeterminate)

    def test_negative_axis(self):
        got = td.classify_direction([-1.0, 0.0], 8)
        assert isinstance(got, td.RationalPeriod)
        assert got.k == (-1, 0)
