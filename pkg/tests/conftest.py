"""Shared fixtures, random-instance builders and independent oracles.

Oracle helpers here deliberately avoid the package's own quadrature and
evaluation paths: gradients come from central differences, integrals from
plain midpoint sums on lattice grids.
"""

import math

import numpy as np
import pytest

import torusdrift as td


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------

def make_sin_field(dim=1, axis=0, const=2.0, amp=1.0):
    """const + amp * sin(2 pi x_axis), strictly positive for const > amp."""
    k = tuple(1 if j == axis else 0 for j in range(dim))
    return td.ScalarField(dim, [(k, 0.0, amp)], const=const)


def make_sincos_field():
    """2 + sin(2 pi y1) cos(2 pi y2) via the product-to-sum identity."""
    return td.ScalarField(2, [((1, 1), 0.0, 0.5), ((1, -1), 0.0, 0.5)],
                          const=2.0)


def make_peirone_field(dim=1):
    """cos^2(pi x1) / pi, squared mode with a half-integer frequency."""
    c = 1.0 / math.sqrt(math.pi)
    k = (0.5,) + (0,) * (dim - 1)
    return td.ScalarField.squared(dim, [(k, c, 0.0)])


def irrational_xi():
    xi = np.array([1.0, math.sqrt(2.0)])
    return xi / np.linalg.norm(xi)


def make_shear_diffeo(eps=0.05):
    return td.Diffeomorphism(
        np.array([[1, 1], [0, 1]]),
        [td.ScalarField(2, [((0, 1), 0.0, eps)]),
         td.ScalarField(2, [((1, 0), 0.0, eps)])])


def random_raw_field(rng, dim, max_terms=3, amp=0.3, const=2.0, max_freq=2):
    terms, seen = [], set()
    for _ in range(int(rng.integers(1, max_terms + 1))):
        k = tuple(int(v) for v in rng.integers(-max_freq, max_freq + 1, dim))
        if all(v == 0 for v in k) or k in seen:
            continue
        seen.add(k)
        terms.append((k, rng.uniform(-amp, amp), rng.uniform(-amp, amp)))
    return td.ScalarField(dim, terms, const=const)


def gentle_field(rng, dim, const=2.0):
    """Small-amplitude field: keeps flow shear low so integrator-accuracy
    properties are tested in their well-conditioned regime."""
    terms, seen = [], set()
    for _ in range(int(rng.integers(1, 3))):
        k = tuple(int(v) for v in rng.integers(-1, 2, dim))
        if all(v == 0 for v in k) or k in seen:
            continue
        seen.add(k)
        sgn = lambda: rng.choice([-1.0, 1.0])
        terms.append((k, sgn() * rng.uniform(0.02, 0.08),
                      sgn() * rng.uniform(0.02, 0.08)))
    return td.ScalarField(dim, terms, const=const)


def gentle_spec(rng, families=("direction", "oned", "generic", "current")):
    dim = int(rng.integers(1, 3))
    kind = rng.choice(families)
    if dim == 1 or kind == "oned":
        return td.OneDField(gentle_field(rng, 1))
    if kind == "direction":
        xi = rng.standard_normal(dim)
        xi /= np.linalg.norm(xi)
        return td.DirectionField(gentle_field(rng, dim), xi)
    if kind == "generic":
        return td.GenericField([gentle_field(rng, dim) for _ in range(dim)])
    return td.CurrentField(td.MatrixField.isotropic(dim, 1.0),
                           gentle_field(rng, dim))


def random_spec(rng, families=("direction", "oned", "generic", "current")):
    dim = int(rng.integers(1, 3))
    kind = rng.choice(families)
    if dim == 1 or kind == "oned":
        return td.OneDField(random_raw_field(rng, 1))
    if kind == "direction":
        xi = rng.standard_normal(dim)
        xi /= np.linalg.norm(xi)
        return td.DirectionField(random_raw_field(rng, dim), xi)
    if kind == "generic":
        return td.GenericField([random_raw_field(rng, dim) for _ in range(dim)])
    return td.CurrentField(td.MatrixField.isotropic(dim, 1.0),
                           random_raw_field(rng, dim))


# ---------------------------------------------------------------------------
# oracles (independent of the package's numerical paths)
# ---------------------------------------------------------------------------

def fd_gradient(field, x, h=1e-5):
    """Central finite-difference gradient, O(h^2)."""
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    for j in range(len(x)):
        xp, xm = x.copy(), x.copy()
        xp[j] += h
        xm[j] -= h
        g[j] = (field.value(xp) - field.value(xm)) / (2.0 * h)
    return g


def midpoint_integral(fn, dim, n=512):
    """Plain midpoint rule on the unit cell; spectrally accurate for
    smooth periodic integrands.  Independent of the package quadrature."""
    axes = [(np.arange(n) + 0.5) / n] * dim
    grids = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    return float(np.mean(fn(pts)))


SQRT3 = math.sqrt(3.0)

#: 2D harmonic mean of 2 + sin(2 pi y1) cos(2 pi y2); frozen from two
#: independent oracles (tensor quadrature and the reduction to
#: (mean of 1/sqrt(4 - cos^2))^{-1} in 30-digit arithmetic)
ABAR_2D = 1.8636167832448965


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
