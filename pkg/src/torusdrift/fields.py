"""Periodic scalar/matrix/vector fields on the torus and their derivatives.

Scalar fields are real trigonometric polynomials

    q(x) = c0 + sum_k [ c_k cos(2 pi k.x) + s_k sin(2 pi k.x) ]

evaluated either directly (RAW mode) or as q(x)^2 + m (SQUARED mode), the
latter giving nonnegativity by construction.  RAW fields must use integer
frequencies.  SQUARED fields may use half-integer frequencies as long as,
in every coordinate, all frequencies share the same parity (then q flips
sign under a unit translation and q^2 stays Z^d-periodic); this admits
fields such as cos^2(pi x) = (cos(2 pi (1/2) x))^2.
"""

from __future__ import annotations

import hashlib
import math
import warnings
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import minimize

from ._kernels import packing, purepy
from ._kernels.packing import (
    KIND_CURRENT,
    KIND_DIRECTION,
    KIND_GENERIC,
    KIND_ONED,
    KIND_RECTIFIED,
    MODE_RAW,
    MODE_SQUARED,
    PackedScalar,
    PackedSpec,
)
from .errors import DimensionMismatch, NewtonDivergence, SingularJacobian, TorusDriftError

RAW = "raw"
SQUARED = "squared"

_MODE_CODES = {RAW: MODE_RAW, SQUARED: MODE_SQUARED}

#: values closer to zero than this are treated as exact zeros of a field
EPS_ZERO = 1e-12

#: cap on positivity/validation grids (total points)
_GRID_CAP = 1 << 20


def _grid_resolution(dim: int, per_dim: int) -> int:
    r = per_dim
    while r > 2 and r**dim > _GRID_CAP:
        r //= 2
    return r


def _lattice_grid(dim: int, n: int) -> np.ndarray:
    """Points j/n per axis, as an (n^dim, dim) array (includes 0 and 1/2)."""
    axes = [np.arange(n) / n] * dim
    grids = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=-1)


# ---------------------------------------------------------------------------
# scalar fields
# ---------------------------------------------------------------------------

class ScalarField:
    """Real trigonometric polynomial on the d-torus with exact gradients.

    Parameters
    ----------
    dim : int
        Torus dimension d.
    terms : sequence of (freq, cos_coef, sin_coef)
        ``freq`` is a length-d tuple of frequencies.  Integers in RAW mode;
        integers or half-integers (with uniform per-coordinate parity) in
        SQUARED mode.  The zero frequency must go through ``const``.
    const : float
        Constant term c0 of the polynomial q.
    mode : {"raw", "squared"}
        RAW evaluates q; SQUARED evaluates q^2 + offset.
    offset : float
        The nonnegative ridge m in SQUARED mode (must be 0.0 in RAW mode).
    """

    def __init__(self, dim: int, terms: Sequence = (), const: float = 0.0,
                 mode: str = RAW, offset: float = 0.0):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        if mode not in _MODE_CODES:
            raise ValueError(f"mode must be '{RAW}' or '{SQUARED}'")
        if mode == RAW and offset != 0.0:
            raise ValueError("offset is only meaningful in squared mode")
        if offset < 0.0:
            raise ValueError("offset must be >= 0")
        self.dim = int(dim)
        self.mode = mode
        self.const = float(const)
        self.offset = float(offset)

        freqs, cc, sc = [], [], []
        seen = set()
        for freq, c, s in terms:
            k = tuple(float(v) for v in np.atleast_1d(freq))
            if len(k) != dim:
                raise DimensionMismatch(f"frequency {k} has wrong length")
            if all(v == 0.0 for v in k):
                raise ValueError("zero frequency belongs in const")
            if k in seen:
                raise ValueError(f"duplicate frequency {k}")
            seen.add(k)
            for v in k:
                if 2.0 * v != round(2.0 * v):
                    raise ValueError(f"frequency entry {v} is not a half-integer")
                if mode == RAW and v != round(v):
                    raise ValueError("raw mode requires integer frequencies")
            freqs.append(k)
            cc.append(float(c))
            sc.append(float(s))
        self._freqs = np.array(freqs, dtype=np.float64).reshape(len(freqs), dim)
        self._ccoef = np.array(cc, dtype=np.float64)
        self._scoef = np.array(sc, dtype=np.float64)
        for arr in (self._freqs, self._ccoef, self._scoef):
            arr.setflags(write=False)

        if mode == SQUARED and len(freqs) > 0:
            # per-coordinate parity of 2k must be uniform (const acts as even)
            doubled = np.round(2.0 * self._freqs).astype(np.int64)
            parity = doubled % 2
            for j in range(dim):
                kinds = set(parity[:, j].tolist())
                if self.const != 0.0:
                    kinds.add(0)
                if len(kinds) > 1:
                    raise ValueError(
                        "squared mode with mixed integer/half-integer "
                        f"frequencies in coordinate {j} is not Z^d-periodic")

    # -- constructors ------------------------------------------------------

    @classmethod
    def constant(cls, value: float, dim: int = 1) -> "ScalarField":
        return cls(dim, (), const=value)

    @classmethod
    def squared(cls, dim: int, terms: Sequence = (), const: float = 0.0,
                offset: float = 0.0) -> "ScalarField":
        return cls(dim, terms, const=const, mode=SQUARED, offset=offset)

    # -- evaluation --------------------------------------------------------

    @cached_property
    def packed(self) -> PackedScalar:
        return PackedScalar(self._freqs, self._ccoef, self._scoef,
                            self.const, _MODE_CODES[self.mode], self.offset)

    def values(self, pts) -> np.ndarray:
        """Field values at an (n, dim) array of points."""
        pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
        if pts.shape[1] != self.dim:
            raise DimensionMismatch(
                f"points have dim {pts.shape[1]}, field has dim {self.dim}")
        return purepy.scalar_values(*self.packed, pts)

    def value(self, x) -> float:
        return float(self.values(np.atleast_1d(np.asarray(x, float))[None, :])[0])

    def gradients(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
        if pts.shape[1] != self.dim:
            raise DimensionMismatch(
                f"points have dim {pts.shape[1]}, field has dim {self.dim}")
        return purepy.scalar_gradients(*self.packed, pts)

    def gradient(self, x) -> np.ndarray:
        return self.gradients(np.atleast_1d(np.asarray(x, float))[None, :])[0]

    # -- bounds and structure ---------------------------------------------

    @property
    def n_terms(self) -> int:
        return len(self._ccoef)

    @property
    def terms(self) -> Tuple:
        return tuple((tuple(f), c, s) for f, c, s in
                     zip(self._freqs, self._ccoef, self._scoef))

    def max_frequency(self) -> float:
        return float(np.max(np.abs(self._freqs))) if self.n_terms else 0.0

    def sup_bound(self) -> float:
        """Coefficient-sum upper bound on |value|."""
        q = abs(self.const) + float(np.sum(np.abs(self._ccoef))
                                    + np.sum(np.abs(self._scoef)))
        if self.mode == SQUARED:
            return q * q + self.offset
        return q

    def grad_sup_bound(self) -> float:
        """Coefficient-sum upper bound on |gradient| (Euclidean)."""
        amp = np.abs(self._ccoef) + np.abs(self._scoef)
        per_coord = purepy.TWO_PI * np.abs(self._freqs).T @ amp
        gq = float(np.linalg.norm(per_coord))
        if self.mode == SQUARED:
            q = abs(self.const) + float(np.sum(amp))
            return 2.0 * q * gq
        return gq

    def scaled(self, factor: float) -> "ScalarField":
        """Field with all values multiplied by ``factor`` (RAW mode only)."""
        if self.mode != RAW:
            raise ValueError("scaled() supports raw mode only")
        f = float(factor)
        terms = [(tuple(k), f * c, f * s) for k, c, s in self.terms]
        return ScalarField(self.dim, terms, const=f * self.const)

    def negated(self) -> "ScalarField":
        if self.mode != RAW:
            raise ValueError("cannot negate a squared-mode field")
        return self.scaled(-1.0)

    @cached_property
    def positivity(self) -> "PositivityReport":
        return classify_positivity(self)

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(f"{self.dim}|{self.mode}|{self.const!r}|{self.offset!r}".encode())
        h.update(self._freqs.tobytes())
        h.update(self._ccoef.tobytes())
        h.update(self._scoef.tobytes())
        return h.hexdigest()[:12]

    def __repr__(self):
        return (f"ScalarField(dim={self.dim}, mode={self.mode!r}, "
                f"n_terms={self.n_terms}, const={self.const})")


POSITIVE = "positive"
VANISHING = "vanishing"
SIGN_CHANGING = "sign-changing"
NEGATIVE = "negative"


@dataclass(frozen=True)
class PositivityReport:
    """Grid-plus-refinement certificate for the sign behaviour of a field."""
    kind: str            # positive / vanishing / sign-changing / negative
    min_value: float
    max_value: float
    argmin: Tuple[float, ...]
    certified: bool      # True when guaranteed by construction (q^2 + m, m>0)


def _refine_extremum(field: ScalarField, x0: np.ndarray, sign: float) -> float:
    """Polish min (sign=+1) or max (sign=-1) of the field from x0."""
    def fun(x):
        return sign * field.value(x)

    def jac(x):
        return sign * field.gradient(x)

    res = minimize(fun, x0, jac=jac, method="L-BFGS-B",
                   options={"gtol": 1e-12, "ftol": 1e-16, "maxiter": 200})
    return sign * float(res.fun), res.x


def classify_positivity(field: ScalarField, grid_n: int = 256,
                        eps_zero: float = EPS_ZERO) -> PositivityReport:
    """Decide whether a field is positive, vanishing, or changes sign.

    SQUARED mode with offset m > 0 is positive by construction.  Otherwise
    the field is evaluated on a lattice grid and both extrema are polished
    by local minimization with the analytic gradient.
    """
    if field.mode == SQUARED and field.offset > 0.0:
        return PositivityReport(POSITIVE, field.offset, field.sup_bound(),
                                (math.nan,) * field.dim, True)
    n = _grid_resolution(field.dim, grid_n)
    pts = _lattice_grid(field.dim, n)
    vals = field.values(pts)
    i_min, i_max = int(np.argmin(vals)), int(np.argmax(vals))
    vmin, xmin = _refine_extremum(field, pts[i_min], +1.0)
    vmax, _ = _refine_extremum(field, pts[i_max], -1.0)
    vmin = min(vmin, float(vals[i_min]))
    vmax = max(vmax, float(vals[i_max]))
    if vmin > eps_zero:
        if field.mode == SQUARED:
            warnings.warn(
                "squared-mode field with offset 0 has no detected zero; "
                "treating it as positive", stacklevel=2)
        kind = POSITIVE
    elif vmax < -eps_zero:
        kind = NEGATIVE
    elif vmin < -eps_zero:
        kind = SIGN_CHANGING
    else:
        kind = VANISHING
    return PositivityReport(kind, vmin, vmax, tuple(xmin), False)


# ---------------------------------------------------------------------------
# matrix fields A(x) = B(x)^T B(x) + m I
# ---------------------------------------------------------------------------

class MatrixField:
    """Symmetric nonnegative matrix field built as B(x)^T B(x) + ridge * I."""

    def __init__(self, dim: int, factor: Optional[Sequence] = None,
                 ridge: float = 0.0):
        if ridge < 0.0:
            raise ValueError("ridge must be >= 0")
        self.dim = int(dim)
        self.ridge = float(ridge)
        if factor is None:
            self.factor = None
        else:
            rows = [list(r) for r in factor]
            if len(rows) != dim or any(len(r) != dim for r in rows):
                raise DimensionMismatch("factor must be a d x d grid of fields")
            for r in rows:
                for f in r:
                    if f.dim != dim:
                        raise DimensionMismatch("factor entry dim mismatch")
            self.factor = tuple(tuple(r) for r in rows)

    @classmethod
    def isotropic(cls, dim: int, ridge: float = 1.0) -> "MatrixField":
        """A(x) = ridge * I (zero factor)."""
        return cls(dim, None, ridge)

    def values(self, pts) -> np.ndarray:
        """Matrix values at an (n, dim) array; returns (n, dim, dim)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
        n, d = pts.shape
        out = np.zeros((n, d, d))
        if self.factor is not None:
            B = np.stack(
                [np.stack([self.factor[i][j].values(pts) for j in range(d)],
                          axis=1) for i in range(d)], axis=1)
            out = np.einsum("nki,nkj->nij", B, B)
        out[:, np.arange(d), np.arange(d)] += self.ridge
        return out

    def value(self, x) -> np.ndarray:
        return self.values(np.atleast_1d(np.asarray(x, float))[None, :])[0]

    def entry_fields(self):
        """Factor entries row-major, zero-filled when factor is None."""
        zero = ScalarField.constant(0.0, self.dim)
        if self.factor is None:
            return [zero] * (self.dim * self.dim)
        return [self.factor[i][j] for i in range(self.dim)
                for j in range(self.dim)]


# ---------------------------------------------------------------------------
# torus diffeomorphisms  Phi(x) = A x + Phi_sharp(x)
# ---------------------------------------------------------------------------

def _int_det(m) -> int:
    """Exact determinant of an integer matrix (fraction-free elimination)."""
    a = [[int(v) for v in row] for row in m]
    n = len(a)
    sign, prev = 1, 1
    for k in range(n - 1):
        if a[k][k] == 0:
            for i in range(k + 1, n):
                if a[i][k] != 0:
                    a[k], a[i] = a[i], a[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) // prev
        prev = a[k][k]
    return sign * a[n - 1][n - 1]


class Diffeomorphism:
    """Torus diffeomorphism Phi(x) = A x + Phi_sharp(x).

    A is an integer matrix with |det A| = 1 (checked exactly) and
    Phi_sharp is a tuple of RAW scalar fields.  On construction the
    Jacobian determinant is checked on a validation grid: it must be
    bounded away from zero with constant sign.
    """

    def __init__(self, lattice, periodic: Optional[Sequence[ScalarField]] = None,
                 *, validate: bool = True, grid_n: int = 64):
        lattice = np.asarray(lattice)
        if lattice.ndim != 2 or lattice.shape[0] != lattice.shape[1]:
            raise DimensionMismatch("lattice matrix must be square")
        if not np.all(lattice == np.round(lattice)):
            raise ValueError("lattice matrix must be integer")
        self.dim = lattice.shape[0]
        self.lattice = lattice.astype(np.int64)
        self.lattice.setflags(write=False)
        det = _int_det(self.lattice)
        if abs(det) != 1:
            raise ValueError(f"|det A| must be 1, got {det}")
        self.lattice_det = det

        if periodic is None:
            periodic = tuple(ScalarField.constant(0.0, self.dim)
                             for _ in range(self.dim))
        periodic = tuple(periodic)
        if len(periodic) != self.dim:
            raise DimensionMismatch("periodic part needs one field per axis")
        for f in periodic:
            if f.dim != self.dim:
                raise DimensionMismatch("periodic component dim mismatch")
            if f.mode != RAW:
                raise ValueError("periodic part must use raw fields")
        self.periodic = periodic

        inv = np.linalg.inv(self.lattice.astype(float))
        inv_int = np.round(inv).astype(np.int64)
        if not np.array_equal(self.lattice @ inv_int,
                              np.eye(self.dim, dtype=np.int64)):
            raise ValueError("integer inverse check failed")
        self.lattice_inv = inv_int
        self.lattice_inv.setflags(write=False)

        self.jacobian_sign = 0
        if validate:
            self._validate_grid(grid_n)

    @classmethod
    def identity(cls, dim: int) -> "Diffeomorphism":
        return cls(np.eye(dim, dtype=int), validate=False)

    def _validate_grid(self, grid_n: int):
        n = _grid_resolution(self.dim, grid_n)
        pts = _lattice_grid(self.dim, n)
        dets = np.linalg.det(self.jacobians(pts))
        if np.min(np.abs(dets)) < 1e-10:
            raise SingularJacobian(
                "Jacobian determinant vanishes on the validation grid")
        signs = np.sign(dets)
        if signs.max() != signs.min():
            raise SingularJacobian("Jacobian determinant changes sign")
        self.jacobian_sign = int(signs[0])

    def is_identity(self) -> bool:
        return (np.array_equal(self.lattice, np.eye(self.dim, dtype=np.int64))
                and all(f.n_terms == 0 and f.const == 0.0 for f in self.periodic))

    def forward_many(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
        out = pts @ self.lattice.T.astype(float)
        for i, f in enumerate(self.periodic):
            out[:, i] += f.values(pts)
        return out

    def forward(self, x) -> np.ndarray:
        return self.forward_many(np.atleast_1d(np.asarray(x, float))[None, :])[0]

    def jacobians(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
        n = pts.shape[0]
        out = np.broadcast_to(self.lattice.astype(float),
                              (n, self.dim, self.dim)).copy()
        for i, f in enumerate(self.periodic):
            out[:, i, :] += f.gradients(pts)
        return out

    def jacobian(self, x) -> np.ndarray:
        return self.jacobians(np.atleast_1d(np.asarray(x, float))[None, :])[0]

    def inverse(self, y, tol: float = 1e-12, max_iter: int = 60) -> np.ndarray:
        """Solve Phi(x) = y by safeguarded (damped) Newton.

        Uses lattice equivariance to reduce y to the unit cell first, so
        the iteration starts from a uniformly good initial guess.
        """
        y = np.atleast_1d(np.asarray(y, dtype=np.float64))
        if y.shape != (self.dim,):
            raise DimensionMismatch("point dim mismatch")
        # Phi^{-1}(y0 + A k) = Phi^{-1}(y0) + k
        x_guess = self.lattice_inv.astype(float) @ y
        shift = np.floor(x_guess)
        y0 = y - self.lattice.astype(float) @ shift
        x = self.lattice_inv.astype(float) @ y0
        res = self.forward(x) - y0
        rnorm = float(np.linalg.norm(res))
        for _ in range(max_iter):
            if rnorm <= tol:
                return x + shift
            jac = self.jacobian(x)
            try:
                step = np.linalg.solve(jac, res)
            except np.linalg.LinAlgError as exc:
                raise SingularJacobian("singular Jacobian in Newton") from exc
            lam = 1.0
            for _ in range(40):
                x_try = x - lam * step
                res_try = self.forward(x_try) - y0
                rnorm_try = float(np.linalg.norm(res_try))
                if rnorm_try < rnorm:
                    x, res, rnorm = x_try, res_try, rnorm_try
                    break
                lam *= 0.5
            else:
                raise NewtonDivergence(
                    "damped Newton stalled while inverting the diffeomorphism")
        if rnorm <= tol:
            return x + shift
        raise NewtonDivergence(
            f"Newton did not reach tol={tol:g} (residual {rnorm:.3e})")


# ---------------------------------------------------------------------------
# vector field specs
# ---------------------------------------------------------------------------

class FieldSpec:
    """Base class for the vector-field families driving X' = b(X).

    Specs are immutable after construction and evaluation is pure, so
    instances are safe to share across threads and processes.
    """

    kind: str
    dim: int

    def pack(self) -> PackedSpec:
        raise NotImplementedError

    def velocities(self, pts) -> np.ndarray:
        try:
            return purepy.field_velocities(self.pack(), pts)
        except np.linalg.LinAlgError as exc:
            raise SingularJacobian(
                "singular diffeomorphism Jacobian during evaluation") from exc

    def velocity(self, x) -> np.ndarray:
        return self.velocities(np.atleast_1d(np.asarray(x, float))[None, :])[0]

    def sup_bound(self) -> float:
        raise NotImplementedError

    def negated(self) -> "FieldSpec":
        raise NotImplementedError

    def digest(self) -> str:
        p = self.pack()
        h = hashlib.sha256()
        h.update(f"{p.kind}|{p.dim}|{p.ridge!r}".encode())
        for arr in (p.term_freqs, p.term_cos, p.term_sin, p.fld_start,
                    p.fld_const, p.fld_mode, p.fld_offset, p.xi, p.amat):
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()[:12]

    @property
    def spec_id(self) -> str:
        return f"{self.kind}-{self.digest()}"


def _check_unit(xi: np.ndarray):
    if abs(float(np.linalg.norm(xi)) - 1.0) > 1e-14:
        raise ValueError("direction xi must be a unit vector (within 1e-14)")


def _check_nonnegative_factor(a: ScalarField):
    if a.mode == SQUARED:
        return
    rep = a.positivity
    if rep.kind in (SIGN_CHANGING, NEGATIVE):
        raise VanishingOrNegative(
            f"scalar factor must be nonnegative; grid minimum {rep.min_value:.3e}")


class VanishingOrNegative(TorusDriftError):
    """The scalar factor of a direction field takes negative values."""


class DirectionField(FieldSpec):
    """b(x) = a(x) xi with a >= 0 and |xi| = 1."""

    kind = "direction"

    def __init__(self, a: ScalarField, xi):
        xi = np.atleast_1d(np.asarray(xi, dtype=np.float64))
        if a.dim != xi.shape[0]:
            raise DimensionMismatch("a and xi disagree on dimension")
        _check_unit(xi)
        _check_nonnegative_factor(a)
        self.a = a
        self.xi = xi
        self.xi.setflags(write=False)
        self.dim = a.dim

    def pack(self) -> PackedSpec:
        return packing.pack_spec(KIND_DIRECTION, self.dim, [self.a.packed],
                                 xi=self.xi)

    def sup_bound(self) -> float:
        return self.a.sup_bound()

    def negated(self) -> "DirectionField":
        out = DirectionField.__new__(DirectionField)
        out.a = self.a
        out.xi = -self.xi
        out.xi.setflags(write=False)
        out.dim = self.dim
        return out


class RectifiedField(FieldSpec):
    """b(x) = a(Phi(x)) grad Phi(x)^{-1} xi for a torus diffeomorphism Phi."""

    kind = "rectified"

    def __init__(self, a: ScalarField, xi, phi: Diffeomorphism):
        xi = np.atleast_1d(np.asarray(xi, dtype=np.float64))
        if a.dim != xi.shape[0] or phi.dim != a.dim:
            raise DimensionMismatch("a, xi, phi disagree on dimension")
        _check_unit(xi)
        _check_nonnegative_factor(a)
        self.a = a
        self.xi = xi
        self.xi.setflags(write=False)
        self.phi = phi
        self.dim = a.dim

    def pack(self) -> PackedSpec:
        scalars = [self.a.packed] + [f.packed for f in self.phi.periodic]
        return packing.pack_spec(KIND_RECTIFIED, self.dim, scalars,
                                 xi=self.xi, amat=self.phi.lattice.astype(float))

    def sup_bound(self) -> float:
        # |grad Phi^{-1} xi| <= |xi| / sigma_min; use a sampled bound
        pts = _lattice_grid(self.dim, _grid_resolution(self.dim, 32))
        jac = self.phi.jacobians(pts)
        smin = np.linalg.svd(jac, compute_uv=False)[:, -1].min()
        return self.a.sup_bound() / float(smin)

    def negated(self) -> "RectifiedField":
        out = RectifiedField.__new__(RectifiedField)
        out.a, out.phi, out.dim = self.a, self.phi, self.dim
        out.xi = -self.xi
        out.xi.setflags(write=False)
        return out


class CurrentField(FieldSpec):
    """b = A(x) grad v(x) with A = B^T B + ridge I symmetric nonnegative."""

    kind = "current"

    def __init__(self, matrix: MatrixField, v: ScalarField):
        if matrix.dim != v.dim:
            raise DimensionMismatch("matrix and potential disagree on dimension")
        if v.mode != RAW:
            raise ValueError("potential must be a raw field")
        self.matrix = matrix
        self.v = v
        self.dim = v.dim

    def pack(self) -> PackedSpec:
        scalars = [f.packed for f in self.matrix.entry_fields()]
        scalars.append(self.v.packed)
        return packing.pack_spec(KIND_CURRENT, self.dim, scalars,
                                 ridge=self.matrix.ridge)

    def sup_bound(self) -> float:
        bnorm = sum(f.sup_bound() for f in self.matrix.entry_fields())
        return (bnorm * bnorm + self.matrix.ridge) * self.v.grad_sup_bound()

    def negated(self) -> "CurrentField":
        return CurrentField(self.matrix, self.v.negated())


class OneDField(FieldSpec):
    """One-dimensional b(x); may change sign."""

    kind = "oned"

    def __init__(self, b: ScalarField):
        if b.dim != 1:
            raise DimensionMismatch("oned fields require dim 1")
        self.b = b
        self.dim = 1

    def pack(self) -> PackedSpec:
        return packing.pack_spec(KIND_ONED, 1, [self.b.packed])

    def sup_bound(self) -> float:
        return self.b.sup_bound()

    def negated(self) -> "OneDField":
        if self.b.mode != RAW:
            # q^2 + m cannot be negated within the representation; fall back
            # to a direction field with flipped axis
            raise ValueError("cannot negate a squared-mode oned field")
        return OneDField(self.b.negated())


class GenericField(FieldSpec):
    """Componentwise field b = (b_1, ..., b_d) with no imposed structure."""

    kind = "generic"

    def __init__(self, components: Sequence[ScalarField]):
        components = tuple(components)
        if not components:
            raise ValueError("need at least one component")
        d = len(components)
        for f in components:
            if f.dim != d:
                raise DimensionMismatch("component dim mismatch")
        self.components = components
        self.dim = d

    def pack(self) -> PackedSpec:
        return packing.pack_spec(KIND_GENERIC, self.dim,
                                 [f.packed for f in self.components])

    def sup_bound(self) -> float:
        return float(np.linalg.norm([f.sup_bound() for f in self.components]))

    def negated(self) -> "GenericField":
        return GenericField([f.negated() for f in self.components])


# ---------------------------------------------------------------------------
# direction classification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RationalPeriod:
    """xi is a rational direction: T xi = k exactly for a lattice vector k."""
    T: float
    k: Tuple[int, ...]


@dataclass(frozen=True)
class TotallyIrrational:
    """|xi . k| > tol for every nonzero |k|_inf <= search_bound."""
    search_bound: int


@dataclass(frozen=True)
class Indeterminate:
    """Neither certificate could be established within the search bound."""
    search_bound: int


DirectionClass = Union[RationalPeriod, TotallyIrrational, Indeterminate]


def classify_direction(xi, search_bound: int = 64,
                       tol: float = 1e-9) -> DirectionClass:
    """Classify a unit direction by exhaustive lattice search.

    Returns RationalPeriod (with the shortest lattice vector parallel to
    xi), TotallyIrrational when all nonzero lattice dot products exceed
    ``tol``, or Indeterminate otherwise.
    """
    xi = np.atleast_1d(np.asarray(xi, dtype=np.float64))
    _check_unit(xi)
    d = xi.shape[0]
    if (2 * search_bound + 1) ** d > 5e7:
        raise TorusDriftError("direction search lattice too large")
    rng = np.arange(-search_bound, search_bound + 1)
    grids = np.meshgrid(*([rng] * d), indexing="ij")
    K = np.stack([g.ravel() for g in grids], axis=-1).astype(np.float64)
    K = K[np.any(K != 0.0, axis=1)]
    dots = K @ xi
    norms = np.linalg.norm(K, axis=1)
    # parallel test: k == |k| xi componentwise, with k . xi > 0
    par = (np.max(np.abs(K - norms[:, None] * xi[None, :]), axis=1) <= 1e-12)
    par &= dots > 0.0
    if np.any(par):
        idx = np.flatnonzero(par)
        best = idx[np.argmin(norms[idx])]
        k = tuple(int(v) for v in K[best])
        return RationalPeriod(T=float(norms[best]), k=k)
    if float(np.min(np.abs(dots))) > tol:
        return TotallyIrrational(search_bound)
    return Indeterminate(search_bound)


def project_off_direction(x, xi) -> np.ndarray:
    """Component of x orthogonal to the unit vector xi."""
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    xi = np.atleast_1d(np.asarray(xi, dtype=np.float64))
    return x - float(x @ xi) * xi
