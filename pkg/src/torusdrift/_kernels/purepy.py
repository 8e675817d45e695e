"""Pure NumPy kernel backend.

Reference implementation of the hot kernels: trigonometric field
evaluation and the adaptive Dormand-Prince 5(4) integrator with dense
output.  The compiled backend in ``_core.pyx`` mirrors this module
operation for operation; equivalence is pinned by tests.
"""

from __future__ import annotations

import math

import numpy as np

from .packing import (
    KIND_CURRENT,
    KIND_DIRECTION,
    KIND_GENERIC,
    KIND_ONED,
    KIND_RECTIFIED,
    MODE_SQUARED,
    STATUS_MAXSTEPS,
    STATUS_NONFINITE,
    STATUS_OK,
    STATUS_STATIONARY,
    STATUS_UNDERFLOW,
    PackedSpec,
)

NAME = "python"

TWO_PI = 2.0 * math.pi

# Dormand-Prince 5(4) tableau (FSAL, 7 stages).
RK_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
RK_A = np.zeros((7, 7))
RK_A[1, :1] = [1 / 5]
RK_A[2, :2] = [3 / 40, 9 / 40]
RK_A[3, :3] = [44 / 45, -56 / 15, 32 / 9]
RK_A[4, :4] = [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]
RK_A[5, :5] = [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]
RK_A[6, :6] = [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]
RK_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
RK_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920,
                 -17253 / 339200, 22 / 525, -1 / 40])
# quartic dense-output polynomial: y(t+th) = y + h * K^T P [th, th^2, th^3, th^4]
RK_P = np.array([
    [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608,
     -12715105075 / 11282082432],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933,
     87487479700 / 32700410799],
    [0.0, -1754552775 / 470086768, 14199869525 / 1410260304,
     -10690763975 / 1880347072],
    [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408,
     701980252875 / 199316789632],
    [0.0, -282668133 / 205662961, 2019193451 / 616988883,
     -1453857185 / 822651844],
    [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0


# ---------------------------------------------------------------------------
# trigonometric field evaluation
# ---------------------------------------------------------------------------

def scalar_values(freqs, ccoef, scoef, const, mode, offset, pts):
    """Evaluate one packed scalar field at pts of shape (n, dim)."""
    pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
    if len(ccoef) == 0:
        q = np.full(pts.shape[0], const)
    else:
        args = TWO_PI * (pts @ freqs.T)
        q = const + np.cos(args) @ ccoef + np.sin(args) @ scoef
    if mode == MODE_SQUARED:
        return q * q + offset
    return q


def scalar_gradients(freqs, ccoef, scoef, const, mode, offset, pts):
    """Analytic gradient of one packed scalar field at pts, shape (n, dim)."""
    pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
    n, dim = pts.shape
    if len(ccoef) == 0:
        return np.zeros((n, dim))
    args = TWO_PI * (pts @ freqs.T)
    cs, sn = np.cos(args), np.sin(args)
    dq = (sn * (-ccoef) + cs * scoef) @ (TWO_PI * freqs)
    if mode == MODE_SQUARED:
        q = const + cs @ ccoef + sn @ scoef
        return 2.0 * q[:, None] * dq
    return dq


def _field_slices(spec: PackedSpec):
    s = spec.fld_start
    return [
        (spec.term_freqs[s[i]:s[i + 1]], spec.term_cos[s[i]:s[i + 1]],
         spec.term_sin[s[i]:s[i + 1]], spec.fld_const[i],
         int(spec.fld_mode[i]), spec.fld_offset[i])
        for i in range(len(s) - 1)
    ]


def spec_scalar_values(spec: PackedSpec, field_index: int, pts):
    return scalar_values(*_field_slices(spec)[field_index], pts)


def spec_scalar_gradients(spec: PackedSpec, field_index: int, pts):
    return scalar_gradients(*_field_slices(spec)[field_index], pts)


def field_velocities(spec: PackedSpec, pts):
    """Velocity b(x) for each row of pts; returns (n, dim)."""
    pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
    n, d = pts.shape
    if d != spec.dim:
        raise ValueError(f"points have dim {d}, spec has dim {spec.dim}")
    fl = _field_slices(spec)
    kind = spec.kind
    if kind == KIND_DIRECTION:
        return scalar_values(*fl[0], pts)[:, None] * spec.xi[None, :]
    if kind == KIND_ONED:
        return scalar_values(*fl[0], pts)[:, None]
    if kind == KIND_GENERIC:
        return np.stack([scalar_values(*fl[j], pts) for j in range(d)], axis=1)
    if kind == KIND_CURRENT:
        B = np.stack(
            [np.stack([scalar_values(*fl[i * d + j], pts) for j in range(d)],
                      axis=1) for i in range(d)], axis=1)
        g = scalar_gradients(*fl[d * d], pts)
        u = np.einsum("nij,nj->ni", B, g)
        return np.einsum("nij,ni->nj", B, u) + spec.ridge * g
    if kind == KIND_RECTIFIED:
        y = pts @ spec.amat.T
        jac = np.broadcast_to(spec.amat, (n, d, d)).copy()
        for i in range(d):
            y[:, i] += scalar_values(*fl[1 + i], pts)
            jac[:, i, :] += scalar_gradients(*fl[1 + i], pts)
        aval = scalar_values(*fl[0], y)
        rhs = np.broadcast_to(spec.xi, (n, d))[..., None]
        w = np.linalg.solve(jac, rhs)[..., 0]
        return aval[:, None] * w
    raise ValueError(f"unknown spec kind {kind}")


def _velocity(spec: PackedSpec, x):
    return field_velocities(spec, x[None, :])[0]


# ---------------------------------------------------------------------------
# Dormand-Prince 5(4) with dense output
# ---------------------------------------------------------------------------

def _error_norm(err, y, y_new, rtol, atol):
    scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
    return float(np.sqrt(np.mean((err / scale) ** 2)))

def _initial_step(spec, x0, f0, t_end, rtol, atol, h_max):
    scale = atol + rtol * np.abs(x0)
    d0 = float(np.sqrt(np.mean((x0 / scale) ** 2)))
    d1 = float(np.sqrt(np.mean((f0 / scale) ** 2)))
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    y1 = x0 + h0 * f0
    f1 = _velocity(spec, y1)
    d2 = float(np.sqrt(np.mean(((f1 - f0) / scale) ** 2))) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, t_end, h_max)


def rk45_integrate(spec: PackedSpec, x0, t_end, rtol, atol, sample_ts,
                   eps_stat=1e-10, t_dwell=10.0, h_max=50.0,
                   max_steps=20_000_000):
    """Integrate X' = b(X) from X(0)=x0 and sample X at ``sample_ts``.

    Returns (states, status, n_steps, n_rejected, n_fev, t_exit) where
    states has shape (len(sample_ts), dim).  ``sample_ts`` must be sorted,
    unique, within [0, t_end].  A stationary exit (|b| < eps_stat sustained
    for t_dwell) freezes the state and fills the remaining samples.
    """
    d = spec.dim
    y = np.array(x0, dtype=np.float64)
    sample_ts = np.asarray(sample_ts, dtype=np.float64)
    out = np.empty((len(sample_ts), d))
    i_samp = 0
    while i_samp < len(sample_ts) and sample_ts[i_samp] <= 0.0:
        out[i_samp] = y
        i_samp += 1

    t = 0.0
    f = _velocity(spec, y)
    n_fev = 1
    h = _initial_step(spec, y, f, t_end, rtol, atol, h_max)
    n_fev += 1
    K = np.empty((7, d))
    n_steps = n_rejected = 0
    below_since = None
    status = STATUS_OK
    t_exit = math.nan
    step_rejected = False

    eps = float(np.finfo(float).eps)
    while t < t_end:
        if t_end - t <= 10.0 * eps * max(t_end, 1.0):
            break  # converged up to roundoff
        if n_steps + n_rejected >= max_steps:
            status = STATUS_MAXSTEPS
            break
        h = min(h, t_end - t, h_max)
        h_min = 10.0 * eps * max(abs(t), 1.0)
        if h < h_min:
            status = STATUS_UNDERFLOW
            break
        K[0] = f
        for s in range(1, 7):
            y_stage = y + h * (RK_A[s, :s] @ K[:s])
            K[s] = _velocity(spec, y_stage)
        n_fev += 6
        y_new = y + h * (RK_B @ K)
        err = h * (RK_E @ K)
        if not np.all(np.isfinite(y_new)):
            status = STATUS_NONFINITE
            break
        norm = _error_norm(err, y, y_new, rtol, atol)
        if norm > 1.0:
            n_rejected += 1
            h *= max(MIN_FACTOR, SAFETY * norm ** -0.2)
            step_rejected = True
            continue

        # accepted: fill dense samples in (t, t + h]
        t_new = t + h
        if i_samp < len(sample_ts):
            j = np.searchsorted(sample_ts, t_new, side="right")
            if j > i_samp:
                theta = (sample_ts[i_samp:j] - t) / h
                powers = np.vander(theta, 5, increasing=True)[:, 1:]
                out[i_samp:j] = y + h * (powers @ (RK_P.T @ K))
                i_samp = j

        f_new = K[6].copy()  # FSAL: stage 7 is b(y_new); copy, K is reused
        speed = float(np.sqrt(np.sum(f_new * f_new)))
        if eps_stat > 0.0 and speed < eps_stat:
            if below_since is None:
                below_since = t_new
            elif t_new - below_since >= t_dwell:
                status = STATUS_STATIONARY
                t_exit = t_new
                out[i_samp:] = y_new
                i_samp = len(sample_ts)
                t = t_new
                n_steps += 1
                break
        else:
            below_since = None

        factor = MAX_FACTOR if norm == 0.0 else min(
            MAX_FACTOR, SAFETY * norm ** -0.2)
        if step_rejected:
            factor = min(1.0, factor)
            step_rejected = False
        h *= factor
        t, y, f = t_new, y_new, f_new
        n_steps += 1

    if status in (STATUS_OK, STATUS_STATIONARY) and i_samp < len(sample_ts):
        out[i_samp:] = y  # samples at t == t_end
    return out, status, n_steps, n_rejected, n_fev, t_exit
