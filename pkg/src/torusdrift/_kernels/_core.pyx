# cython: language_level=3, boundscheck=False, wraparound=False
# cython: cdivision=True, initializedcheck=False
"""Compiled kernel backend: trig field evaluation + Dormand-Prince 5(4).

Mirrors ``purepy`` operation for operation (same tableau, same step-size
policy, same stationary-exit rule); the tableau arrays are imported from
there so the two backends cannot drift apart.
"""

import math

import numpy as np

from libc.math cimport cos, sin, sqrt, fabs, isfinite

from .packing import (
    KIND_CURRENT, KIND_DIRECTION, KIND_GENERIC, KIND_ONED, KIND_RECTIFIED,
    MODE_SQUARED,
    STATUS_MAXSTEPS, STATUS_NONFINITE, STATUS_OK, STATUS_SINGULAR,
    STATUS_STATIONARY, STATUS_UNDERFLOW,
)
from . import purepy

NAME = "cython"

cdef double TWO_PI = 6.283185307179586476925287

cdef double[:, ::1] RK_A = np.ascontiguousarray(purepy.RK_A)
cdef double[::1] RK_B = np.ascontiguousarray(purepy.RK_B)
cdef double[::1] RK_E = np.ascontiguousarray(purepy.RK_E)
cdef double[:, ::1] RK_P = np.ascontiguousarray(purepy.RK_P)

cdef double SAFETY = 0.9
cdef double MIN_FACTOR = 0.2
cdef double MAX_FACTOR = 10.0

cdef int C_DIRECTION = KIND_DIRECTION
cdef int C_RECTIFIED = KIND_RECTIFIED
cdef int C_CURRENT = KIND_CURRENT
cdef int C_ONED = KIND_ONED
cdef int C_GENERIC = KIND_GENERIC
cdef int C_SQUARED = MODE_SQUARED


cdef class _SpecEval:
    """Unpacked spec with scratch buffers for single-point evaluation."""
    cdef int kind, d, nf
    cdef double[:, ::1] freqs
    cdef double[::1] cc, sc, c0, moff
    cdef long long[::1] start
    cdef long long[::1] mode
    cdef double[::1] xi
    cdef double[:, ::1] amat
    cdef double ridge
    cdef double[::1] y, g, u
    cdef double[:, ::1] bmat, aug

    def __init__(self, spec):
        # packed arrays are read-only; copy into writable buffers once per call
        self.kind = spec.kind
        self.d = spec.dim
        self.freqs = np.array(spec.term_freqs, dtype=np.float64, order="C")
        self.cc = np.array(spec.term_cos, dtype=np.float64)
        self.sc = np.array(spec.term_sin, dtype=np.float64)
        self.start = np.array(spec.fld_start, dtype=np.int64)
        self.c0 = np.array(spec.fld_const, dtype=np.float64)
        self.mode = np.array(spec.fld_mode, dtype=np.int64)
        self.moff = np.array(spec.fld_offset, dtype=np.float64)
        self.nf = len(self.c0)
        d = self.d
        if spec.xi.size:
            self.xi = np.array(spec.xi, dtype=np.float64)
        else:
            self.xi = np.zeros(d)
        if spec.amat.size:
            self.amat = np.array(spec.amat, dtype=np.float64, order="C")
        else:
            self.amat = np.zeros((d, d))
        self.ridge = spec.ridge
        self.y = np.empty(d)
        self.g = np.empty(d)
        self.u = np.empty(d)
        self.bmat = np.empty((d, d))
        self.aug = np.empty((d, d + 1))

    cdef double scalar_value(self, int fi, double* x):
        cdef long long i
        cdef int j
        cdef double q = self.c0[fi], arg
        for i in range(self.start[fi], self.start[fi + 1]):
            arg = 0.0
            for j in range(self.d):
                arg += self.freqs[i, j] * x[j]
            arg *= TWO_PI
            q += self.cc[i] * cos(arg) + self.sc[i] * sin(arg)
        if self.mode[fi] == C_SQUARED:
            return q * q + self.moff[fi]
        return q

    cdef void scalar_grad(self, int fi, double* x, double* g):
        cdef long long i
        cdef int j
        cdef double q = self.c0[fi], arg, cv, sv, amp
        for j in range(self.d):
            g[j] = 0.0
        for i in range(self.start[fi], self.start[fi + 1]):
            arg = 0.0
            for j in range(self.d):
                arg += self.freqs[i, j] * x[j]
            arg *= TWO_PI
            cv = cos(arg)
            sv = sin(arg)
            q += self.cc[i] * cv + self.sc[i] * sv
            amp = TWO_PI * (self.sc[i] * cv - self.cc[i] * sv)
            for j in range(self.d):
                g[j] += amp * self.freqs[i, j]
        if self.mode[fi] == C_SQUARED:
            for j in range(self.d):
                g[j] *= 2.0 * q

    cdef int velocity(self, double* x, double* b):
        """Fill b with the field velocity at x; nonzero on singular solve."""
        cdef int i, j, k, p, d = self.d
        cdef double av, tmp, piv
        if self.kind == C_DIRECTION:
            av = self.scalar_value(0, x)
            for j in range(d):
                b[j] = av * self.xi[j]
            return 0
        if self.kind == C_ONED:
            b[0] = self.scalar_value(0, x)
            return 0
        if self.kind == C_GENERIC:
            for j in range(d):
                b[j] = self.scalar_value(j, x)
            return 0
        if self.kind == C_CURRENT:
            for i in range(d):
                for j in range(d):
                    self.bmat[i, j] = self.scalar_value(i * d + j, x)
            self.scalar_grad(d * d, x, &self.g[0])
            for i in range(d):
                tmp = 0.0
                for j in range(d):
                    tmp += self.bmat[i, j] * self.g[j]
                self.u[i] = tmp
            for j in range(d):
                tmp = self.ridge * self.g[j]
                for i in range(d):
                    tmp += self.bmat[i, j] * self.u[i]
                b[j] = tmp
            return 0
        # rectified: y = A x + phi_sharp(x); J = A + grad phi_sharp; solve J w = xi
        for i in range(d):
            tmp = 0.0
            for j in range(d):
                tmp += self.amat[i, j] * x[j]
            self.y[i] = tmp + self.scalar_value(1 + i, x)
        for i in range(d):
            self.scalar_grad(1 + i, x, &self.g[0])
            for j in range(d):
                self.aug[i, j] = self.amat[i, j] + self.g[j]
        for i in range(d):
            self.aug[i, d] = self.xi[i]
        # gaussian elimination with partial pivoting on the augmented system
        for k in range(d):
            p = k
            for i in range(k + 1, d):
                if fabs(self.aug[i, k]) > fabs(self.aug[p, k]):
                    p = i
            if fabs(self.aug[p, k]) < 1e-14:
                return 1
            if p != k:
                for j in range(k, d + 1):
                    tmp = self.aug[k, j]
                    self.aug[k, j] = self.aug[p, j]
                    self.aug[p, j] = tmp
            piv = self.aug[k, k]
            for i in range(k + 1, d):
                tmp = self.aug[i, k] / piv
                for j in range(k, d + 1):
                    self.aug[i, j] -= tmp * self.aug[k, j]
        for k in range(d - 1, -1, -1):
            tmp = self.aug[k, d]
            for j in range(k + 1, d):
                tmp -= self.aug[k, j] * self.u[j]
            self.u[k] = tmp / self.aug[k, k]
        av = self.scalar_value(0, &self.y[0])
        for j in range(d):
            b[j] = av * self.u[j]
        return 0


def field_velocities(spec, pts):
    """Velocity b(x) for each row of pts; returns (n, dim)."""
    cdef _SpecEval ev = _SpecEval(spec)
    pts_a = np.ascontiguousarray(np.atleast_2d(np.asarray(pts, dtype=np.float64)))
    if pts_a.shape[1] != ev.d:
        raise ValueError(f"points have dim {pts_a.shape[1]}, spec has dim {ev.d}")
    cdef double[:, ::1] p = pts_a
    out_a = np.empty_like(pts_a)
    cdef double[:, ::1] out = out_a
    cdef Py_ssize_t r
    cdef int bad = 0
    for r in range(p.shape[0]):
        if ev.velocity(&p[r, 0], &out[r, 0]):
            bad = 1
            break
    if bad:
        raise np.linalg.LinAlgError("singular Jacobian in rectified field")
    return out_a


cdef double _error_norm(double[::1] err, double[::1] y, double[::1] y_new,
                        double rtol, double atol, int d):
    cdef double acc = 0.0, scale, ay, an
    cdef int j
    for j in range(d):
        ay = fabs(y[j])
        an = fabs(y_new[j])
        scale = atol + rtol * (ay if ay > an else an)
        acc += (err[j] / scale) * (err[j] / scale)
    return sqrt(acc / d)


def rk45_integrate(spec, x0, double t_end, double rtol, double atol,
                   sample_ts, double eps_stat=1e-10, double t_dwell=10.0,
                   double h_max=50.0, long long max_steps=20_000_000):
    """Compiled twin of purepy.rk45_integrate; same contract."""
    cdef _SpecEval ev = _SpecEval(spec)
    cdef int d = ev.d
    cdef double[::1] y = np.array(x0, dtype=np.float64)
    ts_a = np.ascontiguousarray(np.asarray(sample_ts, dtype=np.float64))
    cdef double[::1] ts = ts_a
    cdef Py_ssize_t n_samp = ts.shape[0]
    out_a = np.empty((n_samp, d))
    cdef double[:, ::1] out = out_a
    cdef double[:, ::1] K = np.empty((7, d))
    cdef double[::1] y_stage = np.empty(d)
    cdef double[::1] y_new = np.empty(d)
    cdef double[::1] err = np.empty(d)
    cdef double[::1] f = np.empty(d)

    cdef Py_ssize_t i_samp = 0
    cdef int j, s, q
    while i_samp < n_samp and ts[i_samp] <= 0.0:
        for j in range(d):
            out[i_samp, j] = y[j]
        i_samp += 1

    cdef double t = 0.0
    if ev.velocity(&y[0], &f[0]):
        return out_a, STATUS_SINGULAR, 0, 0, 1, math.nan
    cdef long long n_fev = 1, n_steps = 0, n_rejected = 0
    cdef double h = _initial_step(ev, y, f, t_end, rtol, atol, h_max)
    n_fev += 1
    cdef int status = STATUS_OK
    cdef double t_exit = math.nan
    cdef bint step_rejected = False
    cdef bint below_set = False
    cdef double below_since = 0.0
    cdef double eps = np.finfo(float).eps
    cdef double h_min, t_new, norm, factor, speed, acc, theta, th2, th3, th4, poly
    cdef bint singular = False

    while t < t_end:
        if t_end - t <= 10.0 * eps * (t_end if t_end > 1.0 else 1.0):
            break
        if n_steps + n_rejected >= max_steps:
            status = STATUS_MAXSTEPS
            break
        if h > t_end - t:
            h = t_end - t
        if h > h_max:
            h = h_max
        h_min = 10.0 * eps * (fabs(t) if fabs(t) > 1.0 else 1.0)
        if h < h_min:
            status = STATUS_UNDERFLOW
            break
        for j in range(d):
            K[0, j] = f[j]
        singular = False
        for s in range(1, 7):
            for j in range(d):
                acc = 0.0
                for q in range(s):
                    acc += RK_A[s, q] * K[q, j]
                y_stage[j] = y[j] + h * acc
            if ev.velocity(&y_stage[0], &K[s, 0]):
                singular = True
                break
        n_fev += 6
        if singular:
            status = STATUS_SINGULAR
            break
        for j in range(d):
            acc = 0.0
            for q in range(7):
                acc += RK_B[q] * K[q, j]
            y_new[j] = y[j] + h * acc
            acc = 0.0
            for q in range(7):
                acc += RK_E[q] * K[q, j]
            err[j] = h * acc
        for j in range(d):
            if not isfinite(y_new[j]):
                status = STATUS_NONFINITE
                break
        if status == STATUS_NONFINITE:
            break
        norm = _error_norm(err, y, y_new, rtol, atol, d)
        if norm > 1.0:
            n_rejected += 1
            factor = SAFETY * norm ** -0.2
            if factor < MIN_FACTOR:
                factor = MIN_FACTOR
            h *= factor
            step_rejected = True
            continue

        t_new = t + h
        while i_samp < n_samp and ts[i_samp] <= t_new:
            theta = (ts[i_samp] - t) / h
            th2 = theta * theta
            th3 = th2 * theta
            th4 = th3 * theta
            for j in range(d):
                acc = 0.0
                for q in range(7):
                    poly = (RK_P[q, 0] * theta + RK_P[q, 1] * th2
                            + RK_P[q, 2] * th3 + RK_P[q, 3] * th4)
                    acc += K[q, j] * poly
                out[i_samp, j] = y[j] + h * acc
            i_samp += 1

        speed = 0.0
        for j in range(d):
            speed += K[6, j] * K[6, j]
        speed = sqrt(speed)
        if eps_stat > 0.0 and speed < eps_stat:
            if not below_set:
                below_set = True
                below_since = t_new
            elif t_new - below_since >= t_dwell:
                status = STATUS_STATIONARY
                t_exit = t_new
                while i_samp < n_samp:
                    for j in range(d):
                        out[i_samp, j] = y_new[j]
                    i_samp += 1
                t = t_new
                n_steps += 1
                for j in range(d):
                    y[j] = y_new[j]
                break
        else:
            below_set = False

        if norm == 0.0:
            factor = MAX_FACTOR
        else:
            factor = SAFETY * norm ** -0.2
            if factor > MAX_FACTOR:
                factor = MAX_FACTOR
        if step_rejected:
            if factor > 1.0:
                factor = 1.0
            step_rejected = False
        h *= factor
        t = t_new
        for j in range(d):
            y[j] = y_new[j]
            f[j] = K[6, j]
        n_steps += 1

    if status == STATUS_OK or status == STATUS_STATIONARY:
        while i_samp < n_samp:
            for j in range(d):
                out[i_samp, j] = y[j]
            i_samp += 1
    return out_a, status, int(n_steps), int(n_rejected), int(n_fev), t_exit


cdef double _initial_step(_SpecEval ev, double[::1] y, double[::1] f,
                          double t_end, double rtol, double atol, double h_max):
    cdef int d = ev.d, j
    cdef double d0 = 0.0, d1 = 0.0, d2 = 0.0, scale, h0, h1, m
    cdef double[::1] y1 = np.empty(d)
    cdef double[::1] f1 = np.empty(d)
    for j in range(d):
        scale = atol + rtol * fabs(y[j])
        d0 += (y[j] / scale) * (y[j] / scale)
        d1 += (f[j] / scale) * (f[j] / scale)
    d0 = sqrt(d0 / d)
    d1 = sqrt(d1 / d)
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    for j in range(d):
        y1[j] = y[j] + h0 * f[j]
    ev.velocity(&y1[0], &f1[0])
    for j in range(d):
        scale = atol + rtol * fabs(y[j])
        d2 += ((f1[j] - f[j]) / scale) * ((f1[j] - f[j]) / scale)
    d2 = sqrt(d2 / d) / h0
    m = d1 if d1 > d2 else d2
    if m <= 1e-15:
        h1 = 1e-6 if 1e-6 > h0 * 1e-3 else h0 * 1e-3
    else:
        h1 = (0.01 / m) ** 0.2
    h0 = 100.0 * h0
    if h1 < h0:
        h0 = h1
    if t_end < h0:
        h0 = t_end
    if h_max < h0:
        h0 = h_max
    return h0
