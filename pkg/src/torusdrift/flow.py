"""Lifted flow integration, exact line solutions, torus-period detection.

Trajectories are integrated in R^d (never wrapped) by an adaptive embedded
Runge-Kutta 5(4) pair with quartic dense output, provided by the selected
kernel backend.  The trajectory object carries a uniform dense sample grid
(for time quadrature) merged with a geometric checkpoint schedule (for
drift diagnostics).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from . import _kernels
from ._kernels.packing import (
    STATUS_MAXSTEPS,
    STATUS_NONFINITE,
    STATUS_OK,
    STATUS_SINGULAR,
    STATUS_STATIONARY,
    STATUS_UNDERFLOW,
)
from .errors import (
    DimensionMismatch,
    IntegrationError,
    NewtonDivergence,
    VanishesOnLine,
)
from .fields import (
    NEGATIVE,
    POSITIVE,
    DirectionField,
    FieldSpec,
    OneDField,
    RationalPeriod,
    RectifiedField,
    ScalarField,
    classify_direction,
    project_off_direction,
)
from .quadrature import LineQuadrature, refined_line_minimum

#: default stationary-exit thresholds
EPS_STAT = 1e-10
T_DWELL = 10.0
H_MAX = 50.0

#: dense sample budget per trajectory
MAX_DENSE_SAMPLES = 2_000_000


@dataclass(frozen=True)
class StationaryExit:
    t: float
    reason: str


@dataclass(frozen=True)
class IntegrationStats:
    steps: int
    rejected: int
    field_evals: int
    backend: str


class Trajectory:
    """Time-stamped lifted path X(t, x0) with dense and checkpoint samples."""

    def __init__(self, spec_id, x0, times, states, dense_index, checkpoint_index,
                 rtol, atol, stationary_exit, stats):
        self.spec_id = spec_id
        self.x0 = np.asarray(x0, dtype=np.float64)
        self.times = np.asarray(times, dtype=np.float64)
        self.states = np.asarray(states, dtype=np.float64)
        self.dense_index = np.asarray(dense_index, dtype=np.intp)
        self.checkpoint_index = np.asarray(checkpoint_index, dtype=np.intp)
        self.rtol = float(rtol)
        self.atol = float(atol)
        self.stationary_exit: Optional[StationaryExit] = stationary_exit
        self.stats: IntegrationStats = stats
        for arr in (self.x0, self.times, self.states,
                    self.dense_index, self.checkpoint_index):
            arr.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    @property
    def samples(self):
        return list(zip(self.times.tolist(), self.states))

    @property
    def dense_times(self) -> np.ndarray:
        return self.times[self.dense_index]

    @property
    def dense_states(self) -> np.ndarray:
        return self.states[self.dense_index]

    @property
    def checkpoint_times(self) -> np.ndarray:
        return self.times[self.checkpoint_index]

    @property
    def checkpoint_states(self) -> np.ndarray:
        return self.states[self.checkpoint_index]

    def wrapped_dense_states(self) -> np.ndarray:
        """Dense states reduced to the unit cell [0,1)^d."""
        s = self.dense_states
        return s - np.floor(s)

    def state_at_end(self) -> np.ndarray:
        return self.states[-1]


def checkpoint_schedule(t_end: float, t0: float = 1.0) -> np.ndarray:
    """Geometric diagnostic times t0 * 2^j capped at (and including) t_end."""
    if t_end <= t0:
        return np.array([t_end])
    n = int(math.floor(math.log2(t_end / t0)))
    ts = t0 * np.power(2.0, np.arange(n + 1))
    ts = ts[ts < t_end]
    return np.append(ts, t_end)


def _dense_grid(t_end: float, dense_dt: Optional[float]) -> np.ndarray:
    if dense_dt is None:
        # at least 1000 intervals, at most the sample budget, aiming for
        # a 0.01 time resolution on short runs
        n = int(min(MAX_DENSE_SAMPLES, max(1000, math.ceil(t_end / 0.05))))
    else:
        n = int(math.ceil(t_end / float(dense_dt)))
        if n > MAX_DENSE_SAMPLES:
            raise IntegrationError(
                f"dense grid of {n} samples exceeds cap {MAX_DENSE_SAMPLES}")
        n = max(2, n)
    if n % 2 == 1:
        n += 1  # even interval count for Simpson weights downstream
    return np.linspace(0.0, t_end, n + 1)


_STATUS_MESSAGES = {
    STATUS_UNDERFLOW: "step size underflow (stiffness near a zero of the field?)",
    STATUS_NONFINITE: "non-finite state encountered",
    STATUS_MAXSTEPS: "maximum number of steps exceeded",
    STATUS_SINGULAR: "singular diffeomorphism Jacobian during evaluation",
}


def integrate(spec: FieldSpec, x0, t_end: float, rtol: float = 1e-10,
              atol: float = 1e-12, *, dense_dt: Optional[float] = None,
              checkpoints: Optional[np.ndarray] = None,
              eps_stat: float = EPS_STAT, t_dwell: float = T_DWELL,
              h_max: float = H_MAX, max_steps: int = 20_000_000) -> Trajectory:
    """Integrate the lifted flow X' = b(X), X(0) = x0, up to t_end.

    Samples are produced on a uniform dense grid (``dense_dt`` spacing,
    chosen automatically when omitted) merged with a geometric checkpoint
    schedule.  When |b(X)| stays below ``eps_stat`` for ``t_dwell`` time
    units the trajectory is declared stationary and extended as a constant.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=np.float64))
    if x0.shape != (spec.dim,):
        raise DimensionMismatch(
            f"start point has shape {x0.shape}, spec dim is {spec.dim}")
    if not t_end > 0.0:
        raise ValueError("t_end must be positive")
    for name, tol in (("rtol", rtol), ("atol", atol)):
        if not 0.0 < tol <= 1e-2:
            raise ValueError(f"{name} must lie in (0, 1e-2]")

    dense = _dense_grid(t_end, dense_dt)
    if checkpoints is None:
        cpts = checkpoint_schedule(t_end)
    else:
        cpts = np.asarray(checkpoints, dtype=np.float64)
        if cpts.size and (cpts.min() <= 0.0 or cpts.max() > t_end):
            raise ValueError("checkpoints must lie in (0, t_end]")
    times = np.unique(np.concatenate([dense, cpts, [0.0, t_end]]))
    dense_index = np.searchsorted(times, dense)
    checkpoint_index = np.searchsorted(times, cpts)

    packed = spec.pack()
    try:
        states, status, n_steps, n_rej, n_fev, t_exit = _kernels.rk45_integrate(
            packed, x0, float(t_end), float(rtol), float(atol), times,
            eps_stat=float(eps_stat), t_dwell=float(t_dwell),
            h_max=float(h_max), max_steps=int(max_steps))
    except np.linalg.LinAlgError as exc:
        raise IntegrationError(_STATUS_MESSAGES[STATUS_SINGULAR]) from exc

    if status not in (STATUS_OK, STATUS_STATIONARY):
        raise IntegrationError(_STATUS_MESSAGES[status])
    exit_info = None
    if status == STATUS_STATIONARY:
        exit_info = StationaryExit(
            t=float(t_exit),
            reason=f"|b(X)| < {eps_stat:g} sustained for {t_dwell:g} time units")
    stats = IntegrationStats(n_steps, n_rej, n_fev, _kernels.BACKEND)
    return Trajectory(spec.spec_id, x0, times, states, dense_index,
                      checkpoint_index, rtol, atol, exit_info, stats)


# ---------------------------------------------------------------------------
# exact solution along a line for direction fields
# ---------------------------------------------------------------------------

def _line_callable(a: ScalarField, xi: np.ndarray, perp: np.ndarray):
    def a_line(s):
        s = np.atleast_1d(np.asarray(s, dtype=np.float64))
        pts = s[:, None] * xi[None, :] + perp[None, :]
        return a.values(pts)
    return a_line


def _line_min(a_line, lo: float, hi: float, per_unit: float) -> float:
    return refined_line_minimum(a_line, lo, hi, per_unit)


def exact_line_solve(a: ScalarField, xi, x, t: float, *,
                     eps_zero: float = 1e-9, rel_tol: float = 1e-12) -> np.ndarray:
    """Exact lifted state at time t for the direction field b = a xi.

    The motion is one-dimensional along xi: with u = X . xi and
    F(u) = integral_0^u ds / a(s xi + P x), the solution satisfies
    F(u(t)) = t + F(u(0)).  F is computed by composite Gauss-Legendre
    quadrature (panel count doubled until stable) and inverted by
    monotone bracketing plus Newton, using F' = 1/a analytically.
    """
    xi = np.atleast_1d(np.asarray(xi, dtype=np.float64))
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if a.dim != xi.shape[0] or x.shape != xi.shape:
        raise DimensionMismatch("a, xi, x disagree on dimension")
    if not t >= 0.0:
        raise ValueError("t must be nonnegative")
    perp = project_off_direction(x, xi)
    a_line = _line_callable(a, xi, perp)
    u0 = float(x @ xi)

    sup = a.sup_bound()
    lo = min(0.0, u0) - 1.0
    hi = max(0.0, u0) + t * sup + 1.0
    per_unit = 16.0 * (1.0 + a.max_frequency())
    if _line_min(a_line, lo, hi, per_unit) < eps_zero:
        raise VanishesOnLine(
            "scalar factor vanishes along the line; the drift prediction "
            "for the vanishing branch applies instead")

    quad = LineQuadrature(lambda s: 1.0 / a_line(s), lo, hi,
                          panels_per_unit=max(4.0, 2.0 * (1.0 + a.max_frequency())),
                          rel_tol=rel_tol)
    f_u0 = quad.integral_from_base(u0)
    target = t + f_u0

    # bracket on the tabulated panel edges (F is strictly increasing)
    cum = quad.cum
    j = int(np.searchsorted(cum, target, side="right"))
    if j >= len(cum):
        raise IntegrationError("line solve bracket exceeded tabulated range")
    u = float(quad.edges[max(j - 1, 0)])
    for _ in range(100):
        res = quad.integral_from_base(u) - target
        if abs(res) <= 1e-13 * max(1.0, abs(target)):
            break
        u -= res * float(a_line(u)[0])  # Newton: F'(u) = 1/a
        u = min(max(u, lo), hi)
    else:
        raise NewtonDivergence("line-solve Newton failed to converge")
    return x + (u - u0) * xi


# ---------------------------------------------------------------------------
# torus-periodic trajectory detection
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PeriodReport:
    """Outcome of the search for X(t + tau, x) = X(t, x) + k."""
    found: bool
    tau: float = math.nan
    k: Tuple[int, ...] = ()
    residual: float = math.nan
    stationary: bool = False


def _verify_period(spec: FieldSpec, x, tau: float, k, tol: float) -> PeriodReport:
    traj = integrate(spec, x, tau, rtol=1e-12, atol=1e-13,
                     dense_dt=max(tau / 8.0, 1e-3))
    residual = float(np.linalg.norm(
        traj.state_at_end() - np.asarray(x, float) - np.asarray(k, float)))
    return PeriodReport(found=residual <= tol, tau=tau,
                        k=tuple(int(v) for v in k), residual=residual)


def _direction_period(a: ScalarField, xi, x, dclass, lattice_map=None):
    """(tau, k) via quadrature for b = a xi with a rational direction.

    Returns None when the direction is not rational or the factor vanishes
    on the line.  ``lattice_map`` post-multiplies the lattice vector (used
    by rectified specs, where k = A^{-1} k_Y).
    """
    if not isinstance(dclass, RationalPeriod):
        return None
    xi = np.atleast_1d(np.asarray(xi, dtype=np.float64))
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    T = dclass.T
    perp = project_off_direction(x, xi)
    a_line = _line_callable(a, xi, perp)
    per_unit = 16.0 * (1.0 + a.max_frequency())
    if _line_min(a_line, 0.0, T, per_unit) < 1e-9:
        return None
    quad = LineQuadrature(lambda s: 1.0 / a_line(s), 0.0, T,
                          panels_per_unit=max(4.0, 2.0 * (1.0 + a.max_frequency())))
    tau = float(quad.total)
    k = np.asarray(dclass.k, dtype=np.int64)
    if lattice_map is not None:
        k = lattice_map @ k
    return tau, k


def detect_torus_period(spec: FieldSpec, x, tau_max: float = 100.0,
                        tol: float = 1e-8, search_bound: int = 64,
                        eps_stat: float = EPS_STAT) -> PeriodReport:
    """Find tau > 0 and k in Z^d with X(tau, x) = x + k, if any.

    Direction-type specs with a rational direction use the quadrature
    formula tau = integral_0^T ds / a(s xi + P x) and verify it by
    re-integration.  Stationary starts are reported as periodic in R^d
    (k = 0).  Other specs fall back to a dense sample search confirmed by
    re-integration.
    """
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    speed = float(np.linalg.norm(spec.velocity(x)))
    if speed < eps_stat:
        return PeriodReport(found=True, tau=1.0, k=(0,) * spec.dim,
                            residual=0.0, stationary=True)

    if isinstance(spec, (DirectionField, OneDField, RectifiedField)):
        if isinstance(spec, OneDField):
            a, lattice_map, point = spec.b, None, x
            rep = a.positivity
            if rep.kind == POSITIVE:
                xi, dclass = np.array([1.0]), RationalPeriod(T=1.0, k=(1,))
            elif rep.kind == NEGATIVE:
                a = a.negated()
                xi, dclass = np.array([-1.0]), RationalPeriod(T=1.0, k=(-1,))
            else:
                return PeriodReport(found=False)
        elif isinstance(spec, DirectionField):
            a, xi, lattice_map, point = spec.a, spec.xi, None, x
            dclass = classify_direction(xi, search_bound)
        else:
            a, xi = spec.a, spec.xi
            lattice_map = spec.phi.lattice_inv
            point = spec.phi.forward(x)
            dclass = classify_direction(xi, search_bound)
        got = _direction_period(a, xi, point, dclass, lattice_map)
        if got is not None:
            tau, k = got
            if tau <= tau_max:
                return _verify_period(spec, x, tau, k, tol)
        return PeriodReport(found=False)

    return _sample_search_period(spec, x, tau_max, tol)


def _sample_search_period(spec: FieldSpec, x, tau_max: float,
                          tol: float) -> PeriodReport:
    """Dense sampling of dist(X(t) - x, Z^d); candidates refined by Newton
    on tau along the local velocity direction, confirmed by re-integration."""
    traj = integrate(spec, x, tau_max, rtol=1e-11, atol=1e-12,
                     dense_dt=min(0.01, tau_max / 1000.0))
    ts = traj.dense_times
    disp = traj.dense_states - x[None, :]
    k_round = np.round(disp)
    dist = np.linalg.norm(disp - k_round, axis=1)
    # nontrivial lattice displacement only (t near 0 matches k = 0 trivially)
    candidates = np.flatnonzero((dist < 1e-3) & (ts > 0.0)
                                & (np.max(np.abs(k_round), axis=1) > 0))
    for i in candidates[:8]:
        tau = float(ts[i])
        k = k_round[i].astype(np.int64)
        for _ in range(8):
            if not 0.0 < tau <= 2.0 * tau_max:
                break
            end = integrate(spec, x, tau, rtol=1e-12, atol=1e-13,
                            dense_dt=tau / 2.0).state_at_end()
            resid = end - x - k
            rnorm = float(np.linalg.norm(resid))
            if rnorm <= tol:
                return PeriodReport(found=True, tau=tau,
                                    k=tuple(int(v) for v in k), residual=rnorm)
            v = spec.velocity(end)
            denom = float(v @ v)
            if denom < 1e-20:
                break
            step = -float(resid @ v) / denom
            if not math.isfinite(step) or abs(step) > 1.0:
                break
            tau += step
    return PeriodReport(found=False)
