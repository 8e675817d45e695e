"""Birkhoff time averages, drift estimates and empirical measures.

All operations are pure functions of immutable trajectories.  Time
quadrature uses composite Simpson weights on the trajectory's uniform
dense grid (matching the fourth-order accuracy of the integrator's dense
output); empirical measures assign trapezoid time weights to histogram
bins of the wrapped path.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from .errors import DimensionMismatch, ResolutionOverflow
from .fields import FieldSpec, ScalarField
from .flow import Trajectory, integrate

#: refuse histograms with more bins than this
MAX_BINS = 100_000_000


def _simpson_weights(n_points: int, h: float) -> np.ndarray:
    if n_points < 3 or n_points % 2 == 0:
        raise ValueError("Simpson weights need an odd number of points")
    w = np.ones(n_points)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * (h / 3.0)


def birkhoff_average(traj: Trajectory, f: ScalarField) -> float:
    """Time average (1/t) integral of f(X(s)) ds over the trajectory."""
    if f.dim != traj.dim:
        raise DimensionMismatch("observable dim does not match trajectory")
    ts = traj.dense_times
    if len(ts) < 3:
        raise ValueError("trajectory has no dense samples")
    h = float(ts[1] - ts[0])
    w = _simpson_weights(len(ts), h)
    vals = f.values(traj.dense_states)
    return float(w @ vals) / traj.t_end


@dataclass(frozen=True)
class DriftEstimate:
    """X(t)/t at the checkpoint schedule, with dispersion diagnostics."""
    x0: Tuple[float, ...]
    times: Tuple[float, ...]
    values: np.ndarray          # (n_checkpoints, d)
    final: np.ndarray           # (d,)
    oscillation: np.ndarray     # per-component max-min of X/t, last factor 4

    def __post_init__(self):
        self.values.setflags(write=False)
        self.final.setflags(write=False)
        self.oscillation.setflags(write=False)


def drift_estimate(traj: Trajectory) -> DriftEstimate:
    """Rotation-vector estimate X(t)/t at each checkpoint."""
    ts = traj.checkpoint_times
    keep = ts > 0.0
    ts = ts[keep]
    vals = traj.checkpoint_states[keep] / ts[:, None]
    final = traj.state_at_end() / traj.t_end
    window = ts >= traj.t_end / 4.0
    if np.any(window):
        osc = vals[window].max(axis=0) - vals[window].min(axis=0)
    else:
        osc = np.zeros(traj.dim)
    return DriftEstimate(tuple(traj.x0.tolist()), tuple(ts.tolist()),
                         vals.copy(), final.copy(), osc)


class EmpiricalMeasure:
    """Histogram measure of the wrapped trajectory on an n^d torus grid."""

    def __init__(self, weights: np.ndarray, t: float, x0):
        self.weights = np.asarray(weights, dtype=np.float64)
        self.dim = self.weights.ndim
        self.n = self.weights.shape[0]
        self.t = float(t)
        self.x0 = np.asarray(x0, dtype=np.float64)
        total = float(self.weights.sum())
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1, got {total!r}")
        if float(self.weights.min()) < 0.0:
            raise ValueError("weights must be nonnegative")
        self.weights.setflags(write=False)
        self.x0.setflags(write=False)

    def centers(self) -> np.ndarray:
        """Bin centers as an (n^d, d) array, same order as weights.ravel()."""
        return grid_centers(self.dim, self.n)

    def indices(self) -> np.ndarray:
        """Bin multi-indices as an (n^d, d) integer array."""
        axes = [np.arange(self.n)] * self.dim
        grids = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=-1)


def grid_centers(dim: int, n: int) -> np.ndarray:
    axes = [(np.arange(n) + 0.5) / n] * dim
    grids = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=-1)


def empirical_measure(traj: Trajectory, n: int) -> EmpiricalMeasure:
    """Time-weighted histogram of the wrapped trajectory, total mass 1."""
    if n < 2:
        raise ValueError("grid resolution must be at least 2")
    d = traj.dim
    if n**d > MAX_BINS:
        raise ResolutionOverflow(f"{n}^{d} bins exceed cap {MAX_BINS}")
    wrapped = traj.wrapped_dense_states()
    m = wrapped.shape[0]
    # trapezoid time weights: h/2 at the ends, h inside; normalized by t
    tw = np.full(m, 1.0)
    tw[0] = tw[-1] = 0.5
    tw /= tw.sum()
    idx = np.minimum((wrapped * n).astype(np.int64), n - 1)
    flat = np.ravel_multi_index(tuple(idx.T), (n,) * d)
    weights = np.zeros(n**d)
    np.add.at(weights, flat, tw)
    weights /= weights.sum()
    return EmpiricalMeasure(weights.reshape((n,) * d), traj.t_end, traj.x0)


def measure_average(mu: EmpiricalMeasure, f: ScalarField) -> float:
    """Integral of f against the measure (bin-center midpoint rule)."""
    if f.dim != mu.dim:
        raise DimensionMismatch("observable dim does not match measure")
    return float(mu.weights.ravel() @ f.values(mu.centers()))


def measure_vector_average(mu: EmpiricalMeasure, spec: FieldSpec) -> np.ndarray:
    """Integral of the vector field b against the measure."""
    if spec.dim != mu.dim:
        raise DimensionMismatch("field dim does not match measure")
    return mu.weights.ravel() @ spec.velocities(mu.centers())


@dataclass(frozen=True)
class CbProbe:
    """Drift estimates over a panel of starts; small diameter is evidence
    that the averages of b over invariant measures form a singleton."""
    estimates: Tuple[DriftEstimate, ...]
    diameter: float


def cb_probe(spec: FieldSpec, starts: Sequence, t_end: float,
             rtol: float = 1e-10, atol: float = 1e-12, **integrate_kw) -> CbProbe:
    """Drift estimates from every start point and their final diameter."""
    starts = [np.atleast_1d(np.asarray(s, dtype=np.float64)) for s in starts]
    if len(starts) < 2:
        raise ValueError("cb_probe needs at least two start points")
    estimates = tuple(
        drift_estimate(integrate(spec, s, t_end, rtol, atol, **integrate_kw))
        for s in starts)
    finals = np.stack([e.final for e in estimates])
    diff = finals[:, None, :] - finals[None, :, :]
    diameter = float(np.max(np.linalg.norm(diff, axis=-1)))
    return CbProbe(estimates, diameter)
