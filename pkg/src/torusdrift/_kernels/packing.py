"""Flat array layout for field specs, shared by both kernel backends.

A packed spec is a small bundle of contiguous float64/int64 arrays so the
compiled kernel never touches Python objects inside the integration loop.
Scalar fields are concatenated into one term table; ``fld_start`` holds the
[start, end) offsets of each field's terms.

Field order by kind:

* direction:  [a]                       (+ unit vector ``xi``)
* rectified:  [a, phi_1 .. phi_d]       (+ ``xi`` and integer part ``amat``)
* current:    [B_00 .. B_dd, v]         (+ ``ridge``)
* oned:       [b]
* generic:    [b_1 .. b_d]
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

KIND_DIRECTION = 0
KIND_RECTIFIED = 1
KIND_CURRENT = 2
KIND_ONED = 3
KIND_GENERIC = 4

MODE_RAW = 0
MODE_SQUARED = 1

STATUS_OK = 0
STATUS_STATIONARY = 1
STATUS_UNDERFLOW = 2
STATUS_NONFINITE = 3
STATUS_MAXSTEPS = 4
STATUS_SINGULAR = 5


class PackedScalar(NamedTuple):
    freqs: np.ndarray   # (n_terms, dim) float64
    ccoef: np.ndarray   # (n_terms,) float64
    scoef: np.ndarray   # (n_terms,) float64
    const: float
    mode: int           # MODE_RAW or MODE_SQUARED
    offset: float       # m in q^2 + m


class PackedSpec(NamedTuple):
    kind: int
    dim: int
    term_freqs: np.ndarray   # (NT, dim) float64, C-contiguous
    term_cos: np.ndarray     # (NT,)
    term_sin: np.ndarray     # (NT,)
    fld_start: np.ndarray    # (NF+1,) int64
    fld_const: np.ndarray    # (NF,)
    fld_mode: np.ndarray     # (NF,) int64
    fld_offset: np.ndarray   # (NF,)
    xi: np.ndarray           # (dim,) float64, or empty
    amat: np.ndarray         # (dim, dim) float64, or empty
    ridge: float


def _as_ro(a, dtype):
    out = np.ascontiguousarray(a, dtype=dtype)
    out.setflags(write=False)
    return out


def pack_spec(kind, dim, scalars, xi=None, amat=None, ridge=0.0) -> PackedSpec:
    """Concatenate per-field term tables into one PackedSpec."""
    starts = [0]
    freqs, ccoef, scoef, consts, modes, offsets = [], [], [], [], [], []
    for ps in scalars:
        freqs.append(ps.freqs.reshape(-1, dim))
        ccoef.append(ps.ccoef)
        scoef.append(ps.scoef)
        starts.append(starts[-1] + len(ps.ccoef))
        consts.append(ps.const)
        modes.append(ps.mode)
        offsets.append(ps.offset)
    term_freqs = np.concatenate(freqs) if freqs else np.zeros((0, dim))
    return PackedSpec(
        kind=int(kind),
        dim=int(dim),
        term_freqs=_as_ro(term_freqs, np.float64),
        term_cos=_as_ro(np.concatenate(ccoef) if ccoef else [], np.float64),
        term_sin=_as_ro(np.concatenate(scoef) if scoef else [], np.float64),
        fld_start=_as_ro(starts, np.int64),
        fld_const=_as_ro(consts, np.float64),
        fld_mode=_as_ro(modes, np.int64),
        fld_offset=_as_ro(offsets, np.float64),
        xi=_as_ro(xi if xi is not None else np.zeros(0), np.float64),
        amat=_as_ro(amat if amat is not None else np.zeros((0, 0)), np.float64),
        ridge=float(ridge),
    )
