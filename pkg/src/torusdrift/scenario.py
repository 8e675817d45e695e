"""Scenario files: strict parsing of experiment descriptions.

Scenarios are TOML documents in which every real number is written as a
decimal string (``t_end = "1e4"``), so that parsing is bit-reproducible
across platforms and the files diff cleanly.  Unknown keys are rejected
with the offending location; integer-valued settings stay native TOML
integers.  Frequencies are TOML numbers: integers, or exact halves (0.5
steps) for squared-mode fields.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ScenarioError
from .fields import (
    CurrentField,
    Diffeomorphism,
    DirectionField,
    FieldSpec,
    GenericField,
    MatrixField,
    OneDField,
    RAW,
    RectifiedField,
    ScalarField,
)

SCHEMA_VERSION = 1

DEFAULTS = {
    "t_end": 1e4,
    "rtol": 1e-10,
    "atol": 1e-12,
    "grid_n": 64,
    "search_bound": 64,
    "panel_seed": 0,
    "tol_abs": 1e-8,
    "tol_rel": 1e-2,
}

_FAMILIES = ("direction", "rectified", "current", "oned", "generic")

_SCENARIO_KEYS = {
    "id", "family", "dim", "t_end", "rtol", "atol", "grid_n", "search_bound",
    "panel_seed", "tol_abs", "tol_rel", "starts", "expected", "dense_dt",
    "xi", "xi_normalize", "a", "b", "v", "phi", "factor", "ridge", "components",
}
_SCALAR_KEYS = {"mode", "const", "offset", "terms"}
_TERM_KEYS = {"k", "cos", "sin"}
_PHI_KEYS = {"lattice", "periodic"}


@dataclass(frozen=True)
class Scenario:
    """One experiment: a field spec, start points and run settings."""
    id: str
    family: str
    dim: int
    spec: FieldSpec
    starts: Tuple[np.ndarray, ...]
    t_end: float
    rtol: float
    atol: float
    grid_n: int
    search_bound: int
    panel_seed: int
    tol_abs: float
    tol_rel: float
    expected: Optional[np.ndarray] = None
    dense_dt: Optional[float] = None


class _Ctx:
    """Error-message breadcrumb for strict parsing."""

    def __init__(self, where: str):
        self.where = where

    def fail(self, msg: str):
        raise ScenarioError(f"{self.where}: {msg}")

    def sub(self, part: str) -> "_Ctx":
        return _Ctx(f"{self.where}.{part}")


def _check_keys(d: dict, allowed: set, ctx: _Ctx):
    unknown = set(d) - allowed
    if unknown:
        ctx.fail(f"unknown key(s) {sorted(unknown)}")


def _decimal(d: dict, key: str, ctx: _Ctx, default=None) -> float:
    if key not in d:
        if default is None:
            ctx.fail(f"missing required key {key!r}")
        return float(default)
    v = d[key]
    if not isinstance(v, str):
        ctx.fail(f"{key} must be a decimal string, got {type(v).__name__}")
    try:
        return float(v)
    except ValueError:
        ctx.fail(f"{key} is not a valid decimal string: {v!r}")


def _integer(d: dict, key: str, ctx: _Ctx, default=None) -> int:
    if key not in d:
        if default is None:
            ctx.fail(f"missing required key {key!r}")
        return int(default)
    v = d[key]
    if not isinstance(v, int) or isinstance(v, bool):
        ctx.fail(f"{key} must be an integer, got {type(v).__name__}")
    return v


def _string(d: dict, key: str, ctx: _Ctx) -> str:
    if key not in d:
        ctx.fail(f"missing required key {key!r}")
    v = d[key]
    if not isinstance(v, str):
        ctx.fail(f"{key} must be a string")
    return v


def _decimal_vector(v, dim: int, ctx: _Ctx, what: str) -> np.ndarray:
    if not isinstance(v, list) or len(v) != dim:
        ctx.fail(f"{what} must be a list of {dim} decimal strings")
    out = []
    for e in v:
        if not isinstance(e, str):
            ctx.fail(f"{what} entries must be decimal strings")
        try:
            out.append(float(e))
        except ValueError:
            ctx.fail(f"{what} entry is not a valid decimal string: {e!r}")
    return np.array(out, dtype=np.float64)


def _parse_scalar(tbl, dim: int, ctx: _Ctx) -> ScalarField:
    if not isinstance(tbl, dict):
        ctx.fail("expected a field table")
    _check_keys(tbl, _SCALAR_KEYS, ctx)
    mode = tbl.get("mode", RAW)
    if mode not in ("raw", "squared"):
        ctx.fail(f"mode must be 'raw' or 'squared', got {mode!r}")
    const = _decimal(tbl, "const", ctx, default=0.0)
    offset = _decimal(tbl, "offset", ctx, default=0.0)
    terms = []
    for i, term in enumerate(tbl.get("terms", [])):
        tctx = ctx.sub(f"terms[{i}]")
        if not isinstance(term, dict):
            tctx.fail("expected a term table")
        _check_keys(term, _TERM_KEYS, tctx)
        k = term.get("k")
        if not isinstance(k, list) or len(k) != dim:
            tctx.fail(f"k must be a list of {dim} frequencies")
        for v in k:
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                tctx.fail("frequencies must be numbers")
            if 2 * float(v) != round(2 * float(v)):
                tctx.fail(f"frequency {v} is not an exact half-integer")
        cos = _decimal(term, "cos", tctx, default=0.0)
        sin = _decimal(term, "sin", tctx, default=0.0)
        terms.append((tuple(float(v) for v in k), cos, sin))
    try:
        return ScalarField(dim, terms, const=const, mode=mode, offset=offset)
    except Exception as exc:
        ctx.fail(str(exc))


def _parse_phi(tbl, dim: int, ctx: _Ctx) -> Diffeomorphism:
    if not isinstance(tbl, dict):
        ctx.fail("expected a diffeomorphism table")
    _check_keys(tbl, _PHI_KEYS, ctx)
    lattice = tbl.get("lattice")
    if (not isinstance(lattice, list) or len(lattice) != dim
            or any(not isinstance(r, list) or len(r) != dim for r in lattice)):
        ctx.fail(f"lattice must be a {dim}x{dim} integer matrix")
    periodic = tbl.get("periodic")
    fields = None
    if periodic is not None:
        if not isinstance(periodic, list) or len(periodic) != dim:
            ctx.fail(f"periodic must list {dim} component tables")
        fields = [_parse_scalar(p, dim, ctx.sub(f"periodic[{i}]"))
                  for i, p in enumerate(periodic)]
    try:
        return Diffeomorphism(np.array(lattice), fields)
    except Exception as exc:
        ctx.fail(str(exc))


def _build_spec(d: dict, family: str, dim: int, ctx: _Ctx) -> FieldSpec:
    def xi_vector():
        xi = _decimal_vector(d.get("xi"), dim, ctx, "xi")
        normalize = d.get("xi_normalize", True)
        if not isinstance(normalize, bool):
            ctx.fail("xi_normalize must be a boolean")
        if normalize:
            xi = xi / np.linalg.norm(xi)
        return xi

    try:
        if family == "oned":
            if dim != 1:
                ctx.fail("oned scenarios require dim = 1")
            return OneDField(_parse_scalar(d.get("b"), dim, ctx.sub("b")))
        if family == "direction":
            return DirectionField(_parse_scalar(d.get("a"), dim, ctx.sub("a")),
                                  xi_vector())
        if family == "rectified":
            return RectifiedField(_parse_scalar(d.get("a"), dim, ctx.sub("a")),
                                  xi_vector(),
                                  _parse_phi(d.get("phi"), dim, ctx.sub("phi")))
        if family == "current":
            ridge = _decimal(d, "ridge", ctx, default=0.0)
            factor = d.get("factor")
            entries = None
            if factor is not None:
                if (not isinstance(factor, list) or len(factor) != dim
                        or any(not isinstance(r, list) or len(r) != dim
                               for r in factor)):
                    ctx.fail(f"factor must be a {dim}x{dim} grid of field tables")
                entries = [
                    [_parse_scalar(factor[i][j], dim, ctx.sub(f"factor[{i}][{j}]"))
                     for j in range(dim)] for i in range(dim)]
            matrix = MatrixField(dim, entries, ridge)
            return CurrentField(matrix, _parse_scalar(d.get("v"), dim, ctx.sub("v")))
        if family == "generic":
            comps = d.get("components")
            if not isinstance(comps, list) or len(comps) != dim:
                ctx.fail(f"components must list {dim} field tables")
            return GenericField([_parse_scalar(c, dim, ctx.sub(f"components[{i}]"))
                                 for i, c in enumerate(comps)])
    except ScenarioError:
        raise
    except Exception as exc:
        ctx.fail(str(exc))
    ctx.fail(f"unknown family {family!r}")


_FAMILY_FIELD_KEYS = {
    "oned": {"b"},
    "direction": {"a", "xi", "xi_normalize"},
    "rectified": {"a", "xi", "xi_normalize", "phi"},
    "current": {"v", "factor", "ridge"},
    "generic": {"components"},
}


def _parse_scenario(d: dict, index: int) -> Scenario:
    ctx = _Ctx(f"scenario[{index}]")
    if not isinstance(d, dict):
        ctx.fail("expected a table")
    _check_keys(d, _SCENARIO_KEYS, ctx)
    sid = _string(d, "id", ctx)
    ctx = _Ctx(f"scenario[{index}] ({sid})")
    family = _string(d, "family", ctx)
    if family not in _FAMILIES:
        ctx.fail(f"family must be one of {_FAMILIES}")
    # reject field tables that belong to other families
    family_keys = _FAMILY_FIELD_KEYS[family]
    stray = (set(d) & {"a", "b", "v", "phi", "factor", "ridge", "components",
                       "xi", "xi_normalize"}) - family_keys
    if stray:
        ctx.fail(f"key(s) {sorted(stray)} are not valid for family {family!r}")
    dim = _integer(d, "dim", ctx)
    if dim < 1:
        ctx.fail("dim must be >= 1")

    spec = _build_spec(d, family, dim, ctx)

    starts_raw = d.get("starts")
    if not isinstance(starts_raw, list) or not starts_raw:
        ctx.fail("starts must be a nonempty list of point lists")
    starts = tuple(_decimal_vector(s, dim, ctx.sub(f"starts[{i}]"), "start")
                   for i, s in enumerate(starts_raw))

    expected = None
    if "expected" in d:
        v = d["expected"]
        if v != "auto":
            expected = _decimal_vector(v, dim, ctx, "expected")

    dense_dt = None
    if "dense_dt" in d:
        dense_dt = _decimal(d, "dense_dt", ctx)

    return Scenario(
        id=sid, family=family, dim=dim, spec=spec, starts=starts,
        t_end=_decimal(d, "t_end", ctx, DEFAULTS["t_end"]),
        rtol=_decimal(d, "rtol", ctx, DEFAULTS["rtol"]),
        atol=_decimal(d, "atol", ctx, DEFAULTS["atol"]),
        grid_n=_integer(d, "grid_n", ctx, DEFAULTS["grid_n"]),
        search_bound=_integer(d, "search_bound", ctx, DEFAULTS["search_bound"]),
        panel_seed=_integer(d, "panel_seed", ctx, DEFAULTS["panel_seed"]),
        tol_abs=_decimal(d, "tol_abs", ctx, DEFAULTS["tol_abs"]),
        tol_rel=_decimal(d, "tol_rel", ctx, DEFAULTS["tol_rel"]),
        expected=expected, dense_dt=dense_dt,
    )


def parse_scenarios(path) -> list:
    """Parse and validate a scenario file; raises ScenarioError on defects."""
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except FileNotFoundError:
        raise ScenarioError(f"scenario file not found: {path}")
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario file {path}: {exc}")
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioError(f"{path}: TOML parse error: {exc}")
    top = _Ctx(str(path))
    _check_keys(doc, {"schema_version", "scenario"}, top)
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        top.fail(f"schema_version must be {SCHEMA_VERSION}, got {version!r}")
    raw = doc.get("scenario")
    if not isinstance(raw, list) or not raw:
        top.fail("file must contain at least one [[scenario]] table")
    scenarios = [_parse_scenario(d, i) for i, d in enumerate(raw)]
    seen = {}
    for sc in scenarios:
        if sc.id in seen:
            top.fail(f"duplicate scenario id {sc.id!r}")
        seen[sc.id] = sc
    return scenarios
