"""Flux weight functions B(s) for two-point finite-volume fluxes.

The weight acts on potential increments: the scheme's jump rates are
``alpha_i = B(u_{i+1}-u_i)/h**2`` (jump right) and ``beta_i = B(u_{i-1}-u_i)/h**2``
(jump left).  Admissible weights are positive, non-increasing, satisfy B(0) = 1
and the balance identity ``log B(-s) - log B(s) = s``; the identity together with
B(0) = 1 forces B'(0) = -1/2 and makes e^{-u} an exact stationary state of the
resulting birth-death chain, whatever the grid step.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

# |s| below this: quadratic series for s/(e^s - 1); avoids 0/0 cancellation
_SG_SERIES_CUT = 1e-5
# |s| below this: series for the derivative (numerator is O(s^2))
_SG_DERIV_CUT = 1e-4
# above this, switch to the e^{-s} form so e^s never overflows
_SG_BIG = 30.0


def _sg_value(s):
    s = np.asarray(s, dtype=float)
    scalar = s.ndim == 0
    s = np.atleast_1d(s)
    out = np.empty_like(s)
    small = np.abs(s) < _SG_SERIES_CUT
    ss = s[small]
    out[small] = 1.0 - ss / 2.0 + ss * ss / 12.0
    big = s > _SG_BIG
    sb = s[big]
    out[big] = sb * np.exp(-sb) / (-np.expm1(-sb))
    mid = ~(small | big)
    sm = s[mid]
    out[mid] = sm / np.expm1(sm)
    return float(out[0]) if scalar else out


def _sg_deriv(s):
    s = np.asarray(s, dtype=float)
    scalar = s.ndim == 0
    s = np.atleast_1d(s)
    out = np.empty_like(s)
    small = np.abs(s) < _SG_DERIV_CUT
    ss = s[small]
    out[small] = -0.5 + ss / 6.0 - ss ** 3 / 180.0
    big = s > _SG_BIG
    sb = s[big]
    em = np.exp(-sb)
    out[big] = (em * (1.0 - sb) - em * em) / np.square(-np.expm1(-sb))
    mid = ~(small | big)
    sm = s[mid]
    e = np.expm1(sm)
    out[mid] = (e - sm * (e + 1.0)) / (e * e)
    return float(out[0]) if scalar else out


def _exp_value(s):
    s = np.asarray(s, dtype=float)
    out = np.exp(-s / 2.0)
    return float(out) if out.ndim == 0 else out


def _exp_deriv(s):
    s = np.asarray(s, dtype=float)
    out = -0.5 * np.exp(-s / 2.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class BFunction:
    """A flux weight together with its derivative and an advisory Lipschitz flag."""

    kind: str
    fn: Callable
    dfn: Callable
    lipschitz_ok: bool
    tag: str

    def __call__(self, s):
        return self.fn(s)

    def deriv(self, s):
        return self.dfn(s)


def _central_diff(fn, delta=1e-6):
    def dfn(s):
        return (np.asarray(fn(np.asarray(s) + delta)) - np.asarray(fn(np.asarray(s) - delta))) / (2 * delta)

    return dfn


def _growth_screen(dfn, s_min=-20.0) -> bool:
    """Heuristic global-Lipschitz screen: |B'| must not grow super-linearly
    toward -inf (compare the sampled extreme against the half-way point)."""
    outer = abs(float(np.max(np.abs(np.asarray(dfn(s_min))))))
    inner = abs(float(np.max(np.abs(np.asarray(dfn(s_min / 2.0))))))
    if not np.isfinite(outer) or not np.isfinite(inner):
        return False
    return outer <= 4.0 * max(inner, 1e-300)


def make_b_function(kind: str, params: Mapping | None = None) -> BFunction:
    """Construct a flux weight.

    ``scharfetter-gummel``: B(s) = s/(e^s - 1), evaluated with a series branch
    near 0.  ``exponential``: B(s) = e^{-s/2} (exponential splitting); globally
    Lipschitz fails, so ``lipschitz_ok`` is False.  ``custom``: params must
    supply ``fn`` (and optionally ``deriv``, ``lipschitz_ok``, ``tag``); the
    evaluator is screened for B(0) = 1.
    """
    params = dict(params or {})
    if kind == "scharfetter-gummel":
        return BFunction("scharfetter-gummel", _sg_value, _sg_deriv, True, "scharfetter-gummel")
    if kind == "exponential":
        return BFunction("exponential", _exp_value, _exp_deriv, False, "exponential")
    if kind == "custom":
        fn = params.get("fn")
        if fn is None:
            raise ValueError("custom B-function requires params['fn']")
        if abs(float(fn(0.0)) - 1.0) > 1e-12:
            raise ValueError(f"custom B-function fails B(0)=1 screening: B(0)={float(fn(0.0))!r}")
        dfn = params.get("deriv") or _central_diff(fn)
        lip = params.get("lipschitz_ok")
        if lip is None:
            lip = _growth_screen(dfn)
        return BFunction("custom", fn, dfn, bool(lip), str(params.get("tag", "custom")))
    raise ValueError(f"unknown B-function kind {kind!r}")


def validate_b(b: BFunction, s_grid) -> dict:
    """Check the structural properties of a flux weight on a sampled grid.

    Reports residuals for B(0)=1, positivity, the log balance identity,
    monotone decay, and B'(0)=-1/2 (finite difference), plus the advisory
    Lipschitz growth screen.  Failures are reported, never raised.
    """
    s = np.sort(np.asarray(s_grid, dtype=float))
    if s.size == 0:
        raise ValueError("s_grid must be nonempty")
    scale = max(1.0, float(np.max(np.abs(s))))
    if np.max(np.abs(s + s[::-1])) > 1e-12 * scale:
        raise ValueError("s_grid must be symmetric about 0")

    vals = np.asarray(b(s), dtype=float)

    r_unit = abs(float(b(0.0)) - 1.0)
    min_val = float(np.min(vals))
    positive = bool(min_val > 0.0)

    with np.errstate(divide="ignore", invalid="ignore"):
        ident = np.log(np.asarray(b(-s), dtype=float)) - np.log(vals) - s
    ident = np.where(np.isfinite(ident), np.abs(ident), np.inf)
    r_ident = float(np.max(ident)) if ident.size else 0.0

    diffs = np.diff(vals)
    r_mono = float(max(0.0, np.max(diffs))) if diffs.size else 0.0

    delta = 1e-6
    fd = (float(b(delta)) - float(b(-delta))) / (2 * delta)
    r_slope = abs(fd + 0.5)

    lip_pass = _growth_screen(b.dfn, s_min=float(np.min(s)))

    checks = {
        "unit_at_zero": {"pass": r_unit <= 1e-14, "residual": r_unit},
        "positivity": {"pass": positive, "min_value": min_val},
        "log_identity": {"pass": r_ident <= 1e-12, "residual": r_ident},
        "monotone": {"pass": r_mono <= 1e-12, "residual": r_mono},
        "slope_at_zero": {"pass": r_slope <= 1e-6, "residual": r_slope},
        "lipschitz_growth": {"pass": lip_pass, "flag": b.lipschitz_ok},
    }
    structural = ("unit_at_zero", "positivity", "log_identity", "monotone", "slope_at_zero")
    return {
        "kind": b.kind,
        "tag": b.tag,
        "lipschitz_ok": b.lipschitz_ok,
        "checks": checks,
        "all_pass": all(checks[k]["pass"] for k in structural),
    }
