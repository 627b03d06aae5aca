"""Potentials, the truncated lattice, jump rates, and the stationary measure.

The chain lives on nodes x_i = i*h for i in [-N, N] with reflecting truncation:
the outward rates at the two window edges are zeroed, which conserves mass and
keeps detailed balance exact.  The renormalized window measure is then the
conditional measure of e^{-u} on the window.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import logsumexp

from .bfun import BFunction


@dataclass(frozen=True)
class Potential:
    """A confining potential u(x) with optional analytic derivatives.

    ``drift_constants = (a, M)`` asserts x*u'(x) >= a*x^2 for |x| > M;
    ``convexity_lambda`` asserts u'' >= lambda.  Both are advisory metadata
    used by certificates and window auto-sizing; neither is enforced here.
    """

    kind: str
    fn: Callable
    dfn: Callable | None = None
    d2fn: Callable | None = None
    drift_constants: tuple[float, float] | None = None
    convexity_lambda: float | None = None
    tag: str = "custom"

    def __call__(self, x):
        return self.fn(x)

    def deriv(self, x, delta=1e-6):
        if self.dfn is not None:
            return self.dfn(x)
        x = np.asarray(x, dtype=float)
        return (self.fn(x + delta) - self.fn(x - delta)) / (2 * delta)

    def deriv2(self, x, delta=1e-5):
        if self.d2fn is not None:
            return self.d2fn(x)
        x = np.asarray(x, dtype=float)
        return (self.fn(x + delta) - 2.0 * self.fn(x) + self.fn(x - delta)) / delta ** 2


def make_potential(kind: str, params) -> Potential:
    """Builtin potential families.

    quadratic [c]:   c*x^2            (convexity 2c for c > 0)
    quartic  [c]:    c*x^4
    double_well [a4, a2]: a4*x^4 - a2*x^2
    abs [c]:         c*|x|
    custom_poly [c0, c1, ...]: sum c_k x^k
    """
    p = [float(v) for v in np.atleast_1d(params)]
    if kind == "quadratic":
        (c,) = p
        lam = 2.0 * c if c > 0 else None
        return Potential(
            "quadratic",
            lambda x: c * np.square(x),
            dfn=lambda x: 2.0 * c * np.asarray(x, dtype=float),
            d2fn=lambda x: np.full_like(np.asarray(x, dtype=float), 2.0 * c),
            drift_constants=(2.0 * c, 1.0) if c > 0 else None,
            convexity_lambda=lam,
            tag=f"quadratic({c:g})",
        )
    if kind == "quartic":
        (c,) = p
        return Potential(
            "quartic",
            lambda x: c * np.power(x, 4),
            dfn=lambda x: 4.0 * c * np.power(x, 3),
            d2fn=lambda x: 12.0 * c * np.square(x),
            drift_constants=(4.0 * c, 1.0) if c > 0 else None,
            convexity_lambda=None,
            tag=f"quartic({c:g})",
        )
    if kind == "double_well":
        a4, a2 = p
        drift = None
        if a4 > 0:
            # beyond M, 4*a4*x^2 - 2*a2 >= 2, so x*u' >= 2*x^2
            m = float(np.sqrt((2.0 * a2 + 2.0) / (4.0 * a4))) if a2 > -1.0 else 1.0
            drift = (2.0, max(m, 1.0))
        return Potential(
            "double_well",
            lambda x: a4 * np.power(x, 4) - a2 * np.square(x),
            dfn=lambda x: 4.0 * a4 * np.power(x, 3) - 2.0 * a2 * np.asarray(x, dtype=float),
            d2fn=lambda x: 12.0 * a4 * np.square(x) - 2.0 * a2,
            drift_constants=drift,
            convexity_lambda=None,
            tag=f"double_well({a4:g},{a2:g})",
        )
    if kind == "abs":
        (c,) = p
        return Potential(
            "abs",
            lambda x: c * np.abs(x),
            tag=f"abs({c:g})",
        )
    if kind == "custom_poly":
        coeffs = np.asarray(p, dtype=float)
        dcoeffs = np.polynomial.polynomial.polyder(coeffs) if coeffs.size > 1 else np.zeros(1)
        d2coeffs = np.polynomial.polynomial.polyder(coeffs, 2) if coeffs.size > 2 else np.zeros(1)
        return Potential(
            "custom_poly",
            lambda x: np.polynomial.polynomial.polyval(np.asarray(x, dtype=float), coeffs),
            dfn=lambda x: np.polynomial.polynomial.polyval(np.asarray(x, dtype=float), dcoeffs),
            d2fn=lambda x: np.polynomial.polynomial.polyval(np.asarray(x, dtype=float), d2coeffs),
            tag="custom_poly(" + ",".join(f"{c:g}" for c in p) + ")",
        )
    raise ValueError(f"unknown potential kind {kind!r}")


@dataclass(frozen=True)
class Lattice:
    """Uniform symmetric lattice x_i = i*h, i in [-n_half, n_half], reflecting edges."""

    h: float
    n_half: int
    boundary: str = "reflecting"

    def __post_init__(self):
        if not (self.h > 0 and np.isfinite(self.h)):
            raise ValueError(f"grid step must be positive, got {self.h!r}")
        if self.n_half < 0:
            raise ValueError(f"n_half must be nonnegative, got {self.n_half!r}")

    @property
    def n_nodes(self) -> int:
        return 2 * self.n_half + 1

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(-self.n_half, self.n_half + 1) * self.h

    @property
    def radius(self) -> float:
        return self.n_half * self.h


@dataclass(frozen=True)
class RateField:
    """Per-node jump rates: alpha (to the right), beta (to the left).

    Reflecting truncation zeroes alpha at the right edge and beta at the left
    edge; all other entries are strictly positive for a valid flux weight.
    """

    alpha: np.ndarray
    beta: np.ndarray
    lattice: Lattice

    @property
    def max_rate(self) -> float:
        return float(np.max(self.alpha + self.beta))

    @property
    def n_nodes(self) -> int:
        return self.alpha.shape[0]


def build_rates(u: Potential, b: BFunction, lat: Lattice) -> RateField:
    """Jump rates alpha_i = B(u_{i+1}-u_i)/h^2, beta_i = B(u_{i-1}-u_i)/h^2."""
    x = lat.nodes
    uvals = np.asarray(u(x), dtype=float)
    if not np.all(np.isfinite(uvals)):
        bad = int(np.argmax(~np.isfinite(uvals)))
        raise ValueError(f"potential is not finite at node x={x[bad]:g}")
    n = lat.n_nodes
    alpha = np.zeros(n)
    beta = np.zeros(n)
    if n > 1:
        du = uvals[1:] - uvals[:-1]
        inv_h2 = 1.0 / lat.h ** 2
        alpha[:-1] = np.asarray(b(du), dtype=float) * inv_h2
        beta[1:] = np.asarray(b(-du), dtype=float) * inv_h2
        if np.any(alpha[:-1] <= 0) or np.any(beta[1:] <= 0) or not (
            np.all(np.isfinite(alpha)) and np.all(np.isfinite(beta))
        ):
            raise ValueError(
                "rate underflow or overflow: potential increments too large for "
                "this flux weight at double precision; shrink the window or h"
            )
    return RateField(alpha, beta, lat)


@dataclass(frozen=True)
class StationaryMeasure:
    """Normalized weights pi_i proportional to e^{-u(x_i)} on the window."""

    weights: np.ndarray
    log_weights: np.ndarray


def stationary_measure(u: Potential, lat: Lattice) -> StationaryMeasure:
    """Window-conditional stationary measure, computed entirely in log space."""
    uvals = np.asarray(u(lat.nodes), dtype=float)
    if not np.all(np.isfinite(uvals)):
        raise ValueError("potential is not finite on the window")
    logw = -uvals
    log_z = float(logsumexp(logw))
    if not np.isfinite(log_z):
        raise ValueError("stationary weights underflow: window too wide for this potential")
    logw = logw - log_z
    w = np.exp(logw)
    if np.any(w <= 0.0):
        raise ValueError("stationary weights underflow: window too wide for this potential")
    w = w / w.sum()
    return StationaryMeasure(w, logw)


def measure_from_rates(r: RateField) -> StationaryMeasure:
    """Reconstruct the detailed-balance measure from the rates themselves:
    log pi_{i+1} - log pi_i = log alpha_i - log beta_{i+1}."""
    a, b = r.alpha, r.beta
    n = a.shape[0]
    logw = np.zeros(n)
    if n > 1:
        steps = np.log(a[:-1]) - np.log(b[1:])
        logw[1:] = np.cumsum(steps)
    logw -= float(logsumexp(logw))
    w = np.exp(logw)
    w = w / w.sum()
    return StationaryMeasure(w, logw)


def check_detailed_balance(r: RateField, m: StationaryMeasure) -> float:
    """Max relative residual of alpha_{i-1} pi_{i-1} = beta_i pi_i over edges."""
    if r.n_nodes != m.weights.shape[0]:
        raise ValueError("rate field and measure have different sizes")
    if r.n_nodes < 2:
        return 0.0
    lhs = r.alpha[:-1] * m.weights[:-1]
    rhs = r.beta[1:] * m.weights[1:]
    return float(np.max(np.abs(lhs - rhs) / rhs))


def summability_report(r: RateField, m: StationaryMeasure) -> tuple[float, float]:
    """Total pi-weighted jump activity and the fraction carried by the
    outermost ~10% of nodes (ceil(5%) per side).  A small tail fraction is
    evidence that the window captures the full-space sum."""
    contrib = (r.alpha + r.beta) * m.weights
    total = float(np.sum(contrib))
    n = contrib.shape[0]
    k = max(1, int(round(0.05 * n)))
    tail = float(np.sum(contrib[:k]) + np.sum(contrib[-k:])) if 2 * k < n else total
    return total, tail / total if total > 0 else 0.0


def mean_var(m: StationaryMeasure, f: np.ndarray) -> tuple[float, float]:
    """pi-mean and pi-variance of a grid function."""
    f = np.asarray(f, dtype=float)
    if f.shape[0] != m.weights.shape[0]:
        raise ValueError("grid function and measure have different sizes")
    mean = float(np.dot(f, m.weights))
    var = float(np.dot(np.square(f - mean), m.weights))
    return mean, max(var, 0.0)


def potential_report(u: Potential, x_grid) -> dict:
    """Advisory check of the drift and convexity metadata on sampled points."""
    x = np.asarray(x_grid, dtype=float)
    out: dict = {"tag": u.tag}
    if u.drift_constants is not None:
        a, big_m = u.drift_constants
        far = np.abs(x) > big_m
        xf = x[far]
        slack = xf * np.asarray(u.deriv(xf), dtype=float) - a * np.square(xf)
        worst = float(np.min(slack)) if xf.size else 0.0
        out["drift"] = {"a": a, "M": big_m, "min_slack": worst, "pass": worst >= -1e-9}
    if u.convexity_lambda is not None:
        lam = u.convexity_lambda
        slack = np.asarray(u.deriv2(x), dtype=float) - lam
        worst = float(np.min(slack))
        out["convexity"] = {"lambda": lam, "min_slack": worst, "pass": worst >= -1e-9}
    return out
