"""Discrete generator, carre du champ, and its iterated form on the window.

All operators are local stencils built from the jump rates.  Grid functions
are plain float arrays over the window nodes.  Near the window edges the
zeroed reflecting rates make the generator and Gamma well defined everywhere;
the closed five-term form of Gamma_2 needs two full neighbors on each side, so
entries within margin 2 of an edge are flagged NaN and excluded downstream.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lattice import RateField, StationaryMeasure

_EPS_FLOOR = 1e-300


@dataclass(frozen=True)
class OperatorStencil:
    """Rates plus the interior margin on which a stencil is fully defined
    (1 for the generator and Gamma, 2 for Gamma_2)."""

    rates: RateField
    interior_margin: int

    def interior(self) -> slice:
        n = self.rates.n_nodes
        m = self.interior_margin
        if n - 2 * m < 1:
            raise ValueError(f"window of {n} nodes has no margin-{m} interior")
        return slice(m, n - m)


def interior_slice(n: int, margin: int) -> slice:
    if n - 2 * margin < 1:
        raise ValueError(f"window of {n} nodes has no margin-{margin} interior")
    return slice(margin, n - margin)


def _shift_up(f):
    """f_{i+1} with the out-of-range slot filled by f_n-1 (killed by alpha=0)."""
    out = np.empty_like(f)
    out[:-1] = f[1:]
    out[-1] = f[-1]
    return out


def _shift_down(f):
    out = np.empty_like(f)
    out[1:] = f[:-1]
    out[0] = f[0]
    return out


def apply_generator(r: RateField, f: np.ndarray) -> np.ndarray:
    """(Lf)_i = alpha_i (f_{i+1} - f_i) - beta_i (f_i - f_{i-1})."""
    f = np.asarray(f, dtype=float)
    return r.alpha * (_shift_up(f) - f) - r.beta * (f - _shift_down(f))


def apply_forward(r: RateField, rho: np.ndarray) -> np.ndarray:
    """Adjoint (mass) form: net inflow minus outflow at each node.

    (L*rho)_i = (alpha_{i-1} rho_{i-1} - beta_i rho_i)
              - (alpha_i rho_i - beta_{i+1} rho_{i+1});
    the fluxes telescope, so the total mass derivative is exactly zero under
    reflecting truncation.
    """
    rho = np.asarray(rho, dtype=float)
    a, b = r.alpha, r.beta
    out = -(a + b) * rho
    out[1:] += a[:-1] * rho[:-1]
    out[:-1] += b[1:] * rho[1:]
    return out


def gamma(r: RateField, f: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Gamma(f,g)_i = (alpha_i D+f D+g + beta_i D-f D-g)/2; nonnegative for f=g."""
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    dfp = _shift_up(f) - f
    dfm = f - _shift_down(f)
    dgp = _shift_up(g) - g
    dgm = g - _shift_down(g)
    return 0.5 * r.alpha * dfp * dgp + 0.5 * r.beta * dfm * dgm


def gamma2_definitional(r: RateField, f: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Gamma_2(f,g) = (L Gamma(f,g) - Gamma(f, Lg) - Gamma(Lf, g)) / 2.

    Composes the generator and Gamma directly; the independent cross-check for
    the closed five-term form.
    """
    gfg = gamma(r, f, g)
    return 0.5 * (apply_generator(r, gfg) - gamma(r, f, apply_generator(r, g)) - gamma(r, apply_generator(r, f), g))


def gamma2_closed(r: RateField, f: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Closed five-term form of Gamma_2 on the margin-2 interior (NaN at edges).

    The two first-order terms carry the curvature information; the three
    second-difference terms are nonnegative squares for f = g.
    """
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    a, b = r.alpha, r.beta
    n = a.shape[0]
    out = np.full(n, np.nan)
    if n < 5:
        return out
    c = slice(2, n - 2)
    p1 = slice(3, n - 1)
    m1 = slice(1, n - 3)
    p2 = slice(4, n)
    m2 = slice(0, n - 4)

    da_p = a[p1] - a[c]
    db_p = b[p1] - b[c]
    da_m = a[c] - a[m1]
    db_m = b[c] - b[m1]

    dfp = f[p1] - f[c]
    dfm = f[c] - f[m1]
    dgp = g[p1] - g[c]
    dgm = g[c] - g[m1]

    ddf_p = f[p2] - 2.0 * f[p1] + f[c]
    ddf_m = f[c] - 2.0 * f[m1] + f[m2]
    ddf_c = f[p1] - 2.0 * f[c] + f[m1]
    ddg_p = g[p2] - 2.0 * g[p1] + g[c]
    ddg_m = g[c] - 2.0 * g[m1] + g[m2]
    ddg_c = g[p1] - 2.0 * g[c] + g[m1]

    out[c] = (
        0.25 * a[c] * (3.0 * db_p - da_p) * dfp * dgp
        + 0.25 * b[c] * (db_m - 3.0 * da_m) * dfm * dgm
        + 0.25 * a[c] * a[p1] * ddf_p * ddg_p
        + 0.25 * b[c] * b[m1] * ddf_m * ddg_m
        + 0.5 * a[c] * b[c] * ddf_c * ddg_c
    )
    return out


def quotient_defect(r: RateField, f: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Gamma(f^2/W, W) - Gamma(f, f) in closed form; nonpositive for any W > 0.

    Closed form: -(alpha_i (f_{i+1} W_i - f_i W_{i+1})^2 / (W_i W_{i+1})
                  + beta_i (f_{i-1} W_i - f_i W_{i-1})^2 / (W_i W_{i-1})) / 2.
    """
    f = np.asarray(f, dtype=float)
    w = np.asarray(w, dtype=float)
    if np.any(w <= 0.0):
        raise ValueError("W must be strictly positive")
    w_up = _shift_up(w)
    w_dn = _shift_down(w)
    num_p = _shift_up(f) * w - f * w_up
    num_m = _shift_down(f) * w - f * w_dn
    return -0.5 * (r.alpha * num_p ** 2 / (w * w_up) + r.beta * num_m ** 2 / (w * w_dn))


def quotient_defect_quadrature(r: RateField, f: np.ndarray, w: np.ndarray, n_points: int = 65) -> np.ndarray:
    """Composite-trapezoid evaluation of the s-integral representation of the
    quotient defect; smooth integrand, pure cross-check for the closed form."""
    f = np.asarray(f, dtype=float)
    w = np.asarray(w, dtype=float)
    if np.any(w <= 0.0):
        raise ValueError("W must be strictly positive")
    dwp = _shift_up(w) - w
    dwm = w - _shift_down(w)
    num_p = _shift_up(f) * w - f * _shift_up(w)
    num_m = _shift_down(f) * w - f * _shift_down(w)
    s = np.linspace(0.0, 1.0, n_points)
    acc = np.zeros_like(f)
    for k, sk in enumerate(s):
        g = r.alpha * (num_p / (w + sk * dwp)) ** 2 + r.beta * (num_m / (w - sk * dwm)) ** 2
        weight = 0.5 if k in (0, n_points - 1) else 1.0
        acc += weight * g
    return -0.5 * acc / (n_points - 1)


def dirichlet_identity_check(r: RateField, m: StationaryMeasure, f: np.ndarray) -> float:
    """Relative residual of <Gamma(f,f), pi> = -<f Lf, pi> (summation by parts
    under detailed balance and reflecting truncation)."""
    f = np.asarray(f, dtype=float)
    energy = float(np.dot(gamma(r, f, f), m.weights))
    cross = float(np.dot(f * apply_generator(r, f), m.weights))
    return abs(energy + cross) / max(energy, _EPS_FLOOR)
