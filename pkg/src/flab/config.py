"""Experiment configuration: INI-like files with sections, key = value, # comments.

Sections and keys (defaults in brackets; unknown keys are rejected):

    [potential]  kind = quadratic|quartic|double_well|abs|custom_poly
                 params = space-separated reals
    [scheme]     b_function = scharfetter-gummel|exponential   [scharfetter-gummel]
    [grid]       h = positive real (a list is allowed for `sweep`)
                 radius = positive real | auto                 [auto]
    [time]       horizon = positive real                       [8.0]
                 dt = positive real | auto                     [auto]
                 method = rk4|trapezoidal                      [trapezoidal]
    [sim]        n_paths = positive int                        [20000]
                 seed = nonnegative int                        [0]
                 horizon = positive real                       [10.0]
    [outputs]    dir = path                                    [.]
                 formats = subset of {json, csv}               [json csv]

`radius = auto` picks the smallest grid multiple R with
u(+-R) - min u >= 40 and R >= 4/sqrt(lambda) (16 when no convexity constant is
known), so the discarded tail weight is below e^{-40}.
"""
from __future__ import annotations

import configparser
import difflib
import io
import math
from dataclasses import dataclass, replace

import numpy as np

from .lattice import Potential

_POTENTIAL_KINDS = ("quadratic", "quartic", "double_well", "abs", "custom_poly")
_B_KINDS = ("scharfetter-gummel", "exponential")
_METHODS = ("rk4", "trapezoidal")
_PARAM_COUNT = {"quadratic": 1, "quartic": 1, "double_well": 2, "abs": 1}

_SCHEMA = {
    "potential": ("kind", "params"),
    "scheme": ("b_function",),
    "grid": ("h", "radius"),
    "time": ("horizon", "dt", "method"),
    "sim": ("n_paths", "seed", "horizon"),
    "outputs": ("dir", "formats"),
}


class ConfigError(ValueError):
    """Raised for parse errors, unknown keys, and range violations."""


@dataclass(frozen=True)
class ExperimentConfig:
    potential_kind: str
    potential_params: tuple[float, ...]
    b_kind: str = "scharfetter-gummel"
    h_values: tuple[float, ...] = (0.1,)
    radius: float | str = "auto"
    time_horizon: float = 8.0
    dt: float | str = "auto"
    method: str = "trapezoidal"
    n_paths: int = 20000
    seed: int = 0
    sim_horizon: float = 10.0
    out_dir: str = "."
    formats: tuple[str, ...] = ("json", "csv")

    @property
    def h(self) -> float:
        return self.h_values[0]

    def with_overrides(self, out_dir: str | None = None, seed: int | None = None) -> "ExperimentConfig":
        cfg = self
        if out_dir is not None:
            cfg = replace(cfg, out_dir=out_dir)
        if seed is not None:
            cfg = replace(cfg, seed=seed)
        return cfg


def _reject_unknown(parser: configparser.ConfigParser) -> None:
    for section in parser.sections():
        if section not in _SCHEMA:
            near = difflib.get_close_matches(section, list(_SCHEMA), n=1, cutoff=0.5)
            hint = f"; did you mean [{near[0]}]?" if near else f"; valid sections: {', '.join(_SCHEMA)}"
            raise ConfigError(f"unknown section [{section}]{hint}")
        valid = _SCHEMA[section]
        for key in parser[section]:
            if key not in valid:
                near = difflib.get_close_matches(key, valid, n=1, cutoff=0.5)
                hint = f"; did you mean '{near[0]}'?" if near else ""
                raise ConfigError(
                    f"unknown key '{section}.{key}'{hint}; valid keys for [{section}]: {', '.join(valid)}"
                )


def _positive_float(raw: str, name: str) -> float:
    try:
        v = float(raw)
    except ValueError as exc:
        raise ConfigError(f"{name}: not a number (got {raw!r})") from exc
    if not (v > 0 and math.isfinite(v)):
        raise ConfigError(f"{name}: must be a positive finite number (got {raw})")
    return v


def _parse_text(text: str, origin: str) -> ExperimentConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",), strict=True)
    try:
        parser.read_string(text, source=origin)
    except configparser.Error as exc:
        raise ConfigError(f"config parse error: {exc}") from exc
    _reject_unknown(parser)

    if not parser.has_option("potential", "kind"):
        raise ConfigError("potential.kind: required")
    kind = parser.get("potential", "kind").strip()
    if kind not in _POTENTIAL_KINDS:
        raise ConfigError(f"potential.kind: unknown kind {kind!r}; valid: {', '.join(_POTENTIAL_KINDS)}")
    raw_params = parser.get("potential", "params", fallback="").replace(",", " ").split()
    try:
        params = tuple(float(v) for v in raw_params)
    except ValueError as exc:
        raise ConfigError(f"potential.params: not numbers (got {raw_params!r})") from exc
    want = _PARAM_COUNT.get(kind)
    if want is not None and len(params) != want:
        raise ConfigError(f"potential.params: {kind} takes {want} value(s), got {len(params)}")
    if kind == "custom_poly" and len(params) < 1:
        raise ConfigError("potential.params: custom_poly needs at least one coefficient")

    b_kind = parser.get("scheme", "b_function", fallback="scharfetter-gummel").strip()
    if b_kind not in _B_KINDS:
        raise ConfigError(f"scheme.b_function: unknown kind {b_kind!r}; valid: {', '.join(_B_KINDS)}")

    if not parser.has_option("grid", "h"):
        raise ConfigError("grid.h: required")
    h_raw = parser.get("grid", "h").replace(",", " ").split()
    h_values = tuple(_positive_float(v, "grid.h") for v in h_raw)
    if not h_values:
        raise ConfigError("grid.h: required")

    radius_raw = parser.get("grid", "radius", fallback="auto").strip()
    radius: float | str = "auto" if radius_raw == "auto" else _positive_float(radius_raw, "grid.radius")

    horizon = _positive_float(parser.get("time", "horizon", fallback="8.0"), "time.horizon")
    dt_raw = parser.get("time", "dt", fallback="auto").strip()
    dt: float | str = "auto" if dt_raw == "auto" else _positive_float(dt_raw, "time.dt")
    method = parser.get("time", "method", fallback="trapezoidal").strip()
    if method not in _METHODS:
        raise ConfigError(f"time.method: unknown method {method!r}; valid: {', '.join(_METHODS)}")

    try:
        n_paths = int(parser.get("sim", "n_paths", fallback="20000"))
        seed = int(parser.get("sim", "seed", fallback="0"))
    except ValueError as exc:
        raise ConfigError(f"sim: integer field is not an integer ({exc})") from exc
    if n_paths < 1:
        raise ConfigError(f"sim.n_paths: must be positive (got {n_paths})")
    if seed < 0:
        raise ConfigError(f"sim.seed: must be nonnegative (got {seed})")
    sim_horizon = _positive_float(parser.get("sim", "horizon", fallback="10.0"), "sim.horizon")

    out_dir = parser.get("outputs", "dir", fallback=".").strip()
    formats_raw = parser.get("outputs", "formats", fallback="json csv").replace(",", " ").split()
    for f in formats_raw:
        if f not in ("json", "csv"):
            raise ConfigError(f"outputs.formats: unknown format {f!r}; valid: json, csv")
    if not formats_raw:
        raise ConfigError("outputs.formats: at least one of json, csv")
    formats = tuple(dict.fromkeys(formats_raw))

    return ExperimentConfig(
        potential_kind=kind,
        potential_params=params,
        b_kind=b_kind,
        h_values=h_values,
        radius=radius,
        time_horizon=horizon,
        dt=dt,
        method=method,
        n_paths=n_paths,
        seed=seed,
        sim_horizon=sim_horizon,
        out_dir=out_dir,
        formats=formats,
    )


def parse_config(path: str) -> ExperimentConfig:
    """Parse and validate a config file, applying defaults."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    return _parse_text(text, path)


def parse_config_text(text: str, origin: str = "<string>") -> ExperimentConfig:
    return _parse_text(text, origin)


def resolved_ini_text(cfg: ExperimentConfig) -> str:
    """Echo of the fully-resolved config; re-parses to an identical structure."""
    out = io.StringIO()

    def fval(v):
        if isinstance(v, str):
            return v
        return format(float(v), ".17g")

    out.write("[potential]\n")
    out.write(f"kind = {cfg.potential_kind}\n")
    out.write("params = " + " ".join(fval(p) for p in cfg.potential_params) + "\n\n")
    out.write("[scheme]\n")
    out.write(f"b_function = {cfg.b_kind}\n\n")
    out.write("[grid]\n")
    out.write("h = " + " ".join(fval(h) for h in cfg.h_values) + "\n")
    out.write(f"radius = {fval(cfg.radius)}\n\n")
    out.write("[time]\n")
    out.write(f"horizon = {fval(cfg.time_horizon)}\n")
    out.write(f"dt = {fval(cfg.dt)}\n")
    out.write(f"method = {cfg.method}\n\n")
    out.write("[sim]\n")
    out.write(f"n_paths = {cfg.n_paths}\n")
    out.write(f"seed = {cfg.seed}\n")
    out.write(f"horizon = {fval(cfg.sim_horizon)}\n\n")
    out.write("[outputs]\n")
    out.write(f"dir = {cfg.out_dir}\n")
    out.write("formats = " + " ".join(cfg.formats) + "\n")
    return out.getvalue()


def auto_radius(u: Potential, h: float, x_cap: float = 1000.0) -> float:
    """Smallest grid multiple R with u(+-R) - min u >= 40 and
    R >= 4/sqrt(lambda) (16 without a convexity constant)."""
    lam = u.convexity_lambda
    floor = 4.0 / math.sqrt(lam) if lam else 16.0
    k = max(1, int(math.ceil(floor / h - 1e-12)))
    u_min = float(np.min(np.asarray(u(np.arange(-k, k + 1) * h), dtype=float)))
    while True:
        x = k * h
        if x > x_cap:
            raise ConfigError(
                "grid.radius: auto-selection exceeded its bound (potential grows too "
                "slowly); set grid.radius explicitly"
            )
        up = float(u(x))
        dn = float(u(-x))
        u_min = min(u_min, up, dn)
        if up - u_min >= 40.0 and dn - u_min >= 40.0:
            return x
        k += 1
