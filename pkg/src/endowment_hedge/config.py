"""Flat ``key = value`` run configuration.

Lines starting with ``#`` or ``;`` are comments. List values are comma
separated. Unknown keys are rejected so that typos never fall back to a
default silently.

The initial insured hazard ``lambda_p0`` defaults to 0.06. There is no
canonical value; 0.06 lies close to the level at which the default
parameters give a single-contract price of 0.435 and a limiting price of
0.343.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from typing import Optional

from . import model
from .errors import ConfigurationError, RhoOutOfRange
from .fd import DEFAULT_I, DEFAULT_J, DEFAULT_M, Grid1D, build_grid
from .model import HazardParams, MarketSpec, PopulationPair

_SECTION = "run"


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.split(",") if x.strip())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.split(",") if x.strip())


# key -> (parser, default text)
KEYS: dict[str, tuple] = {
    "maturity": (float, "10"),
    "r": (float, "0.04"),
    "alpha": (float, "0.1"),
    "rho": (float, "0"),
    "q_mort": (float, "0"),
    "a_p": (float, "0.04"),
    "b_p": (float, "0.1"),
    "floor_p": (float, "0.02"),
    "lambda_p0": (float, "0.06"),
    "a_i": (float, None),
    "b_i": (float, None),
    "floor_i": (float, None),
    "lambda_i0": (float, None),
    "grid_m": (float, str(DEFAULT_M)),
    "grid_i": (int, str(DEFAULT_I)),
    "grid_j": (int, str(DEFAULT_J)),
    "n_contracts": (_ints, "1, 2, 5, 10"),
    "sweep_rho": (_floats, "-1, -0.8, -0.6, -0.4, -0.2, 0, 0.2, 0.4, 0.6, 0.8, 1"),
    "sweep_q": (_floats, "-0.05, 0, 0.05, 0.09, 0.15"),
    "validate_n": (int, "5"),
    "mc_paths": (int, "200000"),
    "mc_steps": (int, "500"),
    "seed": (int, "20240601"),
    "hedge_rho": (_floats, "0, 1"),
    "hedge_n": (_ints, "1, 10000"),
    "hedge_paths": (int, "200000"),
    "hedge_steps": (int, "1"),
    "hedge_dt": (float, "0.002"),
    "output": (str, ""),
}

_MIRRORED = {"a_i": "a_p", "b_i": "b_p", "floor_i": "floor_p", "lambda_i0": "lambda_p0"}


@dataclass(frozen=True)
class RunConfig:
    spec: MarketSpec
    pops: PopulationPair
    grid: Grid1D
    n_contracts: tuple
    sweep_rho: tuple
    sweep_q: tuple
    validate_n: int
    mc_paths: int
    mc_steps: int
    seed: int
    hedge_rho: tuple
    hedge_n: tuple
    hedge_paths: int
    hedge_steps: int
    hedge_dt: float
    output: Optional[str] = None
    raw: dict = field(default_factory=dict, compare=False)

    @property
    def lambda_p0(self) -> float:
        return self.pops.initial_insured


def parse_text(text: str) -> dict[str, str]:
    """Parse config text into raw ``key -> value`` strings."""
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"),
                                       inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string(f"[{_SECTION}]\n" + text)
    except configparser.Error as exc:
        raise ConfigurationError(f"malformed config: {exc}") from None
    if parser.sections() != [_SECTION]:
        raise ConfigurationError("config must be flat key = value lines without sections")
    return dict(parser[_SECTION])


def from_mapping(raw: dict[str, str], overrides: Optional[dict] = None) -> RunConfig:
    """Build and validate a run configuration.

    ``overrides`` holds already-typed values (e.g. from command-line flags)
    that replace file entries.
    """
    unknown = sorted(set(raw) - set(KEYS))
    if unknown:
        raise ConfigurationError(f"unknown config key(s): {', '.join(unknown)}")
    values: dict = {}
    for key, (conv, default) in KEYS.items():
        text = raw.get(key, default)
        if text is None:
            continue
        try:
            values[key] = conv(text.strip()) if conv is not str else text.strip()
        except ValueError:
            raise ConfigurationError(f"config key {key!r}: cannot parse {text!r}") from None
        if isinstance(values[key], float) and not math.isfinite(values[key]):
            raise ConfigurationError(f"config key {key!r} must be finite")
    for key, val in (overrides or {}).items():
        if val is not None:
            values[key] = val
    for key, src in _MIRRORED.items():
        values.setdefault(key, values[src])

    for key in ("mc_paths", "mc_steps", "hedge_paths", "hedge_steps", "validate_n"):
        if values[key] < 1:
            raise ConfigurationError(f"config key {key!r} must be >= 1")
    if values["hedge_dt"] <= 0:
        raise ConfigurationError("config key 'hedge_dt' must be > 0")
    if not values["sweep_rho"] or not values["sweep_q"]:
        raise ConfigurationError("sweep_rho and sweep_q must be non-empty")
    if not values["n_contracts"] or min(values["n_contracts"]) < 1:
        raise ConfigurationError("n_contracts must be a non-empty list of positive integers")
    if not values["hedge_n"] or min(values["hedge_n"]) < 1:
        raise ConfigurationError("hedge_n must be a non-empty list of positive integers")
    if values["seed"] < 0:
        raise ConfigurationError("config key 'seed' must be >= 0")

    spec = MarketSpec(r=values["r"], q_mort=values["q_mort"], alpha=values["alpha"],
                      rho=values["rho"], maturity=values["maturity"])
    pops = PopulationPair(
        insured=HazardParams(values["a_p"], values["b_p"], values["floor_p"]),
        reference=HazardParams(values["a_i"], values["b_i"], values["floor_i"]),
        initial_insured=values["lambda_p0"], initial_reference=values["lambda_i0"])
    model.validate(spec, pops)
    for rho in values["sweep_rho"] + values["hedge_rho"]:
        if not -1 <= rho <= 1:
            raise RhoOutOfRange(f"swept rho={rho!r} must lie in [-1, 1]")
    try:
        grid = build_grid(values["grid_m"], values["grid_i"], values["grid_j"], spec.maturity)
    except ValueError as exc:
        raise ConfigurationError(f"grid: {exc}") from None
    return RunConfig(
        spec=spec, pops=pops, grid=grid, n_contracts=values["n_contracts"],
        sweep_rho=values["sweep_rho"], sweep_q=values["sweep_q"],
        validate_n=values["validate_n"], mc_paths=values["mc_paths"],
        mc_steps=values["mc_steps"], seed=values["seed"], hedge_rho=values["hedge_rho"],
        hedge_n=values["hedge_n"], hedge_paths=values["hedge_paths"],
        hedge_steps=values["hedge_steps"], hedge_dt=values["hedge_dt"],
        output=values["output"] or None, raw=dict(raw))


def load_config(path: Optional[str] = None, overrides: Optional[dict] = None) -> RunConfig:
    if path is None:
        return from_mapping({}, overrides)
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path!r}: {exc.strerror}") from None
    return from_mapping(parse_text(text), overrides)
