"""Command-line front end.

Subcommands::

    price      single-contract, n-contract and limiting prices at lambda_p0
    sweep      prices against rho for every q_mort in the sweep lists
    validate   PDE/Monte Carlo cross-checks and the nodewise property suite
    hedge-sim  simulated hedged-book moments against the model

Exit codes: 0 success, 1 a check failed or a computation broke down,
2 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Optional, Sequence

from . import checks, fd, hedging
from .config import RunConfig, load_config
from .errors import ConfigurationError, EndowmentHedgeError

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2

PRICE_COLUMNS = ["quantity", "n", "rho", "q_mort", "alpha", "lambda_p0", "value"]
VALIDATE_COLUMNS = ["check", "expected", "observed", "tolerance", "verdict"]
HEDGE_COLUMNS = ["rho", "n_insured", "empirical_drift", "theory_drift", "empirical_var",
                 "theory_var", "empirical_sharpe", "alpha", "sharpe_se", "drift_se", "var_se",
                 "per_contract_var", "marking"]


def fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (int,)) and not isinstance(x, bool):
        return str(x)
    return format(float(x), ".12g")


def _write(rows: list[list], header: list[str], out: Optional[str]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    text = buf.getvalue()
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _prices(cfg: RunConfig, spec) -> tuple[float, dict, float]:
    lam0 = cfg.lambda_p0
    levels = fd.solve_psi_n(cfg.pops, spec, cfg.grid, max(cfg.n_contracts))
    per_n = {n: fd.price(levels[n - 1], spec, lam0, 0.0) / n for n in cfg.n_contracts}
    limit = fd.price(fd.solve_beta(cfg.pops, spec, cfg.grid), spec, lam0, 0.0)
    return fd.price(levels[0], spec, lam0, 0.0), per_n, limit


def cmd_price(cfg: RunConfig) -> tuple[list[list], int]:
    spec = cfg.spec
    single, per_n, limit = _prices(cfg, spec)
    echo = [spec.rho, spec.q_mort, spec.alpha, cfg.lambda_p0]
    rows = [["single", 1, *echo, single]]
    rows += [["per_contract", n, *echo, per_n[n]] for n in sorted(per_n)]
    rows.append(["limit", "inf", *echo, limit])
    return rows, EXIT_OK


def cmd_sweep(cfg: RunConfig, workers: Optional[int] = None) -> tuple[list[list], int]:
    points = [(q, rho) for q in cfg.sweep_q for rho in cfg.sweep_rho]

    def solve(point):
        q, rho = point
        spec = dataclasses.replace(cfg.spec, q_mort=q, rho=rho)
        single = fd.price(fd.solve_psi_single(cfg.pops, spec, cfg.grid), spec, cfg.lambda_p0, 0.0)
        limit = fd.price(fd.solve_beta(cfg.pops, spec, cfg.grid), spec, cfg.lambda_p0, 0.0)
        return q, rho, single, limit

    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(solve, points))
    rows = []
    for q, rho, single, limit in results:
        rows.append(["single", 1, rho, q, cfg.spec.alpha, cfg.lambda_p0, single])
        rows.append(["limit", "inf", rho, q, cfg.spec.alpha, cfg.lambda_p0, limit])
    rows.sort(key=lambda r: (r[0], r[3], r[2]))
    return rows, EXIT_OK


def validation_battery(cfg: RunConfig) -> list[checks.Check]:
    spec, pops, grid = cfg.spec, cfg.pops, cfg.grid
    result = checks.mc_checks(pops, spec, grid, cfg.mc_paths, cfg.mc_steps, cfg.seed)
    result += checks.property_checks(pops, spec, grid, cfg.validate_n)
    result.append(checks.linearity_check(pops, spec, grid, cfg.validate_n))
    d1, d2, ratio = checks.convergence_ratio(pops, spec, grid)
    result.append(checks.Check("grid_change_refined", 0.0, d1, 1e-3))
    result.append(checks.Check("grid_ratio", 0.5, ratio, 0.2))
    return result


def cmd_validate(cfg: RunConfig) -> tuple[list[list], int]:
    result = validation_battery(cfg)
    rows = [[c.name, c.expected, c.observed, c.tolerance, "pass" if c.passed else "FAIL"]
            for c in result]
    return rows, EXIT_OK if all(c.passed for c in result) else EXIT_FAIL


def cmd_hedge_sim(cfg: RunConfig) -> tuple[list[list], int]:
    rows = []
    for rho in cfg.hedge_rho:
        spec = dataclasses.replace(cfg.spec, rho=rho)
        for n in cfg.hedge_n:
            surfaces = hedging.build_hedge_surfaces(cfg.pops, spec, cfg.grid, n)
            rep = hedging.simulate_hedged_portfolio(
                cfg.pops, spec, n, surfaces, cfg.hedge_paths, cfg.hedge_steps, cfg.seed,
                dt=cfg.hedge_dt)
            rows.append([rho, n, rep.empirical_drift, rep.theory_drift, rep.empirical_var,
                         rep.theory_var, rep.empirical_sharpe, rep.alpha, rep.sharpe_se,
                         rep.drift_se, rep.var_se, rep.per_contract_var, rep.marking])
    return rows, EXIT_OK


COMMANDS = {
    "price": (cmd_price, PRICE_COLUMNS),
    "sweep": (cmd_sweep, PRICE_COLUMNS),
    "validate": (cmd_validate, VALIDATE_COLUMNS),
    "hedge-sim": (cmd_hedge_sim, HEDGE_COLUMNS),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="endowment-hedge",
        description="Price and hedge pure endowments under stochastic mortality.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="flat key = value configuration file")
        p.add_argument("--out", help="write CSV here instead of stdout")
        p.add_argument("--seed", type=int, help="override the Monte Carlo seed")
        p.add_argument("--grid-m", type=float, help="half-width of the log-hazard domain")
        p.add_argument("--grid-i", type=int, help="number of space intervals")
        p.add_argument("--grid-j", type=int, help="number of time steps")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {"seed": args.seed, "grid_m": args.grid_m, "grid_i": args.grid_i,
                 "grid_j": args.grid_j}
    try:
        cfg = load_config(args.config, overrides)
    except (ConfigurationError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    func, header = COMMANDS[args.command]
    try:
        rows, code = func(cfg)
    except EndowmentHedgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    _write(rows, header, args.out or cfg.output)
    if args.command == "validate":
        failed = [r[0] for r in rows if r[-1] != "pass"]
        print(f"{len(rows) - len(failed)}/{len(rows)} checks passed", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
