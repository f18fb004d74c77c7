"""``repchain`` command line: figure/table data as CSV or JSON.

Exit codes: 0 success, 2 configuration or usage error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import functools
import math
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import analytic, envelope, phenomenology
from .chain import DOUBLE_CLICK_RULES, simulate_chain
from .curves import VERSION, CurveSet, dumps_json, table_csv
from .params import (PRESETS, ChainConfig, ConfigError, SystemParams, db_to_linear, load_config,
                     solve_q_threshold)
from .parallel import pmap

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
DEFAULT_N_LIST = (1, 2, 4, 8, 16)


def _int_list(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("list must not be empty")
    if any(v < 1 for v in values):
        raise argparse.ArgumentTypeError("entries must be >= 1")
    return values


def _float_list(text: str) -> list[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("list must not be empty")
    return values


def resolve_params(args: argparse.Namespace) -> SystemParams:
    params = load_config(args.config) if args.config else PRESETS[args.preset]
    if getattr(args, "p2", None) is not None:
        params = params.replace(p2=args.p2)
    return params


def length_grid(args: argparse.Namespace) -> np.ndarray:
    if args.l_step <= 0 or args.l_max < args.l_min or args.l_min < 0:
        raise ConfigError("need 0 <= --l-min <= --l-max and --l-step > 0")
    n = int(math.floor((args.l_max - args.l_min) / args.l_step + 1e-9))
    return args.l_min + args.l_step * np.arange(n + 1)


# Module-level workers so that pmap can pickle them.
def _rate_row(n: int, params: SystemParams, lengths: np.ndarray) -> list[float]:
    return [analytic.secret_key_rate(params, ChainConfig(float(L), n)) for L in lengths]


def _fidelity_row(n: int, params: SystemParams, lengths: np.ndarray, mixing: str) -> list[float]:
    return [analytic.fidelity(params, ChainConfig(float(L), n), mixing) for L in lengths]


def _distill_row(n: int, params: SystemParams, lengths: np.ndarray, mixing: str) -> list[float]:
    return [analytic.distillation_rate(params, ChainConfig(float(L), n), mixing) for L in lengths]


def _envelope_fit(p_dark: float, params: SystemParams, lengths: np.ndarray, cands: tuple[int, ...]):
    res = envelope.numeric_envelope(params.with_dark_counts(p_dark), lengths, cands)
    return res.fit_exponent, res.fit_prefactor


def cmd_params(args, params) -> str:
    return dumps_json({"version": VERSION, "params": params.resolved(),
                       "q_threshold": solve_q_threshold()})


def cmd_rate_curve(args, params) -> str:
    lengths = length_grid(args)
    rows = pmap(functools.partial(_rate_row, params=params, lengths=lengths), args.n_links)
    columns = {f"R_N{n}": row for n, row in zip(args.n_links, rows)}
    etas = [db_to_linear(params.alpha_db_per_km * L) for L in lengths]
    columns["tgw"] = [envelope.tgw_rate(e, params.m_modes, params.t_q_seconds) for e in etas]
    columns["bb84_ideal"] = [envelope.bb84_ideal_rate(e, params.m_modes, params.t_q_seconds) for e in etas]
    l_max = {str(n): analytic.max_range_qkd(params, n) for n in args.n_links}
    meta = {"l_max_km": l_max,
            "unbounded": [int(n) for n, v in l_max.items() if math.isinf(v)]}
    return _emit(CurveSet.from_columns("length_km", lengths, columns, params, meta), args)


def cmd_envelope(args, params) -> str:
    lengths = length_grid(args)
    cands = tuple(args.n_links) if args.n_links else tuple(range(1, 129))
    res = envelope.numeric_envelope(params, lengths, cands)
    xi = envelope.exponent_xi(params).xi
    meta = {"fit_exponent": res.fit_exponent, "fit_prefactor": res.fit_prefactor, "xi": xi,
            "n_candidates": {"min": min(cands), "max": max(cands), "count": len(cands)},
            "degenerate": len(cands) == 1}
    if args.p_dark:
        fits = pmap(functools.partial(_envelope_fit, params=params, lengths=lengths, cands=cands), args.p_dark)
        meta["p_dark_sweep"] = [{"p_dark": p, "fit_exponent": z, "fit_prefactor": a}
                                for p, (z, a) in zip(args.p_dark, fits)]
    columns = {"envelope": res.rates, "n_star": res.n_star.astype(float),
               "fit_used": res.fit_mask.astype(float)}
    return _emit(CurveSet.from_columns("length_km", lengths, columns, params, meta), args)


def cmd_xi(args, params) -> str:
    # Either exponent may be undefined on its own (e.g. t = 1 where xi has no root);
    # report what exists and fail only if neither does.
    payload = {"params": params.to_dict(), "version": VERSION}
    try:
        sol = envelope.exponent_xi(params)
        payload.update(xi=sol.xi, z_root=sol.z, residual=sol.residual)
    except envelope.EnvelopeError as exc:
        payload.update(xi=None, z_root=None, residual=None, xi_error=str(exc))
    try:
        payload["t"] = envelope.exponent_t(params)
    except envelope.EnvelopeError as exc:
        if payload["xi"] is None:
            raise
        payload.update(t=None, t_error=str(exc))
    return dumps_json(payload)


def cmd_xi_vs_m(args, params) -> str:
    ms = sorted(set(args.m_list))
    xis = envelope.xi_vs_m(params, ms)
    meta = {"m_min": envelope.minimum_modes(params)}
    return _emit(CurveSet.from_columns("m_modes", ms, {"xi": xis}, params, meta), args)


def cmd_fidelity(args, params) -> str:
    lengths = length_grid(args)
    rows = pmap(functools.partial(_fidelity_row, params=params, lengths=lengths, mixing=args.mixing),
                args.n_links)
    anchors = {}
    for n in args.n_links:
        lq = analytic.max_range_qkd(params, n)
        anchors[str(n)] = {"l_max_qkd_km": lq, "fidelity_at_l_max":
                           analytic.fidelity(params, ChainConfig(lq, n), args.mixing) if math.isfinite(lq) else math.nan}
    columns = {f"F_N{n}": row for n, row in zip(args.n_links, rows)}
    meta = {"mixing": args.mixing, "anchors": anchors}
    return _emit(CurveSet.from_columns("length_km", lengths, columns, params, meta), args)


def cmd_distill(args, params) -> str:
    lengths = length_grid(args)
    rows = pmap(functools.partial(_distill_row, params=params, lengths=lengths, mixing=args.mixing),
                args.n_links)
    columns = {f"D_N{n}": row for n, row in zip(args.n_links, rows)}
    meta = {"mixing": args.mixing,
            "l_max_distillation_km": {str(n): analytic.max_range_distillation(params, n, mixing=args.mixing)
                                      for n in args.n_links}}
    return _emit(CurveSet.from_columns("length_km", lengths, columns, params, meta), args)


def cmd_simulate(args, params) -> str:
    if len(args.n_links) != 1:
        raise ConfigError("simulate takes a single --n-links value")
    chain = ChainConfig(args.length, args.n_links[0])
    sim = simulate_chain(params, chain, cutoff=args.cutoff, double_click=args.double_click)
    return dumps_json({"version": VERSION, "params": params.to_dict(),
                       "n_links": chain.n_links, "length_km": chain.total_range_km,
                       "double_click": args.double_click, **sim.to_dict()})


def cmd_nmax(args, params) -> str:
    rows = {"n_links": [], "p2_threshold": [], "estimate_at_threshold": [], "numeric_n_max": []}
    rng = phenomenology.rule_range(params, args.rule, args.double_click)
    for n in args.n_links:
        th = phenomenology.p2_threshold(params, n, rng, args.double_click, xtol=args.xtol)
        rows["n_links"].append(n)
        rows["p2_threshold"].append(th)
        rows["estimate_at_threshold"].append(phenomenology.n_max_estimate(th))
        # Just below threshold the chain is still viable: numeric N_max = N when candidates are the listed N.
        rows["numeric_n_max"].append(phenomenology.n_max_numeric(
            params, max(th - args.xtol, 0.0), rng, candidates=sorted(args.n_links),
            double_click=args.double_click))
    meta = {"rule": args.rule, "range_km": rng, "double_click": args.double_click}
    if args.format == "json":
        return dumps_json({"version": VERSION, "params": params.to_dict(), "meta": meta, "rows": rows})
    return table_csv(rows, params, meta)


def _emit(curves: CurveSet, args) -> str:
    return curves.to_json() if args.format == "json" else curves.to_csv()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="repchain", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"repchain {VERSION}")
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group()
    src.add_argument("--config", type=Path, help="JSON file of flat parameter keys")
    src.add_argument("--preset", choices=sorted(PRESETS), default="fig4")
    common.add_argument("--out", type=Path, help="write here instead of stdout")
    common.add_argument("--format", choices=("csv", "json"), default=None)

    grid = argparse.ArgumentParser(add_help=False)
    grid.add_argument("--l-min", type=float, default=0.0)
    grid.add_argument("--l-max", type=float, default=1000.0)
    grid.add_argument("--l-step", type=float, default=5.0)

    nlist = argparse.ArgumentParser(add_help=False)
    nlist.add_argument("--n-links", type=_int_list, default=list(DEFAULT_N_LIST))
    mixing = argparse.ArgumentParser(add_help=False)
    mixing.add_argument("--mixing", choices=analytic.MIXING_MODES, default="tabulated")
    p2 = argparse.ArgumentParser(add_help=False)
    p2.add_argument("--p2", type=float, default=None, help="override the two-pair probability")
    clicks = argparse.ArgumentParser(add_help=False)
    clicks.add_argument("--double-click", choices=DOUBLE_CLICK_RULES, default=phenomenology.DEFAULT_RULE)

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("params", parents=[common, p2], help="print the resolved parameter set")
    sub.add_parser("rate-curve", parents=[common, grid, nlist], help="key rate vs range per N")
    env = sub.add_parser("envelope", parents=[common, grid], help="envelope over N with power-law fit")
    env.add_argument("--n-links", type=_int_list, default=None, help="N candidates (default 1..128)")
    env.add_argument("--p-dark", type=_float_list, default=None, help="also refit at these dark-click levels")
    sub.add_parser("xi", parents=[common], help="envelope exponents xi and t")
    xm = sub.add_parser("xi-vs-m", parents=[common], help="xi as a function of the mode count")
    xm.add_argument("--m-list", type=_int_list,
                    default=[10, 20, 50, 100, 200, 500, 1000, 2000, 5000, 10000])
    sub.add_parser("fidelity", parents=[common, grid, nlist, mixing], help="end-to-end fidelity vs range")
    sub.add_parser("distill", parents=[common, grid, nlist, mixing], help="hashing-bound rate vs range")
    sim = sub.add_parser("simulate", parents=[common, p2, clicks], help="exact Fock-space chain simulation")
    sim.add_argument("--n-links", type=_int_list, default=[1])
    sim.add_argument("--length", type=float, required=True, help="total range in km")
    sim.add_argument("--cutoff", type=int, default=None)
    # Random bits for double clicks keep p2 = 0 runs identical to the analytic chain.
    sim.set_defaults(double_click="random")
    nm = sub.add_parser("nmax", parents=[common, clicks], help="two-pair thresholds per link count")
    nm.add_argument("--n-links", type=_int_list, default=[2, 4, 8])
    nm.add_argument("--rule", default="10km", help="'10km', 'single-link' or a range in km")
    nm.add_argument("--xtol", type=float, default=1e-6)
    return parser


COMMANDS = {
    "params": (cmd_params, "json"), "rate-curve": (cmd_rate_curve, "csv"), "envelope": (cmd_envelope, "csv"),
    "xi": (cmd_xi, "json"), "xi-vs-m": (cmd_xi_vs_m, "csv"), "fidelity": (cmd_fidelity, "csv"),
    "distill": (cmd_distill, "csv"), "simulate": (cmd_simulate, "json"), "nmax": (cmd_nmax, "csv"),
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handler, default_format = COMMANDS[args.command]
    args.format = args.format or default_format
    if args.command == "nmax" and args.rule not in ("10km", "single-link"):
        try:
            args.rule = float(args.rule)
        except ValueError:
            parser.error(f"--rule must be '10km', 'single-link' or a number, got {args.rule!r}")
    try:
        params = resolve_params(args)
        text = handler(args, params)
    except ConfigError as exc:
        print(f"repchain: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ArithmeticError as exc:
        print(f"repchain: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    if args.out:
        args.out.write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
