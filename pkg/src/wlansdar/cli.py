"""Command-line entry point: ``wlansdar <command> --config run.json``."""

from __future__ import annotations

import argparse
import contextlib
import csv
import io
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .chain import QVector, assemble_tpm
from .config import SEED_ENV, ConfigError, RunConfig, load_config
from .errors import NumericError, ScenarioError, StateSpaceTooLarge
from .oracle import MAX_STATES, compare_reduced_vs_oracle
from .params import validate_scenario
from .perf import CSV_COLUMNS, analyze, fmt
from .saturation import attempt_prob, attempt_profile, collision_map, saturation_curve, stability_check
from .sim import empirical_report, simulate
from .solver import model_inputs, solve_sdar_model

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
SIM_COLUMNS = ("sim_gamma", "sim_theta_node", "sim_w_bar", "sim_block_prob")

log = logging.getLogger("wlansdar")


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(x) for x in r])
    return buf.getvalue()


def _json_text(obj) -> str:
    def clean(x):
        if isinstance(x, dict):
            return {str(k): clean(v) for k, v in x.items()}
        if isinstance(x, (list, tuple)):
            return [clean(v) for v in x]
        if isinstance(x, (np.floating, float)):
            x = float(x)
            return None if not np.isfinite(x) else round(x, 12)
        if isinstance(x, np.integer):
            return int(x)
        return x

    return json.dumps(clean(obj), indent=2, sort_keys=True) + "\n"


def _emit(cfg: RunConfig, out: str | None, text: str) -> None:
    path = cfg.output_path(out)
    if path is None:
        sys.stdout.write(text)
        return
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    log.info("wrote %s", path)


# -- commands ----------------------------------------------------------------


def cmd_saturation(cfg: RunConfig, args) -> int:
    s = cfg.scenario
    n_max = args.max_n or s.m
    prof = attempt_profile(n_max, s.mac)
    curve = saturation_curve(prof, s.slots(), n_max)
    rows = []
    for n in range(1, n_max + 1):
        b, g = prof.betas[n], prof.gammas[n]
        resid = abs(g - collision_map(attempt_prob(g, s.mac), n))
        rows.append([n, float(b), float(g), float(curve.theta_sat[n]), float(curve.theta_sat[n] / n), resid])
    header = ["n", "beta", "gamma", "theta_sat", "theta_sat_node", "residual"]
    _emit(cfg, args.out, _csv_text(header, rows))
    return EXIT_OK


def cmd_analyze(cfg: RunConfig, args) -> int:
    rep = analyze(cfg.scenario)
    text = _json_text(rep.to_dict()) if args.json else _csv_text(CSV_COLUMNS, [rep.csv_row()])
    _emit(cfg, args.out, text)
    return EXIT_OK


def _run_sim(cfg: RunConfig, engine: str, trace_path=None):
    sim = cfg.sim
    with contextlib.ExitStack() as stack:
        trace = None
        if trace_path:
            p = cfg.output_path(trace_path)
            p.parent.mkdir(parents=True, exist_ok=True)
            trace = stack.enter_context(open(p, "w"))
            trace.write("time_ns,kind,node,n_nonempty\n")
        st = simulate(cfg.scenario, engine, seed=sim.seed, horizon=sim.horizon,
                      warmup_fraction=sim.warmup_fraction, trace=trace)
    return st, empirical_report(st)


def cmd_simulate(cfg: RunConfig, args) -> int:
    engines = ["sdar", "dcf"] if cfg.sim.engine == "both" else [cfg.sim.engine]
    out, walls = {}, {}
    for eng in engines:
        tr = None
        if args.trace:
            tr = args.trace if len(engines) == 1 else f"{eng}_{args.trace}"
        st, rep = _run_sim(cfg, eng, tr)
        d = rep.to_dict()
        d["events"] = st.events
        out[eng] = d
        walls[eng] = st.wall_clock
    # wall-clock times vary run to run, so they go to stderr, not the output
    for eng, w in walls.items():
        print(f"{eng} wall-clock {w:.3f} s", file=sys.stderr)
    if len(walls) == 2 and walls["dcf"] > 0:
        print(f"sdar/dcf wall-clock ratio {walls['sdar'] / walls['dcf']:.3f}", file=sys.stderr)
    _emit(cfg, args.out, _json_text(out if len(out) > 1 else out[engines[0]]))
    return EXIT_OK


def _sweep_point(job):
    s, lam, sim = job
    s = s.with_rate(lam)
    row = analyze(s).csv_row()
    if sim is not None:
        engine, seed, horizon, warm = sim
        rep = empirical_report(simulate(s, engine, seed=seed, horizon=horizon, warmup_fraction=warm))
        blocked = np.nanmean(rep.block_prob_node)
        row += [rep.gamma, rep.theta_mean, rep.w_bar, float(blocked)]
    return row


def cmd_sweep(cfg: RunConfig, args) -> int:
    if not cfg.sweep:
        raise ConfigError("sweep command needs a 'sweep' section")
    sim = None
    if args.sim:
        sim = (args.sim, cfg.sim.seed, cfg.sim.horizon, cfg.sim.warmup_fraction)
    jobs = [(cfg.scenario, lam, sim) for lam in cfg.sweep]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            rows = list(pool.map(_sweep_point, jobs))  # map keeps lambda order
    else:
        rows = [_sweep_point(j) for j in jobs]
    header = list(CSV_COLUMNS) + (list(SIM_COLUMNS) if sim else [])
    _emit(cfg, args.out, _csv_text(header, rows))
    return EXIT_OK


def cmd_validate(cfg: RunConfig, args) -> int:
    s = cfg.scenario
    _, diags = validate_scenario(s, analytical=True)
    prof = attempt_profile(s.m, s.mac)
    curve = saturation_curve(prof, s.slots(), s.m)
    resid = [abs(prof.gammas[n] - collision_map(attempt_prob(prof.gammas[n], s.mac), n)) for n in range(1, s.m + 1)]
    stab = stability_check(s, curve)
    report = {
        "diagnostics": list(diags),
        "fixed_point": {
            "max_residual": max(resid),
            "gamma_increasing": bool(np.all(np.diff(prof.gammas[1 : s.m + 1]) > 0)),
        },
        "stability": {
            "stable_sufficient": stab.stable_sufficient,
            "margin": stab.margin,
            "argmin_n": stab.argmin_n,
            "argmin_is_m": stab.argmin_n == s.m,
        },
    }
    if not diags:
        inputs = model_inputs(s, prof)
        dist, q, it = solve_sdar_model(s, prof, inputs=inputs)
        tpm = assemble_tpm(inputs.blocks, q, s.buffer)
        report["chain"] = {
            "states": int(tpm.p.shape[0]),
            "row_sum_error": tpm.raw_row_error,
            "stationary_residual": dist.residual,
            "iterations": it.iterations,
            "converged": it.converged,
        }
        if (s.buffer + 1) ** s.m <= MAX_STATES:
            try:
                report["oracle"] = compare_reduced_vs_oracle(s).to_dict()
            except StateSpaceTooLarge as exc:  # pragma: no cover
                report["oracle"] = {"skipped": str(exc)}
    _emit(cfg, args.out, _json_text(report))
    return EXIT_OK


def cmd_dump_chain(cfg: RunConfig, args) -> int:
    s = cfg.scenario
    _, diags = validate_scenario(s, analytical=True)
    if diags:
        raise ConfigError("; ".join(diags))
    prof = attempt_profile(s.m, s.mac)
    inputs = model_inputs(s, prof)
    if args.q is not None:
        q = QVector.constant(s.m, args.q)
    else:
        _, q, _ = solve_sdar_model(s, prof, inputs=inputs)
    tpm = assemble_tpm(inputs.blocks, q, s.buffer)
    rows = []
    for r, c in zip(*np.nonzero(tpm.p)):
        fj, fk = tpm.state(int(r))
        tj, tk = tpm.state(int(c))
        rows.append([fj, fk, tj, tk, float(tpm.p[r, c])])
    _emit(cfg, args.out, _csv_text(["from_j", "from_k", "to_j", "to_k", "prob"], rows))
    return EXIT_OK


COMMANDS = {
    "saturation": cmd_saturation,
    "analyze": cmd_analyze,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "validate": cmd_validate,
    "dump-chain": cmd_dump_chain,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wlansdar", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--out", help="output file (relative to the output dir if one is set)")
        return p

    p = add("saturation", "per-n attempt/collision probabilities and saturation throughput (CSV)")
    p.add_argument("--max-n", type=int, help="largest population (default: nodes)")
    p = add("analyze", "solve the coupled model (CSV row, or JSON with --json)")
    p.add_argument("--json", action="store_true")
    p = add("simulate", "run a simulator and report empirical measures (JSON)")
    p.add_argument("--engine", choices=["sdar", "dcf", "both"])
    p.add_argument("--seed", type=int)
    p.add_argument("--horizon", type=float, help="simulated seconds")
    p.add_argument("--trace", help="per-event trace file (CSV)")
    p = add("sweep", "analytical measures over the configured lambda values (CSV)")
    p.add_argument("--sim", choices=["sdar", "dcf"], help="also simulate each point")
    add("validate", "numeric self-checks for one scenario (JSON)")
    p = add("dump-chain", "non-zero entries of the finite-buffer transition matrix (CSV)")
    p.add_argument("--q", type=float, help="use constant q(n) instead of the converged vector")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        # command-line flags beat the file; the env seed beats both
        if getattr(args, "engine", None):
            cfg.sim.engine = args.engine
        if getattr(args, "horizon", None):
            cfg.sim.horizon = args.horizon
        if getattr(args, "seed", None) is not None and not os.environ.get(SEED_ENV):
            cfg.sim.seed = args.seed
        if cfg.sim.engine not in ("sdar", "dcf", "both"):
            raise ConfigError(f"unknown engine {cfg.sim.engine!r}")
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, ScenarioError, StateSpaceTooLarge) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
