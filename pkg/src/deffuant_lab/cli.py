"""Command-line front end.

Exit codes: 0 success, 2 configuration error, 3 unsupported metric or
operation.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import metrics as met
from ._reals import ConfigError, parse_real
from .config import load_config
from .dynamics import SimParams, classify_outcome, run_simulation, trial_seed
from .geometry import _default_m, components_at, merge_timeline, predict
from .hull import UnsupportedMetricError, check_supported
from .sad import check_unimodality, find_quiet_window, track_weights, verify_representation
from .scenarios import SCENARIOS, UnknownScenario, scenario
from .sweep import TrialRow, run_sweep, sweep_from_config, write_rows

EXIT_OK, EXIT_CONFIG, EXIT_UNSUPPORTED = 0, 2, 3


def _seed(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _out(args) -> Path:
    p = Path(args.out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _dump(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, default=lambda x: x.tolist()
                               if isinstance(x, np.ndarray) else str(x)))


def _params(cfg, seed=None) -> SimParams:
    dyn = cfg["dynamics"]
    if dyn["theta"] is None:
        raise ConfigError("dynamics.theta is required")
    return SimParams(cfg["lattice"], theta=dyn["theta"], mu=dyn["mu"], t_max=dyn["t_max"],
                     metric=cfg["metric"], distribution=cfg["distribution"],
                     seed=dyn["seed"] if seed is None else seed,
                     record_events=dyn["record_events"])


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    base = _params(cfg, args.seed)
    out = _out(args)
    trials = args.trials or 1
    rows, summaries = [], []
    for j in range(trials):
        p = base if trials == 1 else replace(base, seed=trial_seed(base.seed, j))
        s = run_simulation(p)
        label = classify_outcome(s, p.theta)
        rows.append(TrialRow(p.theta, j, int(s.blocked_edge_fraction == 0),
                             s.blocked_edge_fraction, s.max_deviation_from_mean, label))
        d = s.to_dict(include_opinions=trials == 1)
        d.update(trial=j, seed=p.seed, outcome=label)
        summaries.append(d)
        if s.event_log is not None and j == 0:
            s.event_log.to_csv(out / "events.csv")
    write_rows(rows, out / "results.csv")
    _dump(out / "summary.json", summaries[0] if trials == 1 else summaries)
    for d in summaries:
        print(f"trial {d['trial']}: {d['outcome']}  blocked={d['blocked_edge_fraction']}  "
              f"max_dev={d['max_deviation_from_mean']}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    spec = sweep_from_config(cfg, trials=args.trials, seed=args.seed)
    try:
        pred = predict(cfg["distribution"], cfg["metric"]).theta_c
    except UnsupportedMetricError:
        pred = None
    res = run_sweep(spec, jobs=args.jobs, theta_c_predicted=pred)
    res.write(_out(args))
    print("theta,estimate,wilson_lo,wilson_hi")
    for t, e, lo, hi in zip(res.thetas, res.estimates, res.wilson_lo, res.wilson_hi):
        print(f"{t:g},{e:.4f},{lo:.4f},{hi:.4f}")
    print(f"theta_c_hat = {res.theta_c_hat}  theta_c_predicted = {pred}")
    return EXIT_OK


def cmd_predict(args) -> int:
    cfg = load_config(args.config)
    pr = predict(cfg["distribution"], cfg["metric"], args.discretization)
    if pr.theta_c == float("inf"):
        print("R = inf: no consensus for every theta")
    else:
        print(f"R = {pr.radius!r}\nh = {pr.gap!r}\ntheta_c = {pr.theta_c!r}\nrule: {pr.rule}")
        if pr.chord_spacing is not None:
            print(f"discretization m = {pr.discretization_m}, spacing = {pr.chord_spacing!r}")
        if pr.note:
            print(f"note: {pr.note}")
    if args.out:
        _dump(_out(args) / "summary.json", pr.to_dict())
    return EXIT_OK


def cmd_dtheta(args) -> int:
    cfg = load_config(args.config)
    d = cfg["distribution"]
    check_supported(cfg["metric"])
    pts = d.support().discretize(args.discretization or _default_m(d.k))
    tl = merge_timeline(pts, cfg["metric"])
    rows = list(tl.csv_rows())
    w = csv.writer(sys.stdout)
    w.writerows(rows)
    if args.out:
        out = _out(args)
        with open(out / "timeline.csv", "w", newline="") as fh:
            csv.writer(fh).writerows(rows)
        summary = {"timeline": tl.to_dict()}
        if args.theta is not None:
            summary["components"] = components_at(pts, args.theta, cfg["metric"]).to_dict()
        _dump(out / "summary.json", summary)
    return EXIT_OK


def cmd_sad_check(args) -> int:
    cfg = load_config(args.config)
    p = replace(_params(cfg, args.seed), record_events=True)
    s = run_simulation(p)
    window = find_quiet_window(s.event_log, p.lattice)
    table = track_weights(s.event_log, window, p.mu, p.lattice)
    err = verify_representation(table, s.initial_opinions, s.final_opinions)
    unimodal = bool(all(check_unimodality(r) for r in table.weights)) if window is not None or \
        p.lattice.boundary == "path" else None
    summary = {"window": None if window is None else list(window),
               "window_size": int(len(table.vertices)), "max_abs_error": err,
               "max_row_sum_error": float(np.abs(table.row_sums() - 1).max()),
               "rows_unimodal": unimodal}
    out = _out(args)
    table.to_csv(out / "weights.csv")
    _dump(out / "summary.json", summary)
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def cmd_metric_check(args) -> int:
    doc = json.loads(Path(args.config).read_text()) if args.config else {}
    try:
        m = met.MetricSpec.from_dict(doc.get("metric", {"kind": "euclidean"}))
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc
    k = args.k or (m.required_dim or 2)
    box = (args.box[0], args.box[1])
    seed = args.seed or 0
    v_conv = met.check_weak_convexity(m, box, args.samples, seed, k=k)
    v_dom = met.check_local_domination(m, 1.0, box, rng_seed=seed, k=k)
    v_sens = [met.check_coordinate_sensitivity(m, i + 1, [1.0, 10.0, 100.0], k=k, rng_seed=seed)
              for i in range(k)] if m.kind != "cubic" else []
    v_ax = met.check_metric_axioms(m, box, args.samples, seed, k=k)
    summary = {"metric": m.to_dict(), "k": k,
               "weak_convexity": v_conv.describe(), "local_domination": v_dom.describe(),
               "sensitivity": [v.describe() for v in v_sens], "axioms": v_ax.describe()}
    print(json.dumps(summary, indent=2))
    if args.out:
        _dump(_out(args) / "summary.json", summary)
    return EXIT_OK


def cmd_scenario(args) -> int:
    overrides = {}
    for item in args.set or []:
        key, _, val = item.partition("=")
        try:
            overrides[key] = int(val)
        except ValueError:
            overrides[key] = parse_real(val)
    if args.trials is not None:
        overrides["trials"] = args.trials
    if args.seed is not None:
        overrides["seed"] = args.seed
    overrides["jobs"] = args.jobs
    summary = scenario(args.name, args.out, **overrides)
    print(json.dumps(summary, indent=2, default=str)[:4000])
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="deffuant-lab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="JSON run configuration")
        p.add_argument("--seed", type=_seed, default=None, help="override the master seed")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--trials", type=int, default=None)
        p.add_argument("--jobs", type=int, default=1)
        return p

    common(sub.add_parser("simulate", help="run one or more simulations")).set_defaults(fn=cmd_simulate)
    common(sub.add_parser("sweep", help="theta sweep with Wilson intervals")).set_defaults(fn=cmd_sweep)
    p = common(sub.add_parser("predict", help="R, h and predicted theta_c"))
    p.add_argument("--discretization", type=int, default=None)
    p.set_defaults(fn=cmd_predict)
    p = common(sub.add_parser("dtheta", help="merge timeline of D_theta as CSV"))
    p.add_argument("--discretization", type=int, default=None)
    p.add_argument("--theta", type=float, default=None, help="also dump components at theta")
    p.set_defaults(fn=cmd_dtheta)
    common(sub.add_parser("sad-check", help="SAD weight representation of a run")).set_defaults(
        fn=cmd_sad_check)
    p = common(sub.add_parser("metric-check", help="randomized metric property checks"), False)
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--box", type=float, nargs=2, default=(-1.0, 1.0))
    p.set_defaults(fn=cmd_metric_check)
    p = common(sub.add_parser("scenario", help="named pipeline: " + ", ".join(SCENARIOS)), False)
    p.add_argument("name")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="scenario override")
    p.set_defaults(fn=cmd_scenario)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, UnknownScenario) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except UnsupportedMetricError as exc:
        print(f"unsupported: {exc}", file=sys.stderr)
        return EXIT_UNSUPPORTED


if __name__ == "__main__":
    sys.exit(main())
