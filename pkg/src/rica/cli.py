"""Command-line entry point: ``rica {table,sweep-eigengap,sweep-base-scale,selftest}``."""
from __future__ import annotations

import argparse
import sys

import numpy as np

from .errors import ConfigError, ParameterError
from .harness import (
    PROFILES,
    emit_outputs,
    load_config,
    run_base_scale_sweep,
    run_eigengap_sweep,
    run_table,
)
from .manifolds import KINDS, charts_for, parse_chart

EXIT_OK, EXIT_CONFIG, EXIT_FAILED = 0, 1, 2

CONFIG_HELP = """\
Config file: a single JSON object of flat key-value pairs.  Keys:
  profile (desk | paper-scale), manifolds, charts (list of "manifold:chart"),
  n_target, N, b, r_s, seeds, draws, methods, nlica_steps, nlica_batch,
  nlica_lr, nlica_weight_decay, nlica_layers, fastica_max_iters, fastica_tol,
  tc_k, rica_mode (shortcut | coordinate), master_seed, output_dir, workers,
  rs_grid, b_grid.
Command-line flags override file values.
"""


def _chart_pairs(names, manifolds):
    """Expand --chart values: 'kind:chart', a bare chart name, 'intrinsic' or 'alternate'."""
    pairs = []
    for raw in names:
        if ":" in raw:
            kind, _, chart = raw.partition(":")
            pairs.append(f"{kind}:{parse_chart(kind, chart).name}")
            continue
        hits = []
        for kind in manifolds:
            for chart in charts_for(kind):
                if raw in (chart.tag, chart.name):
                    hits.append(f"{kind}:{chart.name}")
        if not hits:
            raise ConfigError(f"chart {raw!r} matches no selected manifold")
        pairs.extend(hits)
    return pairs


def _parser():
    p = argparse.ArgumentParser(
        prog="rica",
        description="Riemannian ICA source-recovery experiments.",
        epilog=CONFIG_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = p.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH")
    common.add_argument("--manifold", action="append", choices=KINDS, metavar="NAME",
                        help="repeatable; default all four")
    common.add_argument("--chart", action="append", metavar="NAME",
                        help="repeatable; 'kind:chart', a chart name, 'intrinsic' or 'alternate'")
    common.add_argument("--n", type=int, dest="n_target", metavar="INT", help="target intrinsic dimension")
    common.add_argument("--samples", type=int, dest="N", metavar="INT")
    common.add_argument("--b", type=float, metavar="REAL")
    common.add_argument("--rs", type=float, dest="r_s", metavar="REAL")
    common.add_argument("--seeds", type=int, metavar="INT")
    common.add_argument("--draws", type=int, metavar="INT")
    common.add_argument("--methods", metavar="CSV", help="subset of rica,fastica,nlica")
    common.add_argument("--profile", choices=sorted(PROFILES))
    common.add_argument("--out", dest="output_dir", metavar="DIR")
    common.add_argument("--plot", action="store_true", help="write SVG charts for sweeps")
    common.add_argument("--master-seed", type=int, dest="master_seed", metavar="INT")
    common.add_argument("--nlica-steps", type=int, dest="nlica_steps", metavar="INT")
    common.add_argument("--rica-mode", choices=("shortcut", "coordinate"), dest="rica_mode")
    common.add_argument("--workers", type=int, metavar="INT")
    sub.add_parser("table", parents=[common], help="main source-recovery table")
    sub.add_parser("sweep-eigengap", parents=[common], help="MCC across the r_s grid")
    sub.add_parser("sweep-base-scale", parents=[common], help="MCC across the b grid")
    sub.add_parser("selftest", help="fast numerical self-checks")
    return p


def _build_config(args):
    overrides = {
        key: getattr(args, key)
        for key in ("n_target", "N", "b", "r_s", "seeds", "draws", "output_dir",
                    "master_seed", "nlica_steps", "rica_mode", "workers")
    }
    if args.methods is not None:
        overrides["methods"] = [m.strip() for m in args.methods.split(",") if m.strip()]
    elif args.command == "sweep-base-scale":
        overrides["methods"] = ["rica"]
    if args.manifold:
        overrides["manifolds"] = list(dict.fromkeys(args.manifold))
    cfg = load_config(args.config, args.profile, overrides)
    if args.chart:
        cfg = load_config(args.config, args.profile,
                          {**overrides, "charts": _chart_pairs(args.chart, cfg.manifolds)})
    elif args.command != "table" and not cfg.charts:
        cfg = load_config(args.config, args.profile,
                          {**overrides, "charts": _chart_pairs(["intrinsic"], cfg.manifolds)})
    return cfg


def _print_cells(records):
    from .harness import aggregate

    for c in aggregate(records):
        print(
            f"{c.manifold:<11}{c.chart:<15}{c.method:<8}b={c.b:<6g}r_s={c.r_s:<6g}"
            f"MCC {c.mcc_mean:.3f} +- {c.mcc_std:.3f}   TC {c.tc_mean:+.3f} +- {c.tc_std:.3f}"
        )


def selftest() -> int:
    """Quick oracle checks; prints one line per check."""
    from .baselines import FastIcaConfig, fastica_fit, init_params, mobius_forward, mobius_inverse
    from .geometry import ricci
    from .manifolds import ManifoldSpec, intrinsic_metric
    from .metrics import digamma, mcc, total_correlation

    rng = np.random.default_rng(0)
    checks = []
    for kind, sign in (("sphere", 1.0), ("hyperbolic", -1.0)):
        m = intrinsic_metric(ManifoldSpec(kind, 3))
        x0 = np.zeros(3)
        err = np.max(np.abs(ricci(m, x0, analytic=False).ric - sign * 2.0 * m(x0)))
        checks.append((f"ricci {kind} n=3", err < 1e-4, err))
    err = abs(digamma(1.0) + 0.5772156649015329)
    checks.append(("digamma(1)", err < 1e-10, err))
    s = rng.logistic(size=(5000, 2))
    x = s @ np.array([[1.0, 0.6], [0.3, 1.0]]).T
    score = mcc(s, fastica_fit(x, FastIcaConfig(2, seed=0)).latents).mcc
    checks.append(("fastica 2-d mixture MCC", score >= 0.99, score))
    params = init_params(3, 3, rng)
    v = rng.standard_normal((100, 3))
    err = float(np.max(np.abs(mobius_inverse(params, mobius_forward(params, v)) - v)))
    checks.append(("mobius round trip", err < 1e-9, err))
    z = rng.multivariate_normal([0, 0], [[1, 0.8], [0.8, 1]], size=4000)
    tc = total_correlation(z).tc_nats
    checks.append(("ksg gaussian rho=0.8", abs(tc - 0.5108256) < 0.15, tc))
    for name, ok, val in checks:
        print(f"{'PASS' if ok else 'FAIL'}  {name}  ({val:.3g})")
    return EXIT_OK if all(ok for _, ok, _ in checks) else EXIT_FAILED


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "selftest":
        return selftest()
    try:
        cfg = _build_config(args)
        if not cfg.rows():
            raise ConfigError("the manifold and chart filters leave no rows")
    except (ConfigError, ParameterError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    sweep = None
    if args.command == "table":
        records = run_table(cfg)
    elif args.command == "sweep-eigengap":
        records, rows = run_eigengap_sweep(cfg)
        sweep = ("sweep_eigengap", rows, "r_s")
    else:
        records, rows = run_base_scale_sweep(cfg)
        sweep = ("sweep_base_scale", rows, "b")
    try:
        paths = emit_outputs(records, cfg.output_dir, cfg, sweep=sweep, plot=args.plot,
                             command=args.command)
    except OSError as exc:
        print(f"output error: {exc}", file=sys.stderr)
        return EXIT_FAILED
    _print_cells(records)
    for p in paths:
        print(f"wrote {p}")
    failed = sum(1 for r in records if r.failed)
    if failed:
        print(f"{failed} run(s) failed; see the warnings column", file=sys.stderr)
        return EXIT_FAILED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
