"""Command-line front end.

Subcommands:

* ``study <config>``  -- run a Monte-Carlo convergence study, write the
  error table (CSV) and a metadata file, print fitted orders;
* ``path <config>``   -- dump one sampled driving path as delimited text;
* ``selftest``        -- run the per-module invariant checks;
* ``order <table>``   -- refit convergence orders from an existing table.

Configs are JSON objects with keys problem, N, K, T, M_list,
realizations, schemes, reference, seed, out_dir; missing keys fall back
to the desk-scale defaults, unknown keys are rejected with the offending
line number.  SPDERK_SEED and SPDERK_OUT_DIR override the config.

Exit codes: 0 success, 1 usage/config error, 2 study or check failure.
"""

import argparse
import json
import math
import os
import re
import sys
from dataclasses import replace

import numpy as np

from . import __version__
from .errors import ConfigError, SpderkError, StudyError
from .experiments import (
    ErrorTable,
    StudyConfig,
    fit_order,
    order_summary,
    run_study,
)
from .nemytskii import builtin_problem
from .qwiener import dump_path, sample_path
from .selftest import run_selftests

__all__ = ["load_config", "config_from_dict", "config_to_dict", "run_cli", "main"]

_CONFIG_KEYS = ("problem", "N", "K", "T", "M_list", "realizations",
                "schemes", "reference", "seed", "out_dir")

# acceptance bands for --assert-orders, keyed by problem and scheme name
ORDER_BANDS = {
    "example1": {
        "lie": (0.35, 0.65), "exe": (0.35, 0.65), "dfmm": (0.85, 1.15),
        "ewp": (1.3, 1.7), "erkm15": (1.3, 1.7), "erkm-closed": (1.3, 1.7),
    },
    "example2": {
        "lie": (0.35, 0.65), "exe": (0.35, 0.65), "dfmm": (0.8, 1.2),
        "ewp": (1.25, 1.75), "erkm15": (1.25, 1.75), "erkm-closed": (1.25, 1.75),
    },
    "example3": {
        "erkm15": (1.25, math.inf), "erkm-closed": (1.25, math.inf),
    },
}


def config_from_dict(data, source="<config>", text=None):
    """Build a StudyConfig from a parsed JSON object.

    Unknown keys are rejected; when the original text is supplied the
    diagnostic carries the line the key first appears on.
    """
    if not isinstance(data, dict):
        raise ConfigError("%s: top level must be an object" % source)
    for key in data:
        if key not in _CONFIG_KEYS:
            where = source
            if text is not None:
                m = re.search(r'"%s"' % re.escape(key), text)
                if m:
                    where = "%s: line %d" % (source, text.count("\n", 0, m.start()) + 1)
            raise ConfigError("%s: unknown key %r (allowed: %s)"
                              % (where, key, ", ".join(_CONFIG_KEYS)))
    if "problem" not in data:
        raise ConfigError("%s: missing required key 'problem'" % source)

    kwargs = {"problem": data["problem"]}
    for key in ("N", "K", "realizations", "seed"):
        if data.get(key) is not None:
            kwargs[key] = int(data[key])
    if data.get("T") is not None:
        kwargs["T"] = float(data["T"])
    if data.get("M_list") is not None:
        kwargs["M_list"] = tuple(int(M) for M in data["M_list"])
    if data.get("schemes") is not None:
        kwargs["schemes"] = tuple(data["schemes"])
    if data.get("reference") is not None:
        kwargs["reference"] = data["reference"]
    if data.get("out_dir") is not None:
        kwargs["out_dir"] = str(data["out_dir"])
    try:
        return StudyConfig(**kwargs)
    except TypeError as e:
        raise ConfigError("%s: %s" % (source, e)) from e


def load_config(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as e:
        raise ConfigError(str(e)) from e
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError("%s: line %d column %d: %s"
                          % (path, e.lineno, e.colno, e.msg)) from e
    return config_from_dict(data, source=path, text=text)


def config_to_dict(cfg):
    """JSON-ready echo of a config; load_config on the result yields an
    equivalent StudyConfig."""
    ref = cfg.reference
    return {
        "problem": cfg.problem,
        "N": cfg.N,
        "K": cfg.K,
        "T": cfg.T,
        "M_list": list(cfg.M_list),
        "realizations": cfg.realizations,
        "schemes": [dict(s) if isinstance(s, dict) else s for s in cfg.schemes],
        "reference": None if ref is None else {"mode": ref.mode, "M": ref.M},
        "seed": cfg.seed,
        "out_dir": cfg.out_dir,
    }


def _apply_env(cfg):
    seed = os.environ.get("SPDERK_SEED")
    if seed is not None:
        try:
            cfg = replace(cfg, seed=int(seed))
        except ValueError as e:
            raise ConfigError("SPDERK_SEED: %s" % e) from e
    out_dir = os.environ.get("SPDERK_OUT_DIR")
    if out_dir:
        cfg = replace(cfg, out_dir=out_dir)
    return cfg


def _scheme_names_and_labels(cfg):
    from .schemes import resolve_scheme

    pairs = []
    for sel in cfg.schemes:
        name = sel["name"] if isinstance(sel, dict) else sel
        pairs.append((name, resolve_scheme(sel, cfg.strict_table)[0]))
    return pairs


def check_order_bands(cfg, table):
    """Breach messages for every banded scheme whose fitted slope falls
    outside the acceptance window (or cannot be fitted)."""
    bands = ORDER_BANDS.get(cfg.problem, {})
    breaches = []
    for name, label in _scheme_names_and_labels(cfg):
        band = bands.get(name)
        if band is None:
            continue
        try:
            slope, _ = fit_order(table, label)
        except ValueError as e:
            breaches.append("%s: cannot fit order (%s)" % (label, e))
            continue
        lo, hi = band
        if not lo <= slope <= hi:
            breaches.append("%s: fitted order %.3f outside [%.2f, %.2f]"
                            % (label, slope, lo, hi))
    return breaches


def _cmd_study(args, out, err):
    cfg = _apply_env(load_config(args.config))
    if args.strict_table1:
        cfg = replace(cfg, strict_table=True)
    cfg = cfg.validated()
    table = run_study(cfg, workers=args.workers)

    out_dir = cfg.out_dir or "."
    os.makedirs(out_dir, exist_ok=True)
    table_path = os.path.join(out_dir, "%s_errors.csv" % cfg.problem)
    meta_path = os.path.join(out_dir, "%s_meta.json" % cfg.problem)
    with open(table_path, "w") as fh:
        table.write_csv(fh)
    meta = {
        "config": config_to_dict(cfg),
        "seed": cfg.seed,
        "strict_table": cfg.strict_table,
        "versions": {
            "spderk": __version__,
            "numpy": np.__version__,
            "python": "%d.%d.%d" % sys.version_info[:3],
        },
    }
    with open(meta_path, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")

    print("wrote %s" % table_path, file=out)
    print("wrote %s" % meta_path, file=out)
    for scheme, slope, residual in order_summary(table):
        print("%s: fitted order %.3f (residual %.2e)" % (scheme, slope, residual),
              file=out)
    if args.assert_orders:
        breaches = check_order_bands(cfg, table)
        if breaches:
            for b in breaches:
                print("order assertion FAILED: %s" % b, file=err)
            return 2
        print("order assertions passed", file=out)
    return 0


def _cmd_path(args, out, err):
    cfg = _apply_env(load_config(args.config)).validated()
    M = max(cfg.M_list)
    problem = builtin_problem(cfg.problem, cfg.N, cfg.K)
    path = sample_path(problem.qspec, M, cfg.T / M, cfg.seed, args.realization)
    dump_path(path, out)
    return 0


def _cmd_selftest(args, out, err):
    failed = run_selftests(write=lambda line: print(line, file=out))
    if failed:
        print("%d check(s) failed" % failed, file=err)
        return 2
    return 0


def _cmd_order(args, out, err):
    try:
        with open(args.table) as fh:
            table = ErrorTable.read_csv(fh)
    except OSError as e:
        raise ConfigError(str(e)) from e
    except ValueError as e:
        raise ConfigError("%s: %s" % (args.table, e)) from e
    summary = order_summary(table)
    if not summary:
        print("no scheme has enough rows to fit an order", file=err)
        return 1
    for scheme, slope, residual in summary:
        print("%s: fitted order %.3f (residual %.2e)" % (scheme, slope, residual),
              file=out)
    return 0


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="spderk",
        description="Spectral-Galerkin convergence studies for semilinear "
                    "SPDEs with multiplicative noise.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_study = sub.add_parser("study", help="run a convergence study")
    p_study.add_argument("config", help="JSON config file")
    p_study.add_argument("--workers", type=int, default=None,
                         help="worker processes (default: available cores)")
    p_study.add_argument("--assert-orders", action="store_true",
                         help="fail (exit 2) if fitted orders leave the "
                              "acceptance bands")
    p_study.add_argument("--strict-table1", action="store_true",
                         help="use the 1/(4 c3) second-difference weights "
                              "(audit mode, exact only at c3 = 1)")

    p_path = sub.add_parser("path", help="dump one sampled driving path")
    p_path.add_argument("config", help="JSON config file")
    p_path.add_argument("--realization", type=int, default=0)

    sub.add_parser("selftest", help="run per-module invariant checks")

    p_order = sub.add_parser("order", help="refit orders from a table file")
    p_order.add_argument("table", help="CSV error table")

    return parser


_COMMANDS = {
    "study": _cmd_study,
    "path": _cmd_path,
    "selftest": _cmd_selftest,
    "order": _cmd_order,
}


def run_cli(argv=None, out=None, err=None):
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse uses status 2 for usage errors; remap per contract
        return 0 if e.code == 0 else 1
    try:
        return _COMMANDS[args.command](args, out, err)
    except ConfigError as e:
        print("config error: %s" % e, file=err)
        return 1
    except StudyError as e:
        print("study failed: %s" % e, file=err)
        return 2
    except SpderkError as e:
        print("error: %s" % e, file=err)
        return 2


def main(argv=None):
    raise SystemExit(run_cli(argv))


if __name__ == "__main__":
    main()
