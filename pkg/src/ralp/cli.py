"""Command-line front end.

Subcommands::

    ralp pool --n 13 [--l2 65] [--gram-csv gram.csv]
    ralp theory --p1-db 12 --p2-db 6 --n 13 --m 10 --k2 10 [--sweep k2 --values 0,2,4]
    ralp theory --kl-curve [--ratios 0.1,1,10]
    ralp simulate experiment.ini [-o out.csv]
    ralp sweep fig4 [--trials 1000] [-o fig4.csv]

Exit status is 0 on success, 1 for invalid input or configuration and 2 for
failures while running; errors are reported as one JSON object on stderr.
Outputs go to ``-o`` or, for simulations, to ``$RALP_OUTPUT_DIR`` (default:
the working directory).
"""

import argparse
import configparser
import csv
import dataclasses
import io
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .channel import ChannelConfig, db_to_linear
from .harness import ExperimentConfig, csv_text, manifest, run_experiment
from .preambles import build_pool, coherence_report, write_gram_csv
from .presets import figure_presets, get_preset
from .theory import TheoryParams, calibrate_tau1, calibrate_tau2, error_budget, interference_power, kl_distance

OUTPUT_ENV = "RALP_OUTPUT_DIR"

logger = logging.getLogger("ralp")


class ConfigError(ValueError):
    pass


class RunFailure(RuntimeError):
    pass


def _run(configs, n_jobs):
    try:
        return [run_experiment(c, n_jobs=n_jobs) for c in configs]
    except Exception as exc:
        raise RunFailure(f"{type(exc).__name__}: {exc}") from exc


_CHANNEL_KEYS = {"m": int, "p1": float, "p2": float, "n0": float, "k1": int, "k2": int}
_EXPERIMENT_KEYS = {
    "n": int,
    "l2_size": int,
    "sweep_var": str,
    "sweep_values": str,
    "eps": float,
    "eps_c": float,
    "trials": int,
    "seed": int,
    "error_injection": str,
    "cavi_runs": int,
    "stage": str,
    "sic_mode": str,
    "i2_source": str,
    "lambda2": float,
    "k_collision": int,
    "name": str,
}


def _parse_section(section, keys):
    out = {}
    for raw_key, raw in section.items():
        key, scale = raw_key, None
        if raw_key.endswith("_db"):
            key, scale = raw_key[:-3], "db"
        if key not in keys:
            raise ConfigError(f"unknown key {raw_key!r} in [{section.name}]")
        if key in out:
            raise ConfigError(f"{key!r} given twice in [{section.name}]")
        try:
            value = keys[key](raw)
        except ValueError as exc:
            raise ConfigError(f"bad value for {raw_key!r}: {raw!r}") from exc
        if scale == "db":
            if keys[key] is not float:
                raise ConfigError(f"{raw_key!r}: only powers accept a _db suffix")
            value = float(db_to_linear(value))
        out[key] = value
    return out


def _parse_values(text):
    values = []
    for tok in text.replace(";", ",").split(","):
        tok = tok.strip()
        if not tok:
            continue
        num = float(tok)
        values.append(int(num) if num.is_integer() and "." not in tok and "e" not in tok.lower() else num)
    if not values:
        raise ConfigError("sweep_values is empty")
    return tuple(values)


def load_config(path):
    """Read an experiment from an INI-style file with [channel] and [experiment] sections."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    for name in ("channel", "experiment"):
        if not parser.has_section(name):
            raise ConfigError(f"missing [{name}] section")
    extra = set(parser.sections()) - {"channel", "experiment"}
    if extra:
        raise ConfigError(f"unknown sections: {sorted(extra)}")
    ch = _parse_section(parser["channel"], _CHANNEL_KEYS)
    ex = _parse_section(parser["experiment"], _EXPERIMENT_KEYS)
    ch.setdefault("n0", 1.0)
    try:
        channel = ChannelConfig(**ch)
        if "sweep_values" not in ex:
            raise ConfigError("[experiment] needs sweep_values")
        ex["sweep_values"] = _parse_values(ex["sweep_values"])
        return ExperimentConfig(channel=channel, **ex)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def _output_path(explicit, default_name):
    if explicit:
        return Path(explicit)
    return Path(os.environ.get(OUTPUT_ENV, ".")) / default_name


def _write_outputs(configs, stats, out_path, seed_note):
    text = csv_text(stats)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(text)
    man = out_path.with_suffix(".manifest.json")
    man.write_text(manifest(configs, output=out_path.name, **seed_note) + "\n")
    return out_path, man


def cmd_pool(args):
    pool = build_pool(args.n, args.l2 if args.l2 is not None else args.n * (args.n - 1))
    report = coherence_report(pool)
    if args.gram_csv:
        write_gram_csv(pool, args.gram_csv)
    print(json.dumps(report, sort_keys=True))
    return 0 if report["passed"] and report["l1_orthogonal"] else 2


def _budget_row(label, value, m, p1, p2, n0, k2, n, eps, eps_c, k1l):
    i2 = interference_power(k2, p2, n, n0)
    tau1 = calibrate_tau1(m, eps, p1, i2)
    tau2 = calibrate_tau2(m, eps_c, p1, i2)
    b = error_budget(tau1, tau2, TheoryParams(m=m, p1=p1, p2=p2, n0=n0, k2=k2, k1l=k1l), n)
    return [label, value, b.p_md, b.p_fa, b.p_c_md, b.p_1_md, kl_distance(p1, i2)]


def cmd_theory(args):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if args.kl_curve:
        writer.writerow(["p1_over_i2", "kl"])
        ratios = _parse_values(args.ratios) if args.ratios else np.round(np.linspace(0.1, 10, 100), 10)
        for r in ratios:
            writer.writerow([repr(float(r)), repr(kl_distance(float(r), 1.0))])
    else:
        base = {
            "m": args.m,
            "p1_db": args.p1_db,
            "p2_db": args.p2_db,
            "n0_db": args.n0_db,
            "k2": args.k2,
        }
        sweep = args.sweep
        values = _parse_values(args.values) if sweep else (base.get(sweep),)
        if sweep and sweep not in base:
            raise ConfigError(f"cannot sweep {sweep!r}; choose from {sorted(base)}")
        writer.writerow(["parameter", "value", "p_md", "p_fa", "p_c_md", "p_1_md", "kl"])
        for v in values:
            point = dict(base)
            if sweep:
                point[sweep] = v
            p1 = float(db_to_linear(point["p1_db"]))
            p2 = float(db_to_linear(point["p2_db"]))
            n0 = float(db_to_linear(point["n0_db"]))
            if not p1 > p2:
                raise ConfigError("p1 must exceed p2")
            row = _budget_row(
                sweep or "none", v if sweep else "", int(point["m"]), p1, p2, n0, int(point["k2"]),
                args.n, args.eps, args.eps_c, args.k1l,
            )
            writer.writerow([x if isinstance(x, str) else repr(x) if isinstance(x, float) else x for x in row])
    text = buf.getvalue()
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_simulate(args):
    config = load_config(args.config)
    if args.seed is not None:
        config = dataclasses.replace(config, seed=args.seed)
    stats = _run([config], args.n_jobs)
    name = config.name or Path(args.config).stem
    out, man = _write_outputs([config], stats, _output_path(args.output, f"{name}.csv"), {"source": str(args.config)})
    logger.info("wrote %s and %s", out, man)
    return 0


def cmd_sweep(args):
    try:
        configs = get_preset(args.preset, trials=args.trials, seed=args.seed, eps=args.eps)
    except KeyError as exc:
        raise ConfigError(exc.args[0]) from exc
    stats = _run(configs, args.n_jobs)
    out, man = _write_outputs(configs, stats, _output_path(args.output, f"{args.preset}.csv"), {"preset": args.preset})
    logger.info("wrote %s and %s", out, man)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="ralp", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pool", help="build a preamble pool and check its coherence")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--l2", type=int)
    p.add_argument("--gram-csv")
    p.set_defaults(func=cmd_pool)

    p = sub.add_parser("theory", help="closed-form type-1 error probabilities")
    p.add_argument("--p1-db", type=float, default=12.0)
    p.add_argument("--p2-db", type=float, default=6.0)
    p.add_argument("--n0-db", type=float, default=0.0)
    p.add_argument("--n", type=int, default=13)
    p.add_argument("--m", type=int, default=10)
    p.add_argument("--k2", type=int, default=0)
    p.add_argument("--eps", type=float, default=1e-2)
    p.add_argument("--eps-c", type=float, default=1e-3)
    p.add_argument("--k1l", type=int, default=2)
    p.add_argument("--sweep", choices=["m", "p1_db", "p2_db", "n0_db", "k2"])
    p.add_argument("--values", help="comma-separated grid for --sweep")
    p.add_argument("--kl-curve", action="store_true", help="emit the KL distance against P1/I2")
    p.add_argument("--ratios", help="comma-separated P1/I2 grid for --kl-curve")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_theory)

    p = sub.add_parser("simulate", help="run one experiment from a config file")
    p.add_argument("config")
    p.add_argument("-o", "--output")
    p.add_argument("--seed", type=int)
    p.add_argument("--n-jobs", type=int, default=1)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="run a built-in study preset")
    p.add_argument("preset", choices=sorted(figure_presets()))
    p.add_argument("-o", "--output")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--eps", type=float)
    p.add_argument("--n-jobs", type=int, default=1)
    p.set_defaults(func=cmd_sweep)
    return parser


def _fail(kind, code, exc):
    sys.stderr.write(json.dumps({"error": kind, "type": type(exc).__name__, "message": str(exc)}) + "\n")
    return code


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code else 0
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    if args.command == "theory" and args.sweep and not args.values:
        return _fail("config", 1, ConfigError("--sweep needs --values"))
    try:
        return args.func(args)
    except RunFailure as exc:
        logger.debug("runtime failure", exc_info=True)
        return _fail("runtime", 2, exc)
    except (ConfigError, ValueError, TypeError) as exc:
        return _fail("config", 1, exc)
    except Exception as exc:  # noqa: BLE001 - reported as a runtime failure
        logger.debug("runtime failure", exc_info=True)
        return _fail("runtime", 2, exc)


if __name__ == "__main__":
    sys.exit(main())
