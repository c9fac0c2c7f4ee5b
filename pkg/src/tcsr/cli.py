"""Command-line entry point: ``tcsr {simulate,optimize,scan,large-n,multiphoton}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .errors import InvalidConfigError
from .experiments import (FIGURES, ExperimentSpec, emit, run_experiment, run_system_command,
                          to_csv)


def _load_config(path):
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise InvalidConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise InvalidConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise InvalidConfigError(f"config {path} must hold a JSON object")
    return data


def _parse_set(items):
    """``key=value`` overrides; values are parsed as JSON when possible."""
    out = {}
    for item in items or ():
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise InvalidConfigError(f"override {item!r} is not of the form key=value")
        try:
            out[key] = json.loads(raw)
        except json.JSONDecodeError:
            out[key] = raw
    return out


def _common(p):
    p.add_argument("--config", help="JSON file with parameters")
    p.add_argument("--seed", type=int, default=None, help="master seed (default 0)")
    p.add_argument("--out", help="output path; CSV gets a .json sidecar (default: CSV to stdout)")
    p.add_argument("--ensembles", type=int, default=None, help="number of disorder draws")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="parameter override")
    p.add_argument("--timing", action="store_true", help="record wall time in the sidecar")


def build_parser():
    parser = argparse.ArgumentParser(prog="tcsr", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    for name, text in (("simulate", "fidelity and eigenstate superradiance of one system"),
                       ("optimize", "optimize the cavity-detuning pulse of one system"),
                       ("multiphoton", "fully inverted emission fidelity")):
        p = sub.add_parser(name, help=text)
        _common(p)

    p = sub.add_parser("scan", help="figure-reproduction experiment")
    _common(p)
    p.add_argument("--figure", choices=sorted(FIGURES))
    p.add_argument("--n", type=int, nargs="+", dest="n_list", help="ensemble sizes")
    p.add_argument("--workers", type=int, default=None)

    p = sub.add_parser("large-n", help="large-N optimization improvement over (G, delta0)")
    _common(p)
    p.add_argument("--G", type=float, nargs="+", dest="G_list")
    p.add_argument("--delta0", type=float, nargs="+", dest="delta_list")
    p.add_argument("--workers", type=int, default=None)
    return parser


def _run(args):
    conf = _load_config(args.config)
    if args.command in ("scan", "large-n"):
        spec_d = dict(conf)
        spec_d.setdefault("params", {})
        if args.command == "large-n":
            spec_d["figure"] = "fig3c"
            if args.G_list:
                spec_d["params"]["G_list"] = args.G_list
            if args.delta_list:
                spec_d["params"]["delta_list"] = args.delta_list
        elif args.figure:
            spec_d["figure"] = args.figure
        if "figure" not in spec_d:
            raise InvalidConfigError("scan needs --figure or a 'figure' entry in --config")
        if getattr(args, "n_list", None):
            spec_d["n_list"] = args.n_list
        for key in ("seed", "ensembles", "workers"):
            val = getattr(args, key, None)
            if val is not None:
                spec_d[key] = val
        spec_d["params"].update(_parse_set(args.set))
        result = run_experiment(ExperimentSpec.from_dict(spec_d), timing=args.timing)
    else:
        conf.update(_parse_set(args.set))
        seed = conf.pop("seed", 0) if args.seed is None else args.seed
        conf.pop("seed", None)
        ens = conf.pop("ensembles", 1) if args.ensembles is None else args.ensembles
        conf.pop("ensembles", None)
        result = run_system_command(args.command, conf, seed=seed, ensembles=ens,
                                    timing=args.timing)
    if args.out:
        for path in emit(result, args.out, args.format):
            print(f"wrote {path}", file=sys.stderr)
    else:
        sys.stdout.write(to_csv(result) if args.format == "csv" else result.to_json())
    return result


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        result = _run(args)
    except (InvalidConfigError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    failed = result.failures
    if failed:
        print(f"{len(failed)} of {len(result.rows)} rows had failing cells:", file=sys.stderr)
        for r in failed:
            print(f"  {r.figure} {r.key} {r.metric}: {r.error}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
