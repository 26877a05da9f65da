"""Command-line front end.

Exit codes: 0 every verdict passed, 2 a statistical verdict failed,
3 invalid input or configuration, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import chaos, experiments, sampler
from .config import ExperimentConfig, canonical_json, parse_observable
from .covariance import CovarianceModel
from .errors import (BMLabError, ConfigError, DivergenceError, EmbeddingError, FeasibilityError,
                     GreenMismatchError, QuadratureError, SingularityError, WindowError)
from .hermite import hermite_rank

EXIT_OK, EXIT_FAIL, EXIT_INVALID, EXIT_NUMERIC = 0, 2, 3, 4
_INVALID = (ConfigError, DivergenceError, WindowError, FeasibilityError, ValueError)
_NUMERIC = (QuadratureError, EmbeddingError, GreenMismatchError, SingularityError)


def parse_model(spec: str, d: int) -> CovarianceModel:
    """``delta``, ``nn:c``, ``tent:w``, ``power_law:a,beta``, ``gff`` or a JSON file path."""
    if spec.endswith(".json"):
        data = json.loads(Path(spec).read_text())
        data.setdefault("d", d)
        return CovarianceModel.from_dict(data)
    name, _, args = spec.partition(":")
    vals = [float(v) for v in args.split(",")] if args else []
    if name == "delta":
        return CovarianceModel.delta(d)
    if name == "nn":
        return CovarianceModel.nearest_neighbour(d, vals[0])
    if name == "tent":
        return CovarianceModel.separable_tent(d, int(vals[0]))
    if name == "power_law":
        return CovarianceModel.power_law(d, vals[0], vals[1])
    if name == "gff":
        return CovarianceModel.gff(d)
    raise ConfigError(f"unknown model spec {spec!r}")


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v]


def _load_config(args) -> ExperimentConfig:
    if not args.config:
        raise ConfigError("--config PATH is required")
    cfg = ExperimentConfig.load(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg


def _finish(report, out) -> int:
    if out:
        experiments.write_report(report, out)
    for v in report.verdicts:
        print(f"{'PASS' if v.passed else 'FAIL'}  {v.name}  observed={v.observed:.6g}  "
              f"predicted={v.predicted:.6g}  rule={v.rule}")
    print(f"run_id={report.run_id} {'all verdicts passed' if report.passed else 'some verdicts failed'}")
    return EXIT_OK if report.passed else EXIT_FAIL


# subcommands ---------------------------------------------------------------------

def cmd_expand(args) -> int:
    e = parse_observable(args.H, args.variance, args.q_max)
    try:
        m = hermite_rank(e)
    except ValueError:
        m = None
    print(f"h0 = {e.h0:.12g}")
    print(f"rank m = {m}")
    for q in sorted(e.coeffs):
        if e.coeffs[q] != 0.0:
            print(f"c{q} = {e.coeffs[q]:.12g}")
    print(e.to_json())
    return EXIT_OK


def cmd_experiment(args, kind: str) -> int:
    cfg = _load_config(args)
    if cfg.experiment != kind:
        raise ConfigError(f"config describes a {cfg.experiment!r} experiment, not {kind!r}")
    report = experiments.run_experiment(cfg, args.threads)
    return _finish(report, args.out)


def cmd_contraction(args) -> int:
    model = parse_model(args.model, args.d)
    f = chaos.TestFunction.constant_one(args.d)
    Ns = _int_list(args.N)
    rs = _int_list(args.r) if args.r else list(range(1, args.q))
    rows = []
    for N in Ns:
        rows.append([N] + [chaos.contraction_norm_sq(args.q, r, 1.0, model, f, N) for r in rs])
    header = ["N"] + [f"r={r}" for r in rs]
    text = experiments._csv(rows, header)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "contraction.csv").write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_plotdata(args) -> int:
    out = args.out
    if out and Path(out).suffix != ".csv":
        Path(out).mkdir(parents=True, exist_ok=True)
        out = str(Path(out) / "plotdata.csv")
    text = experiments.plotdata(args.run, out)
    if not out:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_sample_dump(args) -> int:
    cfg = _load_config(args)
    cfg.validate()
    model = cfg.build_model()
    M = experiments.box_size(cfg, model)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    for r in _int_list(args.replicas):
        if cfg.is_gff:
            s = sampler.sample_gff(cfg.d, M, cfg.seed, r)
        else:
            s = sampler.sample_stationary(model, M, cfg.seed, r)
        path = out / f"sample_{cfg.seed}_{r}.bin"
        sampler.dump_sample(s, path)
        print(path)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment config (JSON)")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--threads", type=int, default=None,
                        help="worker processes (default: $BM_LAB_THREADS or the CPU count)")
    common.add_argument("--out", help="output directory")

    p = argparse.ArgumentParser(prog="bmlab", description="Breuer-Major lattice experiments")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("expand", parents=[common], help="Hermite expansion of an observable")
    s.add_argument("H", help="x^p, He<q>, poly:a0,a1,... or hermite:q=c,...")
    s.add_argument("--variance", type=float, default=1.0, help="variance of the Gaussian argument")
    s.add_argument("--q-max", type=int, default=None)
    s.set_defaults(func=cmd_expand)

    for name, help_ in (("clt", "white-noise CLT verdicts"), ("gff", "lattice GFF applications"),
                        ("tightness", "negative Sobolev norm survey")):
        s = sub.add_parser(name, parents=[common], help=help_)
        s.set_defaults(func=lambda a, k=name: cmd_experiment(a, k))

    s = sub.add_parser("contraction", parents=[common], help="contraction norms versus N")
    s.add_argument("--q", type=int, required=True)
    s.add_argument("--r", default="", help="comma-separated contraction orders (default 1..q-1)")
    s.add_argument("--model", default="delta", help="delta, nn:c, tent:w, power_law:a,beta, gff or a JSON file")
    s.add_argument("--d", type=int, default=1)
    s.add_argument("--N", required=True, help="comma-separated window sizes")
    s.set_defaults(func=cmd_contraction)

    s = sub.add_parser("plotdata", parents=[common], help="tidy CSV from a run directory")
    s.add_argument("run", help="directory written by clt/gff/tightness --out")
    s.set_defaults(func=cmd_plotdata)

    s = sub.add_parser("sample-dump", parents=[common], help="write raw field samples")
    s.add_argument("--replicas", default="0", help="comma-separated replica indices")
    s.set_defaults(func=cmd_sample_dump)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _NUMERIC as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except _INVALID as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (json.JSONDecodeError, OSError, csv.Error) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except BMLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
