"""Command-line entry point: ``labor {sample,benchmark,mc-verify,convert}``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys

from .estimators import FEATURE_KINDS, monte_carlo_report
from .graph import load_graph, parse_graph_spec, save_graph
from .pipeline import BenchmarkSpec, emit_report, run_benchmark, sample_multilayer, stack_to_records
from .samplers import SamplerConfig, config_from_string, load_config
from .variates import VariateKey

log = logging.getLogger("labor")

EXIT_OK, EXIT_RUNTIME, EXIT_VALIDATION = 0, 1, 2


class UsageError(ValueError):
    pass


def _int_list(text: str) -> list[int]:
    try:
        return [int(tok) for tok in text.replace(",", " ").split()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma separated integers, got {text!r}") from exc


def _global_flags(parser: argparse.ArgumentParser, suppress: bool) -> None:
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--seed", type=int, default=default, help="run seed for all variates")
    parser.add_argument("--threads", type=int, default=default, help="worker threads (default 1)")
    parser.add_argument("--format", choices=("json", "csv"), default=default, help="output format")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="labor", description="Layer-neighbor graph sampling tools.")
    _global_flags(parser, suppress=False)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, **kw):
        p = sub.add_parser(name, **kw)
        _global_flags(p, suppress=True)
        return p

    p = add("sample", help="draw one multi-layer sample")
    p.add_argument("--graph", required=True, help="graph file or er:N:P[:SEED], pl:N:EXP[:MEAN[:SEED]], star:M:D")
    p.add_argument("--weighted", action="store_true", help="read edge weights from the graph file")
    p.add_argument("--seeds", type=_int_list, help="seed vertex ids")
    p.add_argument("--seeds-file", help="file with whitespace separated seed ids")
    p.add_argument("--sampler", default="LABOR-0", help="shorthand such as NS, LABOR-1, LABOR-*, PLADIES")
    p.add_argument("--config", help="sampler config file (key = value lines)")
    p.add_argument("--fanouts", type=_int_list, default=[10, 10, 10], help="per-layer fanout or budget")
    p.add_argument("-o", "--output", default="-")

    p = add("benchmark", help="run a benchmark spec and write the metrics report")
    p.add_argument("spec", help="benchmark spec (JSON)")
    p.add_argument("-o", "--output", default="-")

    p = add("mc-verify", help="Monte Carlo check of estimator bias and variance")
    p.add_argument("--graph", required=True)
    p.add_argument("--weighted", action="store_true")
    p.add_argument("--seeds", type=_int_list, required=True)
    p.add_argument("--sampler", default="LABOR-0")
    p.add_argument("--config")
    p.add_argument("--fanout", type=int, help="fanout or budget, overriding the sampler's")
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--features", choices=FEATURE_KINDS, default="unit_rows")
    p.add_argument("--feature-seed", type=int, default=0)
    p.add_argument("--dim", type=int, default=8)
    p.add_argument("-o", "--output", default="-")

    p = add("convert", help="convert between edge-list text and binary CSR")
    p.add_argument("input")
    p.add_argument("output", help="'.lbrg' or '.bin' writes binary CSR, anything else an edge list")
    p.add_argument("--weighted", action="store_true")
    return parser


def _sampler_config(args) -> SamplerConfig:
    cfg = load_config(args.config) if args.config else config_from_string(args.sampler)
    if getattr(args, "weighted", False) and not cfg.weighted:
        cfg = SamplerConfig.from_mapping({**cfg.to_mapping(), "weighted": True})
    return cfg


def _load_graph(spec: str, weighted: bool):
    if weighted and ":" not in spec:
        return load_graph(spec, weighted=True)
    return parse_graph_spec(spec)


def _write(text: str, path: str) -> None:
    if path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def cmd_sample(args) -> int:
    g = _load_graph(args.graph, args.weighted)
    if args.seeds_file:
        with open(args.seeds_file, "r", encoding="utf-8") as fh:
            seeds = [int(tok) for tok in fh.read().split()]
    elif args.seeds:
        seeds = args.seeds
    else:
        raise UsageError("give --seeds or --seeds-file")
    cfg = _sampler_config(args)
    seed = cfg.seed if args.seed is None else args.seed
    stack = sample_multilayer(g, seeds, args.fanouts, cfg, VariateKey(seed))
    records = stack_to_records(stack)
    if args.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["layer", "src", "dst", "weight", "prob", "count"])
        for rec in records:
            for row in zip(rec["src"], rec["dst"], rec["weight"], rec["prob"], rec["count"]):
                w.writerow([rec["layer"], row[0], row[1], format(row[2], ".17g"), format(row[3], ".17g"), row[4]])
        _write(buf.getvalue(), args.output)
    else:
        doc = {
            "sampler": cfg.label,
            "seed": seed,
            "fanouts": list(args.fanouts),
            "vertex_counts": stack.vertex_counts,
            "edge_counts": stack.edge_counts,
            "new_vertex_counts": stack.new_vertex_counts,
            "layers": records,
        }
        _write(json.dumps(doc) + "\n", args.output)
    return EXIT_OK


def cmd_benchmark(args) -> int:
    spec = BenchmarkSpec.load(args.spec)
    if args.seed is not None:
        spec.seed = args.seed
    report = run_benchmark(spec, threads=args.threads or 1)
    emit_report(report, args.format or "json", args.output)
    return EXIT_OK


def cmd_mc_verify(args) -> int:
    g = _load_graph(args.graph, args.weighted)
    cfg = _sampler_config(args)
    if args.fanout is not None:
        cfg = cfg.with_size(args.fanout)
    report = monte_carlo_report(
        g,
        args.seeds,
        cfg,
        trials=args.trials,
        feature_seed=args.feature_seed,
        feature_kind=args.features,
        dim=args.dim,
        run_seed=args.seed,
        workers=args.threads or 1,
    )
    if args.format == "csv":
        buf = io.StringIO()
        recs = report.records()
        w = csv.DictWriter(buf, fieldnames=list(recs[0]), lineterminator="\n")
        w.writeheader()
        for rec in recs:
            w.writerow({k: format(v, ".17g") if isinstance(v, float) else v for k, v in rec.items()})
        _write(buf.getvalue(), args.output)
    else:
        _write(report.to_json() + "\n", args.output)
    return EXIT_OK


def cmd_convert(args) -> int:
    g = load_graph(args.input, weighted=args.weighted)
    save_graph(g, args.output)
    log.info("wrote %d vertices, %d edges to %s", g.num_vertices, g.num_edges, args.output)
    return EXIT_OK


COMMANDS = {
    "sample": cmd_sample,
    "benchmark": cmd_benchmark,
    "mc-verify": cmd_mc_verify,
    "convert": cmd_convert,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    if args.threads is not None and args.threads < 1:
        parser.error("--threads must be >= 1")
    try:
        return COMMANDS[args.command](args)
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        # bad input: malformed files, unknown config keys, out-of-range ids
        log.error("%s", exc)
        return EXIT_VALIDATION
    except Exception as exc:  # noqa: BLE001
        log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
