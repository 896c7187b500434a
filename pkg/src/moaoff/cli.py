"""Command-line entry point: ``moaoff <subcommand> [options]``.

Exit codes: 0 success, 1 domain error (bad config or policy input),
2 I/O or parse error.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

from .config import Config, load_config, render_config
from .errors import DomainError, ParseError
from .simulator import (
    Strategy,
    ablation,
    reports_to_csv,
    run_comparison,
    summary_table,
)
from .workload import collect_calibration, image_files, load_image, load_workload, synthesize_workload

log = logging.getLogger("moaoff")

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_IO = 2


def _csv_floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _csv_strategies(text: str) -> tuple[Strategy, ...]:
    try:
        return tuple(Strategy.parse(x.strip()) for x in text.split(",") if x.strip())
    except DomainError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _apply_overrides(cfg: Config, args: argparse.Namespace) -> Config:
    """Command-line flags win over file values."""
    sim = cfg.simulation
    if getattr(args, "seed", None) is not None:
        sim = replace(sim, seed=args.seed)
    if getattr(args, "bandwidths", None):
        sim = replace(sim, bandwidths_mbps=args.bandwidths)
    if getattr(args, "strategies", None):
        sim = replace(sim, strategies=args.strategies)
    if getattr(args, "bandwidth", None) is not None:
        sim = replace(sim, ablation_bandwidth_mbps=args.bandwidth)
    pol = cfg.policy
    tau = getattr(args, "tau", None)
    if tau is not None:
        pol = replace(pol, tau_text=tau, tau_image=tau)
    for flag, name in (("tau_text", "tau_text"), ("tau_image", "tau_image"), ("ell_max", "ell_max"), ("beta_bw", "beta_bw_mbps")):
        v = getattr(args, flag, None)
        if v is not None:
            pol = replace(pol, **{name: v})
    return replace(cfg, simulation=sim, policy=pol)


def _workload(cfg: Config, args: argparse.Namespace):
    if args.workload is not None:
        return load_workload(args.workload, cfg.perception)
    return synthesize_workload(cfg.synthetic_spec(args.requests))


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8", newline="\n")


# -- subcommands -------------------------------------------------------------------


def cmd_score_image(args: argparse.Namespace, cfg: Config) -> int:
    res = cfg.perception.score_image(load_image(args.path))
    for name in ("c_res", "c_edge", "c_ent", "c_lap", "total"):
        print(f"{name}: {getattr(res, name):.6f}")
    return EXIT_OK


def cmd_score_text(args: argparse.Namespace, cfg: Config) -> int:
    if args.file is not None:
        text = sys.stdin.read() if args.file == "-" else Path(args.file).read_text(encoding="utf-8")
    else:
        text = args.text or ""
    res = cfg.perception.score_text(text)
    print(f"tokens: {res.features.token_count}")
    print(f"entities: {res.features.entity_count}")
    print(f"sentences: {res.features.sentence_count}")
    print(f"c_l: {res.c_l:.6f}")
    print(f"c_ner: {res.c_ner:.6f}")
    print(f"total: {res.total:.6f}")
    return EXIT_OK


def cmd_calibrate(args: argparse.Namespace, cfg: Config) -> int:
    paths = image_files(args.image_dir)
    cal = collect_calibration(paths, cfg.perception.calibration.epsilon)
    _write(args.out, cal.dumps())
    if args.out not in (None, "-"):
        print(f"wrote calibration from {len(paths)} files to {args.out}", file=sys.stderr)
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace, cfg: Config) -> int:
    workload = _workload(cfg, args)
    sim = cfg.simulation
    reports = run_comparison(
        workload,
        cfg.policy,
        cfg.cost_model,
        sim.bandwidths_mbps,
        sim.seed,
        strategies=sim.strategies,
        uniform_threshold=sim.uniform_threshold,
    )
    text = reports_to_csv(reports)
    if args.out is None:
        sys.stdout.write(text)
        return EXIT_OK
    _write(args.out, text)
    print(f"{len(workload)} requests, seed {sim.seed}")
    print(summary_table(reports))
    return EXIT_OK


_ABLATION_HEADER = (
    "# ablation deltas are variant minus full MoA-Off\n"
    "# acc_proxy < 0: variant less accurate; mean_s/p95_s > 0: variant slower;\n"
    "# edge_busy_s/cloud_busy_s > 0: variant uses more compute on that side\n"
)


def cmd_ablate(args: argparse.Namespace, cfg: Config) -> int:
    workload = _workload(cfg, args)
    sim = cfg.simulation
    rep = ablation(workload, cfg.policy, cfg.cost_model, sim.ablation_bandwidth_mbps, sim.seed)
    deltas = rep.deltas()
    buf = io.StringIO()
    buf.write(_ABLATION_HEADER)
    cols = ("variant", "acc_proxy", "mean_s", "p95_s", "edge_busy_s", "cloud_busy_s")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(cols)
    for name, d in deltas.items():
        writer.writerow([name] + [repr(d[c]) for c in cols[1:]])
    if args.out is None:
        sys.stdout.write(buf.getvalue())
    else:
        _write(args.out, buf.getvalue())
        print(_ABLATION_HEADER, end="")
        print(summary_table([rep.full, rep.modality_blind, rep.no_scheduling]))
    return EXIT_OK


def cmd_default_config(args: argparse.Namespace, cfg: Config) -> int:
    _write(args.out, render_config(cfg))
    return EXIT_OK


# -- parser ------------------------------------------------------------------------


def _add_config(p: argparse.ArgumentParser) -> None:
    p.add_argument("-c", "--config", help="TOML configuration file (default: built-in defaults)")


def _add_workload(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group()
    src.add_argument("--workload", help="line-delimited JSON workload file")
    src.add_argument(
        "--synthetic",
        action="store_true",
        help="generate a synthetic workload from the [synthetic] config section (the default)",
    )
    p.add_argument("--requests", type=int, help="override synthetic request count")
    p.add_argument("--seed", type=int, help="override simulation seed (also seeds synthesis)")
    p.add_argument("--tau", type=float, help="set both modality thresholds")
    p.add_argument("--tau-text", type=float, help="text complexity threshold")
    p.add_argument("--tau-image", type=float, help="image complexity threshold")
    p.add_argument("--ell-max", type=float, help="maximum tolerable edge load for edge routing")
    p.add_argument("--beta-bw", type=float, help="bandwidth limit of the routing gate in Mbps")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="moaoff",
        description="Modality-aware edge/cloud offloading: scoring, calibration and simulation.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score-image", help="print the image complexity breakdown")
    p.add_argument("path", help="PGM (P2/P5) or PPM (P3/P6) image")
    _add_config(p)
    p.set_defaults(func=cmd_score_image)

    p = sub.add_parser("score-text", help="print the text complexity breakdown")
    p.add_argument("text", nargs="?", help="text to score (omit when using --file)")
    p.add_argument("-f", "--file", help="read text from a file, or '-' for stdin")
    _add_config(p)
    p.set_defaults(func=cmd_score_text)

    p = sub.add_parser("calibrate", help="fit P5/P95 normalization constants over an image directory")
    p.add_argument("image_dir", help="directory of .pgm/.ppm/.pnm files")
    p.add_argument("-o", "--out", help="output calibration file (default: stdout)")
    _add_config(p)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("simulate", help="compare strategies across bandwidths and write a CSV")
    _add_workload(p)
    p.add_argument("--bandwidths", type=_csv_floats, help="comma-separated Mbps list, e.g. 200,300,400")
    p.add_argument(
        "--strategies",
        type=_csv_strategies,
        help="comma-separated subset of " + ",".join(s.value for s in Strategy),
    )
    p.add_argument("-o", "--out", help="CSV output path; a summary table is printed when set")
    _add_config(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("ablate", help="report modality-blind and scheduling-off deltas")
    _add_workload(p)
    p.add_argument("--bandwidth", type=float, help="bandwidth in Mbps (default: simulation.ablation_bandwidth_mbps)")
    p.add_argument("-o", "--out", help="CSV output path for the deltas")
    _add_config(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("default-config", help="print the effective configuration as TOML")
    p.add_argument("-o", "--out", help="output path (default: stdout)")
    _add_config(p)
    p.set_defaults(func=cmd_default_config)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = _apply_overrides(load_config(args.config), args)
        return args.func(args, cfg)
    except DomainError as exc:
        print(f"moaoff: error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except (OSError, ParseError) as exc:
        print(f"moaoff: error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
