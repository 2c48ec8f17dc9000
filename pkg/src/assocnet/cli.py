"""Command-line entry points tying generation, projection and reporting together."""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np
import polars as pl

from . import experiments
from .adaptive import DEFAULT_SCORE_DISCOUNT, KappaFilterBank
from .errors import ConfigError, DataError
from .io import (
    RunConfig,
    dense_matrix_path,
    format_number,
    FrameRecordWriter,
    load_snapshots,
    read_pair_records,
    write_columns,
    write_dense_matrix,
    write_snapshots,
)
from .projection import EngineState, NodeRegistry
from .synth import GeneratorConfig, SeedMatrix, builtin_seeds, generate

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_IO = 3

THREADS_ENV = "ASSOCNET_THREADS"


class _Parser(argparse.ArgumentParser):
    """argparse parser that exits with the documented usage status."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _default_threads() -> int:
    raw = os.environ.get(THREADS_ENV, "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _load_seed(token: str, changepoint: bool) -> SeedMatrix:
    _, stationary, shifted = builtin_seeds()
    if token == "builtin":
        return shifted if changepoint else stationary
    return SeedMatrix.from_text(token)


def _parse_mode(text: str) -> tuple[str, float | None, tuple[float, ...] | None]:
    head, _, rest = text.partition(":")
    if head == "cumulative" and not rest:
        return "cumulative", None, None
    if head == "mixed" and rest:
        return "mixed", float(rest), None
    if head == "bank" and rest:
        return "bank", None, tuple(float(v) for v in rest.split(","))
    raise ValueError(
        f"mode must be cumulative, mixed:<kappa> or bank:<k1,k2,...>, got {text!r}"
    )


def _parse_prior(text: str) -> tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise ValueError(f"prior must be two comma-separated numbers, got {text!r}")
    return float(parts[0]), float(parts[1])


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="assocnet",
        description=(
            "Stream bipartite snapshots into a probabilistic association "
            "network over the source nodes."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic snapshot stream")
    g.add_argument("--seeds", required=True,
                   help="seed matrix file, or 'builtin' for the toy matrix")
    g.add_argument("--steps", type=int, required=True, help="number of snapshots")
    g.add_argument("--changepoint", default=None, metavar="T:SEEDS",
                   help="switch to another seed matrix from step T onward")
    g.add_argument("--rng-seed", type=int, required=True, help="generator seed")
    g.add_argument("--out", required=True, help="output edge-list path")

    p = sub.add_parser("project", help="run the projection engine over a stream")
    p.add_argument("--in", dest="input", required=True, help="edge-list path")
    p.add_argument("--mode", default="cumulative",
                   help="cumulative, mixed:<kappa> or bank:<k1,k2,...>")
    p.add_argument("--prior", default="10,10", metavar="ALPHA,BETA",
                   help="default prior pseudo-counts")
    p.add_argument("--bank-discount", type=float, default=DEFAULT_SCORE_DISCOUNT,
                   help="per-step decay of accumulated predictive scores")
    p.add_argument("--stats", default=",".join(RunConfig().stats),
                   help="comma-separated subset of alpha,beta,e_pi,e_w")
    p.add_argument("--dense", action="store_true",
                   help="write one dense mean-attraction matrix per step")
    p.add_argument("--threads", type=int, default=None,
                   help=f"worker threads (default ${THREADS_ENV} or 1)")
    p.add_argument("--out", required=True, help="output directory")

    i = sub.add_parser("inspect", help="print one pair's time series")
    i.add_argument("--in", dest="input", required=True,
                   help="directory written by 'project'")
    i.add_argument("--pair", required=True, metavar="I,J",
                   help="two node identifiers, comma-separated")

    r = sub.add_parser("reproduce", help="run a canned toy experiment")
    r.add_argument("--experiment", required=True,
                   choices=experiments.EXPERIMENT_NAMES)
    r.add_argument("--seeds-count", type=int, default=20,
                   help="number of generator seeds to average over")
    r.add_argument("--out", required=True, help="output directory")
    return parser


def _cmd_generate(args) -> int:
    try:
        base = _load_seed(args.seeds, changepoint=False)
        if args.steps < 1:
            raise DataError(f"--steps must be positive, got {args.steps}")
        if args.changepoint:
            t_text, _, seed_token = args.changepoint.partition(":")
            if not seed_token:
                raise DataError("--changepoint needs the form T:SEEDS")
            t_c = int(t_text)
            if not 1 < t_c <= args.steps:
                raise DataError(
                    f"changepoint step must lie in 2..{args.steps}, got {t_c}"
                )
            alt = _load_seed(seed_token, changepoint=True)
            segments = ((base, t_c - 1), (alt, args.steps - t_c + 1))
        else:
            segments = ((base, args.steps),)
        config = GeneratorConfig(segments=segments, rng_seed=args.rng_seed)
        snapshots = generate(config)
        n, k = config.shape
        write_snapshots(
            args.out, snapshots,
            sources=NodeRegistry.numeric(n), targets=NodeRegistry.numeric(k),
        )
    except (ConfigError, DataError, ValueError) as exc:
        print(f"assocnet generate: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def _run_config(args) -> RunConfig:
    mode, kappa, grid = _parse_mode(args.mode)
    prior_alpha, prior_beta = _parse_prior(args.prior)
    stats = tuple(s for s in args.stats.split(",") if s)
    threads = args.threads if args.threads is not None else _default_threads()
    return RunConfig(
        prior_alpha=prior_alpha, prior_beta=prior_beta,
        mode=mode, kappa=kappa, bank_grid=grid,
        bank_discount=args.bank_discount,
        dense=args.dense, stats=stats, threads=threads,
    )


def _cmd_project(args) -> int:
    try:
        config = _run_config(args)
    except (ConfigError, ValueError) as exc:
        print(f"assocnet project: {exc}", file=sys.stderr)
        return EXIT_USAGE

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    stream = load_snapshots(args.input)
    prior = (config.prior_alpha, config.prior_beta)

    if config.mode == "bank":
        bank = KappaFilterBank(
            candidates=config.bank_grid, prior=prior,
            registry=stream.sources, score_discount=config.bank_discount,
        )
        score_rows: list[tuple] = []
        with FrameRecordWriter(out_dir / "frames.tsv", config) as writer:
            for snap in stream.snapshots:
                result = bank.step(snap, threads=config.threads)
                writer.write_frame(result.frame)
                score_rows.append(
                    (snap.t, result.selected_kappa) + tuple(result.total_scores)
                )
                if config.dense:
                    state = bank.states[bank.selected_index()]
                    write_dense_matrix(
                        dense_matrix_path(out_dir, snap.t),
                        state.posterior_mean_matrix(), stream.sources.ids(),
                    )
        columns: dict[str, np.ndarray] = {
            "t": np.array([r[0] for r in score_rows], dtype=np.int64),
            "selected_kappa": np.array([r[1] for r in score_rows]),
        }
        for c, kappa in enumerate(bank.candidates):
            columns[f"score_{format_number(kappa)}"] = np.array(
                [r[2 + c] for r in score_rows]
            )
        write_columns(out_dir / "scores.tsv", columns)
        return EXIT_OK

    engine = EngineState(prior=prior, registry=stream.sources)
    kappa = config.kappa if config.mode == "mixed" else None
    with FrameRecordWriter(out_dir / "frames.tsv", config) as writer:
        for snap in stream.snapshots:
            frame = engine.step(snap, kappa=kappa, threads=config.threads)
            writer.write_frame(frame)
            if config.dense:
                write_dense_matrix(
                    dense_matrix_path(out_dir, snap.t),
                    engine.posterior_mean_matrix(), stream.sources.ids(),
                )
    return EXIT_OK


def _cmd_inspect(args) -> int:
    pair = args.pair.split(",")
    if len(pair) != 2 or not pair[0] or not pair[1]:
        print("assocnet inspect: --pair needs two comma-separated identifiers",
              file=sys.stderr)
        return EXIT_USAGE
    a, b = pair
    frames_path = Path(args.input) / "frames.tsv"
    table = read_pair_records(frames_path)
    match = table.filter(
        ((pl.col("i") == a) & (pl.col("j") == b))
        | ((pl.col("i") == b) & (pl.col("j") == a))
    ).sort("t")
    out = match.drop("i", "j")
    sys.stdout.write("\t".join(out.columns) + "\n")
    if len(out):
        sys.stdout.write(out.write_csv(separator="\t", include_header=False))
    return EXIT_OK


def _cmd_reproduce(args) -> int:
    try:
        experiments.run_experiment(
            args.experiment, seeds_count=args.seeds_count, out_dir=args.out
        )
    except ConfigError as exc:
        print(f"assocnet reproduce: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    handlers = {
        "generate": _cmd_generate,
        "project": _cmd_project,
        "inspect": _cmd_inspect,
        "reproduce": _cmd_reproduce,
    }
    try:
        return handlers[args.command](args)
    except DataError as exc:
        print(f"assocnet: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"assocnet: {exc}", file=sys.stderr)
        return EXIT_IO


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
