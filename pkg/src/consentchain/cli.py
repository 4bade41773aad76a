"""Command-line entry points: serve, etl, bench, media-poll."""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import bench as benchmod
from .canonical import CanonicalError
from .etl import EtlError, build_stats, export_stats
from .gas import load_profile
from .ledger import Chain
from .service import MASTER_SECRET_ENV, load_config_file, poll_media_gate


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    secret = os.environ.get(MASTER_SECRET_ENV)
    if not secret:
        print(f"error: {MASTER_SECRET_ENV} is not set", file=sys.stderr)
        return 2
    config = load_config_file(
        args.config,
        chain_path=Path(args.chain),
        vault_dir=Path(args.vault),
        schedule=load_profile(args.gas_profile),
        master_secret=secret,
    )
    uvicorn.run(create_app(config), host=args.host, port=args.port, log_level="info")
    return 0


def _cmd_etl(args) -> int:
    from .report import render_stats_figures

    # corruption surfaces either while decoding the file or as a refusal
    # from the aggregator; both must end as a message, not a traceback
    try:
        chain = Chain(Path(args.chain))
        stats = build_stats(chain, (args.date_from, args.date_to))
    except (EtlError, CanonicalError, ValueError) as exc:
        print(f"error: cannot aggregate {args.chain}: {exc}", file=sys.stderr)
        return 1
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_bytes(export_stats(stats, args.format))
    figures = render_stats_figures(stats, out)
    print(f"wrote {out}")
    for fig in figures:
        print(f"wrote {fig}")
    return 0


def _cmd_bench(args) -> int:
    from .report import render_gas_figure, render_scalability_figure

    schedule = load_profile(args.profile)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    if args.mode == "gas":
        rows = benchmod.run_gas_bench(schedule=schedule)
        benchmod.write_gas_csv(rows, out)
        figure = render_gas_figure(rows, out)
        for r in rows:
            print(f"{r.op}\t{r.gas}\t{r.wall_ms:.3f}ms")
    elif args.mode == "scale":
        rows = benchmod.run_scalability(schedule=schedule)
        benchmod.write_scale_csv(rows, out)
        figure = render_scalability_figure(rows, out)
        for r in rows:
            print(f"n={r.n}\ttotal_gas={r.total_gas}\t{r.wall_ms:.1f}ms")
    else:
        result = benchmod.run_minimization(schedule=schedule)
        benchmod.write_minimize_csv(result, out)
        figure = None
        print(f"full={result.full_gas}\tminimal={result.minimal_gas}\tsaving={result.saving}")
    print(f"wrote {out}")
    if figure is not None:
        print(f"wrote {figure}")
    return 0


def _cmd_media_poll(args) -> int:
    poll_media_gate(
        args.url, args.study_id, args.agent_key, interval=args.interval, count=args.count
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="consentchain")
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the consent service")
    serve.add_argument("--config", required=True)
    serve.add_argument("--chain", required=True)
    serve.add_argument("--vault", required=True)
    serve.add_argument("--gas-profile", default="newborntime-v1")
    serve.add_argument("--port", type=int, default=8000)
    serve.add_argument("--host", default="127.0.0.1")
    serve.set_defaults(fn=_cmd_serve)

    etl = sub.add_parser("etl", help="aggregate ledger events into statistics")
    etl.add_argument("--chain", required=True)
    etl.add_argument("--from", dest="date_from", required=True, metavar="DATE")
    etl.add_argument("--to", dest="date_to", required=True, metavar="DATE")
    etl.add_argument("--format", choices=["csv", "json"], default="csv")
    etl.add_argument("--out", required=True)
    etl.set_defaults(fn=_cmd_etl)

    bench = sub.add_parser("bench", help="run benchmark harnesses")
    bench.add_argument("mode", choices=["gas", "scale", "minimize"])
    bench.add_argument("--profile", default="newborntime-v1")
    bench.add_argument("--out", required=True)
    bench.set_defaults(fn=_cmd_bench)

    poll = sub.add_parser("media-poll", help="poll the media upload gate")
    poll.add_argument("--url", required=True)
    poll.add_argument("--study-id", required=True)
    poll.add_argument("--agent-key", required=True)
    poll.add_argument("--interval", type=float, default=5.0)
    poll.add_argument("--count", type=int, default=None)
    poll.set_defaults(fn=_cmd_media_poll)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
