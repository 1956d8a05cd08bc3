"""Command line entry point: serve the HTTP API, replay a scripted scenario
against recorded fixtures, or record fresh fixtures from a live endpoint."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from .errors import BlendError
from .gateway import EndpointConfig
from .service.config import ServiceConfig, build_service

log = logging.getLogger("uiblend")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="uiblend",
        description="Blend example screen images into work-in-progress UI component code.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--config", help="JSON config file")
    serve.add_argument("--host")
    serve.add_argument("--port", type=int)
    serve.add_argument("--store-root")
    serve.add_argument("--provider", choices=["live", "replay", "record"])
    serve.add_argument("--fixtures", help="fixture file for replay/record providers")
    serve.add_argument("--manifest", help="asset manifest JSON (icons, stock photos)")
    serve.add_argument("--workers", type=int)

    replay = sub.add_parser(
        "replay-scenario", help="run a scripted scenario against recorded fixtures"
    )
    replay.add_argument("script", help="scenario script JSON")
    replay.add_argument("--fixtures", help="override the script's fixture file")
    replay.add_argument("--store-root", help="persist the session store here")
    replay.add_argument(
        "--report-dir", help="write nodes.csv and lineage.png to this directory"
    )
    replay.add_argument("--snapshot-out", help="write the canonical final snapshot here")

    record = sub.add_parser(
        "record-fixtures", help="run a scenario against a live endpoint, recording fixtures"
    )
    record.add_argument("script", help="scenario script JSON")
    record.add_argument("--fixtures", help="override where fixtures are written")
    record.add_argument(
        "--endpoint-url", default="https://api.openai.com/v1/chat/completions"
    )
    record.add_argument("--model", default="gpt-4o")
    record.add_argument("--api-key-env", default="UIBLEND_API_KEY")
    return parser


def _cmd_serve(args: argparse.Namespace) -> int:
    config = ServiceConfig.load(args.config)
    overrides = {
        "host": args.host,
        "port": args.port,
        "store_root": args.store_root,
        "provider": args.provider,
        "fixture_path": args.fixtures,
        "manifest_path": args.manifest,
        "workers": args.workers,
    }
    config = dataclasses.replace(
        config, **{k: v for k, v in overrides.items() if v is not None}
    )
    service = build_service(config)
    from .service.api import create_app

    import uvicorn

    app = create_app(service)
    log.info("serving on http://%s:%d (provider=%s)", config.host, config.port, config.provider)
    uvicorn.run(app, host=config.host, port=config.port, log_level="warning")
    return 0


def _cmd_replay(args: argparse.Namespace) -> int:
    from .service.scenario import describe_result, run_scenario

    result = run_scenario(
        args.script,
        provider="replay",
        fixture_path=args.fixtures,
        store_root=args.store_root,
        report_dir=args.report_dir,
    )
    print(describe_result(result))
    if args.snapshot_out:
        Path(args.snapshot_out).write_text(result.canonical_snapshot(), encoding="utf-8")
        print(f"snapshot written to {args.snapshot_out}")
    if args.report_dir:
        print(f"report written to {args.report_dir}")
    return 0


def _cmd_record(args: argparse.Namespace) -> int:
    from .service.scenario import describe_result, run_scenario

    endpoint = EndpointConfig(
        url=args.endpoint_url, model=args.model, api_key_env=args.api_key_env
    )
    result = run_scenario(
        args.script, provider="record", fixture_path=args.fixtures, endpoint=endpoint
    )
    print(describe_result(result))
    return 0


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "serve":
            return _cmd_serve(args)
        if args.command == "replay-scenario":
            return _cmd_replay(args)
        return _cmd_record(args)
    except BlendError as exc:
        print(f"error [{exc.code}]: {exc.message}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
