"""Command-line client for the pipeline service.

Every subcommand except ``serve-annotation`` talks HTTP to the service; by
default the app is mounted in-process (no network), and ``--server`` points
the same client at a running instance instead.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import os
import sys

import httpx

DATA_DIR_ENV = "SWB_DATA_DIR"


class ServiceClient:
    def __init__(self, data_dir: str, server: str | None = None):
        self.server = server
        self.data_dir = data_dir
        self._app = None
        if server is None:
            from .service import create_app

            self._app = create_app(data_dir)

    def request(self, method: str, path: str, payload: dict | None = None) -> httpx.Response:
        if self.server is not None:
            with httpx.Client(base_url=self.server, timeout=600.0) as client:
                return client.request(method, path, json=payload)

        async def go() -> httpx.Response:
            transport = httpx.ASGITransport(app=self._app)
            async with httpx.AsyncClient(transport=transport, base_url="http://service") as client:
                return await client.request(method, path, json=payload)

        return asyncio.run(go())


class CommandError(Exception):
    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


def call(client: ServiceClient, method: str, path: str, payload: dict | None = None) -> dict:
    response = client.request(method, path, payload)
    if response.status_code >= 400:
        try:
            body = response.json()
            raise CommandError(body.get("error", "error"), body.get("message", response.text))
        except (json.JSONDecodeError, ValueError):
            raise CommandError("http_error", f"{response.status_code}: {response.text}") from None
    if response.headers.get("content-type", "").startswith("application/json"):
        return response.json()
    return {"text": response.text}


def _add_common(parser: argparse.ArgumentParser) -> None:
    """Shared flags, accepted both before and after the subcommand."""
    parser.add_argument("--data-dir", default=argparse.SUPPRESS,
                        help=f"data directory (or ${DATA_DIR_ENV})")
    parser.add_argument("--server", default=argparse.SUPPRESS,
                        help="base URL of a running service (default: in-process)")
    parser.add_argument("--corpus", default=argparse.SUPPRESS)
    parser.add_argument("--seed", type=int, default=argparse.SUPPRESS)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="swbindex", description=__doc__)
    _add_common(parser)
    parser.set_defaults(data_dir=None, server=None, corpus="default", seed=0)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_parser(name, **kw):
        p = sub.add_parser(name, **kw)
        _add_common(p)
        return p

    p = add_parser("ingest", help="load a posts file into the corpus")
    p.add_argument("source")
    p.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")
    p.add_argument("--lang", required=True)
    p.add_argument("--country", required=True)

    p = add_parser("select", help="build per-dimension training candidate pools")
    p.add_argument("--dimension", default="all", help="one dimension code or 'all'")
    p.add_argument("--keywords", default=None, help="keyword file (default: bundled list)")
    p.add_argument("--limit", type=int, default=500)

    p = add_parser("serve-annotation", help="run the annotation HTTP service")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--ui-dir", default=None)

    p = add_parser("estimate", help="estimate category distributions per day and dimension")
    p.add_argument("--training-dir", default=None, help="directory of per-dimension training JSONL exports")
    p.add_argument("--dimensions", default=None, help="comma-separated subset")
    p.add_argument("--lambda", dest="ridge", type=float, default=None)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--max-features", type=int, default=2000)
    p.add_argument("--bootstrap", type=int, default=0)
    p.add_argument("--script-mode", choices=("spaced", "unspaced"), default="unspaced")
    p.add_argument("--workers", type=int, default=1)

    add_parser("index", help="assemble the daily index CSV from estimates")

    p = add_parser("aggregate", help="periodic mean/SD tables")
    p.add_argument("--period", choices=("week", "month", "year"), default="year")
    p.add_argument("--components", default=None,
                   help="components CSV, or 'japan'/'italy' for the bundled yearly fixtures")

    p = add_parser("trend", help="local-linear trend CSV")
    p.add_argument("--column", default="swb")
    p.add_argument("--bandwidth", type=float, default=60.0)

    p = add_parser("corr", help="correlations between yearly series")
    p.add_argument("--table", default=None, help="wide yearly CSV (default: bundled reference indices)")
    p.add_argument("--pairs", default=None, help="comma-separated colA:colB pairs")

    p = add_parser("sem", help="fit the structural model on an economic panel")
    p.add_argument("--panel", required=True, help="panel CSV (sidecar <panel>.json declares frequencies)")
    p.add_argument("--sidecar", default=None)
    p.add_argument("--model-file", default=None)
    p.add_argument("--start", default=None, help="ISO month, e.g. 2015-01")
    p.add_argument("--end", default=None)

    add_parser("report", help="assemble previously produced artifacts")
    return parser


def run_command(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    data_dir = args.data_dir or os.environ.get(DATA_DIR_ENV)
    if data_dir is None:
        print("error: config: --data-dir or $SWB_DATA_DIR required", file=sys.stderr)
        return 2

    if args.command == "serve-annotation":
        import uvicorn

        from .service import create_app

        uvicorn.run(create_app(data_dir, args.ui_dir), host=args.host, port=args.port)
        return 0

    client = ServiceClient(data_dir, args.server)
    try:
        return _dispatch(client, args)
    except CommandError as exc:
        print(f"error: {exc.code}: {exc}", file=sys.stderr)
        return 1


def _dispatch(client: ServiceClient, args: argparse.Namespace) -> int:
    from .corpus import DIMENSIONS

    if args.command == "ingest":
        body = call(client, "POST", "/api/corpus/ingest", {
            "source_path": args.source, "format": args.format,
            "lang": args.lang, "country": args.country, "corpus": args.corpus,
        })
        print(f"accepted={body['accepted']} rejected={body['rejected']} reasons={body['rejects_by_reason']}")
        return 0

    if args.command == "select":
        dims = list(DIMENSIONS) if args.dimension == "all" else [args.dimension]
        for dim in dims:
            body = call(client, "POST", "/api/candidates/select", {
                "corpus": args.corpus, "dimension": dim,
                "keywords_path": args.keywords, "limit": args.limit, "seed": args.seed,
            })
            print(f"{dim}: {body['count']} candidates -> {body['path']}")
        return 0

    if args.command == "estimate":
        body = call(client, "POST", "/api/estimate", {
            "corpus": args.corpus,
            "dimensions": args.dimensions.split(",") if args.dimensions else None,
            "training_dir": args.training_dir,
            "ridge": args.ridge, "alpha": args.alpha,
            "max_features": args.max_features, "bootstrap": args.bootstrap,
            "seed": args.seed, "script_mode": args.script_mode, "workers": args.workers,
        })
        print(f"wrote {body['reports']} estimate reports")
        return 0

    if args.command == "index":
        body = call(client, "POST", "/api/index/build", {"corpus": args.corpus, "seed": args.seed})
        print(f"{body['rows']} rows -> {body['path']}")
        return 0

    if args.command == "aggregate":
        components = args.components
        if components in ("japan", "italy"):
            from .pipeline import bundled_components_path

            components = str(bundled_components_path(components))
        body = call(client, "POST", "/api/index/aggregate", {
            "corpus": args.corpus, "period": args.period,
            "components_csv": components, "seed": args.seed,
        })
        print(body["table"], end="")
        return 0

    if args.command == "trend":
        body = call(client, "POST", "/api/index/trend", {
            "corpus": args.corpus, "column": args.column,
            "bandwidth": args.bandwidth, "seed": args.seed,
        })
        print(f"{body['points']} points -> {body['path']}")
        return 0

    if args.command == "corr":
        body = call(client, "POST", "/api/correlations", {
            "table_path": args.table,
            "pairs": args.pairs.split(",") if args.pairs else None,
        })
        print(body["table"], end="")
        return 0

    if args.command == "sem":
        body = call(client, "POST", "/api/sem/fit", {
            "panel_csv": args.panel, "sidecar": args.sidecar,
            "model_file": args.model_file, "start": args.start, "end": args.end,
        })
        print(body["report"], end="")
        return 0

    if args.command == "report":
        body = call(client, "POST", "/api/report", {"corpus": args.corpus, "seed": args.seed})
        print(f"report -> {body['path']}")
        return 0

    raise CommandError("usage", f"unknown command {args.command!r}")


def main() -> None:
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()
