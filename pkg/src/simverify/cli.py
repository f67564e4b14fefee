"""Command-line front end.

`run` and `summarize` drive the simulation harness locally; `serve` starts
the HTTP verification service; the `client` subcommands are a thin HTTP
client for a running server.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .harness import (
    PRESETS,
    ExperimentConfig,
    read_rows,
    run_experiment,
    summarize,
    write_rows,
    write_summary,
)
from .server.config import ServerConfig, load_server_config
from .survey import sample_from_csv


def _cmd_run(args) -> int:
    if bool(args.config) == bool(args.preset):
        print("run: provide exactly one of --config or --preset", file=sys.stderr)
        return 2
    if args.preset:
        config = PRESETS[args.preset]
    else:
        config = ExperimentConfig.from_json(args.config)
    if args.base_seed is not None:
        config = replace(config, base_seed=args.base_seed)
    rows = run_experiment(config, threads=args.threads)
    write_rows(rows, args.out)
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def _cmd_summarize(args) -> int:
    rows = read_rows(args.in_path)
    write_summary(summarize(rows), args.out)
    print(f"wrote summary for {len(set(r.cell_id for r in rows))} cells to {args.out}")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .server.app import create_app

    config = load_server_config(args.config) if args.config else ServerConfig()
    if args.listen:
        config.listen = args.listen
    app = create_app(config)
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")
    return 0


def _client(args):
    import httpx

    return httpx.Client(base_url=args.server, timeout=args.timeout)


def _print_response(resp) -> int:
    try:
        payload = resp.json()
    except ValueError:
        payload = resp.text
    print(json.dumps(payload, indent=2) if isinstance(payload, dict) else payload)
    return 0 if resp.is_success else 1


def _cmd_client_register(args) -> int:
    sample = sample_from_csv(args.sample, N=args.population_size)
    body = {
        "records": [
            {
                "id": int(sample.ids[i]),
                "x": float(sample.x[i]),
                "pi": float(sample.pi[i]),
                "w": float(sample.w[i]),
            }
            for i in range(sample.n)
        ],
        "n": sample.n,
        "N": sample.N,
        "total_epsilon": args.total_epsilon,
    }
    with _client(args) as client:
        return _print_response(client.post("/datasets", json=body))


def _cmd_client_verify(args) -> int:
    query = json.loads(Path(args.query).read_text())
    with _client(args) as client:
        return _print_response(
            client.post(f"/datasets/{args.dataset_id}/verify", json=query)
        )


def _cmd_client_budget(args) -> int:
    with _client(args) as client:
        return _print_response(client.get(f"/datasets/{args.dataset_id}/budget"))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="simverify",
        description="Differentially private verification of survey-weighted "
        "synthetic-data estimates: simulation harness, server, and client.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the repeated-sampling experiment grid")
    run.add_argument("--config", help="JSON experiment config")
    run.add_argument("--preset", choices=sorted(PRESETS), help="built-in config")
    run.add_argument("--out", required=True, help="output CSV path")
    run.add_argument("--threads", type=int, default=1)
    run.add_argument("--base-seed", type=int, default=None)
    run.set_defaults(func=_cmd_run)

    summ = sub.add_parser("summarize", help="per-cell summary of a results CSV")
    summ.add_argument("--in", dest="in_path", required=True, help="replicate CSV")
    summ.add_argument("--out", required=True, help="summary CSV path")
    summ.set_defaults(func=_cmd_summarize)

    serve = sub.add_parser("serve", help="start the verification HTTP service")
    serve.add_argument("--config", help="key = value server config file")
    serve.add_argument("--listen", help="host:port override")
    serve.set_defaults(func=_cmd_serve)

    client = sub.add_parser("client", help="talk to a running server")
    client.add_argument("--server", default="http://127.0.0.1:8421")
    client.add_argument("--timeout", type=float, default=120.0)
    csub = client.add_subparsers(dest="client_command", required=True)

    reg = csub.add_parser("register", help="upload a sample CSV (id,x,pi,w)")
    reg.add_argument("--sample", required=True)
    reg.add_argument("--population-size", type=int, required=True)
    reg.add_argument("--total-epsilon", type=float, required=True)
    reg.set_defaults(func=_cmd_client_register)

    ver = csub.add_parser("verify", help="submit an analysis query from a JSON file")
    ver.add_argument("--dataset-id", required=True)
    ver.add_argument("--query", required=True)
    ver.set_defaults(func=_cmd_client_verify)

    bud = csub.add_parser("budget", help="budget status for a dataset")
    bud.add_argument("--dataset-id", required=True)
    bud.set_defaults(func=_cmd_client_budget)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
