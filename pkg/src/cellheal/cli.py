"""Command-line client for the healing service.

Every subcommand builds a request from the config file plus flag overrides
and sends it to the service: an in-process instance by default, or a remote
one via --server. With a remote server, output files land server-side and
the response lists their paths. Exit status 0 on success; on failure one
machine-parsable line `category: message` goes to stderr (exit 2 for config
errors, 1 otherwise).
"""

import argparse
import json
import sys

import httpx

from . import __version__
from .config import ExperimentConfig, dumps_config, load_config
from .errors import CellhealError, ConfigError


def make_client(server=None):
    if server:
        return httpx.Client(base_url=server, timeout=None)
    from fastapi.testclient import TestClient

    from .service.app import app

    return TestClient(app)


def _load_config_dict(args):
    if getattr(args, "config", None):
        cfg = load_config(args.config)
    else:
        cfg = ExperimentConfig()
    return cfg.model_dump()


def _request(args, extra=None):
    body = {"config": _load_config_dict(args)}
    if getattr(args, "seed", None) is not None:
        body["seed"] = args.seed
    if getattr(args, "out", None):
        body["out"] = args.out
    for key, value in (extra or {}).items():
        if value is not None:
            body[key] = value
    return body


def _post(client, path, body):
    response = client.post(path, json=body)
    if response.status_code >= 400:
        try:
            payload = response.json()
            category = payload.get("category", "server-error")
            message = payload.get("message") or json.dumps(payload)
        except Exception:
            category, message = "server-error", response.text
        raise CliFailure(category, message)
    return response.json()


class CliFailure(Exception):
    def __init__(self, category, message):
        super().__init__(message)
        self.category = category


def cmd_simulate(client, args):
    body = _request(args, {"duration": args.duration, "warmup": args.warmup,
                           "alpha": args.alpha})
    data = _post(client, "/simulate", body)
    print(f"episode complete: {len(data['rows'])} eNBs, "
          f"mean BCR {data['mean_bcr']}, mean FTT {data['mean_ftt']}")
    for name, path in data["files"].items():
        print(f"wrote {name}: {path}")


def cmd_sweep(client, args):
    body = _request(args, {"alpha_min": args.alpha_min, "alpha_max": args.alpha_max,
                           "alpha_step": args.alpha_step})
    data = _post(client, "/sweep", body)
    print(f"sweep complete: {len(data['rows'])} grid points, "
          f"reference alpha {data['reference_alpha']}")
    for name, path in data["files"].items():
        print(f"wrote {name}: {path}")


def cmd_matrix(client, args):
    body = _request(args, {"duration": args.duration})
    data = _post(client, "/matrix", body)
    print(f"interference matrix over {len(data['ids'])} eNBs estimated")
    for name, path in data["files"].items():
        print(f"wrote {name}: {path}")


def cmd_fit(client, args):
    import csv

    xs, ys = [], []
    with open(args.input, newline="", encoding="utf-8") as fh:
        for row in csv.reader(fh):
            if not row:
                continue
            try:
                x, y = float(row[0]), float(row[1])
            except ValueError:
                continue
            xs.append(x)
            ys.append(y)
    body = {"x": xs, "y": ys}
    if args.out:
        body["out"] = args.out
    data = _post(client, "/fit", body)
    print(f"fitted: beta0={data['beta0']:.9g} beta1={data['beta1']:.9g} "
          f"y_lo={data['y_lo']:.9g} y_hi={data['y_hi']:.9g} "
          f"residual_rms={data['residual_rms']:.9g} n={data['n_samples']}")
    for name, path in data["files"].items():
        print(f"wrote {name}: {path}")


def cmd_heal(client, args):
    body = _request(args)
    data = _post(client, "/heal", body)
    print(f"healing {'converged' if data['converged'] else 'stopped'} after "
          f"{data['iterations']} iterations: faulty eNB {data['faulty_enb']}, "
          f"pivot alpha {data['converged_alpha']:.4g}")
    print(f"measured cost: reference {data['measured_reference_cost']:.6g} -> "
          f"optimized {data['measured_optimized_cost']:.6g}")
    for name, path in data["files"].items():
        print(f"wrote {name}: {path}")


def cmd_oracle_heal(client, args):
    body = _request(args)
    data = _post(client, "/oracle-heal", body)
    print(f"oracle healing {'converged' if data['converged'] else 'stopped'} after "
          f"{data['iterations']} iterations: pivot alpha {data['converged_alpha']:.4g} "
          f"(analytic optimum {data['true_alpha']:.4g})")
    for name, path in data["files"].items():
        print(f"wrote {name}: {path}")


def cmd_show_config(client, args):
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    sys.stdout.write(dumps_config(cfg))


def cmd_serve(client, args):
    import uvicorn

    from .service.app import app

    uvicorn.run(app, host=args.host, port=args.port)


def build_parser():
    parser = argparse.ArgumentParser(prog="cellheal", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out=True):
        p.add_argument("--config", help="experiment config TOML")
        p.add_argument("--seed", type=int, help="override [seeds].root")
        p.add_argument("--server", help="service URL (default: run in-process)")
        if out:
            p.add_argument("--out", help="output directory for CSV artefacts")

    p = sub.add_parser("simulate", help="run one seeded episode")
    common(p)
    p.add_argument("--duration", type=int, help="episode length, seconds")
    p.add_argument("--warmup", type=int, help="discarded warmup, seconds")
    p.add_argument("--alpha", type=float, help="apply one alpha to every eNB")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="network-wide alpha sweep")
    common(p)
    p.add_argument("--alpha-min", type=float)
    p.add_argument("--alpha-max", type=float)
    p.add_argument("--alpha-step", type=float)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("matrix", help="estimate the interference coupling matrix")
    common(p)
    p.add_argument("--duration", type=int, help="estimation window, seconds")
    p.set_defaults(func=cmd_matrix)

    p = sub.add_parser("fit", help="fit a KPI curve to a 2-column (x,y) CSV")
    p.add_argument("input", help="input CSV path")
    p.add_argument("--out", help="output directory for model.toml")
    p.add_argument("--server", help="service URL (default: run in-process)")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("heal", help="full healing run against the simulator")
    common(p)
    p.set_defaults(func=cmd_heal)

    p = sub.add_parser("oracle-heal", help="healing run against analytic KPI curves")
    common(p)
    p.set_defaults(func=cmd_oracle_heal)

    p = sub.add_parser("show-config", help="print the effective config as TOML")
    p.add_argument("--config", help="experiment config TOML")
    p.set_defaults(func=cmd_show_config)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    client = None
    try:
        if args.func not in (cmd_show_config, cmd_serve):
            client = make_client(getattr(args, "server", None))
        args.func(client, args)
        return 0
    except CliFailure as err:
        print(f"{err.category}: {err}", file=sys.stderr)
        return 2 if err.category == "config-error" else 1
    except ConfigError as err:
        print(f"{err.category}: {err}", file=sys.stderr)
        return 2
    except CellhealError as err:
        print(f"{err.category}: {err}", file=sys.stderr)
        return 1
    except OSError as err:
        print(f"io-error: {err}", file=sys.stderr)
        return 1
    finally:
        if client is not None:
            client.close()


if __name__ == "__main__":
    sys.exit(main())
