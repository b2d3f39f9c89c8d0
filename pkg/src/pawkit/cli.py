"""Command-line client for the HTTP service.

Every subcommand except `serve` is a thin wrapper over one endpoint: it
builds the JSON request, posts it, and renders the response for a
terminal.  The server defaults to PAWKIT_SERVER or http://127.0.0.1:8765;
relative output paths are resolved under PAWKIT_OUT_ROOT when that is
set.  Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import httpx

DEFAULT_SERVER = "http://127.0.0.1:8765"


class CliError(Exception):
    pass


def _resolve_out(path: str) -> str:
    root = os.environ.get("PAWKIT_OUT_ROOT")
    if root and not Path(path).is_absolute():
        return str(Path(root) / path)
    return path


def _post(server: str, endpoint: str, payload: dict) -> dict:
    try:
        with httpx.Client(base_url=server, timeout=None) as client:
            response = client.post(endpoint, json=payload)
    except httpx.HTTPError as exc:
        raise CliError(f"cannot reach {server}: {exc}") from exc
    if response.status_code >= 400:
        try:
            detail = response.json().get("detail", response.text)
        except ValueError:
            detail = response.text
        raise CliError(f"{endpoint} failed ({response.status_code}): {detail}")
    return response.json()


def _parse_hidden(text: str) -> list[int]:
    try:
        widths = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise CliError(f"bad layer list {text!r}, expected e.g. '16,128'")
    if not widths:
        raise CliError("hidden layer list is empty")
    return widths


def _parse_hidden_options(text: str) -> list[list[int]]:
    return [_parse_hidden(group) for group in text.split(";") if group.strip()]


def _parse_floats(text: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise CliError(f"bad float list {text!r}")


# ---------------------------------------------------------------------------
# subcommand handlers

def _cmd_gen_force(args) -> int:
    body = _post(args.server, "/datasets/force",
                 {"out_dir": _resolve_out(args.out), "n": args.n, "seed": args.seed})
    print(f"wrote force dataset: {body['out_dir']} ({body['count']} samples)")
    return 0


def _cmd_gen_audio(args) -> int:
    body = _post(args.server, "/datasets/terrain",
                 {"out_dir": _resolve_out(args.out),
                  "clips_per_class": args.clips_per_class, "seed": args.seed})
    print(f"wrote terrain dataset: {body['out_dir']} ({body['count']} clips)")
    return 0


def _cmd_train_force(args) -> int:
    body = _post(args.server, "/train/force", {
        "dataset_dir": args.data, "out_model": _resolve_out(args.out),
        "hidden": _parse_hidden(args.hidden), "epochs": args.epochs,
        "batch_size": args.batch_size, "learning_rate": args.lr,
        "dropout": args.dropout, "l2": args.l2, "seed": args.seed,
    })
    print(f"model: {body['model_path']}")
    print(f"parameters: {body['param_count']:,}")
    print(f"best epoch: {body['best_epoch']}  val MAE: {body['best_val_mae']:.4f}")
    if body.get("test_per_axis_mae"):
        mae = body["test_per_axis_mae"]
        print(f"test normalized MAE: fx={mae[0]:.4f} fy={mae[1]:.4f} fz={mae[2]:.4f}")
    return 0


def _cmd_train_terrain(args) -> int:
    body = _post(args.server, "/train/terrain", {
        "dataset_dir": args.data, "out_model": _resolve_out(args.out),
        "hidden": _parse_hidden(args.hidden), "epochs": args.epochs,
        "batch_size": args.batch_size, "learning_rate": args.lr,
        "k": args.k, "seed": args.seed,
    })
    folds = " ".join(f"{a:.3f}" for a in body["fold_accuracies"])
    print(f"model: {body['model_path']}")
    print(f"parameters: {body['param_count']:,}")
    print(f"cv accuracy: {body['cv_mean']:.3f} +/- {body['cv_std']:.3f}  folds: {folds}")
    return 0


def _cmd_grid_force(args) -> int:
    body = _post(args.server, "/grid/force", {
        "dataset_dir": args.data, "out_dir": _resolve_out(args.out),
        "hidden_options": _parse_hidden_options(args.hidden_options),
        "learning_rates": _parse_floats(args.lrs),
        "dropouts": _parse_floats(args.dropouts),
        "epochs": args.epochs, "batch_size": args.batch_size, "seed": args.seed,
    })
    print(body["table"], end="")
    print(f"best model: {body['best_model_path']}")
    return 0


def _cmd_eval_force(args) -> int:
    body = _post(args.server, "/eval/force", {
        "model": args.model, "dataset_dir": args.data,
        "out_dir": _resolve_out(args.out) if args.out else None,
    })
    mae = body["per_axis_mae"]
    print(f"samples: {body['count']}")
    print(f"normalized MAE: fx={mae[0]:.4f} fy={mae[1]:.4f} fz={mae[2]:.4f}")
    print(f"magnitude error: {body['magnitude_mae_N']:.3f} N "
          f"+/- {body['magnitude_std_N']:.3f} N")
    if body.get("metrics_csv"):
        print(f"wrote {body['metrics_csv']} and {body['histogram_csv']}")
    return 0


def _cmd_eval_terrain(args) -> int:
    body = _post(args.server, "/eval/terrain", {
        "model": args.model, "dataset_dir": args.data,
        "out_dir": _resolve_out(args.out) if args.out else None,
    })
    names = body["class_names"]
    print(f"samples: {body['count']}  accuracy: {body['accuracy']:.3f}")
    width = max(len(n) for n in names)
    header = " ".join(f"{n[:6]:>6}" for n in names)
    print(f"{'':<{width}}  {header}")
    for name, row in zip(names, body["confusion"]):
        cells = " ".join(f"{c:>6}" for c in row)
        print(f"{name:<{width}}  {cells}")
    if body.get("confusion_csv"):
        print(f"wrote {body['confusion_csv']}")
    return 0


def _cmd_infer(args) -> int:
    if args.image:
        body = _post(args.server, "/infer/force",
                     {"model": args.model, "image": args.image})
        fx, fy, fz = body["newtons"]
        nx, ny, nz = body["normalized"]
        print(f"force: Fx={fx:.2f} N  Fy={fy:.2f} N  Fz={fz:.2f} N")
        print(f"normalized: ({nx:.4f}, {ny:.4f}, {nz:.4f})")
    else:
        body = _post(args.server, "/infer/terrain",
                     {"model": args.model, "wav": args.wav})
        for name, p in body["probabilities"].items():
            print(f"{name:<10} {p:.4f}")
        print(f"predicted: {body['label']}")
    return 0


def _cmd_audit(args) -> int:
    body = _post(args.server, "/audit", {
        "model": args.model, "ram_ceiling": args.ram,
        "bench_passes": args.bench_passes,
    })
    print(f"parameters: {body['param_count']:,}")
    print(f"weights: {body['weight_bytes']:,} B  activations: "
          f"{body['activation_bytes']:,} B  input: {body['input_bytes']:,} B")
    print(f"peak RAM: {body['peak_ram_bytes']:,} B of {body['ram_ceiling']:,} B "
          f"-> fits: {'yes' if body['fits_ram'] else 'no'}")
    if body.get("latency"):
        lat = body["latency"]
        print(f"latency over {lat['n_passes']} passes: mean {lat['mean_us']:.1f} us, "
              f"p50 {lat['p50_us']:.1f} us, p95 {lat['p95_us']:.1f} us")
    return 0


def _cmd_bench(args) -> int:
    body = _post(args.server, "/bench", {
        "model": args.model, "n_passes": args.passes,
        "out_csv": _resolve_out(args.out_csv) if args.out_csv else None,
    })
    lat = body["latency"]
    print(f"passes: {lat['n_passes']}  flops/pass: {lat['flops']:,}")
    print(f"mean {lat['mean_us']:.1f} us  p50 {lat['p50_us']:.1f} us  "
          f"p95 {lat['p95_us']:.1f} us")
    if body.get("csv_path"):
        print(f"wrote {body['csv_path']}")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import app

    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pawkit",
        description="Client for the paw sensing service: synthetic data, "
                    "training, evaluation, inference and edge budgeting.",
    )
    parser.add_argument("--server",
                        default=os.environ.get("PAWKIT_SERVER", DEFAULT_SERVER),
                        help="service base URL (default %(default)s)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-force", help="generate a synthetic force dataset")
    p.add_argument("--n", type=int, default=4000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_gen_force)

    p = sub.add_parser("gen-audio", help="generate a synthetic terrain dataset")
    p.add_argument("--clips-per-class", type=int, default=47)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_gen_audio)

    p = sub.add_parser("train-force", help="train the force regressor")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--hidden", default="16,128")
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--dropout", type=float, default=0.0)
    p.add_argument("--l2", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(handler=_cmd_train_force)

    p = sub.add_parser("train-terrain", help="train the terrain classifier")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--hidden", default="16,16")
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(handler=_cmd_train_terrain)

    p = sub.add_parser("grid-force", help="hyperparameter grid search")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--hidden-options", default="16,128;8,256;8,64,64;16,32,32",
                   help="semicolon-separated layer lists")
    p.add_argument("--lrs", default="1e-3")
    p.add_argument("--dropouts", default="0.0")
    p.add_argument("--epochs", type=int, default=60)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(handler=_cmd_grid_force)

    p = sub.add_parser("eval-force", help="evaluate a force model on a dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", default=None, help="directory for CSV reports")
    p.set_defaults(handler=_cmd_eval_force)

    p = sub.add_parser("eval-terrain", help="evaluate a terrain model on a dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", default=None, help="directory for CSV reports")
    p.set_defaults(handler=_cmd_eval_terrain)

    p = sub.add_parser("infer", help="run one inference")
    p.add_argument("--model", required=True)
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--image", help="PGM frame for a force model")
    source.add_argument("--wav", help="WAV clip for a terrain model")
    p.set_defaults(handler=_cmd_infer)

    p = sub.add_parser("audit", help="check a model against the RAM budget")
    p.add_argument("--model", required=True)
    p.add_argument("--ram", type=int, default=183_000)
    p.add_argument("--bench-passes", type=int, default=0)
    p.set_defaults(handler=_cmd_audit)

    p = sub.add_parser("bench", help="latency benchmark")
    p.add_argument("--model", required=True)
    p.add_argument("--passes", type=int, default=10_000)
    p.add_argument("--out-csv", default=None)
    p.set_defaults(handler=_cmd_bench)

    p = sub.add_parser("serve", help="run the HTTP service in this process")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.set_defaults(handler=_cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
