"""Command-line entry point.

Every data file is written with a sidecar ``<file>.manifest.json`` holding the
normalized parameters; ``qbfactory rerun <manifest>`` regenerates the same
bytes from it.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from qbfactory import __version__
from qbfactory.factories.ledger import FactoryConfig
from qbfactory.factories.runner import KINDS, run_factory
from qbfactory.noise import ReadoutConfusion, ceiling_report
from qbfactory.sweeps import (
    DEFAULT_SHOTS,
    fig1a_table,
    fig3a_table,
    fig3b_tables,
    parse_grid,
    run_sweep,
    sweep_table,
)

SCHEMA_VERSION = 1
EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_CAP = 4

TARGETS = ("fig1a", "fig2b", "fig3a", "fig3b")
FORMATS = ("csv", "json")
DEFAULT_FIG_N = 20_000


class UsageError(Exception):
    pass


# -- output --------------------------------------------------------------

def _cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return "" if value is None else str(value)


def _json_value(value):
    if isinstance(value, (bool, np.bool_)):
        return int(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def render_table(columns: list[str], rows: list[list], fmt: str) -> str:
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(v) for v in row])
        return buf.getvalue()
    lines = [json.dumps({c: _json_value(v) for c, v in zip(columns, row)}, ensure_ascii=False)
             for row in rows]
    return "".join(line + "\n" for line in lines)


def _write(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def write_manifest(path: Path, command: str, params: dict, outputs: list[Path]) -> Path:
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "tool": "qbfactory",
        "version": __version__,
        "command": command,
        "params": params,
        "seed": params.get("seed"),
        "outputs": [p.name for p in outputs],
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    _write(path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def manifest_path(data_path: Path) -> Path:
    return data_path.with_name(data_path.name + ".manifest.json")


# -- commands --------------------------------------------------------------

def _noise(params) -> ReadoutConfusion | None:
    values = params.get("noise")
    return None if values is None else ReadoutConfusion(*values)


def _config(params) -> FactoryConfig:
    return FactoryConfig(params["max_walk_steps"], params["max_rejections"])


def cmd_sweep(params: dict, out: Path | None) -> int:
    result = run_sweep(params["p_grid"], params["shots"], params["seed"], _noise(params), params.get("jobs", 1))
    text = render_table(*sweep_table(result), params["format"])
    if out is None:
        sys.stdout.write(text)
        return EXIT_OK
    _write(out, text)
    write_manifest(manifest_path(out), "sweep", params, [out])
    print(f"wrote {len(result.rows)} rows to {out}", file=sys.stderr)
    return EXIT_OK


COIN_COLUMNS = ["index", "bit", "quoins", "fair_coins", "input_coins"]


def _coin_summary(run) -> dict:
    est = run.estimate() if run.n else None
    summary = {
        "kind": run.kind,
        "outputs": run.n,
        "heads": int(run.bits.sum()),
        "p_hat": est.p_hat if est else None,
        "ci": [est.ci_low, est.ci_high] if est else None,
        "ledger": run.ledger.as_dict(),
        "quoins_per_output": run.cost_stats("quoins"),
        "truncations": [
            {"before_output": e.index, "loop": e.kind, "cap": e.limit, "probability": e.survival,
             "consumed": e.consumed.as_dict()}
            for e in run.truncations
        ],
        "error": None if run.error is None else str(run.error),
    }
    return {k: _json_value(v) if not isinstance(v, (dict, list)) else v for k, v in summary.items()}


def cmd_coin(params: dict, out: Path | None) -> int:
    run = run_factory(params["kind"], params["n"], params["seed"], p=params["p"], q=params["q"],
                      config=_config(params), noise=_noise(params), shared=params["shared"],
                      on_cap=params["on_cap"])
    summary = _coin_summary(run)
    if params["format"] == "csv":
        rows = [[i, int(b), int(q), int(f), int(x)]
                for i, (b, q, f, x) in enumerate(zip(run.bits, run.quoins, run.fair, run.inputs))]
        text = render_table(COIN_COLUMNS, rows, "csv")
    else:
        payload = dict(summary, bits="".join(map(str, run.bits.tolist())))
        text = json.dumps(payload, sort_keys=True) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        _write(out, text)
        write_manifest(manifest_path(out), "coin", params, [out])
    print(json.dumps(summary, sort_keys=True), file=sys.stderr)
    if run.error is not None:
        print(f"truncated: {run.error}", file=sys.stderr)
        return EXIT_CAP
    return EXIT_OK


def cmd_reproduce(params: dict, out: Path | None) -> int:
    target = params["target"]
    fmt = params["format"]
    out_dir = out if out is not None else Path(".")
    ext = "csv" if fmt == "csv" else "jsonl"
    noise = _noise(params)
    jobs = params.get("jobs", 1)
    tables = {}
    if target == "fig1a":
        tables["fig1a"] = fig1a_table(params["p_grid"], params["n"], params["seed"], _config(params), jobs)
    elif target in ("fig2b", "fig3a"):
        result = run_sweep(params["p_grid"], params["shots"], params["seed"], noise, jobs)
        tables[target] = sweep_table(result) if target == "fig2b" else fig3a_table(result)
    else:
        main, costs = fig3b_tables(params["p_grid"], params["n"], params["seed"], _config(params), noise, jobs)
        tables["fig3b"] = main
        tables["fig3b_costs"] = costs
    written = []
    for name, (columns, rows) in tables.items():
        path = out_dir / f"{name}.{ext}"
        _write(path, render_table(columns, rows, fmt))
        written.append(path)
    write_manifest(out_dir / f"{target}.manifest.json", "reproduce", params, written)
    for path in written:
        print(f"wrote {path}", file=sys.stderr)
    return EXIT_OK


def noise_ceiling_payload(c: ReadoutConfusion) -> dict:
    rep = ceiling_report(c)
    return {
        "a0": c.a0, "a1": c.a1, "b0": c.b0, "b1": c.b1,
        "matrix": rep.matrix.tolist(),
        "ideal_distribution": [0.5, 0.0, 0.5, 0.0],
        "read_distribution": rep.read_distribution.tolist(),
        "p01": rep.p01,
        "ceiling": rep.ceiling,
        "reference_p01": rep.reference_p01,
        "reference_ceiling": rep.reference_ceiling,
    }


def cmd_noise_ceiling(params: dict, out: Path | None) -> int:
    payload = noise_ceiling_payload(ReadoutConfusion(*params["noise"]))
    if params["format"] == "json":
        text = json.dumps(payload, sort_keys=True) + "\n"
    else:
        lines = [f"a0={payload['a0']} a1={payload['a1']} b0={payload['b0']} b1={payload['b1']}",
                 "M (row = read, column = true; order 00 01 10 11):"]
        lines += ["  " + "  ".join(f"{x:.6f}" for x in row) for row in payload["matrix"]]
        lines += [
            "P  = " + "  ".join(f"{x:.6f}" for x in payload["ideal_distribution"]),
            "P' = " + "  ".join(f"{x:.6f}" for x in payload["read_distribution"]),
            f"P'(01)  = {payload['p01']!r}",
            f"ceiling = 1 - sqrt(2 P'(01)) = {payload['ceiling']!r}",
            f"reference pair: P'(01) = {payload['reference_p01']} -> ceiling {payload['reference_ceiling']}",
        ]
        text = "\n".join(lines) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        _write(out, text)
        write_manifest(manifest_path(out), "noise-ceiling", params, [out])
    return EXIT_OK


COMMANDS = {
    "sweep": cmd_sweep,
    "coin": cmd_coin,
    "reproduce": cmd_reproduce,
    "noise-ceiling": cmd_noise_ceiling,
}


def cmd_rerun(manifest: Path, out: Path | None) -> int:
    try:
        data = json.loads(manifest.read_text(encoding="utf-8"))
    except OSError as exc:
        raise OSError(f"cannot read {manifest}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"{manifest} is not valid JSON: {exc}") from exc
    if data.get("schema_version") != SCHEMA_VERSION or data.get("command") not in COMMANDS:
        raise UsageError(f"{manifest} is not a qbfactory manifest of schema {SCHEMA_VERSION}")
    command = data["command"]
    if out is None:
        outputs = data.get("outputs") or []
        if command == "reproduce":
            out = manifest.parent
        elif outputs:
            out = manifest.parent / outputs[0]
    return COMMANDS[command](data["params"], out)


# -- argument parsing --------------------------------------------------------

def _grid_arg(args) -> list[float]:
    if getattr(args, "p", None) is not None:
        return [args.p]
    return parse_grid(args.p_grid)


def _noise_arg(text: str | None, default: ReadoutConfusion | None = None):
    if text is None:
        return None if default is None else list(default.as_tuple())
    return list(ReadoutConfusion.parse(text).as_tuple())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qbfactory", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, grid=False, shots=False, n=False, caps=False):
        if grid:
            p.add_argument("--p", type=float, help="single bias value (overrides --p-grid)")
            p.add_argument("--p-grid", default="0:1:21", help="start:end:steps (default 0:1:21)")
        if shots:
            p.add_argument("--shots", type=int, default=DEFAULT_SHOTS)
        if n:
            p.add_argument("--n", type=int, default=DEFAULT_FIG_N)
        if caps:
            p.add_argument("--max-walk-steps", type=int, default=FactoryConfig.max_walk_steps)
            p.add_argument("--max-rejections", type=int, default=FactoryConfig.max_rejections)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--noise", help="a0,a1,b0,b1 readout fidelities, or 'default' for 0.995,0.985,0.995,0.985")
        p.add_argument("--out", type=Path)
        p.add_argument("--format", choices=FORMATS, default="csv")
        p.add_argument("--jobs", type=int, default=1, help="worker processes for grid points")

    common(sub.add_parser("sweep", help="Bell-outcome counts and shot-level coins over a bias grid"),
           grid=True, shots=True)

    coin = sub.add_parser("coin", help="run one protocol")
    coin.add_argument("kind", choices=KINDS)
    coin.add_argument("--q", type=float, help="input bias for the sqrt protocol")
    coin.add_argument("--shared", action="store_true",
                      help="doubling: read walk coins and conditional coins off the same shots")
    coin.add_argument("--on-cap", choices=("stop", "skip"), default="stop")
    common(coin, grid=False, n=True, caps=True)
    coin.add_argument("--p", type=float)

    rep = sub.add_parser("reproduce", help="data series behind a figure")
    rep.add_argument("target", choices=TARGETS)
    common(rep, grid=True, shots=True, n=True, caps=True)

    ceiling = sub.add_parser("noise-ceiling", help="readout-noise ceiling on the doubling coin")
    ceiling.add_argument("--noise", default="default")
    ceiling.add_argument("--out", type=Path)
    ceiling.add_argument("--format", choices=("text", "json"), default="text")

    rerun = sub.add_parser("rerun", help="regenerate outputs from a manifest")
    rerun.add_argument("manifest", type=Path)
    rerun.add_argument("--out", type=Path, help="output file (or directory for reproduce)")
    return parser


def params_from_args(args) -> dict:
    cmd = args.command
    if cmd == "noise-ceiling":
        return {"noise": _noise_arg(args.noise), "format": args.format}
    params = {"seed": args.seed, "format": args.format, "noise": _noise_arg(args.noise)}
    if cmd == "sweep":
        params.update(p_grid=_grid_arg(args), shots=args.shots)
    elif cmd == "coin":
        params.update(kind=args.kind, p=args.p, q=args.q, n=args.n, shared=args.shared,
                      on_cap=args.on_cap, max_walk_steps=args.max_walk_steps,
                      max_rejections=args.max_rejections)
    elif cmd == "reproduce":
        params.update(target=args.target, p_grid=_grid_arg(args), shots=args.shots, n=args.n,
                      max_walk_steps=args.max_walk_steps, max_rejections=args.max_rejections)
    for key in ("shots", "n"):
        if key in params and params[key] < 1:
            raise UsageError(f"--{key} must be at least 1")
    return params


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "rerun":
            return cmd_rerun(args.manifest, args.out)
        params = params_from_args(args)
        jobs = getattr(args, "jobs", 1)
        if jobs > 1:
            params["jobs"] = jobs
        return COMMANDS[args.command](params, args.out)
    except (UsageError, ValueError) as exc:
        print(f"qbfactory: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"qbfactory: error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
