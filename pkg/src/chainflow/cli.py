"""Command-line entry point.

Exit codes: 0 clean, 1 operational failure (bad input, IO), 2 the run or
chain recorded an integrity problem. stdout carries valid JSON for run,
verify, and trace; human diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .chainfile import read_chain, write_chain
from .errors import (
    ChainFileError,
    ChainflowError,
    ChecksumMismatch,
    DecryptFailure,
    RecordDecodeError,
    SchemaViolation,
)
from .identity import SealedValue, unseal
from .ledger import verify_chain
from .netsim import run as run_simulation
from .report import canonical_json_bytes, per_step_csv, report_hash
from .scenario import scenario_from_dict
from .supply_chain import trace

_DEFAULT_OUT = "out"


def _err(message: str) -> None:
    print(message, file=sys.stderr)


def _out_dir(args, scenario_output: str | None) -> Path:
    if args.out:
        return Path(args.out)
    env = os.environ.get("CHAINFLOW_OUT")
    if env:
        return Path(env)
    if scenario_output:
        return Path(scenario_output)
    return Path(_DEFAULT_OUT)


def _load_scenario_dict(path: str) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ChainflowError(f"cannot read scenario: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ChainflowError(
            f"scenario parse error at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from exc
    if not isinstance(data, dict):
        raise ChainflowError("scenario root must be a JSON object")
    return data


def _parse_sweep(spec: str) -> tuple[list[str], int, int]:
    try:
        param, _, span = spec.partition("=")
        low, _, high = span.partition("..")
        return param.split("."), int(low), int(high)
    except ValueError as exc:
        raise ChainflowError(f"bad --sweep spec {spec!r}, expected param=a..b") from exc


def _patch(data: dict, path: list[str], value: int) -> None:
    target = data
    for key in path[:-1]:
        if isinstance(target, list):
            target = target[int(key)]
        else:
            if key not in target:
                raise ChainflowError(f"sweep path {'.'.join(path)!r} not in scenario")
            target = target[key]
    last = path[-1]
    if isinstance(target, list):
        target[int(last)] = value
    else:
        if last not in target:
            raise ChainflowError(f"sweep path {'.'.join(path)!r} not in scenario")
        target[last] = value


def _execute(data: dict, seed_override: int | None, out_dir: Path, tag: str = "") -> dict:
    cfg = scenario_from_dict(data)
    result = run_simulation(cfg, seed_override)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = cfg.name + (f".{tag}" if tag else "")
    report_path = out_dir / f"{stem}.report.json"
    chain_path = out_dir / f"{stem}.chain.cfs"
    keys_path = out_dir / f"{stem}.keys.json"
    report_path.write_bytes(canonical_json_bytes(result.report))
    write_chain(chain_path, result.chain, result.registered, result.vote_base)
    # simulation-grade key export, insecure by design
    keys_path.write_text(
        json.dumps(result.actor_keys, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    _err(f"wrote {report_path}, {chain_path}, {keys_path}")
    return result.report


def cmd_run(args) -> int:
    try:
        data = _load_scenario_dict(args.scenario)
        out_dir = _out_dir(args, data.get("output_dir"))
        if args.sweep:
            path, low, high = _parse_sweep(args.sweep)
            if low > high:
                raise ChainflowError("--sweep range must be ascending")
            rows = []
            worst = 0
            for value in range(low, high + 1):
                patched = json.loads(json.dumps(data))
                _patch(patched, path, value)
                report = _execute(patched, args.seed, out_dir,
                                  tag=f"{'-'.join(path)}-{value}")
                worst = max(worst, report["integrity_violations"])
                rows.append({
                    "param": ".".join(path),
                    "value": value,
                    "integrity_violations": report["integrity_violations"],
                    "attack_cost": report["attack_cost"],
                    "report_sha256": report_hash(report),
                })
            print(json.dumps(rows, sort_keys=True))
            return 2 if worst else 0
        report = _execute(data, args.seed, out_dir)
        sys.stdout.buffer.write(canonical_json_bytes(report))
        return 2 if report["integrity_violations"] else 0
    except (ChainflowError, SchemaViolation) as exc:
        _err(f"error: {exc}")
        return 1


def cmd_verify(args) -> int:
    try:
        loaded = read_chain(args.chain)
    except RecordDecodeError as exc:
        # tampering that breaks decoding is a verification failure, not IO
        _err(f"verification failed at block {exc.record_index}: {exc}")
        print(json.dumps({
            "valid": False,
            "first_failure": {"index": exc.record_index, "cause": "undecodable_record"},
        }, sort_keys=True))
        return 2
    except ChecksumMismatch as exc:
        _err(f"verification failed: {exc}")
        print(json.dumps({"valid": False, "error": str(exc)}, sort_keys=True))
        return 2
    except ChainFileError as exc:
        _err(f"error: {exc}")
        return 1
    report = verify_chain(
        loaded.chain, registry=loaded.registered, vote_base=loaded.vote_base
    )
    print(json.dumps(report.to_jsonable(), sort_keys=True))
    if report.ok:
        _err(f"chain valid: {loaded.chain.height} blocks")
        return 0
    failure = report.first_failure()
    _err(f"verification failed at block {failure.index}: {failure.cause}")
    return 2


def _unsealer_from_key_file(path: str):
    try:
        keys = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ChainflowError(f"cannot read key file: {exc}") from exc
    seal_keys = [
        bytes.fromhex(entry["seal_private_key_hex"])
        for entry in keys.values()
        if "seal_private_key_hex" in entry
    ]

    def unsealer(sealed: SealedValue) -> str | None:
        for key in seal_keys:
            try:
                return unseal(sealed, key).decode("utf-8", errors="replace")
            except (DecryptFailure, ChainflowError):
                continue
        return None

    return unsealer


def cmd_trace(args) -> int:
    try:
        loaded = read_chain(args.chain)
        unsealer = _unsealer_from_key_file(args.key) if args.key else None
    except (RecordDecodeError, ChecksumMismatch) as exc:
        _err(f"refusing to trace an invalid chain: {exc}")
        return 2
    except (ChainFileError, ChainflowError) as exc:
        _err(f"error: {exc}")
        return 1
    report = verify_chain(
        loaded.chain, registry=loaded.registered, vote_base=loaded.vote_base
    )
    if not report.ok:
        failure = report.first_failure()
        _err(f"refusing to trace an invalid chain (block {failure.index}: {failure.cause})")
        return 2
    trail = trace(loaded.chain, args.barcode)
    print(json.dumps(trail.to_jsonable(unsealer), sort_keys=True))
    return 0


def cmd_report(args) -> int:
    try:
        report = json.loads(Path(args.report).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        _err(f"error: {exc}")
        return 1
    if args.csv:
        sys.stdout.write(per_step_csv(report))
        return 0
    summary = {
        "scenario": report.get("scenario"),
        "seed": report.get("seed"),
        "blocks_accepted": report.get("blocks_accepted"),
        "blocks_rejected": report.get("blocks_rejected"),
        "fork_count": report.get("fork_count"),
        "integrity_violations": report.get("integrity_violations"),
        "confidentiality_breaches": report.get("confidentiality_breaches"),
        "attack_cost": report.get("attack_cost"),
        "report_sha256": report_hash(report),
    }
    print(json.dumps(summary, sort_keys=True, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chainflow",
        description="Deterministic blockchain supply-chain simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario")
    p_run.add_argument("scenario")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--out", default=None)
    p_run.add_argument("--sweep", default=None, metavar="param=a..b")
    p_run.set_defaults(func=cmd_run)

    p_verify = sub.add_parser("verify", help="verify a persisted chain")
    p_verify.add_argument("chain")
    p_verify.set_defaults(func=cmd_verify)

    p_trace = sub.add_parser("trace", help="trace a barcode's provenance")
    p_trace.add_argument("chain")
    p_trace.add_argument("barcode")
    p_trace.add_argument("--key", default=None)
    p_trace.set_defaults(func=cmd_trace)

    p_report = sub.add_parser("report", help="summarize a report file")
    p_report.add_argument("report")
    p_report.add_argument("--csv", action="store_true")
    p_report.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
