"""Command-line front end.

    fogrlnc encode --input data.bin --k 5 --q 256 --output frames/
    fogrlnc decode --frames frames/ --output data.out
    fogrlnc analytic --k 5 --q 256 --per 0.4 --n-max 40
    fogrlnc simulate --scenario rsu1.scenario --out results/
    fogrlnc validate-scenario --scenario rsu1.scenario
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import shutil
import sys
import tempfile
from collections import defaultdict
from pathlib import Path

from . import wire
from .facility import ConfigError, FacilityConfig, RlncStream
from .gf import FieldSpec
from .rlnc import Decoder, coding_vector_from_seed, delivery_curve, desegment, recovery_probability, unpack_symbols

MANIFEST = "manifest.json"


def _int_range(lo: int, hi: int | None = None):
    def parse(text: str) -> int:
        try:
            v = int(text, 0)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
        if v < lo or (hi is not None and v > hi):
            raise argparse.ArgumentTypeError(f"{v} outside [{lo}, {hi if hi is not None else 'inf'}]")
        return v

    return parse


def _field_order(text: str) -> int:
    v = _int_range(2, 256)(text)
    if v & (v - 1):
        raise argparse.ArgumentTypeError(f"q must be a power of two, got {v}")
    return v


def _probability(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError(f"{v} outside [0, 1]")
    return v


def _publish_dir(tmp: Path, target: Path) -> None:
    if target.exists():
        target.rmdir()
    os.replace(tmp, target)


# ---------------------------------------------------------------------------


def cmd_encode(args) -> int:
    try:
        data = Path(args.input).read_bytes()
    except OSError as exc:
        print(f"error: cannot read {args.input}: {exc}", file=sys.stderr)
        return 1
    target = Path(args.output)
    if target.exists() and (not target.is_dir() or any(target.iterdir())):
        print(f"error: output {target} exists and is not an empty directory", file=sys.stderr)
        return 1
    n = args.n if args.n is not None else args.k
    try:
        cfg = FacilityConfig(K=args.k, N=n, field=FieldSpec.from_order(args.q),
                             station_id=args.station_id, frame_budget=args.frame_budget)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    stream = RlncStream(cfg)
    stream.push(data)
    stream.flush()
    sizes = [g.byte_length for g in stream.ready]
    target.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(dir=target.parent, prefix=f".{target.name}."))
    try:
        messages = defaultdict(list)
        names = []
        tick = 0
        while not stream.idle:
            frame = stream.tick(tick * cfg.cam_interval_ms)
            name = f"frame_{frame.source_message_id:08d}_{stream.last_index:03d}.bin"
            (tmp / name).write_bytes(wire.serialize(frame))
            names.append(name)
            messages[frame.source_message_id].append(frame.coding_seed)
            tick += 1
        manifest = {
            "station_id": cfg.station_id,
            "K": cfg.K,
            "N": cfg.N,
            "L": cfg.L,
            "q": cfg.field.q,
            "frame_budget": cfg.frame_budget,
            "byte_length": len(data),
            "messages": [
                {"message_id": mid, "byte_length": sizes[i], "seeds": seeds}
                for i, (mid, seeds) in enumerate(sorted(messages.items()))
            ],
            "frames": names,
        }
        (tmp / MANIFEST).write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
        _publish_dir(tmp, target)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    print(f"{len(names)} frames for {len(messages)} messages written to {target}")
    return 0


def cmd_decode(args) -> int:
    src = Path(args.frames)
    if not src.is_dir():
        print(f"error: {src} is not a directory", file=sys.stderr)
        return 1
    manifest = {}
    if (src / MANIFEST).exists():
        manifest = json.loads((src / MANIFEST).read_text(encoding="utf-8"))
    K = args.k or manifest.get("K")
    if not K:
        print("error: K unknown; pass --k or keep manifest.json beside the frames", file=sys.stderr)
        return 2
    lengths = {m["message_id"]: m["byte_length"] for m in manifest.get("messages", [])}
    decoders: dict[tuple[int, int], Decoder] = {}
    seen = set()
    bad = 0
    for path in sorted(src.glob("*.bin")):
        try:
            frame = wire.parse(path.read_bytes())
        except wire.WireError as exc:
            print(f"warning: skipping {path.name}: {exc}", file=sys.stderr)
            bad += 1
            continue
        if frame.dedup_key in seen:
            continue
        seen.add(frame.dedup_key)
        field = FieldSpec(frame.field_size_code + 1)
        key = (frame.station_id, frame.source_message_id)
        L = len(frame.coded_payload) * 8 // field.m
        dec = decoders.setdefault(key, Decoder(K, L, field, frame.source_message_id))
        if dec.L != L or dec.field != field:
            print(f"warning: skipping {path.name}: inconsistent with earlier frames", file=sys.stderr)
            bad += 1
            continue
        dec.ingest_row(coding_vector_from_seed(frame.coding_seed, K, field),
                       unpack_symbols(frame.coded_payload, field.m, L))
    chunks, failures = [], []
    for key in sorted(decoders):
        dec = decoders[key]
        packets = dec.recover()
        if packets is None:
            failures.append(f"station {key[0]} message {key[1]}: rank {dec.rank} of {K}")
            continue
        full = K * dec.L * dec.field.m // 8
        chunks.append(desegment(packets, dec.field, lengths.get(key[1], full)))
    for line in failures:
        print(f"unrecoverable: {line}", file=sys.stderr)
    if not chunks and decoders:
        return 1
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=out.parent, prefix=f".{out.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(b"".join(chunks))
        os.replace(tmp, out)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    print(f"recovered {len(chunks)} of {len(decoders)} messages -> {out}")
    return 0


def cmd_analytic(args) -> int:
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(("n", "R", "delivery"))
    for n in range(args.n_max + 1):
        r = recovery_probability(n, args.k, args.q)
        d = delivery_curve(n, args.per, args.k, args.q)
        w.writerow((n, f"{r:.10f}", f"{d:.10f}"))
    return 0


def _load(path: str):
    from .fogsim import bundled_scenario_path, load_scenario

    p = Path(path)
    if not p.exists() and bundled_scenario_path(path).exists():
        p = bundled_scenario_path(path)
    return load_scenario(p)


def cmd_validate(args) -> int:
    from .fogsim import ScenarioError

    try:
        sc = _load(args.scenario)
    except ScenarioError as exc:
        for e in exc.errors:
            print(f"{exc.source}: {e}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"{sc.name}: ok ({len(sc.rsus)} RSUs, {len(sc.vehicles)} vehicles, {sc.n_ticks} ticks)")
    return 0


def cmd_simulate(args) -> int:
    from .fogsim import ReportError, ScenarioError, emit_report, run_monte_carlo, summary_table

    try:
        sc = _load(args.scenario)
    except ScenarioError as exc:
        for e in exc.errors:
            print(f"{exc.source}: {e}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    report = run_monte_carlo(sc, trials=args.trials, rng_seed=args.seed, engine=args.engine)
    try:
        emit_report(report, args.out)
    except ReportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(summary_table(report))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fogrlnc", description="RLNC vehicular offloading toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("encode", help="encode a file into RLNC-CAM frame files")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True, help="directory to create")
    p.add_argument("--k", type=_int_range(1, 255), required=True)
    p.add_argument("--n", type=_int_range(1), default=None, help="coded packets per message (default K)")
    p.add_argument("--q", type=_field_order, default=256)
    p.add_argument("--frame-budget", type=_int_range(wire.FIXED_OVERHEAD + 1, wire.MAX_FRAME), default=wire.MAX_FRAME)
    p.add_argument("--station-id", type=_int_range(0, 2**32 - 1), default=0)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="recover data from a directory of frame files")
    p.add_argument("--frames", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--k", type=_int_range(1, 255), default=None)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("analytic", help="print R(n) and the erasure-channel delivery curve as CSV")
    p.add_argument("--k", type=_int_range(1), required=True)
    p.add_argument("--q", type=_field_order, required=True)
    p.add_argument("--per", type=_probability, default=0.0)
    p.add_argument("--n-max", type=_int_range(0, 100_000), required=True)
    p.set_defaults(func=cmd_analytic)

    p = sub.add_parser("simulate", help="run a Monte Carlo campaign and write report CSVs")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--trials", type=_int_range(1), default=None)
    p.add_argument("--seed", type=_int_range(0), default=None)
    p.add_argument("--engine", choices=("batch", "world"), default="batch")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("validate-scenario", help="check a scenario file")
    p.add_argument("--scenario", required=True)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
