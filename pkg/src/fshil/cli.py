"""Command-line front end: one subcommand per analysis, plot-ready output.

Every subcommand writes a schema-versioned JSON summary plus a CSV data
file into --out (default: the working directory), prints a one-line
summary, and exits 0.  Configuration mistakes exit 2 before any analysis
runs; analysis failures surface the library error kind and exit 1.
Outputs are byte-identical for identical configuration and seed: floats
are serialized with repr (JSON) or 17 significant digits (CSV), keys are
sorted, line endings are '\\n', and nothing volatile (timestamps, host
paths) is recorded.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys as _sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .geometry import (
    GradientDegenerateError,
    RegionTag,
    classify,
    lie_derivatives,
    second_lie,
)
from .integrator import FlowError, flow_filippov
from .models import (
    SECTION_RADIUS,
    ShilnikovModelParams,
    SystemSpecError,
    build_model,
    load_system,
    oracle_known_points,
)
from .shilnikov import (
    BranchMismatchError,
    EscapedError,
    ItineraryWord,
    SectionBuildError,
    build_section,
    code_itinerary,
    discover_bands,
    find_periodic,
    first_return,
    locate_cylinder,
    realized_words,
    section_scan,
    verify_shilnikov,
)

SCHEMA_VERSION = 1

# analysis failures the CLI converts to exit code 1
_ANALYSIS_ERRORS = (
    FlowError,
    SectionBuildError,
    EscapedError,
    BranchMismatchError,
    GradientDegenerateError,
)


class ConfigError(Exception):
    """Bad command line or system file; exits 2 without running anything."""


def _fmt(v) -> str:
    return f"{float(v):.17g}"


def _parse_floats(text: str, n: int | None = None, what: str = "value") -> list[float]:
    try:
        vals = [float(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError as e:
        raise ConfigError(f"cannot parse {what} {text!r}: {e}") from e
    if n is not None and len(vals) != n:
        raise ConfigError(f"{what} needs {n} comma-separated numbers, got {text!r}")
    return vals


def _parse_ints(text: str, what: str) -> list[int]:
    try:
        return [int(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError as e:
        raise ConfigError(f"cannot parse {what} {text!r}: {e}") from e


def _resolve_system(args) -> tuple:
    """System from --system FILE or builtin --model with --alpha/--beta."""
    if getattr(args, "system", None):
        try:
            return load_system(args.system)
        except SystemSpecError as e:
            raise ConfigError(str(e)) from e
    if args.model != "shilnikov":
        raise ConfigError(f"unknown builtin model {args.model!r}")
    try:
        params = ShilnikovModelParams(alpha=args.alpha, beta=args.beta)
    except ValueError as e:
        raise ConfigError(str(e)) from e
    echo = {"model": "builtin:shilnikov", "alpha": params.alpha, "beta": params.beta}
    return build_model(params), echo


def _fold_guess(args, echo) -> np.ndarray:
    if getattr(args, "q0", None):
        return np.asarray(_parse_floats(args.q0, 3, "--q0"))
    if echo.get("model") == "builtin:shilnikov":
        params = ShilnikovModelParams(alpha=echo["alpha"], beta=echo["beta"])
        return oracle_known_points(params).fold_point
    raise ConfigError("custom systems need --q0 x,y,z (fold point guess)")


def _out_dir(args) -> Path:
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ConfigError(f"cannot create output directory {out}: {e}") from e
    return out


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w", newline="") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_csv(path: Path, header: str, rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def _report(args, command: str, config: dict, result: dict, csv_name: str | None):
    out = _out_dir(args)
    if csv_name is not None:
        result = dict(result)
        result["csv"] = csv_name
    payload = {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "config": config,
        "result": result,
    }
    json_path = out / f"{command.replace('-', '_')}.json"
    _write_json(json_path, payload)
    return json_path


def _word_dict(word: ItineraryWord) -> dict:
    return {"halves": list(word.halves), "counts": list(word.counts)}


def _record_dict(rec) -> dict:
    return {
        "s_in": rec.s_in,
        "s_out": rec.s_out,
        "half_in": rec.half_in,
        "half_out": rec.half_out,
        "eta0": rec.eta0,
        "eta1": rec.eta1,
        "excursions": rec.excursions,
        "t_return": rec.t_return,
    }


_RECORD_COLS = "s_in,s_out,half_in,half_out,eta0,eta1,excursions,t_return"


def _record_row(rec) -> list[str]:
    return [
        _fmt(rec.s_in),
        _fmt(rec.s_out),
        str(rec.half_in),
        str(rec.half_out),
        str(rec.eta0),
        str(rec.eta1),
        str(rec.excursions),
        _fmt(rec.t_return),
    ]


# ---------------------------------------------------------------- commands


def _cmd_classify(args) -> int:
    sysm, echo = _resolve_system(args)
    p = np.asarray(_parse_floats(args.point, 3, "--point"))
    h = float(sysm.h(p))
    xh, yh = lie_derivatives(sysm, p)
    rc = classify(sysm, p)
    result = {
        "point": [float(c) for c in p],
        "h": h,
        "lie_x": float(xh),
        "lie_y": float(yh),
        "tag": rc.tag.value,
        "fold_kind": None if rc.fold_kind is None else rc.fold_kind.value,
        "regular_fold": rc.regular_fold,
    }
    if rc.tag in (RegionTag.TANGENCY_X, RegionTag.TANGENCY_BOTH):
        result["second_lie_x"] = float(second_lie(sysm, p, "X"))
    if rc.tag in (RegionTag.TANGENCY_Y, RegionTag.TANGENCY_BOTH):
        result["second_lie_y"] = float(second_lie(sysm, p, "Y"))
    config = {"system": echo, "point": result["point"], "out": args.out}
    out = _out_dir(args)
    _write_csv(
        out / "classify.csv",
        "x,y,z,h,lie_x,lie_y,tag",
        [[_fmt(p[0]), _fmt(p[1]), _fmt(p[2]), _fmt(h), _fmt(xh), _fmt(yh), rc.tag.value]],
    )
    path = _report(args, "classify", config, result, "classify.csv")
    print(f"{rc.tag.value} (Xh={xh:.6g}, Yh={yh:.6g}) -> {path}")
    return 0


def _cmd_flow(args) -> int:
    sysm, echo = _resolve_system(args)
    p0 = np.asarray(_parse_floats(getattr(args, "start"), 3, "--from"))
    if args.tmax <= 0:
        raise ConfigError("--tmax must be positive")
    traj = flow_filippov(sysm, p0, args.tmax)
    out = _out_dir(args)
    traj.write_csv(out / "flow.csv")
    end = traj.end_point
    result = {
        "t_end": float(traj.t_end),
        "end_point": [float(c) for c in end],
        "n_segments": len(traj.segments),
        "modes": [seg.mode for seg in traj.segments],
        "events": [
            {
                "kind": ev.kind.value,
                "time": float(ev.time),
                "location": [float(c) for c in ev.location],
                "residual": None if ev.residual is None else float(ev.residual),
            }
            for ev in traj.events
        ],
    }
    config = {
        "system": echo,
        "from": [float(c) for c in p0],
        "tmax": args.tmax,
        "out": args.out,
    }
    path = _report(args, "flow", config, result, "flow.csv")
    last = traj.events[-1].kind.value if traj.events else "none"
    print(f"flowed to t={traj.t_end:.6g}, final event {last} -> {path}")
    return 0


def _cmd_verify(args) -> int:
    sysm, echo = _resolve_system(args)
    q0g = _fold_guess(args, echo)
    report = verify_shilnikov(sysm, q0g, r=args.r, n_samples=args.samples)
    result = report.to_dict()
    config = {
        "system": echo,
        "r": args.r,
        "samples": args.samples,
        "out": args.out,
    }
    out = _out_dir(args)
    _write_csv(
        out / "verify_shilnikov.csv",
        "certificate,passed,value",
        [
            [c.name, str(c.passed).lower(), "" if c.value is None else _fmt(c.value)]
            for c in report.certificates
        ],
    )
    path = _report(args, "verify-shilnikov", config, result, "verify_shilnikov.csv")
    verdict = "PASS" if report.passed else "FAIL"
    print(
        f"{verdict}: flight_time={report.flight_time:.9g} "
        f"landing_gap={report.landing_gap:.3g} -> {path}"
    )
    return 0


def _cmd_return_map(args) -> int:
    sysm, echo = _resolve_system(args)
    sec = build_section(sysm, _fold_guess(args, echo), args.r)
    grid = section_scan(sysm, sec, args.scan)
    rows, n_escaped = [], 0
    for s in grid:
        try:
            rec = first_return(sysm, sec, float(s))
        except _ANALYSIS_ERRORS:
            n_escaped += 1
            continue
        rows.append(_record_row(rec))
    bands = discover_bands(sysm, sec, 16)
    result = {
        "r": args.r,
        "scan_n": args.scan,
        "n_returned": len(rows),
        "n_escaped": n_escaped,
        "bands": [
            {"lo": b.lo, "hi": b.hi, "eta0": b.eta0, "eta1": b.eta1, "t_mid": b.t_mid}
            for b in bands
        ],
    }
    config = {"system": echo, "r": args.r, "scan": args.scan, "out": args.out}
    out = _out_dir(args)
    _write_csv(out / "return_map.csv", _RECORD_COLS, rows)
    path = _report(args, "return-map", config, result, "return_map.csv")
    print(
        f"{len(rows)} returns, {n_escaped} escapes, {len(bands)} bands -> {path}"
    )
    return 0


def _cmd_itinerary(args) -> int:
    sysm, echo = _resolve_system(args)
    sec = build_section(sysm, _fold_guess(args, echo), args.r)
    if args.xi is not None:
        xi, xi_source = args.xi, "flag"
    else:
        bands = discover_bands(sysm, sec, 16)
        if not bands:
            raise EscapedError("no returning bands found; give --xi explicitly")
        rng = np.random.default_rng(args.seed)
        band = bands[int(rng.integers(len(bands)))]
        lo, hi = band.interior()
        xi, xi_source = float(rng.uniform(lo, hi)), "sampled"
    word = code_itinerary(sysm, sec, xi, args.depth)
    records, s = [], xi
    for _ in range(args.depth):
        rec = first_return(sysm, sec, s)
        records.append(rec)
        s = rec.s_out
    result = {
        "xi": float(xi),
        "xi_source": xi_source,
        "depth": args.depth,
        "word": _word_dict(word),
        "records": [_record_dict(r) for r in records],
    }
    config = {
        "system": echo,
        "r": args.r,
        "xi": None if args.xi is None else float(args.xi),
        "depth": args.depth,
        "seed": args.seed,
        "out": args.out,
    }
    out = _out_dir(args)
    _write_csv(out / "itinerary.csv", _RECORD_COLS, [_record_row(r) for r in records])
    path = _report(args, "itinerary", config, result, "itinerary.csv")
    print(
        f"xi={xi:.9g}: halves={list(word.halves)} counts={list(word.counts)} -> {path}"
    )
    return 0


def _cmd_cylinder(args) -> int:
    sysm, echo = _resolve_system(args)
    halves = _parse_ints(args.halves, "--halves")
    counts = _parse_ints(args.counts, "--counts") if args.counts else []
    try:
        word = ItineraryWord(tuple(halves), tuple(counts))
    except ValueError as e:
        raise ConfigError(str(e)) from e
    sec = build_section(sysm, _fold_guess(args, echo), args.r)
    interval = locate_cylinder(sysm, sec, word, scan_n=args.scan)
    result = {
        "word": _word_dict(word),
        "scan_n": args.scan,
        "interval": None if interval is None else [interval[0], interval[1]],
        "width": None if interval is None else interval[1] - interval[0],
    }
    config = {
        "system": echo,
        "r": args.r,
        "halves": halves,
        "counts": counts,
        "scan": args.scan,
        "out": args.out,
    }
    out = _out_dir(args)
    rows = [] if interval is None else [
        [_fmt(interval[0]), _fmt(interval[1]), _fmt(interval[1] - interval[0])]
    ]
    _write_csv(out / "cylinder.csv", "lo,hi,width", rows)
    path = _report(args, "cylinder", config, result, "cylinder.csv")
    if interval is None:
        print(f"no section point realizes the word -> {path}")
    else:
        print(f"[{interval[0]:.9g}, {interval[1]:.9g}] -> {path}")
    return 0


def _cmd_periodic(args) -> int:
    sysm, echo = _resolve_system(args)
    sec = build_section(sysm, _fold_guess(args, echo), args.r)
    points = find_periodic(sysm, sec, args.period, args.scan)
    result = {
        "period": args.period,
        "scan_n": args.scan,
        "points": [
            {
                "s": pt.s,
                "period": pt.period,
                "residual": pt.residual,
                "multiplier": pt.multiplier,
                "word": _word_dict(pt.word),
            }
            for pt in points
        ],
    }
    config = {
        "system": echo,
        "r": args.r,
        "period": args.period,
        "scan": args.scan,
        "out": args.out,
    }
    out = _out_dir(args)
    _write_csv(
        out / "periodic.csv",
        "s,period,residual,multiplier,halves,counts",
        [
            [
                _fmt(pt.s),
                str(pt.period),
                _fmt(pt.residual),
                "" if pt.multiplier is None else _fmt(pt.multiplier),
                " ".join(map(str, pt.word.halves)),
                " ".join(map(str, pt.word.counts)),
            ]
            for pt in points
        ],
    )
    path = _report(args, "periodic", config, result, "periodic.csv")
    print(f"{len(points)} certified period-{args.period} points -> {path}")
    return 0


def _cmd_entropy(args) -> int:
    sysm, echo = _resolve_system(args)
    sec = build_section(sysm, _fold_guess(args, echo), args.r)
    table = []
    for m in range(1, args.depth + 1):
        words = realized_words(sysm, sec, m, args.scan)
        count = len(words)
        table.append(
            {
                "depth": m,
                "words": count,
                "entropy": None if count == 0 else math.log(count) / m,
            }
        )
    result = {"scan_n": args.scan, "max_depth": args.depth, "table": table}
    config = {
        "system": echo,
        "r": args.r,
        "depth": args.depth,
        "scan": args.scan,
        "out": args.out,
    }
    out = _out_dir(args)
    _write_csv(
        out / "entropy.csv",
        "depth,words,entropy",
        [
            [
                str(row["depth"]),
                str(row["words"]),
                "" if row["entropy"] is None else _fmt(row["entropy"]),
            ]
            for row in table
        ],
    )
    path = _report(args, "entropy", config, result, "entropy.csv")
    print("depth  words  entropy")
    for row in table:
        ent = "-" if row["entropy"] is None else f"{row['entropy']:.6f}"
        print(f"{row['depth']:5d}  {row['words']:5d}  {ent}")
    print(f"-> {path}")
    return 0


def _sweep_cell(task: tuple) -> dict:
    what, alpha, beta, r, period, scan_n = task
    cell: dict = {"alpha": alpha, "beta": beta}
    try:
        params = ShilnikovModelParams(alpha=alpha, beta=beta)
        sysm = build_model(params)
        q0g = oracle_known_points(params).fold_point
        if what == "verify-shilnikov":
            rep = verify_shilnikov(sysm, q0g, r=r)
            cell.update(
                passed=rep.passed,
                flight_time=rep.flight_time,
                landing_gap=rep.landing_gap,
            )
        else:
            sec = build_section(sysm, q0g, r)
            pts = find_periodic(sysm, sec, period, scan_n)
            cell.update(count=len(pts), points=[pt.s for pt in pts])
    except (_ANALYSIS_ERRORS, ValueError) as e:
        cell["error"] = f"{type(e).__name__}: {e}"
    return cell


def _cmd_sweep(args) -> int:
    alphas = _parse_floats(args.alphas, what="--alphas")
    betas = _parse_floats(args.betas, what="--betas")
    if not alphas or not betas:
        raise ConfigError("--alphas and --betas must be non-empty")
    if args.what == "verify-shilnikov":
        r = args.r if args.r is not None else 0.05
    else:
        r = args.r if args.r is not None else SECTION_RADIUS
    tasks = [
        (args.what, a, b, r, args.period, args.scan)
        for a in sorted(alphas)
        for b in sorted(betas)
    ]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            cells = list(pool.map(_sweep_cell, tasks))
    else:
        cells = [_sweep_cell(t) for t in tasks]
    cells.sort(key=lambda c: (c["alpha"], c["beta"]))
    result = {"what": args.what, "jobs": args.jobs, "cells": cells}
    config = {
        "what": args.what,
        "alphas": sorted(alphas),
        "betas": sorted(betas),
        "r": r,
        "period": args.period,
        "scan": args.scan,
        "jobs": args.jobs,
        "out": args.out,
    }
    out = _out_dir(args)
    if args.what == "verify-shilnikov":
        header = "alpha,beta,passed,flight_time,landing_gap,error"
        rows = [
            [
                _fmt(c["alpha"]),
                _fmt(c["beta"]),
                str(c.get("passed", "")).lower(),
                _fmt(c["flight_time"]) if "flight_time" in c else "",
                _fmt(c["landing_gap"]) if "landing_gap" in c else "",
                c.get("error", ""),
            ]
            for c in cells
        ]
    else:
        header = "alpha,beta,count,points,error"
        rows = [
            [
                _fmt(c["alpha"]),
                _fmt(c["beta"]),
                str(c.get("count", "")),
                " ".join(_fmt(s) for s in c.get("points", [])),
                c.get("error", ""),
            ]
            for c in cells
        ]
    _write_csv(out / "sweep.csv", header, rows)
    path = _report(args, "sweep", config, result, "sweep.csv")
    n_err = sum("error" in c for c in cells)
    print(f"{len(cells)} cells ({n_err} errored) -> {path}")
    return 0


# ---------------------------------------------------------------- parser


def _add_system_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", default="shilnikov", help="builtin model name")
    p.add_argument("--alpha", type=float, default=1.0, help="model parameter")
    p.add_argument("--beta", type=float, default=1.0, help="model parameter")
    p.add_argument(
        "--system", default=None, metavar="FILE",
        help="JSON system definition (overrides --model/--alpha/--beta)",
    )
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--seed", type=int, default=0, help="sampling seed")


def _add_section_flags(p: argparse.ArgumentParser, r_default=SECTION_RADIUS) -> None:
    p.add_argument("--r", type=float, default=r_default, help="section radius")
    p.add_argument(
        "--q0", default=None, metavar="X,Y,Z",
        help="fold point guess (defaults to the builtin model's)",
    )


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="fsh",
        description="Filippov flow simulation and sliding-homoclinic chaos analysis",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify", help="classify a switching-manifold point")
    _add_system_flags(p)
    p.add_argument("--point", required=True, metavar="X,Y,Z")
    p.set_defaults(func=_cmd_classify)

    p = sub.add_parser("flow", help="integrate the Filippov flow, write CSV")
    _add_system_flags(p)
    p.add_argument("--from", dest="start", required=True, metavar="X,Y,Z")
    p.add_argument("--tmax", type=float, default=20.0)
    p.set_defaults(func=_cmd_flow)

    p = sub.add_parser(
        "verify-shilnikov", help="certify the sliding homoclinic loop"
    )
    _add_system_flags(p)
    _add_section_flags(p, r_default=0.05)
    p.add_argument("--samples", type=int, default=41, help="landing-curve samples")
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("return-map", help="scan the first-return map")
    _add_system_flags(p)
    _add_section_flags(p)
    p.add_argument("--scan", type=int, default=200, help="scan points")
    p.set_defaults(func=_cmd_return_map)

    p = sub.add_parser("itinerary", help="code a section point's itinerary")
    _add_system_flags(p)
    _add_section_flags(p)
    p.add_argument("--xi", type=float, default=None, help="section coordinate")
    p.add_argument("--depth", type=int, default=3)
    p.set_defaults(func=_cmd_itinerary)

    p = sub.add_parser("cylinder", help="locate the interval realizing a word")
    _add_system_flags(p)
    _add_section_flags(p)
    p.add_argument("--halves", required=True, metavar="H0,H1,...")
    p.add_argument("--counts", default="", metavar="C0,C1,...")
    p.add_argument("--scan", type=int, default=257)
    p.set_defaults(func=_cmd_cylinder)

    p = sub.add_parser("periodic", help="certified fixed points of the m-fold map")
    _add_system_flags(p)
    _add_section_flags(p)
    p.add_argument("--period", type=int, default=1)
    p.add_argument("--scan", type=int, default=401)
    p.set_defaults(func=_cmd_periodic)

    p = sub.add_parser("entropy", help="realized-word counts per depth")
    _add_system_flags(p)
    _add_section_flags(p)
    p.add_argument("--depth", type=int, default=4, help="maximum depth")
    p.add_argument("--scan", type=int, default=401)
    p.set_defaults(func=_cmd_entropy)

    p = sub.add_parser("sweep", help="map an analysis over an (alpha, beta) grid")
    p.add_argument(
        "--what", choices=["verify-shilnikov", "periodic"], default="verify-shilnikov"
    )
    p.add_argument("--alphas", required=True, metavar="A1,A2,...")
    p.add_argument("--betas", required=True, metavar="B1,B2,...")
    p.add_argument("--r", type=float, default=None, help="per-cell radius")
    p.add_argument("--period", type=int, default=1)
    p.add_argument("--scan", type=int, default=401)
    p.add_argument(
        "--jobs", type=int, default=int(os.environ.get("FSH_JOBS", "1")),
        help="worker processes (env FSH_JOBS)",
    )
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--seed", type=int, default=0, help="sampling seed")
    p.set_defaults(func=_cmd_sweep)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if getattr(args, "jobs", 1) < 1:
        print("error: --jobs must be >= 1", file=_sys.stderr)
        return 2
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"error: {e}", file=_sys.stderr)
        return 2
    except _ANALYSIS_ERRORS as e:
        print(f"{type(e).__name__}: {e}", file=_sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
