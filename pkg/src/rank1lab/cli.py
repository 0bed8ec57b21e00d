"""Command-line drivers: ``rank1lab <command> [options]``.

Exit status 0 on success, 2 on configuration errors, 3 when a power cannot
be resolved within the materialized stages.  Errors are also written to
stderr as one JSON object.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from fractions import Fraction
from pathlib import Path

from . import __version__
from .construction import reference_spec, spec_from_config, total_measure
from .dynamics import correlation, correlation_scan
from .errors import Rank1Error, UnresolvableAtCap
from .levelsets import LevelSet, parse_selector
from .sidon import iter_profile, sidon_wlp_check
from .wlp import (
    cascade_times,
    example2_measures,
    fit_wlp,
    lemma2_probe,
    lower_half,
    nonmixing_windows,
    reference_family,
)

EXIT_CONFIG = 2
EXIT_UNRESOLVED = 3


class ConfigError(Rank1Error):
    code = "config_error"


def _range(text: str) -> tuple[int, int]:
    lo, sep, hi = text.partition("..")
    if not sep:
        raise ConfigError(f"expected A..B, got {text!r}")
    return int(lo), int(hi)


def load_config(args) -> dict:
    if args.config:
        try:
            config = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
    else:
        config = reference_spec().to_config()
    env = os.environ.get("RANK1LAB_MAX_STAGE")
    if env:
        config["max_stage"] = int(env)
    return config


def _spec(config: dict):
    construction = config.get("construction", config)
    return spec_from_config(construction)


def _family(spec, text: str | None) -> list[tuple[LevelSet, LevelSet]]:
    if text in (None, "reference", "family:reference"):
        return reference_family(spec)
    try:
        data = json.loads(Path(text).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read family {text}: {exc}") from None
    return [(LevelSet.from_json(spec, a), LevelSet.from_json(spec, b)) for a, b in data]


def _n_list(text: str) -> list[int]:
    path = Path(text)
    if path.exists():
        text = path.read_text()
    return [int(tok) for tok in text.replace("\n", ",").split(",") if tok.strip()]


def _cascade(spec, text: str) -> int:
    parts = dict(item.split("=") for item in text.replace(" ", "").split(","))
    return cascade_times(spec, int(parts["J"]), int(parts.get("m", 1)), int(parts.get("k", 0)))


def _header(config: dict) -> str:
    return f"# rank1lab {__version__}\n# config: {json.dumps(config, sort_keys=True)}\n"


def _csv(config: dict, columns: list[str], rows) -> str:
    buf = io.StringIO()
    buf.write(_header(config))
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    writer.writerows(rows)
    return buf.getvalue()


def _json(config: dict, payload: dict) -> str:
    out = {"version": __version__, "config": config}
    out.update(payload)
    return json.dumps(out, indent=2, sort_keys=True, default=_default) + "\n"


def _default(obj):
    if isinstance(obj, Fraction):
        return [obj.numerator, obj.denominator]
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _record_json(rec) -> dict:
    return {
        "n": rec.n,
        "raw": rec.raw,
        "normalized": rec.normalized,
        "product_term": rec.product_term,
        "deviation": rec.deviation,
        "working_stage": rec.working_stage,
        "normalize_stage": rec.normalize_stage,
        "unresolved": rec.unresolved,
    }


def cmd_build(args, config):
    spec = _spec(config)
    rows = []
    for j in range(1, spec.max_stage + 1):
        s = spec.stage(j)
        total = total_measure(spec, j)[0]
        rows.append((j, s.h, s.r, sum(s.spacers), total.numerator, total.denominator))
    return _csv(config, ["j", "h_j", "r_j", "sum_spacers", "total_raw_num", "total_raw_den"], rows)


def cmd_windows(args, config):
    spec = _spec(config)
    lo, hi = _range(args.stages or f"1..{spec.max_stage}")
    return _csv(config, ["j", "lo", "hi"], nonmixing_windows(spec, range(lo, hi + 1)).rows())


def _power(args, spec) -> int:
    if args.n_from_cascade:
        return _cascade(spec, args.n_from_cascade)
    if args.n is None:
        raise ConfigError("a power is required: --n or --n-from-cascade")
    return args.n


def cmd_correlate(args, config):
    spec = _spec(config)
    A, B = parse_selector(spec, args.a), parse_selector(spec, args.b)
    rec = correlation(spec, A, B, _power(args, spec), strict=not args.allow_unresolved, normalize_stage=args.normalize_stage)
    config = dict(config, normalize_stage=rec.normalize_stage)
    return _json(config, {"record": _record_json(rec)})


def cmd_scan(args, config):
    spec = _spec(config)
    A, B = parse_selector(spec, args.a), parse_selector(spec, args.b)
    if args.n_list:
        ns = _n_list(args.n_list)
    elif args.window_stage:
        j = args.window_stage
        lo, hi = nonmixing_windows(spec, [j]).windows[j]
        ns = list(range(lo, hi + 1, max(1, args.step or 1)))
    else:
        raise ConfigError("scan needs --n-list or --window-stage")
    recs = correlation_scan(spec, A, B, ns, threads=args.threads, strict=False, normalize_stage=args.normalize_stage)
    rows = []
    for rec in recs:
        if rec.error:
            rows.append((rec.n, "", "", "", "", "", "", "", "", rec.error))
            continue
        rows.append(
            (rec.n, rec.raw.numerator, rec.raw.denominator, repr(rec.normalized), repr(rec.product_term),
             repr(rec.deviation), rec.working_stage, rec.unresolved.numerator, rec.unresolved.denominator, "")
        )
    cols = ["n", "raw_num", "raw_den", "normalized", "product_term", "deviation", "working_stage",
            "unresolved_num", "unresolved_den", "error"]
    return _csv(dict(config, normalize_stage=args.normalize_stage or spec.max_stage + 1), cols, rows)


def cmd_fit(args, config):
    spec = _spec(config)
    n = _power(args, spec)
    family = _family(spec, args.family)
    k_window = _range(args.k_window) if args.k_window else (-8, 8)
    if spec.kind == "double_sidon":
        report = sidon_wlp_check(spec, n, family, args.m_max, k_window)
    else:
        report = fit_wlp(spec, n, family, args.m_max, k_window, normalize_stage=args.normalize_stage)
    payload = report.to_json()
    payload["tolerance"] = args.tolerance
    payload["within_tolerance"] = report.residual <= args.tolerance
    return _json(dict(config, normalize_stage=report.normalize_stage), {"fit": payload})


def cmd_example2(args, config):
    spec = _spec(config)
    lo, hi = _range(args.stages or f"1..{spec.max_stage}")
    rows = []
    for j in range(lo, hi + 1):
        k = -(-spec.height(j) // 2) if args.k == "half" else int(args.k)
        m = example2_measures(spec, j, k, args.normalize_stage)
        rows.append((j, k, repr(m["D"]), repr(m["D1"]), repr(m["U"]), int(m["partition_exact"])))
    return _csv(config, ["j", "k", "D", "D1", "U", "partition_exact"], rows)


def cmd_lemma2(args, config):
    spec = _spec(config)
    lo, hi = _range(args.stages or f"2..{spec.max_stage + 1}")
    A = parse_selector(spec, args.a or "runs@2:[0-11]")
    B = parse_selector(spec, args.b or "runs@2:[6-17]")
    rows = [
        (r.j, r.symdiff.numerator, r.symdiff.denominator, repr(r.measure_D), repr(r.deviation))
        for r in lemma2_probe(spec, lambda j: lower_half(spec, j), A, B, range(lo, hi + 1), args.normalize_stage)
    ]
    return _csv(config, ["j", "symdiff_num", "symdiff_den", "measure_D", "deviation"], rows)


def cmd_sidon_overlap(args, config):
    lines = [f"# rank1lab {__version__}\n", f"# config: {json.dumps({'h': args.h, 'eps': args.eps}, sort_keys=True)}\n", "m,count\n"]
    lines += [f"{m},{c}\n" for m, c in iter_profile(args.h, args.eps, args.m_from, args.m_to)]
    return "".join(lines)


COMMANDS = {
    "build": cmd_build,
    "windows": cmd_windows,
    "correlate": cmd_correlate,
    "scan": cmd_scan,
    "fit": cmd_fit,
    "example2": cmd_example2,
    "lemma2": cmd_lemma2,
    "sidon-overlap": cmd_sidon_overlap,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rank1lab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON construction config (default: reference double staircase)")
        p.add_argument("--out", help="output path (default: stdout)")
        p.add_argument("--normalize-stage", type=int, default=None)
        p.add_argument("--threads", type=int, default=1)
        return p

    common(sub.add_parser("build", help="materialize stages and summarize them"))
    common(sub.add_parser("windows", help="non-mixing windows")).add_argument("--stages")
    for name in ("correlate", "scan", "fit"):
        p = common(sub.add_parser(name))
        p.add_argument("--n", type=int)
        p.add_argument("--n-from-cascade")
        if name != "fit":
            p.add_argument("--a", required=True, help="level-set selector, e.g. full@2")
            p.add_argument("--b", required=True)
    sub.choices["correlate"].add_argument("--allow-unresolved", action="store_true")
    scan = sub.choices["scan"]
    scan.add_argument("--n-list", help="comma-separated powers or a file of them")
    scan.add_argument("--window-stage", type=int)
    scan.add_argument("--step", type=int)
    fit = sub.choices["fit"]
    fit.add_argument("--family", default="reference")
    fit.add_argument("--m-max", type=int, default=4)
    fit.add_argument("--k-window", default="-8..8")
    fit.add_argument("--tolerance", type=float, default=0.05)
    ex2 = common(sub.add_parser("example2", help="measures of the D, D1, U sets"))
    ex2.add_argument("--stages")
    ex2.add_argument("--k", default="0", help="integer or 'half' for ceil(h_j / 2)")
    l2 = common(sub.add_parser("lemma2", help="lower-half probe sequence"))
    l2.add_argument("--stages")
    l2.add_argument("--a")
    l2.add_argument("--b")
    so = common(sub.add_parser("sidon-overlap", help="|P & (P + m)| profile"))
    so.add_argument("--h", type=int, required=True)
    so.add_argument("--eps", type=float, required=True)
    so.add_argument("--m-from", type=int, default=0)
    so.add_argument("--m-to", type=int, required=True)
    return parser


def _fail(code: str, message: str, status: int) -> int:
    sys.stderr.write(json.dumps({"error": code, "message": message}) + "\n")
    return status


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args) if args.command != "sidon-overlap" else {}
        text = COMMANDS[args.command](args, config)
    except UnresolvableAtCap as exc:
        return _fail(exc.code, str(exc), EXIT_UNRESOLVED)
    except Rank1Error as exc:
        return _fail(exc.code, str(exc), EXIT_CONFIG)
    except (KeyError, ValueError, TypeError) as exc:
        return _fail("config_error", f"{type(exc).__name__}: {exc}", EXIT_CONFIG)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
