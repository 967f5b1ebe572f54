"""Command-line driver: ``fliplab <subcommand> [flags]``.

Exit codes: 0 success, 1 a checked mathematical fact failed, 2 usage or
input error, 3 a resource cap was hit.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import warnings
from fractions import Fraction
from pathlib import Path

from . import __version__
from .blocks import MAX_ENUM_S, EnumerationLimitError, DensityBoundViolation, densest_block
from .dynamics import DEFAULT_STEP_CAP, RULES, ExhaustiveCapError
from .experiments import (critical_census, default_jobs, hunt_sweep, make_manifest, rank_audit, record_dict,
                          run_sweep)
from .plot import CSV_COLUMNS, CSV_VERSION, CsvFormatError, read_run_csv, render_svg, scaling_summary
from .sparsewords import ParamsError, SparseWordParams, build_sparse_word, derive_params, scan_word, \
    stage_fill_probability
from .weights import GAUSSIAN, UNIFORM, WeightModel, WeightModelError, load_base_weights

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_CAP = 0, 1, 2, 3
HUNT_MAX_N = 8
SEED_ENV = "FLIPLAB_SEED"

log = logging.getLogger("fliplab")

_MODEL_ALIASES = {"uniform": UNIFORM, UNIFORM: UNIFORM, "gaussian": GAUSSIAN, GAUSSIAN: GAUSSIAN}


class UsageError(Exception):
    pass


def _model_kind(s: str) -> str:
    try:
        return _MODEL_ALIASES[s]
    except KeyError:
        raise argparse.ArgumentTypeError(f"unknown model {s!r}; use uniform-window or truncated-gaussian") from None


def _fraction(s: str) -> Fraction:
    try:
        return Fraction(s)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational number: {s!r}") from None


def _positive_int(s: str) -> int:
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {s}")
    return v


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help=f"master seed (overridden by ${SEED_ENV})")
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--config", help="key=value file mirroring the long flags")
    p.add_argument("--verbose", "-v", action="store_true")


def _add_model(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", type=_model_kind, default=UNIFORM)
    p.add_argument("--phi", type=float, default=0.5, help="density bound of the uniform window")
    p.add_argument("--sigma", type=float, help="standard deviation of the truncated gaussian")
    p.add_argument("--base", help="file of 'u v w' base weights")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fliplab", description="Smoothed local max-cut laboratory.")
    parser.add_argument("--version", action="version", version=f"fliplab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("run", help="FLIP step-count sweep")
    _add_common(p)
    _add_model(p)
    p.add_argument("--n", type=int, action="append", help="vertex count (repeatable)")
    p.add_argument("--trials", type=_positive_int, default=10)
    p.add_argument("--rule", choices=RULES, action="append", help="pivot rule (repeatable, default best)")
    p.add_argument("--step-cap", type=int, default=DEFAULT_STEP_CAP)
    p.add_argument("--jobs", type=_positive_int, default=None, help="worker processes (default: all cores)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("rank-audit", help="audit rank lower bounds on random sequences")
    _add_common(p)
    p.add_argument("--count", type=_positive_int, default=10**4)
    p.add_argument("--n-max", type=int, default=12)
    p.add_argument("--ell-max", type=int, default=24)
    p.add_argument("--include-revisiting", action="store_true",
                   help="draw unconstrained sequences and skip the state-revisiting ones")
    p.set_defaults(func=cmd_rank_audit)

    p = sub.add_parser("critical-blocks", help="enumerate critical blocks and check their ranks")
    _add_common(p)
    p.add_argument("--s-max", type=int, default=4)
    p.add_argument("--beta", type=_fraction, default=Fraction(1))
    p.set_defaults(func=cmd_critical)

    p = sub.add_parser("sparse-word", help="build and scan words sparse at every scale")
    _add_common(p)
    p.add_argument("--a", type=float, default=2.0)
    p.add_argument("--n", type=int, default=4096)
    p.add_argument("--seeds", type=_positive_int, default=5, help="number of consecutive seeds from --seed")
    p.add_argument("--b0", type=int)
    p.add_argument("--b1", type=int)
    p.add_argument("--gamma", type=int)
    p.add_argument("--strict", action="store_true", help="treat statistical check failures as failures")
    p.add_argument("--words-dir", help="directory for the word files (default: next to --out)")
    p.set_defaults(func=cmd_sparse_word)

    p = sub.add_parser("hunt-slow", help="exhaustive search for eps-slow improving sequences")
    _add_common(p)
    _add_model(p)
    p.add_argument("--n", type=int, default=5)
    p.add_argument("--eps", type=float, action="append", help="slowness threshold (repeatable)")
    p.add_argument("--target-len", type=_positive_int, help="sequence length (default 2n)")
    p.add_argument("--draws", type=_positive_int, default=100)
    p.set_defaults(func=cmd_hunt_slow)

    p = sub.add_parser("plot", help="log-log SVG of median steps from a run CSV")
    p.add_argument("csv_path")
    p.add_argument("--out", help="SVG path (default: CSV path with .svg)")
    p.add_argument("--title", default="FLIP steps vs n")
    p.add_argument("--verbose", "-v", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config")
    p.set_defaults(func=cmd_plot)
    return parser


# config handling


def _subparser(parser: argparse.ArgumentParser, name: str) -> argparse.ArgumentParser:
    for act in parser._actions:
        if isinstance(act, argparse._SubParsersAction):
            return act.choices[name]
    raise KeyError(name)


def read_config(path: str | Path) -> dict[str, str]:
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value, got {line!r}")
        k, v = (t.strip() for t in line.split("=", 1))
        out[k.lstrip("-").replace("-", "_")] = v
    return out


def _config_defaults(sub: argparse.ArgumentParser, cfg: dict[str, str]) -> dict:
    """Convert config strings with the matching flag's type; list flags take comma-separated values."""
    actions = {a.dest: a for a in sub._actions}
    out = {}
    for key, raw in cfg.items():
        act = actions.get(key)
        if act is None or key in ("config", "help"):
            raise UsageError(f"unknown config key {key!r}")
        conv = act.type or str
        try:
            if isinstance(act, argparse._StoreTrueAction):
                val = raw.lower() in ("1", "true", "yes", "on")
            elif isinstance(act, argparse._AppendAction):
                val = [conv(x) for x in raw.replace(",", " ").split()]
            else:
                val = conv(raw)
        except (ValueError, argparse.ArgumentTypeError) as e:
            raise UsageError(f"config key {key!r}: {e}") from None
        if act.choices is not None:
            for x in val if isinstance(val, list) else [val]:
                if x not in act.choices:
                    raise UsageError(f"config key {key!r}: {x!r} not in {list(act.choices)}")
        out[key] = val
    return out


def parse_args(argv: list[str]) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        sub = _subparser(parser, args.command)
        sub.set_defaults(**_config_defaults(sub, read_config(args.config)))
        cli_only = args
        args = parser.parse_args(argv)
        # repeatable flags given on the command line replace the config list instead of extending it
        for act in sub._actions:
            if isinstance(act, argparse._AppendAction) and getattr(cli_only, act.dest) is not None:
                setattr(args, act.dest, getattr(cli_only, act.dest))
    env = os.environ.get(SEED_ENV)
    if env is not None and env.strip():
        try:
            args.seed = int(env)
        except ValueError:
            raise UsageError(f"${SEED_ENV} must be an integer, got {env!r}") from None
    return args


def _config_of(args: argparse.Namespace) -> dict:
    cfg = {}
    for k, v in vars(args).items():
        if k == "func":
            continue
        cfg[k] = str(v) if isinstance(v, Fraction) else v
    return cfg


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, default=str) + "\n"


def _model_from(args: argparse.Namespace) -> WeightModel:
    base = load_base_weights(args.base) if args.base else None
    if args.model == GAUSSIAN:
        if args.sigma is None:
            raise UsageError("--sigma is required for the truncated-gaussian model")
        return WeightModel(GAUSSIAN, None, args.sigma, base, args.seed)
    return WeightModel(UNIFORM, args.phi, None, base, args.seed)


# subcommands


def cmd_run(args: argparse.Namespace) -> int:
    ns = args.n or [8]
    rules = args.rule or ["best"]
    if min(ns) < 2:
        raise UsageError("every --n must be at least 2")
    model = _model_from(args)
    manifest = make_manifest({**_config_of(args), "n": ns, "rule": rules, "model_descriptor": model.describe()},
                             args.seed)
    jobs = args.jobs or default_jobs()
    log.info("run: n=%s trials=%d rules=%s jobs=%d", ns, args.trials, rules, jobs)
    recs = run_sweep(model, ns, args.trials, rules, args.step_cap, jobs)
    rows = [record_dict(r) for r in recs]
    summary = scaling_summary(rows) if len(set(ns)) > 1 else None
    if args.format == "json":
        payload = {"schema": CSV_VERSION, "manifest": manifest, "records": rows}
        if summary is not None:
            payload["scaling"] = summary
        _emit(_dumps(payload), args.out)
    else:
        buf = io.StringIO()
        buf.write(f"# {CSV_VERSION}\n# manifest: {json.dumps(manifest, default=str)}\n")
        w = csv.DictWriter(buf, CSV_COLUMNS, lineterminator="\n")
        w.writeheader()
        w.writerows({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()} for r in rows)
        _emit(buf.getvalue(), args.out)
        if summary is not None and args.out:
            side = Path(args.out).with_suffix(".scaling.json")
            side.write_text(_dumps({"manifest": manifest, "scaling": summary}))
    if summary is not None:
        for rule, s in summary.items():
            med = ", ".join(f"n={n}: {m:g}" for n, m in s["median_steps"].items())
            slope = "n/a" if s["slope"] is None else f"{s['slope']:.4f}"
            print(f"{rule}: median steps {med}; log-log slope {slope}", file=sys.stderr)
    return EXIT_OK


def cmd_rank_audit(args: argparse.Namespace) -> int:
    if args.n_max < 2 or args.ell_max < 1:
        raise UsageError("--n-max must be >= 2 and --ell-max >= 1")
    rep = rank_audit(args.count, args.seed, args.n_max, args.ell_max, args.include_revisiting)
    total = sum(rep["violations"].values())
    rep = {"manifest": make_manifest(_config_of(args), args.seed), **rep, "ok": total == 0}
    _emit(_dumps(rep), args.out)
    log.info("rank-audit: %d audited, %d skipped, %d violations", rep["audited"], rep["skipped_revisiting"], total)
    return EXIT_OK if total == 0 else EXIT_FAIL


def cmd_critical(args: argparse.Namespace) -> int:
    if args.s_max < 1:
        raise UsageError("--s-max must be >= 1")
    if args.s_max > MAX_ENUM_S:
        raise EnumerationLimitError(f"--s-max {args.s_max} exceeds the enumeration limit {MAX_ENUM_S}")
    if args.beta <= 0:
        raise UsageError("--beta must be positive")
    res = critical_census(args.s_max, args.beta)
    lines = [json.dumps({"manifest": make_manifest(_config_of(args), args.seed)}, default=str)]
    lines += [json.dumps(b) for b in res["blocks"]]
    summary = {"per_s": res["per_s"], "bounds_ok": res["bounds_ok"], "facts": res["facts"], "ok": res["ok"]}
    lines.append(json.dumps({"summary": summary}))
    _emit("\n".join(lines) + "\n", args.out)
    for name, ok in res["facts"].items():
        print(f"{name}: {'ok' if ok else 'FAILED'}", file=sys.stderr)
    return EXIT_OK if res["ok"] else EXIT_FAIL


def _sparse_params(args: argparse.Namespace, seed: int) -> SparseWordParams:
    overrides = (args.b0, args.b1, args.gamma)
    if all(v is None for v in overrides):
        return derive_params(args.a, args.n, seed)
    try:
        d = derive_params(args.a, args.n, seed)
        b0, b1, g = d.b0, d.b1, d.gamma
    except ParamsError:
        if any(v is None for v in overrides):
            raise
        b0 = b1 = g = None
    return SparseWordParams(args.a, args.n, args.b0 if args.b0 is not None else b0,
                            args.b1 if args.b1 is not None else b1,
                            args.gamma if args.gamma is not None else g, seed)


def cmd_sparse_word(args: argparse.Namespace) -> int:
    manifest = make_manifest(_config_of(args), args.seed)
    words_dir = Path(args.words_dir) if args.words_dir else (Path(args.out).parent if args.out else None)
    if words_dir is not None:
        words_dir.mkdir(parents=True, exist_ok=True)
    reports = []
    failed = False
    for seed in range(args.seed, args.seed + args.seeds):
        p = _sparse_params(args, seed)
        word = build_sparse_word(p)
        rep = scan_word(word, p, strict=False).to_dict()
        try:
            dense = densest_block(word.letters, p.n)
            rep["densest"] = {"i": dense.i, "j": dense.j, "s2": dense.s2, "ell": dense.ell,
                              "ratio": float(dense.ratio), "bound": dense.bound, "applicable": dense.applicable,
                              "holds": dense.holds}
        except DensityBoundViolation as e:
            rep["densest"] = {"error": str(e)}
            failed = True
        fill = stage_fill_probability(p)
        rep.update(seed=seed, b1=p.b1, fill_bounds_ok=fill.ok, d_exact=str(fill.d))
        failed |= not rep["deterministic_ok"] or not fill.ok
        if args.strict:
            failed |= not (rep["letters_ok"] and rep["density_ok"] and rep["c_ok"] is not False)
        if words_dir is not None:
            path = words_dir / f"word_a{args.a:g}_n{p.n}_seed{seed}.txt"
            word.save(path, manifest=json.dumps(manifest, separators=(",", ":"), default=str))
            rep["word_file"] = str(path)
        log.info("sparse-word seed %d: deterministic_ok=%s C'=%.3f", seed, rep["deterministic_ok"], rep["c_measured"])
        reports.append(rep)
    out = {"manifest": manifest, "reports": reports,
           "c_measured_max": max(r["c_measured"] for r in reports),
           "c_theory": reports[0]["c_theory"]}
    _emit(_dumps(out), args.out)
    return EXIT_FAIL if failed else EXIT_OK


def cmd_hunt_slow(args: argparse.Namespace) -> int:
    if args.n > HUNT_MAX_N:
        raise ExhaustiveCapError(f"hunt-slow is exhaustive; n={args.n} exceeds the cap {HUNT_MAX_N}")
    if args.n < 2:
        raise UsageError("--n must be at least 2")
    eps = args.eps or [1e-1, 1e-2, 1e-3]
    if min(eps) <= 0:
        raise UsageError("--eps must be positive")
    target = args.target_len or 2 * args.n
    model = _model_from(args)
    res = hunt_sweep(model, args.n, eps, target, args.draws, cap=HUNT_MAX_N)
    # a witness for a smaller eps is one for every larger eps
    fr = sorted(((float(e), f) for e, f in res["fraction_found"].items()), reverse=True)
    monotone = all(a[1] >= b[1] for a, b in zip(fr, fr[1:]))
    payload = {"manifest": make_manifest({**_config_of(args), "eps": eps, "target_len": target}, args.seed),
               **res, "monotone_in_eps": monotone}
    _emit(_dumps(payload), args.out)
    return EXIT_OK if monotone else EXIT_FAIL


def _csv_manifest(path: str | Path) -> str:
    for line in Path(path).read_text().splitlines():
        if line.startswith("# manifest:"):
            return line.split(":", 1)[1].strip()
    return ""


def cmd_plot(args: argparse.Namespace) -> int:
    rows = read_run_csv(args.csv_path)
    meta = json.dumps({"source": str(args.csv_path), "source_manifest": _csv_manifest(args.csv_path),
                       "manifest": make_manifest(_config_of(args), args.seed)}, default=str)
    svg = render_svg(rows, args.title, meta)
    out = Path(args.out) if args.out else Path(args.csv_path).with_suffix(".svg")
    out.write_text(svg)
    for rule, s in scaling_summary(rows).items():
        slope = s["slope"]
        print(f"{rule}: slope = {'n/a' if slope is None else repr(slope)}", file=sys.stderr)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse_args(argv)
    except SystemExit as e:
        return int(e.code) if isinstance(e.code, int) else EXIT_USAGE
    except (UsageError, OSError) as e:
        print(f"fliplab: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s", stream=sys.stderr)
    fmt = warnings.formatwarning
    warnings.formatwarning = lambda msg, *a, **k: f"fliplab: warning: {msg}\n"
    try:
        return args.func(args)
    except (ExhaustiveCapError, EnumerationLimitError) as e:
        print(f"fliplab: resource cap: {e}", file=sys.stderr)
        return EXIT_CAP
    except (UsageError, ParamsError, WeightModelError, CsvFormatError, ValueError, OSError) as e:
        print(f"fliplab: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except AssertionError as e:
        print(f"fliplab: check failed: {e}", file=sys.stderr)
        return EXIT_FAIL
    finally:
        warnings.formatwarning = fmt


if __name__ == "__main__":
    sys.exit(main())
