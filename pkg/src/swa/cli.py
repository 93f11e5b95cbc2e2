"""Command-line interface.

One binary with subcommands select, tune, mbounds, screen, assure, combine
and simulate.  A flat key=value config file can hold any long-option value;
explicit flags win over the file, the file wins over built-in defaults.
All file outputs are written atomically (temp file + rename) and carry the
fully resolved configuration for provenance.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from pathlib import Path

from . import __version__
from .assurance import combine_external, double_assurance, read_feature_list
from .dataset import Dataset, load_csv, standardize
from .engine import ADJUSTMENTS, SelectionResult, SwaConfig, score_table_csv, select
from .errors import DataError, NumericalError, SwaError
from .mbounds import m_bounds
from .parallel import resolve_workers
from .prescreen import ScreenResult, screen_threshold, screen_top_k
from .simlab import make_example1, make_example2, make_null, run_trials
from .tuning import emit_panels, report_to_json_dict, tune

USAGE_EXIT, DATA_EXIT, NUMERIC_EXIT = 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1 on usage problems, per contract
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_EXIT)


def _write_atomic(path: Path, data: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json_text(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def _emit(doc, args, stem: str, csv_text: str | None = None) -> None:
    text = _json_text(doc)
    if args.out:
        out = Path(args.out)
        _write_atomic(out / f"{stem}.json", text)
        if csv_text is not None:
            _write_atomic(out / f"{stem}.csv", csv_text)
    if args.format == "csv" and csv_text is not None:
        sys.stdout.write(csv_text)
    else:
        sys.stdout.write(text)


def _load_config_file(path: str | None) -> dict[str, str]:
    if not path:
        return {}
    cfg: dict[str, str] = {}
    try:
        with open(path) as fh:
            for i, line in enumerate(fh, start=1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise DataError(f"{path}:{i}: expected key=value, got {line!r}")
                key, _, value = line.partition("=")
                cfg[key.strip().replace("-", "_")] = value.strip()
    except OSError as exc:
        raise DataError(f"cannot read config file {path}: {exc}") from exc
    return cfg


def _resolve(args, key: str, default, cast=str):
    """Flag value if given, else config-file value, else the default."""
    val = getattr(args, key, None)
    if val is not None:
        return val
    raw = args.file_config.get(key)
    if raw is None:
        return default
    if cast is bool:
        return raw.lower() in ("1", "true", "yes", "on")
    return cast(raw)


def _int_or_auto(text: str):
    if text == "auto":
        return "auto"
    return int(text)


def _s_list(text: str) -> list[int]:
    try:
        return [int(tok) for tok in text.replace(" ", "").split(",") if tok]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _add_common(sp) -> None:
    sp.add_argument("--seed", type=int, default=None, help="master seed (default 42)")
    sp.add_argument("--workers", type=int, default=None,
                    help="worker processes (default: logical cores)")
    sp.add_argument("--config", default=None, help="key=value config file")
    sp.add_argument("--out", default=None, help="output directory")
    sp.add_argument("--format", choices=("json", "csv"), default=None,
                    help="stdout payload format (default json)")


def _add_data(sp) -> None:
    sp.add_argument("--x", required=True, help="design matrix CSV")
    sp.add_argument("--y", required=True, help="response CSV (single column)")
    sp.add_argument("--no-header", action="store_true",
                    help="x file has no header row (names become V1..Vp)")
    sp.add_argument("--standardize", action="store_true",
                    help="center and scale columns before analysis")


def _add_engine(sp, require_s: bool = True) -> None:
    sp.add_argument("--s", type=int, default=None, required=False,
                    help="subsample size" + (" (required)" if require_s else ""))
    sp.add_argument("--m", type=int, default=None, help="number of subsamples (default 5000)")
    sp.add_argument("--q", type=_int_or_auto, default=None,
                    help='semifinalist count, or "auto" = s')
    sp.add_argument("--keep-top", type=_int_or_auto, default=None,
                    help='submodels kept for scoring, or "auto" = s')
    sp.add_argument("--adjust", choices=ADJUSTMENTS, default=None,
                    help="multiplicity adjustment (default bonferroni)")
    sp.add_argument("--alpha", type=float, default=None, help="significance level (default 0.05)")
    sp.add_argument("--divisor", type=_int_or_auto, default=None,
                    help='bonferroni divisor, or "auto" = candidate count')
    sp.add_argument("--stepwise-final", action="store_true", default=None,
                    help="backward elimination before the final significance test")
    sp.add_argument("--stepwise-subsample", action="store_true", default=None,
                    help="backward elimination inside every subsample fit")
    sp.add_argument("--intercept", action="store_true", default=None,
                    help="include an intercept in every fit")


def _engine_config(args) -> SwaConfig:
    s = _resolve(args, "s", None, int)
    if s is None:
        raise ValueError("--s is required (flag or config file)")
    return SwaConfig(
        s=s,
        m=_resolve(args, "m", 5000, int),
        q=_resolve(args, "q", "auto", _int_or_auto),
        keep_top=_resolve(args, "keep_top", "auto", _int_or_auto),
        adjustment=_resolve(args, "adjust", "bonferroni"),
        alpha=_resolve(args, "alpha", 0.05, float),
        bonferroni_divisor=_resolve(args, "divisor", "auto", _int_or_auto),
        stepwise_final=_resolve(args, "stepwise_final", False, bool),
        stepwise_subsample=_resolve(args, "stepwise_subsample", False, bool),
        intercept=_resolve(args, "intercept", False, bool),
        seed=_resolve(args, "seed", 42, int),
    )


def _load_dataset(args) -> Dataset:
    d = load_csv(args.x, args.y, has_header=not args.no_header)
    if args.standardize:
        d = standardize(d, center=True, scale=True)
    return d


def _maybe_screen(d: Dataset, args) -> Dataset:
    top_k = _resolve(args, "screen_top_k", None, int)
    thresh = _resolve(args, "screen_threshold", None, float)
    if top_k is not None and thresh is not None:
        raise ValueError("choose either --screen-top-k or --screen-threshold")
    if top_k is not None:
        return screen_top_k(d, top_k).reduced
    if thresh is not None:
        res = screen_threshold(d, thresh)
        if res.reduced is None:
            raise NumericalError(f"screening at |r| >= {thresh} kept no columns")
        return res.reduced
    return d


def _scores_csv(result: SelectionResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["index", "name", "w", "s_count"])
    for rec in result.semifinalist_details:
        w.writerow([rec["index"], rec["name"], repr(rec.get("w", "")), rec.get("s_count", "")])
    return buf.getvalue()


# --------------------------- subcommands ----------------------------------


def _cmd_select(args) -> None:
    d = _maybe_screen(_load_dataset(args), args)
    cfg = _engine_config(args)
    result = select(d, cfg, workers=resolve_workers(args.workers))
    _emit(result.to_json_dict(), args, "selection", score_table_csv(result.score_table, d))


def _cmd_tune(args) -> None:
    d = _maybe_screen(_load_dataset(args), args)
    grid = args.s_grid if args.s_grid is not None else _s_list(args.file_config.get("s_grid", ""))
    if not grid:
        raise ValueError("--s-grid is required (flag or config file)")
    report = tune(
        d,
        grid,
        m=_resolve(args, "m", 5000, int),
        seed=_resolve(args, "seed", 42, int),
        display_count=_resolve(args, "display_count", 40, int),
        drop_factor=_resolve(args, "drop_factor", 3.0, float),
        workers=resolve_workers(args.workers),
    )
    doc = report_to_json_dict(report)
    doc["config"] = {
        "s_grid": grid,
        "m": _resolve(args, "m", 5000, int),
        "seed": _resolve(args, "seed", 42, int),
        "display_count": _resolve(args, "display_count", 40, int),
        "drop_factor": _resolve(args, "drop_factor", 3.0, float),
    }
    if args.out:
        emit_panels(report, args.out, scale=_resolve(args, "scale", "both"))
    _emit(doc, args, "tune_report")


def _cmd_mbounds(args) -> None:
    p = _resolve(args, "p", None, int)
    p0 = _resolve(args, "p0", None, int)
    s = _resolve(args, "s", None, int)
    gamma = _resolve(args, "gamma", 0.05, float)
    if p is None or p0 is None or s is None:
        raise ValueError("--p, --p0 and --s are required")
    b = m_bounds(p, p0, s, gamma)
    doc = {
        "alpha_lower": b.alpha_lower,
        "alpha_upper": b.alpha_upper,
        "m_lower": b.lower,
        "m_upper": b.upper,
        "config": {"p": p, "p0": p0, "s": s, "gamma": gamma},
    }
    _emit(doc, args, "mbounds")


def _screen_csvs(res: ScreenResult, d: Dataset) -> tuple[str, str]:
    kept_buf = io.StringIO()
    w = csv.writer(kept_buf)
    w.writerow(["index", "name", "correlation"])
    for j in res.kept:
        w.writerow([d.original_index(j), d.feature_names[j], repr(float(res.correlations[j]))])
    design_buf = io.StringIO()
    w = csv.writer(design_buf)
    if res.reduced is not None:
        w.writerow(res.reduced.feature_names)
        for row in res.reduced.x:
            w.writerow([repr(v) for v in row.tolist()])
    return kept_buf.getvalue(), design_buf.getvalue()


def _cmd_screen(args) -> None:
    top_k = _resolve(args, "top_k", None, int)
    thresh = _resolve(args, "threshold", None, float)
    if (top_k is None) == (thresh is None):
        raise ValueError("exactly one of --top-k / --threshold is required")
    d = _load_dataset(args)
    res = screen_top_k(d, top_k) if top_k is not None else screen_threshold(d, thresh)
    kept_csv, design_csv = _screen_csvs(res, d)
    doc = {
        "rule": res.rule,
        "kept": [
            {
                "index": d.original_index(j),
                "name": d.feature_names[j],
                "correlation": float(res.correlations[j]),
            }
            for j in res.kept
        ],
        "constant_columns": list(res.constant_columns),
        "config": {"seed": _resolve(args, "seed", 42, int)},
    }
    if args.out:
        _write_atomic(Path(args.out) / "screen_design.csv", design_csv)
    _emit(doc, args, "screen_kept", kept_csv)


def _cmd_assure(args) -> None:
    d = _maybe_screen(_load_dataset(args), args)
    s_list = args.s_list if args.s_list is not None else _s_list(args.file_config.get("s_list", ""))
    if not s_list:
        raise ValueError("--s-list is required (flag or config file)")
    if args.s is None:
        args.s = max(s_list)  # per-s runs replace this anyway
    cfg = _engine_config(args)
    result = double_assurance(d, s_list, cfg, workers=resolve_workers(args.workers))
    _emit(result.to_json_dict(), args, "assurance", _scores_csv(result))


def _cmd_combine(args) -> None:
    d = _maybe_screen(_load_dataset(args), args)
    cfg = _engine_config(args)
    workers = resolve_workers(args.workers)
    base = select(d, cfg, workers=workers)
    names = read_feature_list(args.external)
    result = combine_external(d, base, names, cfg, source_tag=os.path.basename(args.external))
    _emit(result.to_json_dict(), args, "combined", _scores_csv(result))


def _capture_csv(table) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["statistic", "k", "value"])
    for k, pct in table.true_capture_cdf.items():
        w.writerow(["captured_at_least", k, repr(pct)])
    for c, nt in table.false_count_histogram.items():
        w.writerow(["false_count", c, nt])
    return buf.getvalue()


def _cmd_simulate(args) -> None:
    scenario = _resolve(args, "scenario", None)
    if scenario not in ("example1", "example2", "null"):
        raise ValueError('--scenario must be "example1", "example2" or "null"')
    p = _resolve(args, "p", 100, int)
    rho = _resolve(args, "rho", 0.0, float)
    sigma = _resolve(args, "sigma", 1.0, float)
    if scenario == "example1":
        spec = make_example1()
    elif scenario == "example2":
        spec = make_example2(p_total=p, rho=rho, sigma=sigma)
    else:
        spec = make_null(p=p, sigma=sigma)
    cfg = _engine_config(args)
    trials = _resolve(args, "trials", 1000, int)
    prescreen_k = _resolve(args, "prescreen_top_k", None, int)
    table = run_trials(
        spec,
        cfg,
        trials,
        prescreen_top_k=prescreen_k,
        workers=resolve_workers(args.workers),
    )
    doc = table.to_json_dict()
    doc["config"] = {
        **{k: v for k, v in vars(cfg).items()},
        "scenario": scenario,
        "p": spec.p,
        "rho": spec.rho,
        "sigma": spec.sigma,
        "trials": trials,
        "prescreen_top_k": prescreen_k,
    }
    _emit(doc, args, "capture_table", _capture_csv(table))


def build_parser() -> _Parser:
    parser = _Parser(prog="swa", description=__doc__)
    parser.add_argument("--version", action="version", version=f"swa {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command")

    sp = sub.add_parser("select",
                        help="run one selection pass on a CSV dataset")
    _add_common(sp); _add_data(sp); _add_engine(sp)
    sp.add_argument("--screen-top-k", type=int, default=None,
                    help="prescreen: keep k columns by |correlation|")
    sp.add_argument("--screen-threshold", type=float, default=None,
                    help="prescreen: keep columns with |correlation| >= r")
    sp.set_defaults(func=_cmd_select)

    sp = sub.add_parser("tune",
                        help="recommend a subsample size from weight curves")
    _add_common(sp); _add_data(sp)
    sp.add_argument("--s-grid", type=_s_list, default=None,
                    help="comma-separated candidate sizes, e.g. 5,8,10,15")
    sp.add_argument("--m", type=int, default=None)
    sp.add_argument("--display-count", type=int, default=None)
    sp.add_argument("--drop-factor", type=float, default=None)
    sp.add_argument("--scale", choices=("fixed", "free", "both"), default=None)
    sp.add_argument("--screen-top-k", type=int, default=None)
    sp.add_argument("--screen-threshold", type=float, default=None)
    sp.set_defaults(func=_cmd_tune)

    sp = sub.add_parser("mbounds",
                        help="bracket the subsample count needed for full capture")
    _add_common(sp)
    sp.add_argument("--p", type=int, default=None)
    sp.add_argument("--p0", type=int, default=None)
    sp.add_argument("--s", type=int, default=None)
    sp.add_argument("--gamma", type=float, default=None)
    sp.set_defaults(func=_cmd_mbounds)

    sp = sub.add_parser("screen",
                        help="marginal-correlation prescreening")
    _add_common(sp); _add_data(sp)
    sp.add_argument("--top-k", type=int, default=None)
    sp.add_argument("--threshold", type=float, default=None)
    sp.set_defaults(func=_cmd_screen)

    sp = sub.add_parser("assure",
                        help="union finalists across several s values and refit")
    _add_common(sp); _add_data(sp); _add_engine(sp, require_s=False)
    sp.add_argument("--s-list", type=_s_list, default=None,
                    help="comma-separated s values, e.g. 10,15,20")
    sp.add_argument("--screen-top-k", type=int, default=None)
    sp.add_argument("--screen-threshold", type=float, default=None)
    sp.set_defaults(func=_cmd_assure)

    sp = sub.add_parser("combine",
                        help="combine selection finalists with an external feature list")
    _add_common(sp); _add_data(sp); _add_engine(sp)
    sp.add_argument("--external", required=True,
                    help="text file with one feature name per line")
    sp.add_argument("--screen-top-k", type=int, default=None)
    sp.add_argument("--screen-threshold", type=float, default=None)
    sp.set_defaults(func=_cmd_combine)

    sp = sub.add_parser("simulate",
                        help="Monte-Carlo detection/false-alarm tables")
    _add_common(sp); _add_engine(sp)
    sp.add_argument("--scenario", choices=("example1", "example2", "null"), default=None)
    sp.add_argument("--p", type=int, default=None, help="total feature count (example2/null)")
    sp.add_argument("--rho", type=float, default=None, help="AR correlation of the leading block")
    sp.add_argument("--sigma", type=float, default=None, help="noise standard deviation")
    sp.add_argument("--trials", type=int, default=None)
    sp.add_argument("--prescreen-top-k", type=int, default=None)
    sp.set_defaults(func=_cmd_simulate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "command", None):
            parser.print_usage(sys.stderr)
            return USAGE_EXIT
        args.file_config = _load_config_file(args.config)
        if args.format is None:
            args.format = args.file_config.get("format", "json")
        args.func(args)
        return 0
    except SystemExit as exc:
        return int(exc.code or 0)
    except DataError as exc:
        print(f"swa: data error: {exc}", file=sys.stderr)
        return DATA_EXIT
    except (NumericalError, FloatingPointError) as exc:
        print(f"swa: numerical error: {exc}", file=sys.stderr)
        return NUMERIC_EXIT
    except SwaError as exc:
        print(f"swa: error: {exc}", file=sys.stderr)
        return DATA_EXIT
    except ValueError as exc:
        print(f"swa: invalid arguments: {exc}", file=sys.stderr)
        return USAGE_EXIT


if __name__ == "__main__":
    sys.exit(main())
