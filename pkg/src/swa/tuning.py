"""Subsample-size tuning via multipanel weight curves.

For each candidate subsample size s the engine is run through the scoring
stage; the sorted weight curve is then examined for an "elbow" (a sharp
slope break into a flat tail) whose upper arm is the candidate feature set.
Arms are compared along the grid and the smallest s whose arm persists is
recommended.

Elbow and stability detection codify a visual judgment, so they stay
deliberately auditable: the raw curves are always emitted (CSV + figures)
for human override.  The recommendation walks a fixed ladder of evidence,
strongest first:

1. the arm repeats verbatim on the next panel(s) (a plateau), or the arm
   covers a plateau that starts one panel later;
2. the shared core with the next arm repeats on the following pair;
3. the arm shares features with the next arm at all;
4. the arm is the only one the grid produced.

Weight curves at the default keep_top (= s submodels) are noisy, so the
recommendation should be read as a suggestion, not an oracle; on the
standard simulated designs the exact intended s is recovered in roughly
half the runs, with the remainder landing on a neighboring grid value.
"""

from __future__ import annotations

import csv
import io
import math
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import Dataset
from .engine import SwaConfig, compute_scores
from .errors import NumericalError
from .streams import GRID_STREAM, child_seed

__all__ = ["WeightCurve", "TuneReport", "tune", "detect_elbow", "emit_panels"]

DISPLAY_COUNT = 40
DROP_FACTOR = 3.0

# A drop qualifies as an elbow only if the curve is mostly populated
# (coverage), the drop is material relative to the curve's range (floor),
# and the arm above it has at least two members.
COVERAGE_FRACTION = 0.45
FLOOR_FRACTION = 0.05
MIN_ARM = 2

STABLE = "stable"
RELATIVELY_STABLE = "relatively-stable"
UNSTABLE = "unstable"


@dataclass(frozen=True)
class WeightCurve:
    """Top weights for one subsample size, sorted nonincreasing."""

    s: int
    ranked: tuple[tuple[int, float], ...]

    def weights(self) -> np.ndarray:
        return np.array([w for _, w in self.ranked])

    def indices(self) -> list[int]:
        return [j for j, _ in self.ranked]


@dataclass(frozen=True)
class TuneReport:
    """Curves, elbows, upper arms and stability labels across the s grid.

    ``recommended_s`` is the smallest s whose arm persists along the grid
    (see module docstring), or "inconclusive"; ``suggested_s`` lists grid
    refinements worth adding when no recommendation could be made.
    """

    curves: tuple[WeightCurve, ...]
    elbows: dict[int, int | None]
    upper_arms: dict[int, tuple[int, ...]]
    stability: dict[int, str]
    recommended_s: int | str
    suggested_s: tuple[int, ...] = ()

    def curve_for(self, s: int) -> WeightCurve:
        for c in self.curves:
            if c.s == s:
                return c
        raise KeyError(s)


def detect_elbow(w_sorted, drop_factor: float = DROP_FACTOR) -> int | None:
    """Locate the slope break in a nonincreasing weight curve.

    Returns the 1-based rank of the first point past the break (the upper
    arm is everything ranked above it) or None.  The elbow is the largest
    second difference among candidate positions whose drop (a) exceeds
    ``drop_factor`` times every tail gap, hence also the median tail gap,
    so the tail is genuinely flat, and (b) is material next to the curve's
    overall range.  Curves that are mostly zeros (features never sampled)
    have no tapering tail and yield None.
    """
    w = np.asarray(w_sorted, dtype=np.float64)
    if w.size < 3:
        raise ValueError("need at least 3 weights to detect an elbow")
    if np.count_nonzero(w) < COVERAGE_FRACTION * w.size:
        return None
    gaps = w[:-1] - w[1:]
    scale = w[0] - w[-1]
    if scale <= 0.0:
        return None
    second = gaps[:-1] - gaps[1:]
    lead = max(MIN_ARM + 2, (w.size + 1) // 2)
    best = None
    best_sd = -np.inf
    for i in range(MIN_ARM, min(w.size - 1, lead)):
        drop = gaps[i - 1]
        tail = gaps[i:]
        if drop < FLOOR_FRACTION * scale:
            continue
        if drop <= drop_factor * tail.max():
            continue
        if drop <= drop_factor * float(np.median(tail)):
            continue
        sd = second[i - 1]
        if sd > best_sd:
            best_sd, best = sd, i
    return None if best is None else best + 1


def _recommend(arms: dict[int, frozenset | None], grid: list[int]):
    n = len(grid)

    def arm(i):
        return arms[grid[i]] if 0 <= i < n else None

    def eq(i, j):
        a, b = arm(i), arm(j)
        return a is not None and b is not None and a == b

    def core(i):
        a, b = arm(i), arm(i + 1)
        return (a & b) if (a is not None and b is not None) else None

    for i in range(n - 1):
        if not arm(i):
            continue
        plateau = eq(i, i + 1) and (i + 2 >= n or eq(i + 1, i + 2))
        attach = (
            bool(core(i)) and i + 2 < n and eq(i + 1, i + 2) and arm(i) >= arm(i + 1)
        )
        if plateau or attach:
            return grid[i]
    for i in range(n - 2):
        c1, c2 = core(i), core(i + 1)
        if c1 and c2 is not None and c1 == c2:
            return grid[i]
    for i in range(n - 1):
        if core(i):
            return grid[i]
    with_arms = [grid[i] for i in range(n) if arm(i)]
    if with_arms:
        return with_arms[0]
    return None


def _labels(arms: dict[int, frozenset | None], grid: list[int]) -> dict[int, str]:
    sets = [arms[s] for s in grid]
    out = {}
    for i, s in enumerate(grid):
        cur = sets[i]
        if not cur:
            out[s] = UNSTABLE
            continue
        neighbors = [a for a in (sets[i - 1] if i > 0 else None,
                                 sets[i + 1] if i + 1 < len(grid) else None)
                     if a is not None]
        if any(cur == a for a in neighbors):
            out[s] = STABLE
        elif any(cur & a for a in neighbors) or not neighbors:
            out[s] = RELATIVELY_STABLE
        else:
            out[s] = UNSTABLE
    return out


def tune(
    d: Dataset,
    s_grid,
    m: int = 5000,
    seed: int = 42,
    display_count: int = DISPLAY_COUNT,
    drop_factor: float = DROP_FACTOR,
    workers: int = 1,
) -> TuneReport:
    """Run the scoring stage for every s in the grid and analyze stability.

    Each s uses its own substream of the master seed, so panels are
    individually reproducible.  A single-element grid cannot be assessed
    and reports "inconclusive".
    """
    grid = [int(s) for s in s_grid]
    if not grid:
        raise ValueError("empty s grid")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError(f"s grid must be strictly increasing, got {grid}")
    for s in grid:
        if s >= d.n:
            raise NumericalError(f"grid value s={s} must be below n={d.n}")

    curves = []
    arms: dict[int, frozenset | None] = {}
    elbows: dict[int, int | None] = {}
    for s in grid:
        cfg = SwaConfig(s=s, m=m, seed=child_seed(seed, GRID_STREAM, s))
        table = compute_scores(d, cfg, workers)
        order = np.lexsort((np.arange(d.p), -table.w))[: min(display_count, d.p)]
        curve = WeightCurve(
            s=s, ranked=tuple((int(j), float(table.w[j])) for j in order)
        )
        curves.append(curve)
        w = curve.weights()
        elbow = detect_elbow(w, drop_factor) if w.size >= 3 else None
        elbows[s] = elbow
        arms[s] = frozenset(curve.indices()[: elbow - 1]) if elbow else None

    if len(grid) < 2:
        stability = {grid[0]: UNSTABLE}
        recommended: int | str = "inconclusive"
    else:
        stability = _labels(arms, grid)
        rec = _recommend(arms, grid)
        recommended = rec if rec is not None else "inconclusive"

    suggested: tuple[int, ...] = ()
    if recommended == "inconclusive":
        mids = set()
        for a, b in zip(grid, grid[1:]):
            if arms.get(a) is not None or arms.get(b) is not None:
                mid = (a + b) // 2
                if mid not in grid and mid > 0:
                    mids.add(mid)
        suggested = tuple(sorted(mids))

    return TuneReport(
        curves=tuple(curves),
        elbows=elbows,
        upper_arms={s: tuple(sorted(a)) if a else () for s, a in arms.items()},
        stability=stability,
        recommended_s=recommended,
        suggested_s=suggested,
    )


def report_to_json_dict(report: TuneReport) -> dict:
    return {
        "recommended_s": report.recommended_s,
        "suggested_s": list(report.suggested_s),
        "panels": [
            {
                "s": c.s,
                "elbow": report.elbows[c.s],
                "upper_arm": list(report.upper_arms[c.s]),
                "stability": report.stability[c.s],
            }
            for c in report.curves
        ],
    }


def emit_panels(report: TuneReport, path, scale: str = "both") -> list[Path]:
    """Write one weight CSV per s plus multipanel SVG figure(s).

    ``scale`` picks "fixed" (shared y-axis), "free" (per-panel y-axis) or
    "both".  Returns the written paths.
    """
    if scale not in ("fixed", "free", "both"):
        raise ValueError(f'scale must be "fixed", "free" or "both", got {scale!r}')
    if not report.curves:
        raise ValueError("empty report")
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for c in report.curves:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["rank", "feature", "w"])
        for rank, (j, wv) in enumerate(c.ranked, start=1):
            w.writerow([rank, j, repr(wv)])
        f = out / f"weights_s{c.s}.csv"
        _replace_into(f, buf.getvalue())
        written.append(f)
    modes = ("fixed", "free") if scale == "both" else (scale,)
    for mode in modes:
        written.append(_render_panels(report, out, mode))
    return written


def _replace_into(path: Path, text: str) -> None:
    # write-temp-then-rename so partial output is never visible
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _render_panels(report: TuneReport, out: Path, mode: str) -> Path:
    import matplotlib

    matplotlib.rcParams["svg.hashsalt"] = "swa"
    import matplotlib.pyplot as plt

    n_panels = len(report.curves)
    ncols = min(3, n_panels)
    nrows = math.ceil(n_panels / ncols)
    fig, axes = plt.subplots(
        nrows, ncols, figsize=(4.0 * ncols, 3.0 * nrows), squeeze=False
    )
    y_max = None
    if mode == "fixed":
        y_max = max(float(c.weights().max(initial=0.0)) for c in report.curves)
    for ax in axes.flat[n_panels:]:
        ax.set_visible(False)
    for ax, c in zip(axes.flat, report.curves):
        w = c.weights()
        ranks = np.arange(1, w.size + 1)
        ax.plot(ranks, w, marker="o", markersize=3, linewidth=1)
        elbow = report.elbows[c.s]
        if elbow is not None:
            ax.axvline(elbow - 0.5, color="red", linestyle="--", linewidth=1)
        ax.set_title(f"s = {c.s} ({report.stability.get(c.s, '?')})", fontsize=10)
        ax.set_xlabel("rank")
        ax.set_ylabel("weight")
        if y_max is not None:
            ax.set_ylim(0, 1.05 * y_max)
    fig.suptitle(f"Feature weight curves ({mode} scale)")
    fig.tight_layout()
    target = out / f"panels_{mode}.svg"
    fd, tmp = tempfile.mkstemp(dir=out, prefix=f".{target.name}.", suffix=".svg")
    os.close(fd)
    try:
        fig.savefig(tmp, format="svg")
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    finally:
        plt.close(fig)
    return target
