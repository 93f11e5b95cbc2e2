"""Confirmation add-ons: multi-s double assurance and external combination.

Double assurance unions the finalists from several subsample sizes and
confirms the union with one more least-squares fit; the combination variant
does the same with a feature list produced elsewhere (e.g. by a penalized
procedure).  The multiplicity divisor for the confirmatory fit is the size
of the union.
"""

from __future__ import annotations

import dataclasses

from . import ols
from .dataset import Dataset
from .engine import FeatureResult, SelectionResult, SwaConfig, adjust, select
from .errors import DataError
from .streams import GRID_STREAM, child_seed

__all__ = ["double_assurance", "combine_external", "read_feature_list"]


def _confirmatory_fit(
    d: Dataset,
    candidates: list[int],
    cfg: SwaConfig,
    table=None,
) -> tuple[tuple[FeatureResult, ...], tuple[dict, ...]]:
    """Refit y on the candidate columns and keep the adjusted-significant ones."""
    if not candidates:
        return (), ()
    if cfg.stepwise_final:
        f = ols.stepwise_backward(d, candidates, threshold=cfg.alpha, intercept=cfg.intercept)
    else:
        f = ols.fit(d, candidates, intercept=cfg.intercept)
    p_adj = adjust(f.p_values, cfg.adjustment, len(candidates))
    finalists = [
        FeatureResult(
            index=d.original_index(int(c)),
            name=d.feature_names[int(c)],
            coefficient=float(f.coefficients[i]),
            t=float(f.t_values[i]),
            p_raw=float(f.p_values[i]),
            p_adjusted=float(p_adj[i]),
        )
        for i, c in enumerate(f.columns)
        if p_adj[i] <= cfg.alpha
    ]
    finalists.sort(key=lambda r: r.index)
    details = tuple(
        {
            "index": d.original_index(int(c)),
            "name": d.feature_names[int(c)],
            **(
                {"w": float(table.w[int(c)]), "s_count": int(table.s_count[int(c)])}
                if table is not None
                else {}
            ),
        }
        for c in candidates
    )
    return tuple(finalists), details


def _to_local(d: Dataset, original_indices) -> list[int]:
    back = {d.original_index(j): j for j in range(d.p)}
    out = []
    for idx in original_indices:
        if idx not in back:
            raise DataError(f"feature index {idx} not present in this dataset view")
        out.append(back[idx])
    return out


def double_assurance(
    d: Dataset, s_values, cfg: SwaConfig, workers: int = 1
) -> SelectionResult:
    """Union the finalists over several subsample sizes, then refit once.

    Each s runs a full selection pass on its own substream of the master
    seed.  Provenance records every contributing s and its finalists.
    """
    svals = sorted({int(s) for s in s_values})
    if not svals:
        raise ValueError("s_values must be nonempty")

    per_s: dict[int, SelectionResult] = {}
    for s in svals:
        sub = dataclasses.replace(cfg, s=s, seed=child_seed(cfg.seed, GRID_STREAM, s))
        per_s[s] = select(d, sub, workers)

    union = sorted({idx for r in per_s.values() for idx in r.finalist_indices()})
    candidates = _to_local(d, union)
    primary = per_s[max(svals)]
    finalists, details = _confirmatory_fit(d, candidates, cfg, primary.score_table)
    return SelectionResult(
        finalists=finalists,
        semifinalists=tuple(union),
        semifinalist_details=details,
        score_table=primary.score_table,
        config=cfg,
        dataset_fingerprint=d.fingerprint(),
        provenance={
            "mode": "double_assurance",
            "s_values": svals,
            "per_s_finalists": {str(s): list(r.finalist_indices()) for s, r in per_s.items()},
            "adjust_divisor": len(union),
        },
    )


def combine_external(
    d: Dataset,
    swa_result: SelectionResult,
    external_features,
    cfg: SwaConfig,
    source_tag: str = "external",
) -> SelectionResult:
    """Union the selection finalists with an externally produced feature list.

    External features are given by name and must resolve to dataset columns;
    unresolved names abort with the full list of offenders.
    """
    names = list(external_features)
    name_to_col = {nm: j for j, nm in enumerate(d.feature_names)}
    missing = [nm for nm in names if nm not in name_to_col]
    if missing:
        raise DataError(f"unknown feature names: {', '.join(sorted(set(missing)))}")
    external_local = [name_to_col[nm] for nm in names]
    external_original = {d.original_index(j) for j in external_local}

    union = sorted(set(swa_result.finalist_indices()) | external_original)
    candidates = _to_local(d, union)
    finalists, details = _confirmatory_fit(d, candidates, cfg, swa_result.score_table)

    return SelectionResult(
        finalists=finalists,
        semifinalists=tuple(union),
        semifinalist_details=details,
        score_table=swa_result.score_table,
        config=cfg,
        dataset_fingerprint=d.fingerprint(),
        provenance={
            "mode": "combine_external",
            "source": source_tag,
            "external_count": len(set(external_local)),
            "swa_finalists": list(swa_result.finalist_indices()),
            "adjust_divisor": len(union),
        },
    )


def read_feature_list(path) -> list[str]:
    """Read a one-name-per-line feature file (blank lines and # comments skipped)."""
    out = []
    with open(path) as fh:
        for line in fh:
            name = line.strip()
            if name and not name.startswith("#"):
                out.append(name)
    return out
