"""Recall scoring: classic R@n,IoU@m and its boundary-discounted variant.

R@n,IoU@m is the fraction of queries where at least one of the top-n
candidates reaches IoU >= m with the ground truth. The discounted variant
multiplies each hit by (1 - |start error|) * (1 - |end error|) in
normalized time, so a sloppy hit that clears a small IoU bar no longer
counts for a full point:

    dR@n,IoU@m = (100 / N_q) * sum_i r(n, m, q_i) * alpha_s_i * alpha_e_i

The discount comes from the highest-ranked candidate that clears the IoU
bar, which reduces to the plain definition at n = 1.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .annotations import DatasetTable
from ._io import dumps_canonical
from .errors import PredictionFormatError

Interval = tuple[float, float]


def iou(a: Interval, b: Interval) -> float:
    """Intersection-over-union of two 1D intervals; 0 when the union is empty."""
    if a[0] > a[1] or b[0] > b[1]:
        raise ValueError(f"invalid interval: {a if a[0] > a[1] else b}")
    inter = min(a[1], b[1]) - max(a[0], b[0])
    if inter <= 0.0:
        return 0.0
    union = max(a[1], b[1]) - min(a[0], b[0])
    if union <= 0.0:
        return 0.0
    return inter / union


def hit_and_discount(
    ranked_preds: Sequence[Interval], gt: Interval, n: int, m: float
) -> tuple[int, float, float]:
    """(r, alpha_s, alpha_e) for one query at one (n, m).

    r = 1 iff any of the first n candidates has IoU >= m with gt; the
    discounts come from the highest-ranked qualifying candidate. On a miss
    the discounts are (0, 0) by convention (the contribution is zero anyway).
    """
    for cand in ranked_preds[:n]:
        if iou(cand, gt) >= m:
            alpha_s = 1.0 - abs(cand[0] - gt[0])
            alpha_e = 1.0 - abs(cand[1] - gt[1])
            return 1, alpha_s, alpha_e
    return 0, 0.0, 0.0


@dataclass
class PredictionSet:
    """Ranked candidate moments per pair_id, rank 1 first, normalized time."""

    candidates: dict[str, list[Interval]]

    def __post_init__(self) -> None:
        for pid, cands in self.candidates.items():
            for c in cands:
                if not (0.0 <= c[0] <= c[1] <= 1.0):
                    raise PredictionFormatError(
                        f"pair {pid!r}: candidate {c} outside 0 <= s <= e <= 1"
                    )

    def __len__(self) -> int:
        return len(self.candidates)

    def get(self, pair_id: str) -> list[Interval]:
        return self.candidates.get(pair_id, [])


@dataclass
class ScoreReport:
    """Metric values in [0, 100] keyed (kind, n, m, split) plus diagnostics."""

    entries: dict[tuple[str, int, float, str], float]
    n_q: dict[str, int]
    missing_predictions: dict[str, int] = field(default_factory=dict)
    unknown_pair_ids: list[str] = field(default_factory=list)

    def value(self, kind: str, n: int, m: float, split: str = "all") -> float:
        return self.entries[(kind, n, m, split)]

    def splits(self) -> list[str]:
        return sorted(self.n_q)

    def to_document(self) -> dict:
        splits_doc: dict[str, dict] = {}
        for split in self.splits():
            metrics = {}
            for (kind, n, m, s), v in self.entries.items():
                if s == split:
                    metrics[f"{kind}@{n},IoU={m:g}"] = round(v, 2)
            splits_doc[split] = {
                "n_q": self.n_q[split],
                "missing_predictions": self.missing_predictions.get(split, 0),
                "metrics": dict(sorted(metrics.items())),
            }
        return {
            "kind": "score-report",
            "splits": splits_doc,
            "unknown_pair_ids": sorted(self.unknown_pair_ids),
        }

    def to_json(self) -> str:
        return dumps_canonical(self.to_document()) + "\n"


def evaluate(
    predictions: PredictionSet,
    ground_truth_table: DatasetTable,
    n_list: Iterable[int],
    m_list: Iterable[float],
    split_map: Mapping[str, str] | None = None,
) -> ScoreReport:
    """Score every requested (n, m) pair, optionally per split.

    Ground-truth pairs with no prediction record count as misses and are
    tallied in missing_predictions. Prediction records whose pair_id is
    not in the table are collected in unknown_pair_ids and ignored.
    """
    n_values = sorted(set(int(n) for n in n_list))
    m_values = sorted(set(float(m) for m in m_list))
    if not n_values or not m_values:
        raise ValueError("n_list and m_list must be non-empty")

    table_ids = {p.pair_id for p in ground_truth_table.pairs}
    unknown = sorted(set(predictions.candidates) - table_ids)

    def split_of(pid: str) -> str | None:
        if split_map is None:
            return "all"
        return split_map.get(pid)

    sums_r: dict[tuple[str, int, float], float] = {}
    sums_dr: dict[tuple[str, int, float], float] = {}
    n_q: dict[str, int] = {}
    missing: dict[str, int] = {}

    for pair in ground_truth_table.pairs:
        split = split_of(pair.pair_id)
        if split is None:
            continue
        n_q[split] = n_q.get(split, 0) + 1
        preds = predictions.get(pair.pair_id)
        if not preds:
            missing[split] = missing.get(split, 0) + 1
        gt = (pair.start_norm, pair.end_norm)
        for n in n_values:
            for m in m_values:
                r, a_s, a_e = hit_and_discount(preds, gt, n, m)
                key = (split, n, m)
                sums_r[key] = sums_r.get(key, 0.0) + r
                sums_dr[key] = sums_dr.get(key, 0.0) + r * a_s * a_e

    entries: dict[tuple[str, int, float, str], float] = {}
    for split, count in n_q.items():
        for n in n_values:
            for m in m_values:
                key = (split, n, m)
                r_val = 100.0 * sums_r.get(key, 0.0) / count
                dr_val = 100.0 * sums_dr.get(key, 0.0) / count
                assert dr_val <= r_val + 1e-12
                entries[("R", n, m, split)] = r_val
                entries[("dR", n, m, split)] = dr_val

    return ScoreReport(
        entries=entries,
        n_q=n_q,
        missing_predictions=missing,
        unknown_pair_ids=unknown,
    )


def write_predictions(preds: PredictionSet) -> str:
    """One record per line: pair_id plus the ranked candidate list."""
    lines = []
    for pid in sorted(preds.candidates):
        rec = {
            "pair_id": pid,
            "candidates": [[s, e] for s, e in preds.candidates[pid]],
            "unit": "norm",
        }
        lines.append(json.dumps(rec, ensure_ascii=False, sort_keys=True))
    return "\n".join(lines) + ("\n" if lines else "")


def read_predictions(
    text: str, table: DatasetTable | None = None
) -> PredictionSet:
    """Parse prediction records; per-record "unit" may be "norm" (default)
    or "seconds", the latter divided by the pair's duration and clamped."""
    candidates: dict[str, list[Interval]] = {}
    for idx, line in enumerate(text.splitlines()):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise PredictionFormatError(
                f"prediction record {idx + 1}: invalid JSON: {exc}"
            ) from None
        if "pair_id" not in rec or "candidates" not in rec:
            raise PredictionFormatError(
                f"prediction record {idx + 1}: needs pair_id and candidates"
            )
        pid = str(rec["pair_id"])
        if pid in candidates:
            raise PredictionFormatError(
                f"prediction record {idx + 1}: duplicate pair_id {pid!r}"
            )
        unit = rec.get("unit", "norm")
        if unit not in ("norm", "seconds"):
            raise PredictionFormatError(
                f"prediction record {idx + 1}: unknown unit {unit!r}"
            )
        cands: list[Interval] = []
        for c in rec["candidates"]:
            if len(c) != 2:
                raise PredictionFormatError(
                    f"prediction record {idx + 1}: candidate {c} is not a pair"
                )
            s, e = float(c[0]), float(c[1])
            if unit == "seconds":
                if table is None or table.get(pid) is None:
                    raise PredictionFormatError(
                        f"prediction record {idx + 1}: unit 'seconds' needs the "
                        f"ground-truth table to resolve duration of {pid!r}"
                    )
                dur = table.get(pid).duration_s
                s, e = s / dur, e / dur
                s = min(max(s, 0.0), 1.0)
                e = min(max(e, 0.0), 1.0)
            if e < s:
                raise PredictionFormatError(
                    f"prediction record {idx + 1}: candidate {c} has start > end"
                )
            cands.append((s, e))
        candidates[pid] = cands
    return PredictionSet(candidates=candidates)
