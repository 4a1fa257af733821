"""Changing-distribution re-splitting of an aggregated pair table.

Pipeline: fit a KDE on every pair's normalized (start, end) point, rank
pairs by density, peel off the lowest-density fifth as the preliminary
out-of-distribution test set, optionally pull overlong moments back into
training, resolve videos that straddle the boundary, then carve
train/val/test-iid out of the remainder video-by-video.

All stages are deterministic given the seed; the resulting split file is
byte-identical across reruns.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .annotations import DatasetTable
from ._io import dumps_canonical
from .errors import SplitError, StructureError
from .kde import BandwidthRule, KdeModel, density_many, fit_kde

SPLIT_NAMES = ("train", "val", "test-iid", "test-ood")


def round_half_away(x: float) -> int:
    """round() with halves away from zero (2.5 -> 3), for set sizing."""
    return int(math.floor(x + 0.5)) if x >= 0 else -int(math.floor(-x + 0.5))


@dataclass(frozen=True)
class ResplitConfig:
    ood_fraction: float = 0.20
    remainder_fractions: tuple[float, float, float] = (0.70, 0.05, 0.05)
    long_moment_threshold: float | None = None  # 0.5 in activitynet mode
    seed: int = 0
    bandwidth_rule: BandwidthRule = "scott"

    def __post_init__(self) -> None:
        total = self.ood_fraction + sum(self.remainder_fractions)
        if abs(total - 1.0) > 1e-9:
            raise SplitError(f"fractions must sum to 1, got {total}")
        if self.long_moment_threshold is not None and not (
            0.0 < self.long_moment_threshold <= 1.0
        ):
            raise SplitError(
                f"long_moment_threshold must be in (0, 1], got "
                f"{self.long_moment_threshold}"
            )

    def to_dict(self) -> dict:
        rule = self.bandwidth_rule
        return {
            "ood_fraction": self.ood_fraction,
            "remainder_fractions": list(self.remainder_fractions),
            "long_moment_threshold": self.long_moment_threshold,
            "seed": self.seed,
            "bandwidth_rule": rule if isinstance(rule, str) else list(rule),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ResplitConfig":
        rule = doc["bandwidth_rule"]
        return cls(
            ood_fraction=float(doc["ood_fraction"]),
            remainder_fractions=tuple(float(f) for f in doc["remainder_fractions"]),
            long_moment_threshold=(
                None
                if doc["long_moment_threshold"] is None
                else float(doc["long_moment_threshold"])
            ),
            seed=int(doc["seed"]),
            bandwidth_rule=rule if isinstance(rule, str) else (rule[0], rule[1]),
        )


@dataclass
class SplitAssignment:
    """pair_id -> split name, plus provenance for the split file."""

    assignment: dict[str, str]
    meta: dict = field(default_factory=dict)

    def ids(self, split: str) -> list[str]:
        if split not in SPLIT_NAMES:
            raise SplitError(f"unknown split {split!r}")
        return sorted(pid for pid, s in self.assignment.items() if s == split)

    def to_document(self) -> dict:
        return {
            "kind": "split-assignment",
            "toolkit_version": self.meta.get("toolkit_version", __version__),
            "config": self.meta.get("config"),
            "bandwidth": self.meta.get("bandwidth"),
            "kde": self.meta.get("kde"),
            "counts": self.meta.get("counts"),
            "ood_fraction_actual": self.meta.get("ood_fraction_actual"),
            "warnings": self.meta.get("warnings", []),
            "splits": {name: self.ids(name) for name in SPLIT_NAMES},
        }

    def to_json(self) -> str:
        return dumps_canonical(self.to_document()) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "SplitAssignment":
        doc = json.loads(text)
        if doc.get("kind") != "split-assignment":
            raise StructureError("not a split-assignment document")
        assignment: dict[str, str] = {}
        for name in SPLIT_NAMES:
            for pid in doc["splits"][name]:
                if pid in assignment:
                    raise StructureError(f"pair {pid!r} listed in two splits")
                assignment[pid] = name
        meta = {
            "toolkit_version": doc.get("toolkit_version"),
            "config": doc.get("config"),
            "bandwidth": doc.get("bandwidth"),
            "kde": doc.get("kde"),
            "counts": doc.get("counts"),
            "ood_fraction_actual": doc.get("ood_fraction_actual"),
            "warnings": doc.get("warnings", []),
        }
        return cls(assignment=assignment, meta=meta)


def rank_by_density(
    table: DatasetTable, kde_model: KdeModel, threads: int = 1
) -> list[str]:
    """pair_ids sorted ascending by density; ties break on pair_id."""
    pairs = table.pairs
    pts = np.array([(p.start_norm, p.end_norm) for p in pairs], dtype=np.float64)
    dens = density_many(kde_model, pts, threads=threads)
    order = sorted(range(len(pairs)), key=lambda i: (dens[i], pairs[i].pair_id))
    return [pairs[i].pair_id for i in order]


def preliminary_ood(
    ranked_ids: list[str], ood_fraction: float
) -> tuple[set[str], set[str]]:
    """Lowest-density slice becomes the preliminary OOD set."""
    n_q = len(ranked_ids)
    if n_q < 10:
        raise SplitError("dataset too small to split")
    k = round_half_away(ood_fraction * n_q)
    return set(ranked_ids[:k]), set(ranked_ids[k:])


def apply_long_moment_rule(
    ood_ids: set[str], train_ids: set[str], table: DatasetTable, threshold: float
) -> tuple[set[str], set[str]]:
    """Move pairs whose normalized duration strictly exceeds the threshold
    into the preliminary training set."""
    moved = {
        pid
        for pid in ood_ids
        if table.get(pid) is not None and table.get(pid).norm_duration > threshold
    }
    return ood_ids - moved, train_ids | moved


def eliminate_conflicts(
    ood_ids: set[str],
    train_ids: set[str],
    table: DatasetTable,
    pinned_train_videos: set[str] = frozenset(),
) -> tuple[set[str], set[str]]:
    """Give every straddling video wholly to the side holding its majority.

    Ties go to training. Videos in pinned_train_videos (those carrying a
    long-moment pair) always resolve to training, keeping the long-moment
    rule intact. With two sets one pass reaches the fixed point.
    """
    by_video: dict[str, list[str]] = {}
    for p in table.pairs:
        by_video.setdefault(p.video_id, []).append(p.pair_id)

    ood = set(ood_ids)
    train = set(train_ids)
    for video, pids in by_video.items():
        in_ood = [pid for pid in pids if pid in ood]
        in_train = [pid for pid in pids if pid in train]
        if not in_ood or not in_train:
            if in_ood and video in pinned_train_videos:
                ood.difference_update(in_ood)
                train.update(in_ood)
            continue
        to_train = (
            video in pinned_train_videos
            or len(in_train) >= len(in_ood)
        )
        if to_train:
            ood.difference_update(in_ood)
            train.update(in_ood)
        else:
            train.difference_update(in_train)
            ood.update(in_train)
    return ood, train


def partition_remainder(
    prelim_train: set[str],
    table: DatasetTable,
    remainder_fractions: tuple[float, float, float],
    seed: int,
    total_pairs: int | None = None,
) -> tuple[set[str], set[str], set[str]]:
    """Shuffle remainder videos, greedily fill val then test-iid to their
    pair-count targets (fractions of the whole table), rest to train."""
    if total_pairs is None:
        total_pairs = len(table)
    by_video: dict[str, list[str]] = {}
    for p in table.pairs:
        if p.pair_id in prelim_train:
            by_video.setdefault(p.video_id, []).append(p.pair_id)
    videos = sorted(by_video)
    if len(videos) < 3:
        raise SplitError(f"need at least 3 videos to partition, got {len(videos)}")

    rng = np.random.default_rng(seed)
    order = rng.permutation(len(videos))

    _, val_frac, iid_frac = remainder_fractions
    val_target = round_half_away(val_frac * total_pairs)
    iid_target = round_half_away(iid_frac * total_pairs)

    train: set[str] = set()
    val: set[str] = set()
    iid: set[str] = set()
    val_count = 0
    iid_count = 0
    for i in order:
        pids = by_video[videos[i]]
        if val_count < val_target:
            val.update(pids)
            val_count += len(pids)
        elif iid_count < iid_target:
            iid.update(pids)
            iid_count += len(pids)
        else:
            train.update(pids)
    return train, val, iid


def resplit(
    table: DatasetTable, config: ResplitConfig, threads: int = 1
) -> SplitAssignment:
    """Full pipeline; see module docstring for stage order."""
    points = [(p.start_norm, p.end_norm) for p in table.pairs]
    model = fit_kde(points, config.bandwidth_rule)
    ranked = rank_by_density(table, model, threads=threads)
    ood, train = preliminary_ood(ranked, config.ood_fraction)

    pinned: set[str] = set()
    if config.long_moment_threshold is not None:
        ood, train = apply_long_moment_rule(
            ood, train, table, config.long_moment_threshold
        )
        pinned = {
            p.video_id
            for p in table.pairs
            if p.norm_duration > config.long_moment_threshold
        }
    ood, train = eliminate_conflicts(ood, train, table, pinned_train_videos=pinned)

    tr, val, iid = partition_remainder(
        train, table, config.remainder_fractions, config.seed, total_pairs=len(table)
    )

    assignment: dict[str, str] = {}
    for pid in tr:
        assignment[pid] = "train"
    for pid in val:
        assignment[pid] = "val"
    for pid in iid:
        assignment[pid] = "test-iid"
    for pid in ood:
        assignment[pid] = "test-ood"

    counts: dict[str, dict[str, int]] = {}
    videos_of: dict[str, set[str]] = {name: set() for name in SPLIT_NAMES}
    tallies = {name: 0 for name in SPLIT_NAMES}
    for p in table.pairs:
        name = assignment[p.pair_id]
        tallies[name] += 1
        videos_of[name].add(p.video_id)
    for name in SPLIT_NAMES:
        counts[name] = {"pairs": tallies[name], "videos": len(videos_of[name])}

    warnings: list[str] = []
    ood_frac = tallies["test-ood"] / len(table)
    if abs(ood_frac - config.ood_fraction) > 0.03:
        warnings.append(
            f"test-ood fraction {ood_frac:.4f} drifted more than 0.03 from the "
            f"target {config.ood_fraction:.2f}"
        )

    meta = {
        "toolkit_version": __version__,
        "config": config.to_dict(),
        "bandwidth": list(model.bandwidth),
        "kde": {"rule": model.rule, "n": model.n},
        "counts": counts,
        "warnings": warnings,
        "ood_fraction_actual": ood_frac,
    }
    return SplitAssignment(assignment=assignment, meta=meta)
