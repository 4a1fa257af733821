"""Dataset-bias diagnostics: duration histograms, joint density grids over
normalized (start, end), and verb frequency tables.

These are the numbers behind the usual "where do annotated moments live"
pictures; the grid/histogram exports carry axis metadata so any plotting
tool can render them (rendering itself lives in the CLI layer).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .annotations import DatasetTable, MomentAnnotation, tokenize
from .errors import DataError
from .kde import BandwidthRule, density_many, fit_kde

# Common action verbs in indoor/daily-activity video descriptions. Matching
# strips simple inflection suffixes, so lemmas suffice here; the set is
# configurable wherever it is consumed.
DEFAULT_VERB_LEXICON = frozenset(
    {
        "awaken", "begin", "bend", "brush", "carry", "clean", "climb", "close",
        "comb", "cook", "cough", "cut", "dance", "dress", "drink", "dry",
        "eat", "enter", "finish", "fix", "fold", "grab", "grasp", "hold",
        "hug", "jump", "kiss", "kneel", "laugh", "leave", "lie", "lift",
        "look", "make", "open", "phone", "play", "point", "pour", "pull",
        "push", "put", "reach", "read", "remove", "ride", "run", "sit",
        "sleep", "smile", "sneeze", "snuggle", "stand", "start", "swim",
        "take", "talk", "throw", "tidy", "turn", "undress", "walk", "wash",
        "watch", "wave", "wear", "wipe", "work", "write",
    }
)

_SUFFIXES = ("ing", "ed", "es", "s")


def match_verb(token: str, lexicon: frozenset[str] | set[str]) -> str | None:
    """Lemma for a token, or None.

    Tries the raw token, then strips the inflection suffixes (longest
    first); after stripping it also tries un-doubling a final consonant
    ("putting" -> "put") and restoring a final "e" ("taking" -> "take").
    """
    if token in lexicon:
        return token
    for suffix in _SUFFIXES:
        if not token.endswith(suffix) or len(token) <= len(suffix):
            continue
        stem = token[: -len(suffix)]
        if stem in lexicon:
            return stem
        if suffix in ("ing", "ed", "es"):
            if stem + "e" in lexicon:
                return stem + "e"
            if len(stem) >= 2 and stem[-1] == stem[-2] and stem[:-1] in lexicon:
                return stem[:-1]
    return None


@dataclass(frozen=True)
class DensityGrid:
    """KDE values on an R x R lattice of cell centers over [0,1]^2.

    values[i, j] is the density at (start=(i+0.5)/R, end=(j+0.5)/R). Cells
    in the start > end half can be nonzero only through kernel spill.
    """

    resolution: int
    values: np.ndarray
    bandwidth: tuple[float, float]

    @property
    def start_centers(self) -> np.ndarray:
        return (np.arange(self.resolution) + 0.5) / self.resolution

    @property
    def end_centers(self) -> np.ndarray:
        return (np.arange(self.resolution) + 0.5) / self.resolution

    def to_document(self) -> dict:
        return {
            "kind": "density-grid",
            "resolution": self.resolution,
            "bandwidth": list(self.bandwidth),
            "start_centers": self.start_centers.tolist(),
            "end_centers": self.end_centers.tolist(),
            "values": self.values.tolist(),
        }


@dataclass(frozen=True)
class VerbTable:
    """(lemma, count) rows sorted by count descending, plus pair coverage."""

    entries: tuple[tuple[str, int], ...]
    coverage: float

    def to_document(self) -> dict:
        return {
            "kind": "verb-table",
            "entries": [[v, c] for v, c in self.entries],
            "coverage": self.coverage,
        }


def duration_histogram(
    table: DatasetTable, bin_count: int
) -> tuple[np.ndarray, np.ndarray]:
    """(counts, bin_edges) over normalized durations with equal-width bins
    spanning [0, 1]; counts sum to the number of pairs."""
    if bin_count < 2:
        raise DataError(f"bin_count must be >= 2, got {bin_count}")
    durations = np.array([p.norm_duration for p in table.pairs], dtype=np.float64)
    counts, edges = np.histogram(durations, bins=bin_count, range=(0.0, 1.0))
    return counts, edges


def duration_share_over(table: DatasetTable, thresholds: list[float]) -> list[float]:
    """Fraction of pairs whose normalized duration strictly exceeds each t."""
    if not table.pairs:
        raise DataError("empty table")
    durations = np.array([p.norm_duration for p in table.pairs], dtype=np.float64)
    return [float(np.mean(durations > t)) for t in thresholds]


def joint_density_grid(
    table: DatasetTable,
    resolution: int = 100,
    bandwidth_rule: BandwidthRule = "scott",
    threads: int = 1,
) -> DensityGrid:
    """Fit a KDE on the table's (start, end) points and evaluate it at the
    cell centers of a resolution x resolution lattice."""
    points = [(p.start_norm, p.end_norm) for p in table.pairs]
    model = fit_kde(points, bandwidth_rule)
    centers = (np.arange(resolution) + 0.5) / resolution
    ss, ee = np.meshgrid(centers, centers, indexing="ij")
    queries = np.column_stack([ss.ravel(), ee.ravel()])
    values = density_many(model, queries, threads=threads).reshape(
        resolution, resolution
    )
    return DensityGrid(
        resolution=resolution, values=values, bandwidth=model.bandwidth
    )


def _pair_lemmas(
    pair: MomentAnnotation, lexicon: frozenset[str] | set[str]
) -> list[str]:
    tokens = pair.tokens if pair.tokens is not None else tokenize(pair.query)
    out = []
    for tok in tokens:
        lemma = match_verb(tok, lexicon)
        if lemma is not None:
            out.append(lemma)
    return out


def verb_frequencies(
    table: DatasetTable,
    verb_lexicon: frozenset[str] | set[str] = DEFAULT_VERB_LEXICON,
    top_k: int = 30,
) -> VerbTable:
    """Count lexicon lemmas over all queries and keep the top_k.

    Coverage is the fraction of pairs whose query contains at least one of
    the top_k lemmas. Ties in count break alphabetically.
    """
    if not verb_lexicon:
        raise DataError("verb lexicon is empty")
    counts: dict[str, int] = {}
    pair_lemma_sets: list[set[str]] = []
    for pair in table.pairs:
        lemmas = _pair_lemmas(pair, verb_lexicon)
        pair_lemma_sets.append(set(lemmas))
        for lemma in lemmas:
            counts[lemma] = counts.get(lemma, 0) + 1

    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:top_k]
    top = {v for v, _ in ranked}
    covered = sum(1 for s in pair_lemma_sets if s & top)
    coverage = covered / len(pair_lemma_sets) if pair_lemma_sets else 0.0
    return VerbTable(entries=tuple(ranked), coverage=coverage)


def action_conditioned_grid(
    table: DatasetTable,
    verb: str,
    resolution: int = 100,
    verb_lexicon: frozenset[str] | set[str] = DEFAULT_VERB_LEXICON,
    bandwidth_rule: BandwidthRule = "scott",
    threads: int = 1,
) -> DensityGrid:
    """joint_density_grid restricted to pairs whose query contains the verb."""
    if verb not in verb_lexicon:
        raise DataError(f"verb {verb!r} not in the lexicon")
    matching = [
        p for p in table.pairs if verb in _pair_lemmas(p, verb_lexicon)
    ]
    if len(matching) < 2:
        raise DataError(
            f"verb {verb!r} matches only {len(matching)} pair(s); need >= 2"
        )
    sub = DatasetTable(pairs=matching, source=table.source)
    return joint_density_grid(
        sub, resolution=resolution, bandwidth_rule=bandwidth_rule, threads=threads
    )
