"""Raw annotation parsing and the canonical query-moment pair table.

Both dataset conventions funnel into one sanitized representation: a
MomentAnnotation per query-moment pair with boundaries kept in seconds and
as fractions of the video duration. Raw files are messy (reversed and
out-of-range timestamps), so every pair passes through sanitize_pair:
swap, clamp to the video extent, drop if empty. Drops are counted on the
table rather than raised, since they are expected in the wild.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping

from .errors import (
    DurationLookupError,
    ParseError,
    RecordIOError,
    StructureError,
    TableError,
)

SOURCES = ("charades", "activitynet", "generic")

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> list[str]:
    """Lowercase tokens split on non-alphanumeric runs."""
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class MomentAnnotation:
    """One query-moment pair with sanitized boundaries.

    Invariants: duration_s > 0, 0 <= start_norm < end_norm <= 1, and the
    normalized boundaries equal the second boundaries divided by duration.
    """

    pair_id: str
    video_id: str
    duration_s: float
    start_s: float
    end_s: float
    start_norm: float
    end_norm: float
    query: str
    tokens: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        if self.duration_s <= 0:
            raise TableError(f"pair {self.pair_id!r}: duration_s must be > 0")
        if not (0.0 <= self.start_norm < self.end_norm <= 1.0):
            raise TableError(
                f"pair {self.pair_id!r}: normalized boundaries "
                f"({self.start_norm}, {self.end_norm}) outside 0 <= s < e <= 1"
            )

    @property
    def norm_duration(self) -> float:
        return self.end_norm - self.start_norm


@dataclass
class DatasetTable:
    """All pairs of one dataset plus parse provenance.

    n_dropped counts pairs removed by sanitization (degenerate after
    swap+clamp); callers surface it so raw-file totals can be reconciled.
    """

    pairs: list[MomentAnnotation]
    source: str = "generic"
    n_dropped: int = 0
    _by_id: dict[str, MomentAnnotation] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        if self.source not in SOURCES:
            raise TableError(f"unknown source {self.source!r}")
        durations: dict[str, float] = {}
        for p in self.pairs:
            if p.pair_id in self._by_id:
                raise TableError(f"duplicate pair_id {p.pair_id!r}")
            self._by_id[p.pair_id] = p
            known = durations.setdefault(p.video_id, p.duration_s)
            if known != p.duration_s:
                raise TableError(
                    f"video {p.video_id!r} has conflicting durations "
                    f"{known} and {p.duration_s}"
                )

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    def get(self, pair_id: str) -> MomentAnnotation | None:
        return self._by_id.get(pair_id)

    def video_ids(self) -> list[str]:
        return sorted({p.video_id for p in self.pairs})

    def subset(self, pair_ids: Iterable[str]) -> "DatasetTable":
        wanted = set(pair_ids)
        kept = [p for p in self.pairs if p.pair_id in wanted]
        return DatasetTable(pairs=kept, source=self.source)


def sanitize_pair(
    start_s: float, end_s: float, duration_s: float
) -> tuple[float, float] | None:
    """Swap reversed boundaries, clamp into [0, duration], drop if empty.

    Returns the repaired (start, end) or None when the moment collapses to
    zero length after clamping. Total over all float inputs.
    """
    if duration_s <= 0:
        raise ValueError(f"duration_s must be > 0, got {duration_s}")
    if start_s > end_s:
        start_s, end_s = end_s, start_s
    start_s = min(max(start_s, 0.0), duration_s)
    end_s = min(max(end_s, 0.0), duration_s)
    if start_s == end_s:
        return None
    return start_s, end_s


def _build_pair(
    pair_id: str,
    video_id: str,
    duration_s: float,
    start_s: float,
    end_s: float,
    query: str,
) -> MomentAnnotation | None:
    fixed = sanitize_pair(start_s, end_s, duration_s)
    if fixed is None:
        return None
    s, e = fixed
    return MomentAnnotation(
        pair_id=pair_id,
        video_id=video_id,
        duration_s=duration_s,
        start_s=s,
        end_s=e,
        start_norm=s / duration_s,
        end_norm=e / duration_s,
        query=query,
    )


def parse_charades_sta(
    annotation_lines: Iterable[str], durations: Mapping[str, float]
) -> DatasetTable:
    """Parse `<video_id> <start> <end>##<sentence>` lines.

    pair_id is `<video_id>#<line-index>` with a 0-based file line index, so
    ids survive reruns and point back at the source line. Blank lines are
    skipped but still consume an index.
    """
    pairs: list[MomentAnnotation] = []
    dropped = 0
    for idx, line in enumerate(annotation_lines):
        line = line.rstrip("\n")
        if not line.strip():
            continue
        if "##" not in line:
            raise ParseError(f"line {idx + 1}: missing '##' separator")
        head, query = line.split("##", 1)
        fields = head.split()
        if len(fields) != 3:
            raise ParseError(
                f"line {idx + 1}: expected 'video_id start end' before '##', "
                f"got {len(fields)} fields"
            )
        video_id = fields[0]
        try:
            start_s = float(fields[1])
            end_s = float(fields[2])
        except ValueError as exc:
            raise ParseError(f"line {idx + 1}: non-numeric boundary: {exc}") from None
        if video_id not in durations:
            raise DurationLookupError(
                f"line {idx + 1}: no duration for video {video_id!r}"
            )
        duration_s = float(durations[video_id])
        if duration_s <= 0:
            raise DurationLookupError(
                f"video {video_id!r}: duration must be > 0, got {duration_s}"
            )
        pair = _build_pair(
            f"{video_id}#{idx}", video_id, duration_s, start_s, end_s, query.strip()
        )
        if pair is None:
            dropped += 1
        else:
            pairs.append(pair)
    return DatasetTable(pairs=pairs, source="charades", n_dropped=dropped)


def read_durations_sidecar(lines: Iterable[str]) -> dict[str, float]:
    """Two-column tab-separated `<video_id>\\t<seconds>` sidecar."""
    out: dict[str, float] = {}
    for idx, line in enumerate(lines):
        line = line.rstrip("\n")
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 2:
            raise ParseError(
                f"durations line {idx + 1}: expected 2 tab-separated columns"
            )
        try:
            out[fields[0]] = float(fields[1])
        except ValueError:
            raise ParseError(
                f"durations line {idx + 1}: non-numeric duration {fields[1]!r}"
            ) from None
    return out


def parse_activitynet_captions(document: Mapping[str, object]) -> DatasetTable:
    """Parse the per-video `{duration, timestamps, sentences}` document.

    One pair per (timestamp, sentence); pair_id is `<video_id>#<index>`
    with the 0-based index inside that video's list.
    """
    pairs: list[MomentAnnotation] = []
    dropped = 0
    for video_id, entry in document.items():
        if not isinstance(entry, Mapping):
            raise StructureError(f"video {video_id!r}: entry is not a mapping")
        try:
            duration_s = float(entry["duration"])  # type: ignore[index]
            timestamps = entry["timestamps"]  # type: ignore[index]
            sentences = entry["sentences"]  # type: ignore[index]
        except KeyError as exc:
            raise StructureError(f"video {video_id!r}: missing key {exc}") from None
        if duration_s <= 0:
            raise StructureError(
                f"video {video_id!r}: duration must be > 0, got {duration_s}"
            )
        if len(timestamps) != len(sentences):  # type: ignore[arg-type]
            raise StructureError(
                f"video {video_id!r}: {len(timestamps)} timestamps vs "
                f"{len(sentences)} sentences"
            )
        for idx, (stamp, sentence) in enumerate(zip(timestamps, sentences)):  # type: ignore[arg-type]
            if len(stamp) != 2:
                raise StructureError(
                    f"video {video_id!r}: timestamp {idx} is not a [start, end] pair"
                )
            pair = _build_pair(
                f"{video_id}#{idx}",
                str(video_id),
                duration_s,
                float(stamp[0]),
                float(stamp[1]),
                str(sentence).strip(),
            )
            if pair is None:
                dropped += 1
            else:
                pairs.append(pair)
    return DatasetTable(pairs=pairs, source="activitynet", n_dropped=dropped)


_RECORD_FIELDS = (
    "pair_id",
    "video_id",
    "duration_s",
    "start_s",
    "end_s",
    "start_norm",
    "end_norm",
    "query",
    "tokens",
)


def write_canonical(table: DatasetTable) -> str:
    """Serialize to line-delimited records, sorted by pair_id.

    Floats use Python's shortest round-trip repr, so write-then-read is an
    exact identity on every field.
    """
    lines = []
    for p in sorted(table.pairs, key=lambda p: p.pair_id):
        rec = {
            "pair_id": p.pair_id,
            "video_id": p.video_id,
            "duration_s": p.duration_s,
            "start_s": p.start_s,
            "end_s": p.end_s,
            "start_norm": p.start_norm,
            "end_norm": p.end_norm,
            "query": p.query,
            "tokens": list(p.tokens) if p.tokens is not None else None,
        }
        lines.append(json.dumps(rec, ensure_ascii=False, sort_keys=True))
    return "\n".join(lines) + ("\n" if lines else "")


def read_canonical(text: str, source: str = "generic") -> DatasetTable:
    """Parse canonical records back into a table."""
    pairs: list[MomentAnnotation] = []
    seen: set[str] = set()
    for idx, line in enumerate(text.splitlines()):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise RecordIOError(f"record {idx + 1}: invalid JSON: {exc}") from None
        missing = [k for k in _RECORD_FIELDS if k not in rec]
        if missing:
            raise RecordIOError(f"record {idx + 1}: missing fields {missing}")
        if rec["pair_id"] in seen:
            raise RecordIOError(
                f"record {idx + 1}: duplicate pair_id {rec['pair_id']!r}"
            )
        seen.add(rec["pair_id"])
        tokens = rec["tokens"]
        try:
            pairs.append(
                MomentAnnotation(
                    pair_id=str(rec["pair_id"]),
                    video_id=str(rec["video_id"]),
                    duration_s=float(rec["duration_s"]),
                    start_s=float(rec["start_s"]),
                    end_s=float(rec["end_s"]),
                    start_norm=float(rec["start_norm"]),
                    end_norm=float(rec["end_norm"]),
                    query=str(rec["query"]),
                    tokens=tuple(tokens) if tokens is not None else None,
                )
            )
        except TableError as exc:
            raise RecordIOError(f"record {idx + 1}: {exc}") from None
    return DatasetTable(pairs=pairs, source=source)


def with_tokens(table: DatasetTable) -> DatasetTable:
    """Copy of the table with the optional tokens field populated."""
    pairs = [replace(p, tokens=tuple(tokenize(p.query))) for p in table.pairs]
    return DatasetTable(pairs=pairs, source=table.source, n_dropped=table.n_dropped)
