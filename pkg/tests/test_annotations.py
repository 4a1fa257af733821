import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from moment_bench.annotations import (
    DatasetTable,
    MomentAnnotation,
    parse_activitynet_captions,
    parse_charades_sta,
    read_canonical,
    read_durations_sidecar,
    sanitize_pair,
    tokenize,
    with_tokens,
    write_canonical,
)
from moment_bench.errors import (
    DurationLookupError,
    ParseError,
    RecordIOError,
    StructureError,
    TableError,
)

from helpers import make_pair


class TestSanitizePair:
    def test_already_valid(self):
        assert sanitize_pair(2.0, 5.0, 10.0) == (2.0, 5.0)

    def test_clamp_to_video_extent(self):
        assert sanitize_pair(-1.0, 11.0, 10.0) == (0.0, 10.0)

    def test_swap_reversed(self):
        assert sanitize_pair(5.0, 2.0, 10.0) == (2.0, 5.0)

    def test_drop_when_empty_after_clamp(self):
        # both boundaries beyond the end collapse onto duration
        assert sanitize_pair(10.5, 12.0, 10.0) is None

    def test_drop_zero_length(self):
        assert sanitize_pair(5.0, 5.0, 10.0) is None

    def test_bad_duration_raises(self):
        with pytest.raises(ValueError):
            sanitize_pair(0.0, 1.0, 0.0)

    @given(
        st.floats(-100, 200, allow_nan=False),
        st.floats(-100, 200, allow_nan=False),
        st.floats(0.1, 100, allow_nan=False),
    )
    @settings(max_examples=300)
    def test_total_and_in_range(self, a, b, dur):
        out = sanitize_pair(a, b, dur)
        if out is not None:
            s, e = out
            assert 0.0 <= s < e <= dur


class TestParseCharades:
    def test_basic_line(self):
        table = parse_charades_sta(
            ["v1 2.0 5.0##person opens door"], {"v1": 10.0}
        )
        assert len(table) == 1
        p = table.pairs[0]
        assert p.pair_id == "v1#0"
        assert (p.start_norm, p.end_norm) == (0.2, 0.5)
        assert p.query == "person opens door"

    def test_whole_video_moment(self):
        table = parse_charades_sta(["v1 0.0 10.0##x"], {"v1": 10.0})
        p = table.pairs[0]
        assert (p.start_norm, p.end_norm) == (0.0, 1.0)

    def test_end_clamped(self):
        table = parse_charades_sta(["v1 8.0 12.5##x"], {"v1": 10.0})
        p = table.pairs[0]
        assert p.end_s == 10.0
        assert p.end_norm == 1.0
        assert p.start_norm == 0.8

    def test_missing_separator_names_line(self):
        with pytest.raises(ParseError, match="line 2"):
            parse_charades_sta(["v1 1 2##ok", "v1 3 4 oops"], {"v1": 10.0})

    def test_non_numeric_boundary(self):
        with pytest.raises(ParseError, match="line 1"):
            parse_charades_sta(["v1 one 2##x"], {"v1": 10.0})

    def test_missing_duration_names_video(self):
        with pytest.raises(DurationLookupError, match="v2"):
            parse_charades_sta(["v2 1 2##x"], {"v1": 10.0})

    def test_dropped_pairs_counted(self):
        table = parse_charades_sta(
            ["v1 1 2##keep", "v1 11 12##drop"], {"v1": 10.0}
        )
        assert len(table) == 1
        assert table.n_dropped == 1

    def test_line_index_in_pair_id(self):
        table = parse_charades_sta(
            ["v1 1 2##a", "", "v2 1 2##b"], {"v1": 10.0, "v2": 10.0}
        )
        assert [p.pair_id for p in table.pairs] == ["v1#0", "v2#2"]


class TestParseActivityNet:
    def test_basic(self):
        table = parse_activitynet_captions(
            {"v": {"duration": 20, "timestamps": [[0, 10]], "sentences": ["a"]}}
        )
        p = table.pairs[0]
        assert p.pair_id == "v#0"
        assert (p.start_norm, p.end_norm) == (0.0, 0.5)

    def test_reversed_timestamp_swapped(self):
        table = parse_activitynet_captions(
            {"v": {"duration": 20, "timestamps": [[12, 4]], "sentences": ["a"]}}
        )
        p = table.pairs[0]
        assert (p.start_s, p.end_s) == (4.0, 12.0)
        assert (p.start_norm, p.end_norm) == (0.2, 0.6)

    def test_zero_length_dropped_and_counted(self):
        table = parse_activitynet_captions(
            {"v": {"duration": 20, "timestamps": [[5, 5]], "sentences": ["a"]}}
        )
        assert len(table) == 0
        assert table.n_dropped == 1

    def test_length_mismatch(self):
        with pytest.raises(StructureError, match="1 timestamps vs 2"):
            parse_activitynet_captions(
                {"v": {"duration": 20, "timestamps": [[1, 2]],
                       "sentences": ["a", "b"]}}
            )

    def test_negative_duration(self):
        with pytest.raises(StructureError, match="duration"):
            parse_activitynet_captions(
                {"v": {"duration": -3, "timestamps": [[1, 2]], "sentences": ["a"]}}
            )


class TestTableInvariants:
    def test_duplicate_pair_id(self):
        p = make_pair("a#0", "a", 0.1, 0.2)
        with pytest.raises(TableError, match="duplicate"):
            DatasetTable(pairs=[p, p])

    def test_conflicting_video_duration(self):
        p1 = make_pair("a#0", "a", 0.1, 0.2, duration_s=10.0)
        p2 = make_pair("a#1", "a", 0.1, 0.2, duration_s=20.0)
        with pytest.raises(TableError, match="conflicting durations"):
            DatasetTable(pairs=[p1, p2])

    def test_bad_norm_rejected(self):
        with pytest.raises(TableError):
            MomentAnnotation(
                pair_id="x", video_id="v", duration_s=10.0,
                start_s=5.0, end_s=5.0, start_norm=0.5, end_norm=0.5, query="q",
            )


class TestCanonicalIO:
    def test_empty_round_trip(self):
        table = DatasetTable(pairs=[])
        assert write_canonical(table) == ""
        assert len(read_canonical("")) == 0

    def test_single_pair_round_trip(self):
        table = DatasetTable(pairs=[make_pair("a#0", "a", 0.25, 0.75, query="hi")])
        again = read_canonical(write_canonical(table))
        assert again.pairs == table.pairs

    def test_sorted_by_pair_id(self):
        table = DatasetTable(
            pairs=[make_pair("b#0", "b", 0.1, 0.2), make_pair("a#0", "a", 0.1, 0.2)]
        )
        text = write_canonical(table)
        ids = [json.loads(line)["pair_id"] for line in text.splitlines()]
        assert ids == ["a#0", "b#0"]

    def test_random_pairs_round_trip(self):
        # 1000 randomized pairs survive write -> read exactly
        import numpy as np

        rng = np.random.default_rng(7)
        pairs = []
        for i in range(1000):
            dur = float(rng.uniform(1.0, 500.0))
            s, e = sorted(rng.uniform(0.0, dur, size=2))
            if s == e:
                continue
            pairs.append(
                MomentAnnotation(
                    pair_id=f"v{i}#0",
                    video_id=f"v{i}",
                    duration_s=dur,
                    start_s=float(s),
                    end_s=float(e),
                    start_norm=float(s) / dur,
                    end_norm=float(e) / dur,
                    query=f"query number {i}",
                )
            )
        table = DatasetTable(pairs=pairs)
        again = read_canonical(write_canonical(table))
        assert sorted(again.pairs, key=lambda p: p.pair_id) == sorted(
            table.pairs, key=lambda p: p.pair_id
        )

    @given(
        st.lists(
            st.tuples(
                st.floats(0.001, 0.999, allow_nan=False),
                st.floats(0.001, 0.999, allow_nan=False),
            ).filter(lambda t: t[0] != t[1]),
            min_size=1,
            max_size=20,
        )
    )
    @settings(max_examples=100)
    def test_round_trip_property(self, spans):
        pairs = []
        for i, (a, b) in enumerate(spans):
            s, e = sorted((a, b))
            pairs.append(make_pair(f"p{i:03d}#0", f"p{i:03d}", s, e))
        table = DatasetTable(pairs=pairs)
        again = read_canonical(write_canonical(table))
        assert again.pairs == sorted(table.pairs, key=lambda p: p.pair_id)

    def test_duplicate_record_rejected_with_index(self):
        table = DatasetTable(pairs=[make_pair("a#0", "a", 0.1, 0.2)])
        line = write_canonical(table).strip()
        with pytest.raises(RecordIOError, match="record 2"):
            read_canonical(line + "\n" + line + "\n")

    def test_garbage_record_rejected_with_index(self):
        with pytest.raises(RecordIOError, match="record 1"):
            read_canonical("not json\n")

    def test_norm_consistency(self):
        # parse -> canonical keeps start_norm == start_s / duration_s
        table = parse_charades_sta(
            ["v1 2.5 7.5##x", "v2 0 3##y"], {"v1": 10.0, "v2": 30.0}
        )
        again = read_canonical(write_canonical(table))
        for p in again.pairs:
            assert math.isclose(p.start_norm, p.start_s / p.duration_s, rel_tol=1e-15)
            assert math.isclose(p.end_norm, p.end_s / p.duration_s, rel_tol=1e-15)


class TestDurationsSidecar:
    def test_parse(self):
        assert read_durations_sidecar(["v1\t12.5", "v2\t8"]) == {
            "v1": 12.5,
            "v2": 8.0,
        }

    def test_bad_column_count(self):
        with pytest.raises(ParseError, match="line 1"):
            read_durations_sidecar(["v1 12.5"])


class TestTokens:
    def test_tokenize_rule(self):
        assert tokenize("Person opens the door!") == [
            "person", "opens", "the", "door",
        ]

    def test_with_tokens_round_trip(self):
        table = DatasetTable(
            pairs=[make_pair("a#0", "a", 0.1, 0.2, query="A person RUNS.")]
        )
        tokened = with_tokens(table)
        assert tokened.pairs[0].tokens == ("a", "person", "runs")
        again = read_canonical(write_canonical(tokened))
        assert again.pairs[0].tokens == ("a", "person", "runs")
