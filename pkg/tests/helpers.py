"""Shared synthetic-data builders for the test suite."""

from __future__ import annotations

import numpy as np

from moment_bench.annotations import DatasetTable, MomentAnnotation


def make_pair(pair_id, video_id, start_norm, end_norm, duration_s=100.0, query="x"):
    return MomentAnnotation(
        pair_id=pair_id,
        video_id=video_id,
        duration_s=duration_s,
        start_s=start_norm * duration_s,
        end_s=end_norm * duration_s,
        start_norm=start_norm,
        end_norm=end_norm,
        query=query,
    )


def random_table(
    n_videos,
    pairs_per_video=(1, 5),
    seed=0,
    source="generic",
    sampler=None,
):
    """Table with whole videos of random pairs; sampler(rng) -> (s, e)."""
    rng = np.random.default_rng(seed)
    if sampler is None:
        def sampler(r):
            s, e = sorted(r.uniform(0.0, 1.0, size=2))
            while s == e:
                s, e = sorted(r.uniform(0.0, 1.0, size=2))
            return float(s), float(e)

    pairs = []
    for v in range(n_videos):
        video_id = f"v{v:05d}"
        count = int(rng.integers(pairs_per_video[0], pairs_per_video[1] + 1))
        for k in range(count):
            s, e = sampler(rng)
            pairs.append(make_pair(f"{video_id}#{k}", video_id, s, e))
    return DatasetTable(pairs=pairs, source=source)


def clustered_sampler(center_s, center_e, spread):
    """Gaussian cluster clipped into the valid triangle."""

    def sampler(rng):
        while True:
            s = rng.normal(center_s, spread)
            e = rng.normal(center_e, spread)
            if 0.0 <= s < e <= 1.0:
                return float(s), float(e)

    return sampler


def bimodal_sampler(seed_fraction=0.85):
    """Most mass in a tight early-moment cluster, the rest spread late."""
    main = clustered_sampler(0.1, 0.3, 0.05)
    rare = clustered_sampler(0.6, 0.9, 0.08)

    def sampler(rng):
        if rng.uniform() < seed_fraction:
            return main(rng)
        return rare(rng)

    return sampler
