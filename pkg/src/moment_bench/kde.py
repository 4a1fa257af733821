"""2D Gaussian kernel density estimation over normalized (start, end) points.

This is the engine behind both the distribution-shift re-split (samples are
ranked by how typical their moment location is) and the bias-exploiting
baseline (candidate moments are drawn from the fitted density). The kernel
is an axis-aligned product Gaussian:

    f(x) = (1/n) sum_i 1/(2 pi h_s h_e)
                 exp(-(x_s - p_is)^2 / (2 h_s^2) - (x_e - p_ie)^2 / (2 h_e^2))

Evaluation always sums contributions in a canonical order (points sorted by
(start, end)), so results are bit-identical regardless of the order points
were supplied in or how work is chunked across threads.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import KdeFitError, SamplingError

# Either the string "scott" or an explicit (h_s, h_e) pair.
BandwidthRule = str | tuple[float, float]

_TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class KdeModel:
    """Fitted density: data points (kept verbatim) plus per-axis bandwidth."""

    points: tuple[tuple[float, float], ...]
    bandwidth: tuple[float, float]
    rule: str  # "scott" | "explicit"
    # Canonical evaluation order, precomputed at fit time.
    _sorted: np.ndarray = field(repr=False, compare=False, default=None)  # type: ignore[assignment]

    @property
    def n(self) -> int:
        return len(self.points)

    def sorted_points(self) -> np.ndarray:
        if self._sorted is None:
            arr = np.array(sorted(self.points), dtype=np.float64)
            object.__setattr__(self, "_sorted", arr)
        return self._sorted

    def to_dict(self) -> dict:
        return {
            "kind": "kde-model",
            "rule": self.rule,
            "bandwidth": list(self.bandwidth),
            "n": self.n,
            "points": [list(p) for p in self.points],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "KdeModel":
        return cls(
            points=tuple((float(s), float(e)) for s, e in doc["points"]),
            bandwidth=(float(doc["bandwidth"][0]), float(doc["bandwidth"][1])),
            rule=str(doc["rule"]),
        )


def fit_kde(
    points: Sequence[tuple[float, float]],
    bandwidth_rule: BandwidthRule = "scott",
) -> KdeModel:
    """Fit the model; Scott's rule uses h_d = sigma_d * n^(-1/6) per axis.

    sigma_d is the sample standard deviation (ddof=1). Requires at least two
    points with nonzero variance on each axis; raises KdeFitError otherwise.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise KdeFitError(f"expected (n, 2) points, got shape {pts.shape}")
    n = pts.shape[0]
    if n < 2:
        raise KdeFitError(f"need at least 2 points, got {n}")
    if not np.all((0.0 <= pts[:, 0]) & (pts[:, 0] < pts[:, 1]) & (pts[:, 1] <= 1.0)):
        raise KdeFitError("all points must satisfy 0 <= start < end <= 1")
    sigma = pts.std(axis=0, ddof=1)
    if sigma[0] <= 0.0 or sigma[1] <= 0.0:
        raise KdeFitError("zero variance in at least one coordinate")

    if bandwidth_rule == "scott":
        h = sigma * n ** (-1.0 / 6.0)
        bandwidth = (float(h[0]), float(h[1]))
        rule = "scott"
    else:
        h_s, h_e = bandwidth_rule  # type: ignore[misc]
        if h_s <= 0 or h_e <= 0:
            raise KdeFitError(f"explicit bandwidth must be positive, got {bandwidth_rule}")
        bandwidth = (float(h_s), float(h_e))
        rule = "explicit"

    return KdeModel(
        points=tuple((float(s), float(e)) for s, e in pts),
        bandwidth=bandwidth,
        rule=rule,
    )


def density(model: KdeModel, query_point: tuple[float, float]) -> float:
    """Density at one (start, end) point. Nonnegative everywhere."""
    return float(density_many(model, np.asarray([query_point]))[0])


def density_many(
    model: KdeModel,
    query_points: np.ndarray,
    threads: int = 1,
    chunk: int = 256,
) -> np.ndarray:
    """Density at each row of (m, 2) query_points.

    Each query's kernel sum runs over the full point set in canonical
    order inside a single reduction, so chunking and threading cannot
    change the result bits.
    """
    pts = model.sorted_points()
    h_s, h_e = model.bandwidth
    queries = np.asarray(query_points, dtype=np.float64)
    if queries.ndim != 2 or queries.shape[1] != 2:
        raise ValueError(f"expected (m, 2) query points, got shape {queries.shape}")
    norm = 1.0 / (_TWO_PI * h_s * h_e * model.n)

    def eval_chunk(block: np.ndarray) -> np.ndarray:
        # (m_chunk, n) squared z-scores per axis
        zs = (block[:, 0:1] - pts[None, :, 0]) / h_s
        ze = (block[:, 1:2] - pts[None, :, 1]) / h_e
        return norm * np.exp(-0.5 * (zs * zs + ze * ze)).sum(axis=1)

    blocks = [queries[i : i + chunk] for i in range(0, len(queries), chunk)]
    if not blocks:
        return np.zeros(0, dtype=np.float64)
    if threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(eval_chunk, blocks))
    else:
        parts = [eval_chunk(b) for b in blocks]
    return np.concatenate(parts)


_WINDOW = 10_000
_MAX_REJECT_RATE = 0.999


def sample_moments(
    model: KdeModel, count: int, rng_seed: int
) -> list[tuple[float, float]]:
    """Draw `count` samples with 0 <= s < e <= 1 from the fitted density.

    Mixture sampling: pick a data point uniformly, add per-axis Gaussian
    noise at the bandwidth scale, reject anything outside the valid
    triangle. Deterministic given the seed. Raises SamplingError when a
    full 10k-proposal window rejects more than 99.9%.
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    pts = model.sorted_points()
    h = np.array(model.bandwidth, dtype=np.float64)
    rng = np.random.default_rng(rng_seed)

    out: list[tuple[float, float]] = []
    window_attempts = 0
    window_accepts = 0
    batch = 1024
    while len(out) < count:
        idx = rng.integers(0, model.n, size=batch)
        noise = rng.standard_normal((batch, 2)) * h
        cand = pts[idx] + noise
        valid = (
            (cand[:, 0] >= 0.0) & (cand[:, 0] < cand[:, 1]) & (cand[:, 1] <= 1.0)
        )
        kept = cand[valid]
        take = min(len(kept), count - len(out))
        out.extend((float(s), float(e)) for s, e in kept[:take])

        window_attempts += batch
        window_accepts += int(valid.sum())
        if window_attempts >= _WINDOW:
            if window_accepts < window_attempts * (1.0 - _MAX_REJECT_RATE):
                raise SamplingError(
                    f"rejection rate above {_MAX_REJECT_RATE:.3f} over the last "
                    f"{window_attempts} proposals; model mass lies outside the "
                    "valid start < end triangle"
                )
            window_attempts = 0
            window_accepts = 0
    return out


def save_model(model: KdeModel) -> str:
    return json.dumps(model.to_dict(), sort_keys=True)


def load_model(text: str) -> KdeModel:
    return KdeModel.from_dict(json.loads(text))
