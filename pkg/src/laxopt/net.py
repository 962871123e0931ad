"""Finite control nets: pairwise separation above delta, open delta-ball cover.

A net stands in for the full control set during synthesis. Construction is
greedy farthest-point over a candidate grid; verification checks the packing
condition exactly on the stored points and the covering condition on a finer
probe grid.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

__all__ = ["DeltaNet", "NetVerifyReport", "NetBuildError", "build", "verify",
           "uniform_net", "uniform_points", "save_net", "load_net"]

# greedy start positions tried in order until verification passes; asymmetric
# offsets matter when delta is commensurate with the set's extent
_START_FRACTIONS = (0.0, 0.21, 0.5, 0.34, 0.13, 0.44, 0.08, 0.29, 0.55, 0.89)


class NetBuildError(RuntimeError):
    """No greedy start produced a verifiable net for this delta."""


@dataclass(frozen=True)
class DeltaNet:
    """Finite point family U_delta, one control point per row."""

    delta: float
    points: np.ndarray

    @property
    def size(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class NetVerifyReport:
    ok: bool
    packing_ok: bool
    covering_ok: bool
    min_pairwise: float
    max_probe_gap: float


def _greedy(candidates: np.ndarray, start: int, delta: float) -> np.ndarray:
    chosen = [start]
    dist = np.linalg.norm(candidates - candidates[start], axis=1)
    while True:
        far = int(np.argmax(dist))
        if dist[far] <= delta:
            break
        chosen.append(far)
        dist = np.minimum(dist, np.linalg.norm(candidates - candidates[far], axis=1))
    return candidates[np.array(chosen)]


def _fill_gaps(points: np.ndarray, probes: np.ndarray, delta: float) -> np.ndarray:
    """Greedy farthest-point continuation over the probe grid.

    Appends the farthest uncovered probe while it sits strictly beyond delta,
    so separation stays strict; stops once no probe is delta or farther (open
    -ball cover achieved) or the only gap is an exact-delta tie.
    """
    gap = cKDTree(points).query(probes)[0]
    extra = []
    while True:
        far = int(np.argmax(gap))
        if gap[far] < delta:
            break
        if gap[far] <= delta * (1.0 + 1e-12):
            break  # exact tie: adding it would break strict separation
        extra.append(probes[far])
        gap = np.minimum(gap, np.linalg.norm(probes - probes[far], axis=1))
    if extra:
        points = np.vstack([points, np.array(extra)])
    return points


def build(controls, delta: float, probe_spacing: Optional[float] = None) -> DeltaNet:
    """Greedy farthest-point net over a candidate grid of spacing <= delta/4.

    Coverage gaps left by the coarse candidate grid are filled by continuing
    the same greedy rule over the finer probe grid; aborted starts are retried
    from a deterministic ladder of positions. The first net that passes
    `verify` is returned.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    candidates = controls.net_candidates(delta / 4.0)
    probes = controls.net_candidates(probe_spacing or delta / 10.5)
    count = candidates.shape[0]
    tried = set()
    for frac in _START_FRACTIONS:
        start = min(int(frac * count), count - 1)
        if start in tried:
            continue
        tried.add(start)
        points = _fill_gaps(_greedy(candidates, start, delta), probes, delta)
        net = DeltaNet(delta=float(delta), points=points)
        if verify(controls, net, probe_spacing).ok:
            return net
    raise NetBuildError(
        f"no verifiable net found for delta={delta}; the separation/cover pair "
        "may be unattainable at this delta"
    )


def _uniform_axis(lo: float, hi: float, delta: float) -> np.ndarray:
    """Endpoint-inclusive uniform grid on [lo, hi] valid as a 1-d net.

    ceil(L/delta) points give a spacing strictly inside (delta, 2*delta]
    whenever L > delta; a shorter interval collapses to its midpoint.
    """
    length = hi - lo
    if length <= delta:
        return np.array([0.5 * (lo + hi)]) if length > 0 else np.array([lo])
    count = int(np.ceil(length / delta))
    return np.linspace(lo, hi, count)


def uniform_points(controls, delta: float) -> np.ndarray:
    """Per-factor uniform sample of the control set suitable for a delta net.

    Finite factors contribute their points; interval factors a uniform grid
    with the count derived from delta.
    """
    from .model import Box, FiniteSet, ProductSet

    if isinstance(controls, FiniteSet):
        return controls.points.copy()
    if isinstance(controls, Box):
        axes = [_uniform_axis(float(lo), float(hi), delta)
                for lo, hi in zip(controls.lo, controls.hi)]
        grids = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)
    if isinstance(controls, ProductSet):
        blocks = [uniform_points(f, delta) for f in controls.factors]
        out = blocks[0]
        for blk in blocks[1:]:
            out = np.hstack([
                np.repeat(out, blk.shape[0], axis=0),
                np.tile(blk, (out.shape[0], 1)),
            ])
        return out
    raise TypeError(f"unsupported control set {type(controls).__name__}")


def uniform_net(controls, delta: float,
                per_interval: Optional[int] = None) -> DeltaNet:
    """Package a uniform per-factor sample grid as a verified net.

    With per_interval given, interval factors use that many endpoint
    -inclusive points (the grid must then separate/cover at delta, i.e. a
    point spacing strictly between delta and 2*delta, or NetBuildError is
    raised); otherwise counts are derived from delta per factor.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    if per_interval is None:
        pts = uniform_points(controls, delta)
    else:
        pts = controls.hull_sample_points(per_interval)
    net = DeltaNet(delta=float(delta), points=pts)
    report = verify(controls, net)
    if not report.ok:
        raise NetBuildError(
            f"uniform grid is not a valid net at delta={delta} "
            f"(min pairwise {report.min_pairwise:.6g}, "
            f"max probe gap {report.max_probe_gap:.6g})"
        )
    return net


def verify(controls, net: DeltaNet, probe_spacing: Optional[float] = None) -> NetVerifyReport:
    """Check pairwise separation > delta and open-ball cover on a probe grid.

    The probe grid spacing defaults to just under delta/10.
    """
    pts = net.points
    delta = net.delta
    if pts.shape[0] > 1:
        min_pair = float(cKDTree(pts).query(pts, k=2)[0][:, 1].min())
    else:
        min_pair = np.inf
    packing_ok = bool(min_pair > delta)

    probes = controls.net_candidates(probe_spacing or delta / 10.5)
    gaps = cKDTree(pts).query(probes)[0]
    max_gap = float(gaps.max())
    covering_ok = bool(max_gap < delta)
    return NetVerifyReport(
        ok=packing_ok and covering_ok,
        packing_ok=packing_ok,
        covering_ok=covering_ok,
        min_pairwise=min_pair,
        max_probe_gap=max_gap,
    )


def save_net(net: DeltaNet, path: str) -> None:
    """Write one control point per row (columns u1..um); delta is not stored."""
    m = net.points.shape[1]
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"u{i+1}" for i in range(m)])
        for row in net.points:
            writer.writerow([repr(float(v)) for v in row])


def load_net(path: str, delta: float) -> DeltaNet:
    """Read points written by save_net; delta comes from the caller's config."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    pts = np.array([[float(v) for v in row] for row in rows[1:]], dtype=float)
    return DeltaNet(delta=float(delta), points=np.atleast_2d(pts))
