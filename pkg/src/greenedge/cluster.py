"""Neighbourhood graph, Gaussian similarity and K-means partition of base stations."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Set, Union

import numpy as np

from greenedge.errors import ConfigError, TraceParseError


@dataclass(frozen=True)
class Topology:
    positions: np.ndarray  # (N, 2) metres, row i is BS i
    e_d: float = 80.0
    sigma_d: float = 30.0

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float).reshape(-1, 2)
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        if self.e_d <= 0:
            raise ConfigError("must be positive", field="e_d")
        if self.sigma_d <= 0:
            raise ConfigError("must be positive", field="sigma_d")
        if len(pos) == 0:
            raise ConfigError("need at least one base station", field="positions")
        if len({tuple(p) for p in pos}) != len(pos):
            raise ConfigError("base station positions must be distinct", field="positions")

    @property
    def n(self) -> int:
        return len(self.positions)

    def distances(self) -> np.ndarray:
        diff = self.positions[:, None, :] - self.positions[None, :, :]
        return np.sqrt((diff**2).sum(axis=-1))


@dataclass(frozen=True)
class Partition:
    clusters: tuple  # tuple of sorted tuples of BS ids

    def __post_init__(self):
        object.__setattr__(
            self, "clusters", tuple(tuple(sorted(int(i) for i in c)) for c in self.clusters)
        )

    def cluster_of(self) -> Dict[int, int]:
        return {bs: i for i, c in enumerate(self.clusters) for bs in c}

    def is_valid(self, n: int) -> bool:
        members = [bs for c in self.clusters for bs in c]
        return all(len(c) >= 1 for c in self.clusters) and sorted(members) == list(range(n))


def grid_topology(n: int, spacing: float = 60.0, e_d: float = 80.0, sigma_d: float = 30.0) -> Topology:
    """Base stations on a square-ish grid, row-major."""
    cols = int(np.ceil(np.sqrt(n)))
    pos = [((i % cols) * spacing, (i // cols) * spacing) for i in range(n)]
    return Topology(np.array(pos), e_d=e_d, sigma_d=sigma_d)


def load_topology_csv(path: Union[str, Path], e_d: float = 80.0, sigma_d: float = 30.0) -> Topology:
    """Read ``bs_id,x_meters,y_meters`` rows; ids must be 0..N-1 in any order."""
    rows = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row_no, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            try:
                bs, x, y = int(row[0]), float(row[1]), float(row[2])
            except (ValueError, IndexError) as exc:
                raise TraceParseError(str(exc), row=row_no) from None
            rows[bs] = (x, y)
    if sorted(rows) != list(range(len(rows))):
        raise ConfigError("bs ids must be 0..N-1", field="topology")
    return Topology(np.array([rows[i] for i in range(len(rows))]), e_d=e_d, sigma_d=sigma_d)


def adjacency(topo: Topology) -> List[Set[int]]:
    d = topo.distances()
    return [
        {j for j in range(topo.n) if j != i and d[i, j] <= topo.e_d} for i in range(topo.n)
    ]


def similarity(topo: Topology) -> np.ndarray:
    d = topo.distances()
    w = np.exp(-(d**2) / (2 * topo.sigma_d**2))
    w[d > topo.e_d] = 0.0
    return w


def kmeans_partition(
    topo: Topology, k: int, seed: int = 0, tol: float = 1e-6, max_iter: int = 100
) -> Partition:
    """Lloyd's algorithm on BS coordinates with seeded farthest-point initialization."""
    x = topo.positions
    n = len(x)
    if not 1 <= k <= n:
        raise ConfigError(f"need 1 <= k <= {n}, got {k}", field="n_clusters")

    rng = np.random.default_rng(seed)
    idx = [int(rng.integers(n))]
    dmin = np.linalg.norm(x - x[idx[0]], axis=1)
    while len(idx) < k:
        nxt = int(np.argmax(dmin))
        idx.append(nxt)
        dmin = np.minimum(dmin, np.linalg.norm(x - x[nxt], axis=1))
    centres = x[idx].copy()

    labels = np.zeros(n, dtype=int)
    for _ in range(max_iter):
        d = np.linalg.norm(x[:, None, :] - centres[None, :, :], axis=-1)
        labels = np.argmin(d, axis=1)
        _repair_empty(x, labels, centres, k)
        new = np.array([x[labels == c].mean(axis=0) for c in range(k)])
        shift = np.max(np.linalg.norm(new - centres, axis=1))
        centres = new
        if shift < tol:
            break
    return Partition(tuple(tuple(np.flatnonzero(labels == c)) for c in range(k)))


def _repair_empty(x, labels, centres, k):
    for c in range(k):
        if np.any(labels == c):
            continue
        sizes = np.bincount(labels, minlength=k)
        big = int(np.argmax(sizes))
        members = np.flatnonzero(labels == big)
        far = members[np.argmax(np.linalg.norm(x[members] - centres[big], axis=1))]
        labels[far] = c
        centres[c] = x[far]
