"""Structural pairwise cost from hop distances and shortest-path redundancy.

The pairwise cost prices assigning target ``k`` to candidate driver ``j`` by
the log of the inverse Stirling-approximated balloon Gramian element for the
pair's distance and redundancy.
"""
from __future__ import annotations

import csv
import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from .exceptions import ConfigError
from .graph import Graph, as_nodeset

__all__ = [
    "bfs_distances",
    "all_pairs_distance",
    "distance_matrix",
    "redundancy",
    "pairwise_cost",
    "StructureMatrices",
    "structure_matrices",
    "flp_set_cost",
]


def bfs_distances(adj, source) -> np.ndarray:
    """Hop distances from ``source`` following ``adj`` lists; ``inf`` if unreachable."""
    dist = np.full(len(adj), np.inf)
    dist[source] = 0
    queue = deque([source])
    while queue:
        u = queue.popleft()
        du = dist[u] + 1
        for v in adj[u]:
            if dist[v] == np.inf:
                dist[v] = du
                queue.append(v)
    return dist


def all_pairs_distance(g: Graph, targets) -> np.ndarray:
    """``dist[j, i]`` = shortest directed hop count from node ``j`` to ``targets[i]``.

    One reverse breadth-first search per target.
    """
    targets = as_nodeset(targets, g.n)
    out = np.empty((g.n, len(targets)))
    for i, k in enumerate(targets):
        out[:, i] = bfs_distances(g.predecessors, k)
    return out


def distance_matrix(g: Graph) -> np.ndarray:
    """Full ``n x n`` forward hop-distance matrix."""
    return np.vstack([bfs_distances(g.successors, j) for j in range(g.n)])


def _on_path_count(dist_from_j, dist_to_k, d_jk) -> int:
    return int(np.count_nonzero(dist_from_j + dist_to_k == d_jk))


def redundancy(g: Graph, j, k, dist_from_j=None, dist_to_k=None) -> Fraction:
    """Exact redundancy ``(|V_jk| - 2) / (d_jk - 1)`` of the pair ``j -> k``.

    ``V_jk`` holds every node lying on some shortest ``j -> k`` path. Defined
    only for ``2 <= d_jk < inf``.
    """
    if dist_from_j is None:
        dist_from_j = bfs_distances(g.successors, j)
    if dist_to_k is None:
        dist_to_k = bfs_distances(g.predecessors, k)
    d = dist_from_j[k]
    if not (2 <= d < np.inf):
        raise ValueError(f"redundancy needs 2 <= d < inf, got d({j},{k}) = {d}")
    count = _on_path_count(np.asarray(dist_from_j), np.asarray(dist_to_k), d)
    return Fraction(count - 2, int(d) - 1)


def pairwise_cost(d, r, gamma, nu) -> float:
    """Structural cost ``log(2 nu / r^2 * (nu/gamma)^(2d) * sqrt(pi d))``.

    ``d = 0`` returns ``log(2 nu)``, ``d = 1`` forces ``r = 1`` and an
    unreachable pair (``d = inf``) costs ``+inf``.
    """
    if not (gamma > 0 and nu > 0):
        raise ConfigError(f"gamma and nu must be positive, got {gamma}, {nu}")
    if d == math.inf:
        return math.inf
    if d < 0:
        raise ValueError(f"distance must be nonnegative, got {d}")
    if d == 0:
        return math.log(2 * nu)
    if d == 1:
        r = 1
    r = float(r)
    if r <= 0:
        raise ValueError(f"redundancy must be positive, got {r}")
    return (
        math.log(2 * nu)
        - 2 * math.log(r)
        + 2 * d * math.log(nu / gamma)
        + 0.5 * math.log(math.pi * d)
    )


@dataclass(frozen=True)
class StructureMatrices:
    """Candidate-by-target structure. Rows are all ``n`` nodes, columns the targets.

    ``on_path`` stores ``|V_jk|`` where defined (``d >= 2``) and ``-1``
    elsewhere; :attr:`redundancy` rebuilds the exact rationals from it.
    """

    targets: tuple
    dist: np.ndarray
    on_path: np.ndarray
    cost: np.ndarray
    gamma: float
    nu: float

    @property
    def redundancy(self) -> np.ndarray:
        out = np.full(self.dist.shape, None, dtype=object)
        for j, i in zip(*np.nonzero(self.on_path >= 0)):
            out[j, i] = Fraction(int(self.on_path[j, i]) - 2, int(self.dist[j, i]) - 1)
        return out

    def redundancy_float(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            r = (self.on_path - 2) / (self.dist - 1)
        return np.where(self.on_path >= 0, r, np.nan)

    def to_csv(self, directory, prefix="structure") -> list:
        """Dump each matrix to its own CSV file."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        header = ["candidate"] + [f"t{k}" for k in self.targets]
        red = self.redundancy
        tables = {
            "dist": [[_fmt(x) for x in row] for row in self.dist],
            "redundancy": [["" if x is None else str(x) for x in row] for row in red],
            "cost": [[_fmt(x) for x in row] for row in self.cost],
        }
        paths = []
        for name, rows in tables.items():
            path = directory / f"{prefix}_{name}.csv"
            with open(path, "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh)
                w.writerow(header)
                for j, row in enumerate(rows):
                    w.writerow([j] + row)
            paths.append(path)
        return paths


def _fmt(x) -> str:
    if x == np.inf:
        return "inf"
    return repr(float(x))


def structure_matrices(g: Graph, targets) -> StructureMatrices:
    targets = as_nodeset(targets, g.n)
    D = distance_matrix(g)
    p = len(targets)
    dist = D[:, list(targets)] if p else np.zeros((g.n, 0))
    on_path = np.full((g.n, p), -1, dtype=np.int64)
    cost = np.empty((g.n, p))
    for i, k in enumerate(targets):
        d_k = dist[:, i]
        # via[j, l] = d(j, l) + d(l, k)
        via = D + D[:, k][None, :]
        counts = np.count_nonzero(via == d_k[:, None], axis=1)
        defined = (d_k >= 2) & np.isfinite(d_k)
        on_path[defined, i] = counts[defined]
        for j in range(g.n):
            d = d_k[j]
            r = Fraction(int(counts[j]) - 2, int(d) - 1) if defined[j] else 1
            cost[j, i] = pairwise_cost(d, r, g.gamma, g.nu)
    return StructureMatrices(targets, dist, on_path, cost, g.gamma, g.nu)


def flp_set_cost(cost, drivers) -> float:
    """Sum over targets of the cheapest assignment to any driver in ``drivers``.

    ``cost`` is a :class:`StructureMatrices` or an ``n x p`` array.
    """
    if isinstance(cost, StructureMatrices):
        cost = cost.cost
    drivers = as_nodeset(drivers, cost.shape[0])
    if not drivers:
        raise ConfigError("driver set must be nonempty")
    return float(np.sum(cost[list(drivers)].min(axis=0)))
