"""Graph representation with random generators and edge-list I/O.

Edges are ordered pairs ``(j, k)`` read as "from node j to node k". The state
matrix follows the column-source convention: an edge ``j -> k`` writes the
uniform weight ``gamma`` into entry ``A[k, j]``, and every diagonal entry is the
uniform loop weight ``-nu``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable

import networkx as nx
import numpy as np

from .exceptions import ConfigError, EdgeListParseError, NumericalError

__all__ = [
    "Graph",
    "FAMILIES",
    "as_nodeset",
    "state_matrix",
    "spectral_abscissa",
    "is_hurwitz",
    "gershgorin_nu",
    "gen_graph",
    "read_edge_list",
    "edge_list_text",
    "write_edge_list",
]

FAMILIES = ("erdos_renyi", "k_regular", "watts_strogatz", "power_law_config")

_MAX_RESAMPLE = 100


@dataclass(frozen=True, eq=True)
class Graph:
    """Directed graph with uniform edge weight ``gamma`` and loop weight ``-nu``.

    Undirected graphs are stored as symmetric pairs of directed edges; the
    ``directed`` flag is metadata only.
    """

    n: int
    edges: frozenset = field(default_factory=frozenset)
    gamma: float = 1.0
    nu: float = 1.0
    directed: bool = True

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ConfigError(f"node count must be a positive integer, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "gamma", float(self.gamma))
        object.__setattr__(self, "nu", float(self.nu))
        if not (self.gamma > 0 and math.isfinite(self.gamma)):
            raise ConfigError(f"gamma must be positive, got {self.gamma}")
        if not (self.nu > 0 and math.isfinite(self.nu)):
            raise ConfigError(f"nu must be positive, got {self.nu}")
        edges = frozenset((int(j), int(k)) for j, k in self.edges)
        for j, k in edges:
            if j == k:
                raise ConfigError(f"self-loop ({j}, {k}) not allowed; loops are uniform")
            if not (0 <= j < self.n and 0 <= k < self.n):
                raise ConfigError(f"edge ({j}, {k}) out of range for n={self.n}")
        object.__setattr__(self, "edges", edges)

    @classmethod
    def from_edges(cls, n, edges: Iterable, gamma=1.0, nu=1.0, directed=True):
        """Build a graph from an edge sequence, rejecting duplicates."""
        edges = [(int(j), int(k)) for j, k in edges]
        seen = set()
        for e in edges:
            if e in seen:
                raise ConfigError(f"duplicate edge {e}")
            seen.add(e)
        return cls(n, frozenset(seen), gamma, nu, directed)

    @classmethod
    def from_networkx(cls, G, gamma=1.0, nu=1.0):
        mapping = {v: i for i, v in enumerate(sorted(G.nodes()))}
        edges = set()
        for u, v in G.edges():
            a, b = mapping[u], mapping[v]
            if a == b:
                continue
            edges.add((a, b))
            if not G.is_directed():
                edges.add((b, a))
        return cls(len(mapping), frozenset(edges), gamma, nu, G.is_directed())

    @classmethod
    def from_state_matrix(cls, A, atol=1e-12):
        """Recover a uniform-weight graph from its state matrix."""
        A = np.asarray(A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ConfigError(f"state matrix must be square, got shape {A.shape}")
        n = A.shape[0]
        diag = np.diag(A)
        if not np.allclose(diag, diag[0], atol=atol) or diag[0] >= 0:
            raise ConfigError("state matrix needs a uniform negative diagonal")
        off = A - np.diag(diag)
        dst, src = np.nonzero(np.abs(off) > atol)
        weights = off[dst, src]
        if weights.size and (not np.allclose(weights, weights[0], atol=atol) or weights[0] <= 0):
            raise ConfigError("state matrix needs a uniform positive edge weight")
        gamma = float(weights[0]) if weights.size else 1.0
        edges = frozenset(zip(src.tolist(), dst.tolist()))
        directed = not np.allclose(off, off.T, atol=atol)
        return cls(n, edges, gamma, float(-diag[0]), directed)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def _edge_array(self) -> np.ndarray:
        if not self.edges:
            return np.zeros((0, 2), dtype=np.int64)
        return np.array(sorted(self.edges), dtype=np.int64)

    @cached_property
    def successors(self) -> tuple:
        out = [[] for _ in range(self.n)]
        for j, k in sorted(self.edges):
            out[j].append(k)
        return tuple(tuple(s) for s in out)

    @cached_property
    def predecessors(self) -> tuple:
        inc = [[] for _ in range(self.n)]
        for j, k in sorted(self.edges):
            inc[k].append(j)
        return tuple(tuple(s) for s in inc)

    def in_degree(self) -> np.ndarray:
        return np.bincount(self._edge_array[:, 1], minlength=self.n)

    def out_degree(self) -> np.ndarray:
        return np.bincount(self._edge_array[:, 0], minlength=self.n)

    def adjacency(self) -> np.ndarray:
        """Unweighted 0/1 matrix in the state-matrix orientation (``[k, j]`` for ``j -> k``)."""
        M = np.zeros((self.n, self.n))
        e = self._edge_array
        M[e[:, 1], e[:, 0]] = 1.0
        return M

    def with_weights(self, gamma=None, nu=None) -> "Graph":
        return Graph(
            self.n,
            self.edges,
            self.gamma if gamma is None else gamma,
            self.nu if nu is None else nu,
            self.directed,
        )

    def to_networkx(self) -> nx.DiGraph:
        G = nx.DiGraph()
        G.add_nodes_from(range(self.n))
        G.add_edges_from(sorted(self.edges))
        return G


def as_nodeset(nodes, n=None) -> tuple:
    """Validate a node collection and return it as a strictly increasing tuple."""
    if isinstance(nodes, (int, np.integer)):
        nodes = [nodes]
    arr = [int(v) for v in np.asarray(list(nodes)).ravel()]
    out = tuple(sorted(set(arr)))
    if len(out) != len(arr):
        raise ConfigError(f"node set contains duplicates: {arr}")
    if out and out[0] < 0:
        raise ConfigError(f"negative node index in {arr}")
    if n is not None and out and out[-1] >= n:
        raise ConfigError(f"node index {out[-1]} out of range for n={n}")
    return out


def state_matrix(g: Graph) -> np.ndarray:
    """Dense state matrix: ``-nu`` on the diagonal, ``gamma`` at ``[k, j]`` for each edge ``j -> k``."""
    return g.gamma * g.adjacency() - g.nu * np.eye(g.n)


def spectral_abscissa(A) -> float:
    A = np.asarray(A, dtype=float)
    try:
        eig = np.linalg.eigvals(A)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigenvalue computation failed: {exc}") from exc
    return float(np.max(eig.real))


def is_hurwitz(g, tol=1e-10) -> bool:
    """True iff every eigenvalue of the state matrix has real part below ``-tol``.

    ``g`` may be a :class:`Graph` or a square array.
    """
    A = state_matrix(g) if isinstance(g, Graph) else g
    return spectral_abscissa(A) < -tol


def gershgorin_nu(edges, n, gamma=1.0) -> float:
    """Loop magnitude ``gamma * (k_max + 1)`` with ``k_max`` the largest in-degree.

    Every Gershgorin disc of the state matrix then lies strictly in the left
    half plane.
    """
    indeg = np.zeros(n, dtype=int)
    for _, k in edges:
        indeg[k] += 1
    kmax = int(indeg.max()) if n else 0
    return float(gamma) * (kmax + 1)


def _directed_regular(n, k, rng) -> set:
    # circulant start, then in/out-degree preserving double-edge swaps
    edges = [(i, (i + s) % n) for i in range(n) for s in range(1, k + 1)]
    present = set(edges)
    m = len(edges)
    if m < 2:
        return present
    for _ in range(20 * m):
        a, b = rng.integers(m, size=2)
        if a == b:
            continue
        (u, v), (x, y) = edges[a], edges[b]
        if u == y or x == v or (u, y) in present or (x, v) in present:
            continue
        present.difference_update(((u, v), (x, y)))
        present.update(((u, y), (x, v)))
        edges[a], edges[b] = (u, y), (x, v)
    return present


def _power_law_degrees(n, k_av, exponent, rng) -> np.ndarray:
    # continuous Pareto has mean k_min * (a - 1) / (a - 2)
    if exponent <= 2:
        raise ConfigError(f"power-law exponent must exceed 2, got {exponent}")
    k_min = k_av * (exponent - 2) / (exponent - 1)
    for _ in range(_MAX_RESAMPLE):
        u = 1.0 - rng.random(n)
        deg = np.rint(k_min * u ** (-1.0 / (exponent - 1))).astype(int)
        deg = np.clip(deg, 1, n - 1)
        if deg.sum() % 2 == 0:
            return deg
    raise ConfigError("could not draw a power-law degree sequence with even sum")


def _require(params, key, family):
    if key not in params or params[key] is None:
        raise ConfigError(f"family {family!r} requires parameter {key!r}")
    return params[key]


def gen_graph(
    family: str,
    n: int,
    params: dict | None = None,
    directed: bool = False,
    seed: int = 0,
    gamma: float = 1.0,
    nu: float | None = None,
) -> Graph:
    """Generate a random graph from one of :data:`FAMILIES`.

    Parameters
    ----------
    family : str
        ``erdos_renyi`` (``k_av``), ``k_regular`` (``k``), ``watts_strogatz``
        (``k_av``, ``rewire``) or ``power_law_config`` (``k_av``, ``exponent``).
    n : int
        Number of nodes, at least 2.
    params : dict
        Family parameters named above.
    directed : bool
        Erdos-Renyi includes each ordered pair independently; k-regular gives
        every node exactly ``k`` in- and out-edges. Watts-Strogatz and
        power-law graphs are drawn undirected and every edge is kept in both
        directions.
    seed : int
        Seed of the generator owned by this call.
    gamma, nu : float
        Uniform weights. ``nu=None`` picks :func:`gershgorin_nu`.
    """
    params = dict(params or {})
    if family not in FAMILIES:
        raise ConfigError(f"unknown graph family {family!r}; choose from {FAMILIES}")
    if int(n) != n or n < 2:
        raise ConfigError(f"n must be an integer >= 2, got {n!r}")
    n = int(n)
    rng = np.random.default_rng(seed)
    nx_seed = int(rng.integers(2**31 - 1))
    edges: set

    if family == "erdos_renyi":
        k_av = float(_require(params, "k_av", family))
        prob = k_av / (n - 1)
        if not 0 <= prob <= 1:
            raise ConfigError(f"k_av={k_av} infeasible for n={n}")
        G = nx.gnp_random_graph(n, prob, seed=nx_seed, directed=directed)
        edges = _edges_of(G)
    elif family == "k_regular":
        k = int(_require(params, "k", family))
        if not 0 <= k < n:
            raise ConfigError(f"k-regular needs 0 <= k < n, got k={k}, n={n}")
        if directed:
            edges = _directed_regular(n, k, rng)
        else:
            if (n * k) % 2:
                raise ConfigError(f"undirected k-regular needs n*k even (n={n}, k={k})")
            edges = _edges_of(nx.random_regular_graph(k, n, seed=nx_seed))
    elif family == "watts_strogatz":
        k = int(round(float(_require(params, "k_av", family))))
        rewire = float(params.get("rewire", 0.05))
        if not 0 < k < n:
            raise ConfigError(f"Watts-Strogatz needs 0 < k_av < n, got {k}")
        if k % 2:
            raise ConfigError(f"Watts-Strogatz average degree must be even, got {k}")
        edges = _edges_of(nx.watts_strogatz_graph(n, k, rewire, seed=nx_seed))
    else:
        k_av = float(_require(params, "k_av", family))
        exponent = float(params.get("exponent", 3.0))
        deg = _power_law_degrees(n, k_av, exponent, rng)
        M = nx.configuration_model(deg.tolist(), seed=nx_seed)
        simple = nx.Graph(M)
        simple.remove_edges_from(list(nx.selfloop_edges(simple)))
        edges = _edges_of(simple)

    if nu is None:
        nu = gershgorin_nu(edges, n, gamma)
    return Graph(n, frozenset(edges), gamma, nu, bool(directed))


def _edges_of(G) -> set:
    edges = set()
    for u, v in G.edges():
        if u == v:
            continue
        edges.add((int(u), int(v)))
        if not G.is_directed():
            edges.add((int(v), int(u)))
    return edges


def edge_list_text(g: Graph) -> str:
    """Edge-list serialisation of ``g``: header line, then one ``j k`` line per edge."""
    lines = [f"n {g.n} gamma {g.gamma!r} nu {g.nu!r} directed {int(g.directed)}"]
    lines += [f"{j} {k}" for j, k in sorted(g.edges)]
    return "\n".join(lines) + "\n"


def write_edge_list(g: Graph, path) -> None:
    """Write ``g`` as a UTF-8 edge list with a one-line header."""
    Path(path).write_text(edge_list_text(g), encoding="utf-8")


def read_edge_list(path) -> Graph:
    """Parse an edge-list file; errors carry the offending line number."""
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines:
        raise EdgeListParseError("missing header", 1)
    tok = lines[0].split()
    if len(tok) != 8 or tok[0::2] != ["n", "gamma", "nu", "directed"]:
        raise EdgeListParseError(
            "header must read 'n <count> gamma <real> nu <real> directed <0|1>'", 1
        )
    try:
        n = int(tok[1])
        gamma, nu = float(tok[3]), float(tok[5])
        directed = {"0": False, "1": True}[tok[7]]
    except (ValueError, KeyError) as exc:
        raise EdgeListParseError(f"bad header value: {exc}", 1) from exc

    edges = set()
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 2:
            raise EdgeListParseError(f"expected 'j k', got {line!r}", lineno)
        try:
            j, k = int(parts[0]), int(parts[1])
        except ValueError as exc:
            raise EdgeListParseError(f"non-integer node index in {line!r}", lineno) from exc
        if (j, k) in edges:
            raise EdgeListParseError(f"duplicate edge ({j}, {k})", lineno)
        if j == k or not (0 <= j < n and 0 <= k < n):
            raise EdgeListParseError(f"invalid edge ({j}, {k}) for n={n}", lineno)
        edges.add((j, k))
    try:
        return Graph(n, frozenset(edges), gamma, nu, directed)
    except ConfigError as exc:
        raise EdgeListParseError(str(exc), 1) from exc
