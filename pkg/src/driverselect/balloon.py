"""Directed balloon graphs, orbit quotients and the closed-form Gramian element.

A balloon graph joins a driver ``v0`` to a terminal ``v_d`` through ``b``
disjoint directed chains of length ``d``. Fixing the driver, the interior nodes
at equal depth form one orbit, so the quotient is a directed path whose last
edge carries weight ``b * gamma``. The terminal diagonal Gramian element then
has the closed form implemented in :func:`balloon_Wdd`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError
from .graph import Graph, state_matrix

__all__ = [
    "BalloonSpec",
    "OrbitPartition",
    "build_balloon",
    "balloon_orbits",
    "is_symmetry",
    "quotient_adjacency",
    "expand_gramian",
    "balloon_Wdd",
    "balloon_Jstar",
]


@dataclass(frozen=True)
class BalloonSpec:
    d: int
    b: int
    gamma: float = 1.0
    nu: float = 1.0

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise ConfigError(f"balloon length d must be an integer >= 1, got {self.d}")
        if int(self.b) != self.b or self.b < 1:
            raise ConfigError(f"balloon branch count b must be an integer >= 1, got {self.b}")
        if not (self.gamma > 0 and self.nu > 0):
            raise ConfigError("gamma and nu must be positive")

    @property
    def n(self) -> int:
        return 2 + self.b * (self.d - 1)

    @property
    def terminal(self) -> int:
        return self.n - 1


@dataclass(frozen=True)
class OrbitPartition:
    """Disjoint orbits covering ``range(n)``."""

    orbits: tuple

    def __post_init__(self):
        orbits = tuple(tuple(int(v) for v in o) for o in self.orbits)
        nodes = sorted(v for o in orbits for v in o)
        if any(len(o) == 0 for o in orbits) or nodes != list(range(len(nodes))):
            raise ConfigError("orbits must be nonempty and partition range(n)")
        object.__setattr__(self, "orbits", orbits)

    @classmethod
    def trivial(cls, n) -> "OrbitPartition":
        return cls(tuple((v,) for v in range(n)))

    @property
    def n(self) -> int:
        return sum(len(o) for o in self.orbits)

    @property
    def q(self) -> int:
        return len(self.orbits)

    @property
    def indicator(self) -> np.ndarray:
        E = np.zeros((self.n, self.q))
        for col, orbit in enumerate(self.orbits):
            E[list(orbit), col] = 1.0
        return E


def _chain_node(spec, branch, depth) -> int:
    return 1 + branch * (spec.d - 1) + (depth - 1)


def build_balloon(spec: BalloonSpec) -> Graph:
    """Balloon graph with driver ``0``, chains numbered branch-major, terminal ``n - 1``.

    ``d = 1`` with ``b > 1`` would need parallel edges and is rejected.
    """
    if spec.d == 1 and spec.b > 1:
        raise ConfigError("d = 1 balloons with b > 1 need parallel edges; not representable")
    edges = set()
    if spec.d == 1:
        edges.add((0, 1))
    else:
        for branch in range(spec.b):
            prev = 0
            for depth in range(1, spec.d):
                node = _chain_node(spec, branch, depth)
                edges.add((prev, node))
                prev = node
            edges.add((prev, spec.terminal))
    return Graph(spec.n, frozenset(edges), spec.gamma, spec.nu, directed=True)


def balloon_orbits(spec: BalloonSpec) -> OrbitPartition:
    """Orbits of the automorphisms fixing the driver: one per depth."""
    orbits = [(0,)]
    for depth in range(1, spec.d):
        orbits.append(tuple(_chain_node(spec, br, depth) for br in range(spec.b)))
    orbits.append((spec.terminal,))
    return OrbitPartition(tuple(orbits))


def is_symmetry(g: Graph, perm) -> bool:
    """True iff mapping node ``j`` to ``perm[j]`` leaves the edge set unchanged."""
    perm = [int(v) for v in perm]
    if sorted(perm) != list(range(g.n)):
        raise ConfigError("perm must be a bijection on range(n)")
    return {(perm[j], perm[k]) for j, k in g.edges} == g.edges


def quotient_adjacency(g: Graph, part: OrbitPartition, atol=1e-12) -> np.ndarray:
    """Quotient state matrix ``E^+ A E`` of an equitable partition.

    Raises
    ------
    ConfigError
        If some orbit's members disagree on their in-neighbour counts in
        another orbit (``A E != E A^Q``).
    """
    if part.n != g.n:
        raise ConfigError(f"partition covers {part.n} nodes, graph has {g.n}")
    A = state_matrix(g)
    E = part.indicator
    E_pinv = np.linalg.solve(E.T @ E, E.T)
    AQ = E_pinv @ A @ E
    if not np.allclose(A @ E, E @ AQ, atol=atol, rtol=0):
        raise ConfigError("orbit partition is not equitable for this graph")
    return AQ


def expand_gramian(WQ, part: OrbitPartition) -> np.ndarray:
    """Lift a quotient Gramian to the full node set, ``E W^Q E^T``."""
    E = part.indicator
    return E @ np.asarray(WQ) @ E.T


def _regularized_lower_gamma(a: int, x: float) -> float:
    """``1 - e^{-x} sum_{k<a} x^k / k!`` without cancellation."""
    if x <= 0:
        return 0.0
    log_x = math.log(x)

    def term(k):
        return math.exp(k * log_x - math.lgamma(k + 1) - x)

    if x < a:
        # tail series; terms shrink geometrically once k > x
        terms = []
        k = a
        while True:
            t = term(k)
            terms.append(t)
            if t <= 1e-18 * terms[0] or k > a + 2000:
                break
            k += 1
        return math.fsum(terms)
    return 1.0 - math.fsum(term(k) for k in range(a))


def balloon_Wdd(spec: BalloonSpec, t=math.inf) -> float:
    """Terminal diagonal Gramian element of the balloon driven at ``v0``.

    ``b^2/(2 nu) (gamma/(2 nu))^(2d) C(2d, d)`` times the regularised lower
    incomplete gamma ``P(2d + 1, 2 nu t)``, which is 1 for ``t = inf``.
    """
    d, b = spec.d, spec.b
    if t < 0:
        raise ConfigError(f"time must be nonnegative, got {t}")
    log_w = (
        2 * math.log(b)
        - math.log(2 * spec.nu)
        + 2 * d * math.log(spec.gamma / (2 * spec.nu))
        + math.log(math.comb(2 * d, d))
    )
    if math.isinf(t):
        return math.exp(log_w)
    bracket = _regularized_lower_gamma(2 * d + 1, 2 * spec.nu * t)
    if bracket == 0.0:
        return 0.0
    return math.exp(log_w + math.log(bracket))


def balloon_Jstar(spec: BalloonSpec, beta, t=math.inf) -> float:
    """Minimum energy ``beta^2 / (2 W_dd(t))`` to move the terminal by ``beta``."""
    if t <= 0:
        raise ConfigError(f"time must be positive, got {t}")
    if beta == 0:
        return 0.0
    return beta * beta / (2.0 * balloon_Wdd(spec, t))
