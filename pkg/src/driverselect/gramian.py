"""Controllability Gramians and the costs built on them.

Conventions: ``A`` is the ``n x n`` state matrix, ``targets`` index the rows of
the output selector ``C`` and a driver set ``D`` indexes the versor columns of
``B``. A horizon of ``numpy.inf`` selects the algebraic Lyapunov solution.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.integrate import quad_vec

from .exceptions import ConfigError, NotHurwitzError, NumericalError
from .graph import Graph, as_nodeset, spectral_abscissa, state_matrix

__all__ = [
    "lyapunov_infinite",
    "gramian_finite",
    "GramianSet",
    "driver_contributions",
    "log_det_output",
    "numerical_rank",
    "batch_numerical_rank",
    "batch_log_det",
    "vol_cost",
    "expected_energy",
    "Maneuver",
    "optimal_energy",
    "output_expectation",
]

logger = logging.getLogger(__name__)

_EPS = np.finfo(float).eps


def _square(M, name) -> np.ndarray:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ConfigError(f"{name} must be square, got shape {M.shape}")
    return M


def _sym(M) -> np.ndarray:
    return 0.5 * (M + M.T)


def _require_hurwitz(A, tol=0.0) -> None:
    abscissa = spectral_abscissa(A)
    if not abscissa < -tol:
        raise NotHurwitzError(abscissa)


def lyapunov_infinite(A, Q, check=True) -> np.ndarray:
    """Solve ``A W + W A^T + Q = 0`` for Hurwitz ``A`` (Bartels-Stewart).

    Raises
    ------
    NotHurwitzError
        If ``A`` has an eigenvalue with nonnegative real part.
    """
    A = _square(A, "A")
    Q = _square(Q, "Q")
    if A.shape != Q.shape:
        raise ConfigError(f"A and Q shapes differ: {A.shape} vs {Q.shape}")
    if check:
        _require_hurwitz(A)
    W = _sym(linalg.solve_continuous_lyapunov(A, -Q))
    if logger.isEnabledFor(logging.DEBUG):
        res = np.linalg.norm(A @ W + W @ A.T + Q)
        logger.debug("lyapunov residual %.3e (|Q| = %.3e)", res, np.linalg.norm(Q))
    return W


def _gramian_quadrature(A, Q, t_f, rtol) -> np.ndarray:
    def integrand(tau):
        E = linalg.expm(A * tau)
        return E @ Q @ E.T

    W, _err, info = quad_vec(
        integrand, 0.0, t_f, epsrel=rtol, epsabs=0.0, norm="max", limit=20000, full_output=True
    )
    if not info.success:
        raise NumericalError(f"Gramian quadrature did not converge: {info.message}")
    return _sym(W)


def gramian_finite(A, Q, t_f, method="auto", rtol=1e-9) -> np.ndarray:
    """Finite-horizon Gramian ``W(t_f) = int_0^t_f e^{A s} Q e^{A^T s} ds``.

    With ``method="auto"`` a Hurwitz ``A`` uses the identity
    ``W(t) = W(inf) - e^{At} W(inf) e^{A^T t}`` and anything else falls back to
    adaptive quadrature at relative tolerance ``rtol``. ``"identity"`` and
    ``"quadrature"`` force one route.
    """
    A = _square(A, "A")
    Q = _square(Q, "Q")
    if t_f < 0 or math.isnan(t_f):
        raise ConfigError(f"horizon must be nonnegative, got {t_f}")
    if t_f == 0:
        return np.zeros_like(Q)
    if method not in ("auto", "identity", "quadrature"):
        raise ConfigError(f"unknown Gramian method {method!r}")
    if math.isinf(t_f):
        return lyapunov_infinite(A, Q)
    if method == "auto":
        method = "identity" if spectral_abscissa(A) < 0 else "quadrature"
    if method == "quadrature":
        return _gramian_quadrature(A, Q, t_f, rtol)
    W_inf = lyapunov_infinite(A, Q)
    E = linalg.expm(A * t_f)
    return _sym(W_inf - E @ W_inf @ E.T)


def output_expectation(A, targets, t_f) -> np.ndarray:
    """``C X_f C^T`` with ``X_f = e^{A t_f} e^{A^T t_f}``; zero for an infinite horizon."""
    A = _square(A, "A")
    targets = list(targets)
    if math.isinf(t_f):
        return np.zeros((len(targets), len(targets)))
    CE = linalg.expm(A * t_f)[targets]
    return _sym(CE @ CE.T)


@dataclass(frozen=True, eq=False)
class GramianSet:
    """Per-candidate output Gramian contributions ``C W_k(t_f) C^T``.

    ``contributions[i]`` belongs to ``candidates[i]``. Driver sets must be
    drawn from ``candidates``.
    """

    A: np.ndarray
    targets: tuple
    candidates: tuple
    horizon: float
    contributions: np.ndarray
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_index", {c: i for i, c in enumerate(self.candidates)})

    @property
    def p(self) -> int:
        return len(self.targets)

    def __getitem__(self, node) -> np.ndarray:
        return self.contributions[self._index[int(node)]]

    def rows(self, drivers) -> list:
        try:
            return [self._index[int(d)] for d in drivers]
        except KeyError as exc:
            raise ConfigError(f"node {exc.args[0]} is not a candidate") from None

    def output_gramian(self, drivers) -> np.ndarray:
        """Summed output Gramian of ``drivers``."""
        idx = self.rows(as_nodeset(drivers))
        if not idx:
            return np.zeros((self.p, self.p))
        return self.contributions[idx].sum(axis=0)

    def expectation(self) -> np.ndarray:
        cached = self.__dict__.get("_expect")
        if cached is None:
            cached = output_expectation(self.A, self.targets, self.horizon)
            self.__dict__["_expect"] = cached
        return cached


def _schur_contributions(A, targets, candidates, t_f) -> np.ndarray:
    # one real Schur form shared by every candidate, then a triangular Sylvester solve each
    T, Z = linalg.schur(A, output="real")
    (trsyl,) = linalg.get_lapack_funcs(("trsyl",), (T,))
    Zc = Z[list(targets)]
    Ze = None
    if not math.isinf(t_f):
        Ze = (linalg.expm(A * t_f) @ Z)[list(targets)]
    out = np.empty((len(candidates), len(targets), len(targets)))
    for i, k in enumerate(candidates):
        b = Z[k]
        X, scale, info = trsyl(T, T, -np.outer(b, b), trana="N", tranb="T")
        if info < 0:
            raise NumericalError(f"trsyl failed with info={info}")
        X = X / scale
        W = Zc @ X @ Zc.T
        if Ze is not None:
            W = W - Ze @ X @ Ze.T
        out[i] = _sym(W)
    return out


def driver_contributions(g, targets, candidates=None, t_f=np.inf) -> GramianSet:
    """Output Gramian contribution of every candidate driver node.

    ``g`` is a :class:`Graph` or a state matrix. ``candidates`` defaults to
    all nodes.
    """
    A = state_matrix(g) if isinstance(g, Graph) else _square(g, "A")
    n = A.shape[0]
    targets = as_nodeset(targets, n)
    candidates = tuple(range(n)) if candidates is None else as_nodeset(candidates, n)
    if not candidates:
        raise ConfigError("candidate set must be nonempty")
    if not targets:
        raise ConfigError("target set must be nonempty")
    if t_f == 0:
        contrib = np.zeros((len(candidates), len(targets), len(targets)))
    elif spectral_abscissa(A) < 0:
        contrib = _schur_contributions(A, targets, candidates, t_f)
    else:
        if math.isinf(t_f):
            raise NotHurwitzError(spectral_abscissa(A))
        C = list(targets)
        contrib = np.empty((len(candidates), len(targets), len(targets)))
        for i, k in enumerate(candidates):
            Q = np.zeros((n, n))
            Q[k, k] = 1.0
            contrib[i] = gramian_finite(A, Q, t_f)[np.ix_(C, C)]
    return GramianSet(A, targets, candidates, float(t_f), contrib)


def _default_tol(W, rel_tol):
    return W.shape[0] * _EPS if rel_tol is None else rel_tol


def numerical_rank(W, rel_tol=None) -> int:
    """Number of eigenvalues above ``rel_tol * lambda_max`` (default ``p * eps``)."""
    W = _sym(_square(W, "W"))
    lam = np.linalg.eigvalsh(W)
    lam_max = lam[-1] if lam.size else 0.0
    if lam_max <= 0:
        return 0
    return int(np.count_nonzero(lam > _default_tol(W, rel_tol) * lam_max))


def log_det_output(W, rel_tol=None) -> float:
    """``log det W`` with eigenvalues floored at ``rel_tol * lambda_max`` (default ``p * eps``).

    The floor is applied to every matrix, so numerically zero eigenvalues
    always count as the floor value; this keeps the result monotone in the
    Loewner order. Returns ``-inf`` when ``lambda_max <= 0``.
    """
    return float(batch_log_det(_sym(_square(W, "W"))[None], rel_tol)[0])


def batch_numerical_rank(stack, rel_tol=None) -> np.ndarray:
    """:func:`numerical_rank` over a ``(c, p, p)`` stack of symmetric matrices."""
    stack = np.asarray(stack, dtype=float)
    lam = np.linalg.eigvalsh(stack)
    lam_max = lam[:, -1]
    tol = _default_tol(stack[0], rel_tol)
    ranks = np.count_nonzero(lam > tol * lam_max[:, None], axis=1)
    return np.where(lam_max > 0, ranks, 0)


def batch_log_det(stack, rel_tol=None) -> np.ndarray:
    """:func:`log_det_output` over a ``(c, p, p)`` stack of symmetric matrices."""
    stack = np.asarray(stack, dtype=float)
    lam = np.linalg.eigvalsh(stack)
    lam_max = lam[:, -1]
    floor = _default_tol(stack[0], rel_tol) * lam_max
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.sum(np.log(np.maximum(lam, floor[:, None])), axis=1)
    return np.where(lam_max > 0, out, -np.inf)


def vol_cost(gs: GramianSet, drivers) -> float:
    """Volume cost ``-log det`` of the output Gramian of ``drivers``."""
    return -log_det_output(gs.output_gramian(drivers))


def _spd_solve(Wbar, rhs):
    try:
        factor = linalg.cho_factor(Wbar, lower=True, check_finite=False)
    except linalg.LinAlgError:
        return None
    return linalg.cho_solve(factor, rhs, check_finite=False)


def expected_energy(gs: GramianSet, drivers) -> float:
    """Average control energy ``Tr(C^T Wbar^{-1} C X_f)`` over unit-variance initial states.

    Returns ``+inf`` (with a logged rank) when the output Gramian is singular.
    An infinite horizon has ``X_f = 0`` and hence zero energy.
    """
    if math.isinf(gs.horizon):
        return 0.0
    Wbar = gs.output_gramian(drivers)
    Z = _spd_solve(Wbar, gs.expectation())
    if Z is None:
        logger.warning(
            "singular output Gramian (numerical rank %d of %d)", numerical_rank(Wbar), gs.p
        )
        return math.inf
    return float(np.trace(Z))


@dataclass(frozen=True, eq=False)
class Maneuver:
    """Initial state ``x0`` and desired target output ``yf``."""

    x0: np.ndarray
    yf: np.ndarray

    def beta(self, A, targets, t_f) -> np.ndarray:
        yf = np.asarray(self.yf, dtype=float)
        if math.isinf(t_f):
            return yf.copy()
        x_tf = linalg.expm(np.asarray(A) * t_f) @ np.asarray(self.x0, dtype=float)
        return yf - x_tf[list(targets)]


def optimal_energy(gs: GramianSet, drivers, maneuver: Maneuver) -> float:
    """Minimum energy ``beta^T Wbar^{-1} beta / 2`` of a maneuver."""
    beta = maneuver.beta(gs.A, gs.targets, gs.horizon)
    if not np.any(beta):
        return 0.0
    z = _spd_solve(gs.output_gramian(drivers), beta)
    if z is None:
        return math.inf
    return float(0.5 * beta @ z)
