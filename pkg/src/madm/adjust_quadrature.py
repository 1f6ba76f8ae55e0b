"""Newton-Cotes estimates of the log density ratio and the MH correctors.

A rule with N+1 equally spaced nodes approximates the score line integral as

    I_hat = sum_i w_i <s(x + (i/N) v, t), v>,        sum_i w_i = 1,

and plugs into the Metropolis-Hastings acceptance min{1, exp(I_hat) H}.
Endpoint scores are reused from the proposal record, so the trapezoid rule
costs no extra queries, Simpson 1/3 costs one midpoint evaluation and
Simpson 3/8 two.  Truncation errors are governed by derivatives of the
integrand, giving O(h^{3/2}) accuracy for the trapezoid rule and O(h^{5/2})
for both Simpson rules as the Langevin step h shrinks.

The hybrid decision tries a capped number of exact two-coin rounds first and
falls back to the quadrature MH decision, bounding worst-case cost while
keeping the exact update whenever the factory terminates in time.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import expit

from .adjust_exact import Decision, _poisson_product
from .errors import ConfigError, DomainError, NonFiniteError
from .proposal import LangevinProposal, log_H
from .targets import ScoreOracle

# Skip the exact rounds of the hybrid decision when the Poisson mean 2C
# exceeds this cap; the factory terminates in a handful of rounds only while
# e^C stays small (its cost grows like e^C), so a loose envelope would
# otherwise burn the entire round budget without ever deciding.  The selector
# depends only on C, which is symmetric in (x, x_tilde), so reversibility of
# the exact branch is kept.
HYBRID_POISSON_CAP = 4.0

DEFAULT_HYBRID_ROUNDS = 10


@dataclass(frozen=True)
class QuadratureRule:
    """Equally spaced nodes on [0, 1] with unit-sum weights."""

    name: str
    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if nodes.shape != weights.shape or nodes.ndim != 1 or nodes.size < 2:
            raise DomainError("nodes and weights must be 1-D and aligned")
        if nodes[0] != 0.0 or nodes[-1] != 1.0:
            raise DomainError("nodes must include both endpoints of [0, 1]")
        gaps = np.diff(nodes)
        if np.any(gaps <= 0) or not np.allclose(gaps, gaps[0], rtol=1e-12):
            raise DomainError("nodes must be strictly increasing and equally spaced")
        if not np.isclose(weights.sum(), 1.0, rtol=0, atol=1e-12):
            raise DomainError(f"weights must sum to 1, got {weights.sum()!r}")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    @property
    def interior_nodes(self) -> np.ndarray:
        return self.nodes[1:-1]

    @property
    def extra_queries(self) -> int:
        """Score queries beyond the cached endpoints, per proposal."""
        return self.nodes.size - 2


def trapezoid() -> QuadratureRule:
    return QuadratureRule("trapezoid", np.array([0.0, 1.0]),
                          np.array([0.5, 0.5]))


def simpson13() -> QuadratureRule:
    return QuadratureRule("simpson13", np.array([0.0, 0.5, 1.0]),
                          np.array([1.0, 4.0, 1.0]) / 6.0)


def simpson38() -> QuadratureRule:
    return QuadratureRule("simpson38", np.array([0.0, 1.0, 2.0, 3.0]) / 3.0,
                          np.array([1.0, 3.0, 3.0, 1.0]) / 8.0)


def composite(panels: int, base: Optional[QuadratureRule] = None) -> QuadratureRule:
    """``panels`` copies of ``base`` glued end to end (test infrastructure).

    Provides the high-resolution quadrature oracle used to validate the
    line-integral identity; the sampling correctors use single-panel rules.
    """
    if panels < 1:
        raise DomainError(f"panels must be >= 1, got {panels}")
    base = base if base is not None else simpson13()
    per = base.nodes.size - 1
    nodes = np.arange(panels * per + 1, dtype=float) / (panels * per)
    weights = np.zeros(nodes.size)
    for j in range(panels):
        weights[j * per:j * per + per + 1] += base.weights / panels
    return QuadratureRule(f"composite({panels}x{base.name})", nodes, weights)


RULES = {
    "trapezoid": trapezoid,
    "simpson13": simpson13,
    "simpson38": simpson38,
}


def rule_by_name(name: str) -> QuadratureRule:
    try:
        return RULES[name]()
    except KeyError:
        raise ConfigError(
            f"unknown quadrature rule {name!r}; expected one of {sorted(RULES)}"
        ) from None


def quadrature_log_ratio(p: LangevinProposal, oracle: ScoreOracle,
                         rule: QuadratureRule) -> float:
    """Newton-Cotes estimate of log p_t(x_tilde) - log p_t(x).

    Interior nodes are evaluated in one batched score call; endpoints reuse
    the cached proposal scores.
    """
    v = p.displacement
    total = rule.weights[0] * float(p.score_x @ v)
    total += rule.weights[-1] * float(p.score_x_tilde @ v)
    interior = rule.interior_nodes
    if interior.size:
        pts = p.x[None, :] + interior[:, None] * v[None, :]
        integrands = oracle.score(pts, p.t) @ v
        total += float(rule.weights[1:-1] @ integrands)
    return total


def mh_decision_quadrature(p: LangevinProposal, oracle: ScoreOracle,
                           rule: QuadratureRule,
                           rng: np.random.Generator) -> Decision:
    """MH accept/reject with the quadrature estimate in place of log r.

    Fully in log space: accept iff log U <= min{0, I_hat + log H}.
    """
    queries_before = oracle.queries
    i_hat = quadrature_log_ratio(p, oracle, rule)
    if not np.isfinite(i_hat):
        raise NonFiniteError(f"quadrature log-ratio is {i_hat}")
    log_alpha = min(0.0, i_hat + log_H(p))
    accept = np.log(rng.uniform()) <= log_alpha
    return Decision(outcome="accept" if accept else "reject", rounds=1,
                    poisson_total=0,
                    score_queries=oracle.queries - queries_before,
                    w_last=float(np.exp(log_alpha)),
                    method=f"quadrature:{rule.name}")


def oracle_mh_decision(p: LangevinProposal, oracle: ScoreOracle,
                       rng: np.random.Generator) -> Decision:
    """Exact MALA decision from the target's closed-form log-density.

    Ground-truth baseline for targets that expose log p; the sampling
    algorithms under study never get to use it.
    """
    log_r = float(oracle.log_density(p.x_tilde, p.t) -
                  oracle.log_density(p.x, p.t))
    log_alpha = min(0.0, log_r + log_H(p))
    accept = np.log(rng.uniform()) <= log_alpha
    return Decision(outcome="accept" if accept else "reject", rounds=1,
                    poisson_total=0, score_queries=0,
                    w_last=float(np.exp(log_alpha)), method="oracle-mh")


def oracle_barker_decision(p: LangevinProposal, oracle: ScoreOracle,
                           rng: np.random.Generator) -> Decision:
    """Barker decision from the closed-form log-density (ground truth).

    Distribution-identical to the two-coin decision; used where replaying
    the factory is prohibitively expensive (e.g. high-dimensional scaling
    studies, where the envelope C grows with d and the factory's cost
    grows like e^C).
    """
    log_r = float(oracle.log_density(p.x_tilde, p.t) -
                  oracle.log_density(p.x, p.t))
    alpha = float(expit(log_r + log_H(p)))
    accept = rng.uniform() <= alpha
    return Decision(outcome="accept" if accept else "reject", rounds=1,
                    poisson_total=0, score_queries=0,
                    w_last=alpha, method="oracle-barker")


def hybrid_decision(p: LangevinProposal, oracle: ScoreOracle, C: float,
                    rule: QuadratureRule, K: int, rng: np.random.Generator,
                    poisson_cap: float = HYBRID_POISSON_CAP) -> Decision:
    """At most K exact two-coin rounds, then the quadrature MH fallback.

    K = 0 (or 2C above ``poisson_cap``) goes straight to the fallback.  The
    Decision's ``method`` records which path decided.
    """
    if K < 0:
        raise DomainError(f"K must be >= 0, got {K}")
    queries_before = oracle.queries
    rounds_done = 0
    poisson_total = 0
    if K > 0 and 2.0 * C <= poisson_cap:
        alpha_prime = float(expit(-(log_H(p) + C)))
        for round_idx in range(1, K + 1):
            rounds_done = round_idx
            if rng.uniform() <= alpha_prime:
                return Decision(outcome="reject", rounds=round_idx,
                                poisson_total=poisson_total,
                                score_queries=oracle.queries - queries_before,
                                w_last=1.0, method="hybrid:two-coin")
            w, n = _poisson_product(p, oracle, C, rng)
            poisson_total += n
            if rng.uniform() <= w:
                return Decision(outcome="accept", rounds=round_idx,
                                poisson_total=poisson_total,
                                score_queries=oracle.queries - queries_before,
                                w_last=w, method="hybrid:two-coin")
    fallback = mh_decision_quadrature(p, oracle, rule, rng)
    return Decision(outcome=fallback.outcome, rounds=rounds_done + 1,
                    poisson_total=poisson_total,
                    score_queries=oracle.queries - queries_before,
                    w_last=fallback.w_last, method="hybrid:quadrature")
