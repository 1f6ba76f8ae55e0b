"""Vectorised lockstep implementations of the corrector decisions.

Chains are independent, so the sampler runs them in lockstep: one array of
states, one shared draw per algorithmic event, with masks tracking which
rows are still undecided inside the two-coin loop.  The math is identical
to the scalar entry points in :mod:`madm.adjust_exact` and
:mod:`madm.adjust_quadrature`; those remain the reference implementations
and the test suite checks both against the same closed-form laws.

The batched two-coin decision may run each pair in whichever direction is
cheaper (Barker satisfies alpha(x -> y) = 1 - alpha(y -> x), so negating
the reversed decision leaves the law unchanged while taming the e^{log H}
factor in the round count).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .adjust_exact import (BOUNDED_DENOISER, FACTOR_TOLERANCE, LIPSCHITZ,
                           LIPSCHITZ_SHARP, MANUAL, BoundSpec,
                           _segment_products)
from .adjust_quadrature import HYBRID_POISSON_CAP, QuadratureRule
from .errors import (BoundViolationError, ConfigError, DomainError,
                     NonFiniteError, NonterminationError)
from .schedule import NoiseSchedule
from .targets import ScoreOracle

CORRECTOR_KINDS = ("none", "ula", "two-coin", "quadrature", "hybrid", "oracle-mh")


@dataclass
class SweepStats:
    """Aggregated accept/reject accounting for one corrector sweep."""

    proposals: int = 0
    accepted: int = 0
    rounds_total: int = 0
    poisson_total: int = 0
    score_queries: int = 0
    jump_sq_total: float = 0.0

    def merge(self, other: "SweepStats") -> None:
        self.proposals += other.proposals
        self.accepted += other.accepted
        self.rounds_total += other.rounds_total
        self.poisson_total += other.poisson_total
        self.score_queries += other.score_queries
        self.jump_sq_total += other.jump_sq_total


def _require_finite_rows(arr: np.ndarray, what: str) -> None:
    bad = ~np.all(np.isfinite(arr), axis=-1)
    if np.any(bad):
        row = int(np.flatnonzero(bad)[0])
        raise NonFiniteError(f"non-finite {what} at chain {row}")


def bound_c_batch(X, Xt, S, St, t, spec: BoundSpec, schedule: NoiseSchedule,
                  oracle: ScoreOracle) -> np.ndarray:
    """Row-wise envelope C, checked against the endpoint integrands."""
    V = Xt - X
    norm_v = np.linalg.norm(V, axis=1)
    f0 = np.einsum("ij,ij->i", S, V)
    f1 = np.einsum("ij,ij->i", St, V)
    if spec.strategy == BOUNDED_DENOISER:
        b = spec.value if spec.value is not None else oracle.denoiser_bound
        if b is None:
            raise ConfigError(f"oracle {oracle.name!r} declares no denoiser bound")
        r, sigma = schedule.marginal_params(t)
        if sigma <= 0:
            raise DomainError(f"bounded-denoiser bound undefined at t={t}")
        reach = np.maximum(np.linalg.norm(X, axis=1), np.linalg.norm(Xt, axis=1))
        c = (b * r + reach) / (r * r * sigma * sigma) * norm_v
    elif spec.strategy in (LIPSCHITZ, LIPSCHITZ_SHARP):
        lip = spec.value if spec.value is not None else oracle.lipschitz
        if lip is None:
            raise ConfigError(f"oracle {oracle.name!r} declares no Lipschitz constant")
        if spec.strategy == LIPSCHITZ:
            s_max = np.maximum(np.linalg.norm(S, axis=1),
                               np.linalg.norm(St, axis=1))
            c = s_max * norm_v + 0.5 * lip * norm_v ** 2
        else:
            c = 0.5 * (np.abs(f0) + np.abs(f1) + lip * norm_v ** 2)
    elif spec.strategy == MANUAL:
        if spec.value is None:
            raise ConfigError("manual bound requires an explicit value")
        c = np.full(X.shape[0], float(spec.value))
    else:  # pragma: no cover - BoundSpec validates
        raise ConfigError(f"unknown bound strategy {spec.strategy!r}")

    needed = np.maximum(np.abs(f0), np.abs(f1))
    bad = c < needed * (1.0 - 1e-12) - 1e-15
    if np.any(bad):
        row = int(np.flatnonzero(bad)[0])
        raise BoundViolationError(
            f"C={c[row]:.6g} fails to dominate the endpoint integrands "
            f"at chain {row} (needed {needed[row]:.6g})"
        )
    return c


def log_h_batch(X, Xt, S, St, h: float) -> np.ndarray:
    fwd = Xt - X - 0.5 * h * S
    bwd = X - Xt - 0.5 * h * St
    return (np.einsum("ij,ij->i", fwd, fwd) -
            np.einsum("ij,ij->i", bwd, bwd)) / (2.0 * h)


def _factor_products(Xa, Va, C, active, counts, t, oracle, rng):
    """W draws for the active rows given their Poisson counts."""
    total = int(counts.sum())
    if total == 0:
        return np.ones(active.size)
    rep = np.repeat(np.arange(active.size), counts)
    u = rng.uniform(size=total)
    pts = Xa[active][rep] + u[:, None] * Va[active][rep]
    scores = oracle.score(pts, t)
    integrands = np.einsum("ij,ij->i", scores, Va[active][rep])
    factors = 0.5 + integrands / (2.0 * C[active][rep])
    out_of_band = (factors < -FACTOR_TOLERANCE) | (factors > 1.0 + FACTOR_TOLERANCE)
    if np.any(out_of_band):
        row = int(active[rep[np.flatnonzero(out_of_band)[0]]])
        raise BoundViolationError(
            f"line integrand escapes the envelope at chain {row}"
        )
    return _segment_products(np.clip(factors, 0.0, 1.0), counts)


def _two_coin_rounds(Xa, Va, log_h_a, C, t, oracle, rng, max_rounds,
                     round_limit=None):
    """Masked two-coin rounds; returns per-row frame outcomes.

    ``round_limit`` caps the number of rounds without treating the cap as an
    error (hybrid use); rows still undecided are reported in the third
    return value.  Without it, exhausting ``max_rounds`` raises.
    """
    n = Xa.shape[0]
    alpha_prime = expit(-(log_h_a + C))
    frame_accept = np.zeros(n, dtype=bool)
    rounds = np.zeros(n, dtype=np.int64)
    poisson = np.zeros(n, dtype=np.int64)
    active = np.arange(n)
    cap = max_rounds if round_limit is None else min(round_limit, max_rounds)
    for round_idx in range(1, cap + 1):
        rounds[active] = round_idx
        reject_now = rng.uniform(size=active.size) <= alpha_prime[active]
        active = active[~reject_now]
        if active.size == 0:
            break
        lam = 2.0 * C[active]
        counts = rng.poisson(lam)
        poisson[active] += counts
        w = _factor_products(Xa, Va, C, active, counts, t, oracle, rng)
        accept_now = rng.uniform(size=active.size) <= w
        frame_accept[active[accept_now]] = True
        active = active[~accept_now]
        if active.size == 0:
            break
    if active.size and round_limit is None:
        raise NonterminationError(
            f"two-coin loop undecided for {active.size} chains after "
            f"{max_rounds} rounds (first stuck chain {int(active[0])})",
            rounds=max_rounds, c_bound=float(C[active[0]]),
            log_h=float(log_h_a[active[0]]), w_last=float("nan"),
        )
    return frame_accept, rounds, poisson, active


def _two_coin_accept(X, Xt, S, St, logH, C, t, oracle, rng, max_rounds):
    """Direction-swapped exact Barker decisions for every row."""
    V = Xt - X
    f0 = np.einsum("ij,ij->i", S, V)
    f1 = np.einsum("ij,ij->i", St, V)
    swap = logH > 0.5 * (f0 + f1)
    Xa = np.where(swap[:, None], Xt, X)
    Va = np.where(swap[:, None], -V, V)
    log_h_a = np.where(swap, -logH, logH)
    frame_accept, rounds, poisson, _ = _two_coin_rounds(
        Xa, Va, log_h_a, C, t, oracle, rng, max_rounds)
    accept = frame_accept ^ swap
    return accept, rounds, poisson


def _quadrature_log_ratio_batch(X, V, f0, f1, t, rule: QuadratureRule,
                                oracle: ScoreOracle, rows=None) -> np.ndarray:
    """Row-wise Newton-Cotes estimate; endpoints come in precomputed."""
    idx = np.arange(X.shape[0]) if rows is None else rows
    total = rule.weights[0] * f0[idx] + rule.weights[-1] * f1[idx]
    interior = rule.interior_nodes
    if interior.size:
        m = idx.size
        # node-major stack: rows for node u_1, then node u_2, ...
        pts = (X[idx][None, :, :] + interior[:, None, None] * V[idx][None, :, :])
        scores = oracle.score(pts.reshape(-1, X.shape[1]), t)
        integrands = np.einsum("ij,ij->i", scores,
                               np.tile(V[idx], (interior.size, 1)))
        total = total + rule.weights[1:-1] @ integrands.reshape(interior.size, m)
    if not np.all(np.isfinite(total)):
        row = int(idx[np.flatnonzero(~np.isfinite(total))[0]])
        raise NonFiniteError(f"quadrature log-ratio non-finite at chain {row}")
    return total


def corrector_sweep(X, S, oracle: ScoreOracle, t: float, h: float, kind: str,
                    rng: np.random.Generator, *, schedule=None, bound=None,
                    rule=None, hybrid_rounds: int = 10,
                    max_rounds: int = 1_000_000,
                    poisson_cap: float = HYBRID_POISSON_CAP):
    """One corrector step for every chain; returns (X', S', stats).

    ``S`` holds the cached scores of ``X`` at level ``t`` so repeated sweeps
    cost one new score evaluation per chain (the proposal endpoint) plus
    whatever the decision itself queries.
    """
    if kind not in CORRECTOR_KINDS or kind == "none":
        raise ConfigError(f"unsupported corrector kind {kind!r}")
    n, d = X.shape
    stats = SweepStats(proposals=n)
    queries_before = oracle.queries

    Z = rng.standard_normal((n, d))
    Xt = X + 0.5 * h * S + np.sqrt(h) * Z
    St = oracle.score(Xt, t)
    _require_finite_rows(St, "score")

    if kind == "ula":
        stats.accepted = n
        stats.rounds_total = 0
        stats.jump_sq_total = float(np.sum((Xt - X) ** 2))
        stats.score_queries = oracle.queries - queries_before
        return Xt, St, stats

    V = Xt - X
    logH = log_h_batch(X, Xt, S, St, h)

    if kind == "two-coin":
        C = bound_c_batch(X, Xt, S, St, t, bound, schedule, oracle)
        accept, rounds, poisson = _two_coin_accept(
            X, Xt, S, St, logH, C, t, oracle, rng, max_rounds)
        stats.rounds_total = int(rounds.sum())
        stats.poisson_total = int(poisson.sum())
    elif kind == "oracle-mh":
        log_r = oracle.log_density(Xt, t) - oracle.log_density(X, t)
        log_alpha = np.minimum(0.0, log_r + logH)
        accept = np.log(rng.uniform(size=n)) <= log_alpha
        stats.rounds_total = n
    elif kind == "quadrature":
        f0 = np.einsum("ij,ij->i", S, V)
        f1 = np.einsum("ij,ij->i", St, V)
        i_hat = _quadrature_log_ratio_batch(X, V, f0, f1, t, rule, oracle)
        log_alpha = np.minimum(0.0, i_hat + logH)
        accept = np.log(rng.uniform(size=n)) <= log_alpha
        stats.rounds_total = n
    elif kind == "hybrid":
        C = bound_c_batch(X, Xt, S, St, t, bound, schedule, oracle)
        f0 = np.einsum("ij,ij->i", S, V)
        f1 = np.einsum("ij,ij->i", St, V)
        accept = np.zeros(n, dtype=bool)
        tractable = 2.0 * C <= poisson_cap
        rounds_used = np.zeros(n, dtype=np.int64)
        undecided = np.flatnonzero(~tractable)
        if hybrid_rounds > 0 and np.any(tractable):
            rows = np.flatnonzero(tractable)
            frame_accept, rounds, poisson, still = _two_coin_rounds(
                X[rows], V[rows], logH[rows], C[rows], t, oracle, rng,
                max_rounds, round_limit=hybrid_rounds)
            # rows that terminated inside the round budget are final
            done = np.ones(rows.size, dtype=bool)
            done[still] = False
            accept[rows[done]] = frame_accept[done]
            rounds_used[rows] = rounds
            stats.poisson_total = int(poisson.sum())
            undecided = np.concatenate([undecided, rows[still]])
        if undecided.size:
            i_hat = _quadrature_log_ratio_batch(X, V, f0, f1, t, rule,
                                                oracle, rows=undecided)
            log_alpha = np.minimum(0.0, i_hat + logH[undecided])
            accept[undecided] = (np.log(rng.uniform(size=undecided.size))
                                 <= log_alpha)
        stats.rounds_total = int(rounds_used.sum()) + int(undecided.size)
    else:  # pragma: no cover
        raise ConfigError(f"unsupported corrector kind {kind!r}")

    stats.accepted = int(accept.sum())
    stats.jump_sq_total = float(np.sum(V[accept] ** 2))
    stats.score_queries = oracle.queries - queries_before
    X_new = np.where(accept[:, None], Xt, X)
    S_new = np.where(accept[:, None], St, S)
    return X_new, S_new, stats
