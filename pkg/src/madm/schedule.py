"""Noise schedules for the forward diffusion and their closed-form marginals.

The forward SDE  dX_t = f_t X_t dt + g_t dB_t  transports data to noise over
t in [0, 1] and has Gaussian conditionals

    p(x_t | x_0) = N(r_t x_0, r_t^2 sigma_t^2 I),

with r_t = exp(int_0^t f_u du) and sigma_t^2 = int_0^t (g_u / r_u)^2 du.

Three parameterisations are provided:

- ``vp-discrete``: DDPM-style chain x_k = sqrt(1 - beta_k) x_{k-1} +
  sqrt(beta_k) z with a linear beta ladder.  Marginals come from the exact
  cumulative products over the ladder; between grid points the cumulative
  log-alpha is interpolated linearly so (r_t, sigma_t) is continuous in t.
- ``vp-continuous``: f_t = -beta(t)/2, g_t = sqrt(beta(t)) with beta linear
  in t between ``beta_min`` and ``beta_max`` (continuous-time rates).
- ``edm``: unit scale and sigma(t) = t, so the marginal is (1, t).

Schedules are immutable after construction and safe to share across chains.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DomainError

VP_DISCRETE = "vp-discrete"
VP_CONTINUOUS = "vp-continuous"
EDM = "edm"
SCHEDULE_KINDS = (VP_DISCRETE, VP_CONTINUOUS, EDM)


def beta_schedule(T: int, beta_min: float, beta_max: float) -> np.ndarray:
    """Linear-in-index beta ladder with beta_1 = beta_min and beta_T = beta_max."""
    if T < 1:
        raise DomainError(f"T must be >= 1, got {T}")
    if not (0.0 < beta_min <= beta_max < 1.0):
        raise DomainError(
            f"need 0 < beta_min <= beta_max < 1, got ({beta_min}, {beta_max})"
        )
    if T == 1:
        return np.array([beta_min], dtype=float)
    return np.linspace(float(beta_min), float(beta_max), T)


def _check_time(t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0.0) or np.any(t > 1.0):
        raise DomainError(f"t must lie in [0, 1], got {t}")
    return t


@dataclass(frozen=True)
class NoiseSchedule:
    """Forward-noising schedule with closed-form marginal parameters.

    For ``vp-discrete`` the ladder ``betas`` has length ``T`` and the
    marginal at t = k/T matches the exact product over the first k rungs.
    ``beta_min``/``beta_max`` are continuous-time rates for ``vp-continuous``
    and per-step probabilities for ``vp-discrete``; they are ignored by
    ``edm``.
    """

    kind: str
    beta_min: float = 1e-4
    beta_max: float = 0.02
    T: int = 1000
    betas: np.ndarray = field(init=False, repr=False, compare=False)
    _grid: np.ndarray = field(init=False, repr=False, compare=False)
    _cum_log_alpha: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in SCHEDULE_KINDS:
            raise ConfigError(
                f"unknown schedule kind {self.kind!r}; expected one of {SCHEDULE_KINDS}"
            )
        if self.kind == VP_DISCRETE:
            betas = beta_schedule(self.T, self.beta_min, self.beta_max)
            grid = np.arange(self.T + 1, dtype=float) / self.T
            cum = np.concatenate([[0.0], np.cumsum(np.log1p(-betas))])
        elif self.kind == VP_CONTINUOUS:
            if not (0.0 < self.beta_min <= self.beta_max):
                raise DomainError(
                    f"need 0 < beta_min <= beta_max, got "
                    f"({self.beta_min}, {self.beta_max})"
                )
            betas = np.empty(0)
            grid = np.empty(0)
            cum = np.empty(0)
        else:  # EDM
            betas = np.empty(0)
            grid = np.empty(0)
            cum = np.empty(0)
        object.__setattr__(self, "betas", betas)
        object.__setattr__(self, "_grid", grid)
        object.__setattr__(self, "_cum_log_alpha", cum)

    # -- constructors -------------------------------------------------------

    @classmethod
    def vp_discrete(cls, T: int = 1000, beta_min: float = 1e-4,
                    beta_max: float = 0.02) -> "NoiseSchedule":
        return cls(kind=VP_DISCRETE, beta_min=beta_min, beta_max=beta_max, T=T)

    @classmethod
    def vp_continuous(cls, beta_min: float = 0.1,
                      beta_max: float = 20.0) -> "NoiseSchedule":
        return cls(kind=VP_CONTINUOUS, beta_min=beta_min, beta_max=beta_max, T=0)

    @classmethod
    def edm(cls) -> "NoiseSchedule":
        return cls(kind=EDM, beta_min=0.0, beta_max=0.0, T=0)

    # -- marginal parameters -------------------------------------------------

    def _integrated_beta(self, t):
        # int_0^t beta(u) du for the continuous VP parameterisation
        return self.beta_min * t + 0.5 * (self.beta_max - self.beta_min) * t * t

    def marginal_params(self, t):
        """Return (r_t, sigma_t) such that p(x_t|x_0) = N(r_t x_0, r_t^2 sigma_t^2 I)."""
        t = _check_time(t)
        if self.kind == EDM:
            return np.ones_like(t) + 0.0, t + 0.0
        if self.kind == VP_CONTINUOUS:
            b = self._integrated_beta(t)
            return np.exp(-0.5 * b), np.sqrt(np.expm1(b))
        # vp-discrete: interpolate the cumulative log-alpha between rungs
        log_alpha = np.interp(t, self._grid, self._cum_log_alpha)
        r = np.exp(0.5 * log_alpha)
        sigma = np.sqrt(np.maximum(np.expm1(-log_alpha), 0.0))
        return r, sigma

    def marginal_std(self, t):
        """Standard deviation r_t * sigma_t of the conditional noise."""
        r, sigma = self.marginal_params(t)
        return r * sigma

    def sigma(self, t):
        return self.marginal_params(t)[1]

    def beta_at_level(self, k: int) -> float:
        """beta_k of the discrete ladder, 1-indexed (vp-discrete only)."""
        if self.kind != VP_DISCRETE:
            raise ConfigError("beta_at_level requires a vp-discrete schedule")
        if not (1 <= k <= self.T):
            raise DomainError(f"level index {k} outside 1..{self.T}")
        return float(self.betas[k - 1])

    # -- drift and diffusion --------------------------------------------------

    def _beta_continuous(self, t):
        if self.kind == VP_DISCRETE:
            # continuous-rate proxy through the ladder: beta(t) ~ T * beta_lin(t)
            return self.T * (self.beta_min + (self.beta_max - self.beta_min) * t)
        return self.beta_min + (self.beta_max - self.beta_min) * t

    def f(self, t):
        """Drift coefficient f_t of the forward SDE."""
        t = _check_time(t)
        if self.kind == EDM:
            return np.zeros_like(t) + 0.0
        return -0.5 * self._beta_continuous(t)

    def g(self, t):
        """Diffusion coefficient g_t of the forward SDE."""
        t = _check_time(t)
        if self.kind == EDM:
            return np.sqrt(2.0 * t)
        return np.sqrt(self._beta_continuous(t))


def marginal_params(schedule: NoiseSchedule, t):
    """Module-level alias for :meth:`NoiseSchedule.marginal_params`."""
    return schedule.marginal_params(t)
