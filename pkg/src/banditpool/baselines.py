"""Comparison policies: UCB variants, Thompson sampling, and pseudo-reward
perturbation, for both multi-armed and linear bandits.

All agents speak the same ``select``/``update`` protocol as the pool agents
so the benchmark loop can drive them interchangeably.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .agents import Agent, LinearModelState, best_arm, ridge_solve


# ---------------------------------------------------------------------------
# Index / sampling primitives
# ---------------------------------------------------------------------------


def ucb1_index(mean, pulls, t):
    """Classic optimism index ``mean + sqrt(2 ln t / pulls)``; inf when unpulled."""
    mean = np.asarray(mean, dtype=float)
    pulls = np.asarray(pulls, dtype=float)
    with np.errstate(divide="ignore"):
        bonus = np.sqrt(2.0 * math.log(t) / pulls)
    return mean + np.where(pulls > 0, bonus, np.inf)


def ucbv_index(mean, variance, pulls, t, range_bound=1.0):
    """Variance-aware index ``mean + sqrt(2 V ln t / s) + 3 b ln t / s``.

    ``range_bound`` is the assumed reward range; unpulled arms get inf.
    """
    mean = np.asarray(mean, dtype=float)
    variance = np.asarray(variance, dtype=float)
    pulls = np.asarray(pulls, dtype=float)
    log_t = math.log(t)
    with np.errstate(divide="ignore", invalid="ignore"):
        bonus = (np.sqrt(2.0 * variance * log_t / pulls)
                 + 3.0 * range_bound * log_t / pulls)
    return mean + np.where(pulls > 0, bonus, np.inf)


def bern_ts_sample(successes, failures, rng: np.random.Generator):
    """Posterior draw from ``Beta(1 + successes, 1 + failures)``."""
    return rng.beta(1.0 + np.asarray(successes), 1.0 + np.asarray(failures))


def gauss_ts_sample(prior_mean, sigma, total, pulls, rng: np.random.Generator):
    """Draw from the Gaussian posterior with a unit-weight prior observation.

    The posterior after ``s`` pulls with cumulative reward ``V`` is
    ``N((prior_mean + V) / (s + 1), sigma^2 / (s + 1))``.
    """
    total = np.asarray(total, dtype=float)
    pulls = np.asarray(pulls, dtype=float)
    post_mean = (prior_mean + total) / (pulls + 1.0)
    post_std = sigma / np.sqrt(pulls + 1.0)
    return post_mean + post_std * rng.standard_normal(post_mean.shape)


def phe_pseudo_counts(pulls, a) -> np.ndarray:
    """Pseudo rewards added per arm: ``ceil(a * pulls)``."""
    return np.ceil(a * np.asarray(pulls, dtype=float)).astype(np.int64)


def phe_combine(total, pulls, pseudo_values) -> float:
    """Perturbed mean ``(V + sum(pseudo)) / (s + len(pseudo))``."""
    pseudo_values = np.asarray(pseudo_values, dtype=float)
    if pulls + pseudo_values.size == 0:
        return math.inf
    return float((total + pseudo_values.sum()) / (pulls + pseudo_values.size))


def phe_estimate(total, pulls, a, pseudo_family: str,
                 rng: np.random.Generator) -> float:
    """Single-arm perturbed-history estimate with freshly drawn pseudo rewards.

    ``bernoulli`` pseudo rewards are fair coins, ``gaussian`` ones are
    ``N(0.5, 0.5^2)``.
    """
    count = int(phe_pseudo_counts(pulls, a)[()])
    if pseudo_family == "bernoulli":
        pseudo = rng.integers(0, 2, size=count).astype(float)
    elif pseudo_family == "gaussian":
        pseudo = rng.normal(0.5, 0.5, size=count)
    else:
        raise ValueError(f"unknown pseudo reward family {pseudo_family!r}")
    return phe_combine(total, pulls, pseudo)


# ---------------------------------------------------------------------------
# Multi-armed agents
# ---------------------------------------------------------------------------


class _ArmStatsAgent(Agent):
    """Shared per-arm pull counts and reward totals."""

    def __init__(self, n_arms: int, horizon: int) -> None:
        super().__init__(n_arms, horizon)
        self.pulls = np.zeros(n_arms, dtype=np.int64)
        self.totals = np.zeros(n_arms, dtype=float)

    def means(self) -> np.ndarray:
        return self.totals / np.maximum(self.pulls, 1)

    def _learn(self, t: int, arm: int, reward: float) -> None:
        self.pulls[arm] += 1
        self.totals[arm] += reward


class UCB1Agent(_ArmStatsAgent):
    name = "ucb1"

    def _choose(self, t: int) -> int:
        return int(np.argmax(ucb1_index(self.means(), self.pulls, max(t, 2))))


class UCBVAgent(_ArmStatsAgent):
    """UCB with empirical variance; needs a reward-range bound."""

    name = "ucbv"

    def __init__(self, n_arms: int, horizon: int, range_bound: float = 1.0) -> None:
        super().__init__(n_arms, horizon)
        if range_bound <= 0:
            raise ValueError(f"range_bound must be positive, got {range_bound}")
        self.range_bound = float(range_bound)
        self._sumsq = np.zeros(n_arms, dtype=float)

    def variances(self) -> np.ndarray:
        mean = self.means()
        raw = self._sumsq / np.maximum(self.pulls, 1) - mean * mean
        return np.maximum(raw, 0.0)

    def _choose(self, t: int) -> int:
        idx = ucbv_index(self.means(), self.variances(), self.pulls,
                         max(t, 2), self.range_bound)
        return int(np.argmax(idx))

    def _learn(self, t: int, arm: int, reward: float) -> None:
        super()._learn(t, arm, reward)
        self._sumsq[arm] += reward * reward

    def get_params(self) -> dict:
        return {"range_bound": self.range_bound}


class BernoulliTSAgent(_ArmStatsAgent):
    """Beta-Bernoulli Thompson sampling with a flat prior.

    Non-binary bounded rewards are binarized by a coin flip with the reward
    as bias, so the agent also runs on beta-distributed rewards.
    """

    name = "bern_ts"

    def __init__(self, n_arms: int, horizon: int,
                 rng: np.random.Generator | None = None) -> None:
        super().__init__(n_arms, horizon)
        self.rng = rng if rng is not None else np.random.default_rng()
        self._successes = np.zeros(n_arms, dtype=np.int64)

    def _choose(self, t: int) -> int:
        samples = bern_ts_sample(self._successes, self.pulls - self._successes,
                                 self.rng)
        return int(np.argmax(samples))

    def _learn(self, t: int, arm: int, reward: float) -> None:
        super()._learn(t, arm, reward)
        if reward <= 0.0:
            hit = 0
        elif reward >= 1.0:
            hit = 1
        else:
            hit = int(self.rng.random() < reward)
        self._successes[arm] += hit


class GaussianTSAgent(_ArmStatsAgent):
    """Thompson sampling under a known-variance Gaussian model."""

    name = "gauss_ts"

    def __init__(self, n_arms: int, horizon: int, sigma: float = 0.5,
                 prior_mean: float = 0.5,
                 rng: np.random.Generator | None = None) -> None:
        super().__init__(n_arms, horizon)
        if sigma <= 0:
            raise ValueError(f"sigma must be positive, got {sigma}")
        self.sigma = float(sigma)
        self.prior_mean = float(prior_mean)
        self.rng = rng if rng is not None else np.random.default_rng()

    def _choose(self, t: int) -> int:
        samples = gauss_ts_sample(self.prior_mean, self.sigma, self.totals,
                                  self.pulls, self.rng)
        return int(np.argmax(samples))

    def get_params(self) -> dict:
        return {"sigma": self.sigma, "prior_mean": self.prior_mean}


class _PHEAgent(_ArmStatsAgent):
    """Perturbed history: fresh pseudo rewards mixed into every estimate."""

    pseudo_family = "bernoulli"

    def __init__(self, n_arms: int, horizon: int, a: float = 1.0,
                 rng: np.random.Generator | None = None) -> None:
        super().__init__(n_arms, horizon)
        if a <= 0:
            raise ValueError(f"perturbation scale a must be positive, got {a}")
        self.a = float(a)
        self.rng = rng if rng is not None else np.random.default_rng()

    def _draw_pseudo(self, count: int) -> np.ndarray:
        if self.pseudo_family == "bernoulli":
            return self.rng.integers(0, 2, size=count).astype(float)
        return self.rng.normal(0.5, 0.5, size=count)

    def _choose(self, t: int) -> int:
        counts = phe_pseudo_counts(self.pulls, self.a)
        pseudo = self._draw_pseudo(int(counts.sum()))
        owner = np.repeat(np.arange(self.n_arms), counts)
        pseudo_sums = np.bincount(owner, weights=pseudo, minlength=self.n_arms)
        denom = self.pulls + counts
        est = np.full(self.n_arms, np.inf)
        seen = denom > 0
        est[seen] = (self.totals[seen] + pseudo_sums[seen]) / denom[seen]
        return int(np.argmax(est))

    def get_params(self) -> dict:
        return {"a": self.a}


class BernoulliPHEAgent(_PHEAgent):
    name = "bern_phe"
    pseudo_family = "bernoulli"


class GaussianPHEAgent(_PHEAgent):
    name = "gauss_phe"
    pseudo_family = "gaussian"


# ---------------------------------------------------------------------------
# Linear agents
# ---------------------------------------------------------------------------


class _LinearAgent(Agent):
    """Shared ridge state over a fixed arm-feature matrix."""

    def __init__(self, features: np.ndarray, horizon: int,
                 ridge_lambda: float = 1.0) -> None:
        features = np.asarray(features, dtype=float)
        if features.ndim != 2:
            raise ValueError("features must be a (K, d) matrix")
        if ridge_lambda <= 0:
            raise ValueError(f"ridge_lambda must be positive, got {ridge_lambda}")
        super().__init__(features.shape[0], horizon)
        self.features = features
        self.dim = features.shape[1]
        self.state = LinearModelState(self.dim, ridge_lambda, capacity=horizon)

    def _learn(self, t: int, arm: int, reward: float) -> None:
        self.state.add(self.features[arm], reward)


def linucb_scores(state: LinearModelState, features: np.ndarray,
                  width: float) -> np.ndarray:
    """Optimistic scores ``x . theta_hat + width * ||x||_{G^{-1}}`` per arm."""
    factor = cho_factor(state.gram, lower=True)
    theta = cho_solve(factor, state.xy_sum)
    solved = cho_solve(factor, features.T)
    norms = np.sqrt(np.maximum(np.einsum("dk,dk->k", features.T, solved), 0.0))
    return features @ theta + width * norms


def lints_sample(state: LinearModelState, sigma_ts: float,
                 rng: np.random.Generator) -> np.ndarray:
    """Draw ``theta ~ N(theta_hat, sigma_ts^2 G^{-1})``."""
    theta_hat = state.mean_fit()
    chol = np.linalg.cholesky(state.gram)
    noise = np.linalg.solve(chol.T, rng.standard_normal(state.dim))
    return theta_hat + sigma_ts * noise


def linphe_fit(state: LinearModelState, a: float, pseudo_family: str,
               rng: np.random.Generator) -> np.ndarray:
    """Ridge fit with one fresh pseudo perturbation per past observation.

    ``bernoulli`` perturbations are centered coins ``a * (B - 1/2)``,
    ``gaussian`` ones ``N(0, a^2)``.
    """
    if pseudo_family == "bernoulli":
        noise = a * (rng.integers(0, 2, size=state.count) - 0.5)
    elif pseudo_family == "gaussian":
        noise = rng.normal(0.0, a, size=state.count)
    else:
        raise ValueError(f"unknown pseudo reward family {pseudo_family!r}")
    return ridge_solve(state.gram, state.xy_sum + state.xs.T @ noise)


class LinUCBAgent(_LinearAgent):
    name = "linucb"

    def __init__(self, features: np.ndarray, horizon: int, width: float = 1.0,
                 ridge_lambda: float = 1.0) -> None:
        super().__init__(features, horizon, ridge_lambda)
        if width < 0:
            raise ValueError(f"width must be >= 0, got {width}")
        self.width = float(width)

    def _choose(self, t: int) -> int:
        return int(np.argmax(linucb_scores(self.state, self.features, self.width)))

    def get_params(self) -> dict:
        return {"width": self.width, "ridge_lambda": self.state.ridge_lambda}


class LinTSAgent(_LinearAgent):
    name = "lints"

    def __init__(self, features: np.ndarray, horizon: int, sigma_ts: float = 1.0,
                 ridge_lambda: float = 1.0,
                 rng: np.random.Generator | None = None) -> None:
        super().__init__(features, horizon, ridge_lambda)
        if sigma_ts < 0:
            raise ValueError(f"sigma_ts must be >= 0, got {sigma_ts}")
        self.sigma_ts = float(sigma_ts)
        self.rng = rng if rng is not None else np.random.default_rng()

    def _choose(self, t: int) -> int:
        return best_arm(self.features, lints_sample(self.state, self.sigma_ts, self.rng))

    def get_params(self) -> dict:
        return {"sigma_ts": self.sigma_ts, "ridge_lambda": self.state.ridge_lambda}


class LinPHEAgent(_LinearAgent):
    name = "linphe"

    def __init__(self, features: np.ndarray, horizon: int, a: float = 1.0,
                 pseudo_family: str = "bernoulli", ridge_lambda: float = 1.0,
                 rng: np.random.Generator | None = None) -> None:
        super().__init__(features, horizon, ridge_lambda)
        if a <= 0:
            raise ValueError(f"perturbation scale a must be positive, got {a}")
        if pseudo_family not in ("bernoulli", "gaussian"):
            raise ValueError(f"unknown pseudo reward family {pseudo_family!r}")
        self.a = float(a)
        self.pseudo_family = pseudo_family
        self.rng = rng if rng is not None else np.random.default_rng()

    def _choose(self, t: int) -> int:
        if self.state.count == 0:
            return (t - 1) % self.n_arms
        return best_arm(self.features,
                        linphe_fit(self.state, self.a, self.pseudo_family, self.rng))

    def get_params(self) -> dict:
        return {"a": self.a, "pseudo_family": self.pseudo_family,
                "ridge_lambda": self.state.ridge_lambda}
