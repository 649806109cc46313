"""Exploration by resampling the agent's own reward history.

The agents here perturb every observed reward with a value drawn from the
centered, scaled pool of all past rewards (see :mod:`banditpool.pool`) before
estimating mean rewards.  Because the pool's variance tracks the empirical
reward variance, the amount of exploration adapts to the problem without any
externally tuned noise scale.

Both agents follow the same schedule: a warm-up of round-robin pulls long
enough to guarantee the pool variance with high probability, then greedy
selection on pool-perturbed estimates with fresh draws every round.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .pool import RewardPool, build_pool


@dataclass(frozen=True)
class PoolParams:
    """Knobs of the reward-pool agents.

    ``alpha`` scales the pool values and therefore the perturbation size;
    ``z`` sets the fraction of the reward variance the warm-up must secure,
    which in turn fixes the warm-up length.  ``ridge_lambda`` regularizes the
    linear fit; zero is allowed only for diagnostics (the one-hot reduction),
    production use should keep it positive.  With ``auto_ridge`` the linear
    agent derives the regularizer from the smallest eigenvalue of the warm-up
    Gram matrix instead of using ``ridge_lambda``.
    """

    alpha: float = 0.6
    z: float = 0.6
    ridge_lambda: float = 1.0
    auto_ridge: bool = False

    def __post_init__(self) -> None:
        if self.alpha <= 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not 0.0 < self.z < 1.0:
            raise ValueError(f"z must lie strictly inside (0, 1), got {self.z}")
        if self.ridge_lambda < 0:
            raise ValueError(f"ridge_lambda must be >= 0, got {self.ridge_lambda}")


def init_length(horizon: int, z: float, dims: int) -> int:
    """Number of leading round-robin rounds before pool-based selection.

    Returns ``max(dims, ceil(4 * ln(horizon) / (z - 1 - ln z) + 1))``.  The
    denominator is positive for every ``z`` in (0, 1), and the second term is
    sized so the empirical reward variance after warm-up stays above a ``z/2``
    fraction of the true variance with high probability.
    """
    if horizon < 2:
        raise ValueError(f"horizon must be at least 2, got {horizon}")
    if not 0.0 < z < 1.0:
        raise ValueError(f"z must lie strictly inside (0, 1), got {z}")
    if dims < 1:
        raise ValueError(f"dims must be >= 1, got {dims}")
    denom = z - 1.0 - math.log(z)
    return max(dims, math.ceil(4.0 * math.log(horizon) / denom + 1.0))


def perturbed_mean_estimates(totals, pulls, noise_sums) -> np.ndarray:
    """Per-arm estimates ``(V_i + U_i) / s_i`` with unpulled arms forced up.

    ``totals`` are cumulative rewards, ``pulls`` the pull counts, and
    ``noise_sums`` the per-arm sums of pool draws.  Arms never pulled get
    ``+inf`` so a greedy argmax selects them first (lowest index wins).
    """
    totals = np.asarray(totals, dtype=float)
    pulls = np.asarray(pulls)
    noise_sums = np.asarray(noise_sums, dtype=float)
    est = np.full(totals.shape, np.inf)
    seen = pulls > 0
    est[seen] = (totals[seen] + noise_sums[seen]) / pulls[seen]
    return est


def ridge_solve(gram: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Solve ``gram @ theta = target`` for an SPD gram via Cholesky."""
    try:
        return cho_solve(cho_factor(gram, lower=True), target)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - corruption guard
        raise np.linalg.LinAlgError(f"gram matrix is not SPD: {exc}") from exc


def best_arm(features: np.ndarray, theta: np.ndarray) -> int:
    """Arm maximizing ``x_i . theta`` (lowest index on ties)."""
    return int(np.argmax(features @ theta))


class Agent:
    """Single-run sequential policy: ``select(t)`` then ``update(t, arm, y)``.

    Subclasses implement ``_choose`` and ``_learn``.  The base class enforces
    the round protocol: every selection must be answered by exactly one
    feedback call for the same round and arm.
    """

    name = "agent"

    def __init__(self, n_arms: int, horizon: int) -> None:
        if n_arms < 1:
            raise ValueError(f"need at least one arm, got {n_arms}")
        if horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {horizon}")
        self.n_arms = int(n_arms)
        self.horizon = int(horizon)
        self._pending: tuple[int, int] | None = None

    def select(self, t: int) -> int:
        if not 1 <= t <= self.horizon:
            raise ValueError(f"round {t} outside [1, {self.horizon}]")
        if self._pending is not None:
            raise RuntimeError(f"round {self._pending[0]} still awaits feedback")
        arm = self._choose(t)
        self._pending = (t, arm)
        return arm

    def update(self, t: int, arm: int, reward: float) -> None:
        if self._pending != (t, arm):
            raise RuntimeError(
                f"feedback for round {t}, arm {arm} does not match the "
                f"pending selection {self._pending}")
        self._pending = None
        self._learn(t, arm, float(reward))

    def _choose(self, t: int) -> int:
        raise NotImplementedError

    def _learn(self, t: int, arm: int, reward: float) -> None:
        raise NotImplementedError

    def get_params(self) -> dict:
        return {}


class RewardPoolAgent(Agent):
    """Multi-armed bandit agent exploring via its own reward pool.

    After the warm-up, each round rebuilds the pool from all past rewards,
    draws one fresh pool value per past observation, sums the draws per arm,
    and plays the argmax of ``(V_i + U_i) / s_i``.
    """

    name = "pool"

    def __init__(self, n_arms: int, horizon: int,
                 params: PoolParams = PoolParams(),
                 rng: np.random.Generator | None = None) -> None:
        super().__init__(n_arms, horizon)
        self.params = params
        self.rng = rng if rng is not None else np.random.default_rng()
        self.init_rounds = init_length(horizon, params.z, n_arms)
        self._rewards = np.empty(horizon, dtype=float)
        self._arms = np.empty(horizon, dtype=np.int64)
        self._seen = 0
        self.pulls = np.zeros(n_arms, dtype=np.int64)
        self.totals = np.zeros(n_arms, dtype=float)

    def current_pool(self) -> RewardPool:
        if self._seen == 0:
            raise RuntimeError("no rewards observed yet")
        return build_pool(self._rewards[: self._seen], self.params.alpha)

    def perturbed_estimates(self) -> np.ndarray:
        """Fresh pool-perturbed per-arm estimates (new draws every call)."""
        pool = self.current_pool()
        draws = pool.draw(self._seen, self.rng)
        noise = np.bincount(self._arms[: self._seen], weights=draws,
                            minlength=self.n_arms)
        return perturbed_mean_estimates(self.totals, self.pulls, noise)

    def _choose(self, t: int) -> int:
        if t <= self.init_rounds:
            return (t - 1) % self.n_arms
        return int(np.argmax(self.perturbed_estimates()))

    def _learn(self, t: int, arm: int, reward: float) -> None:
        self._rewards[self._seen] = reward
        self._arms[self._seen] = arm
        self._seen += 1
        self.pulls[arm] += 1
        self.totals[arm] += reward

    def get_params(self) -> dict:
        return {"alpha": self.params.alpha, "z": self.params.z}


class LinearModelState:
    """Ridge-regression sufficient statistics plus the raw history.

    Keeps the regularized Gram matrix ``lambda * I + sum x x^T``, the
    reward-weighted feature sum, and the full (feature, reward) history so
    per-round re-perturbation can touch every past observation.
    """

    def __init__(self, dim: int, ridge_lambda: float, capacity: int) -> None:
        if dim < 1:
            raise ValueError(f"dim must be >= 1, got {dim}")
        if ridge_lambda < 0:
            raise ValueError(f"ridge_lambda must be >= 0, got {ridge_lambda}")
        self.dim = dim
        self.ridge_lambda = float(ridge_lambda)
        self.gram = ridge_lambda * np.eye(dim)
        self.xy_sum = np.zeros(dim)
        self._x = np.empty((capacity, dim), dtype=float)
        self._y = np.empty(capacity, dtype=float)
        self.count = 0

    @classmethod
    def from_history(cls, xs: np.ndarray, ys: np.ndarray, ridge_lambda: float,
                     capacity: int | None = None) -> "LinearModelState":
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        state = cls(xs.shape[1], ridge_lambda, capacity or xs.shape[0])
        state.gram += xs.T @ xs
        state.xy_sum += xs.T @ ys
        state._x[: xs.shape[0]] = xs
        state._y[: ys.shape[0]] = ys
        state.count = xs.shape[0]
        return state

    @property
    def xs(self) -> np.ndarray:
        return self._x[: self.count]

    @property
    def ys(self) -> np.ndarray:
        return self._y[: self.count]

    def add(self, x: np.ndarray, y: float) -> None:
        if self.count == self._x.shape[0]:
            raise RuntimeError("linear model history capacity exceeded")
        self._x[self.count] = x
        self._y[self.count] = y
        self.count += 1
        self.gram += np.outer(x, x)
        self.xy_sum += y * x

    def mean_fit(self) -> np.ndarray:
        """Unperturbed ridge estimate ``G^{-1} sum x y``."""
        return ridge_solve(self.gram, self.xy_sum)

    def perturbed_fit(self, pool: RewardPool, rng: np.random.Generator) -> np.ndarray:
        """Ridge fit with every past reward shifted by a fresh pool draw.

        Solves ``G theta = sum x_l (y_l + z_l)`` where the ``z_l`` are drawn
        i.i.d. from the pool anew on every call.
        """
        if self.count == 0:
            raise RuntimeError("cannot fit an empty history")
        draws = pool.draw(self.count, rng)
        return ridge_solve(self.gram, self.xy_sum + self.xs.T @ draws)


class LinRewardPoolAgent(Agent):
    """Linear bandit agent: pool-perturbed ridge regression, greedy argmax."""

    name = "lin_pool"

    def __init__(self, features: np.ndarray, horizon: int,
                 params: PoolParams = PoolParams(),
                 rng: np.random.Generator | None = None) -> None:
        features = np.asarray(features, dtype=float)
        if features.ndim != 2:
            raise ValueError("features must be a (K, d) matrix")
        super().__init__(features.shape[0], horizon)
        self.features = features
        self.dim = features.shape[1]
        self.params = params
        self.rng = rng if rng is not None else np.random.default_rng()
        self.init_rounds = init_length(horizon, params.z, self.dim)
        self._x_hist = np.empty((horizon, self.dim), dtype=float)
        self._y_hist = np.empty(horizon, dtype=float)
        self._seen = 0
        # Built lazily at the first post-warm-up round so auto_ridge can read
        # the warm-up Gram matrix before fixing the regularizer.
        self.state: LinearModelState | None = None

    def _ridge_value(self) -> float:
        if not self.params.auto_ridge:
            return self.params.ridge_lambda
        xs = self._x_hist[: self._seen]
        smallest = float(np.linalg.eigvalsh(xs.T @ xs)[0])
        if smallest <= 0:
            raise RuntimeError(
                "warm-up features are rank deficient; auto_ridge needs a "
                "full-rank warm-up Gram matrix")
        # Fixed point of lam = min_eig(G0 + lam I) / 4 for the regularized gram.
        return smallest / 3.0

    def _ensure_state(self) -> LinearModelState:
        if self.state is None:
            self.state = LinearModelState.from_history(
                self._x_hist[: self._seen], self._y_hist[: self._seen],
                self._ridge_value(), capacity=self.horizon)
        return self.state

    def current_pool(self) -> RewardPool:
        if self._seen == 0:
            raise RuntimeError("no rewards observed yet")
        return build_pool(self._y_hist[: self._seen], self.params.alpha)

    def fit_perturbed(self) -> np.ndarray:
        """One fresh pool-perturbed parameter estimate."""
        return self._ensure_state().perturbed_fit(self.current_pool(), self.rng)

    def _choose(self, t: int) -> int:
        if t <= self.init_rounds:
            return (t - 1) % self.n_arms
        return best_arm(self.features, self.fit_perturbed())

    def _learn(self, t: int, arm: int, reward: float) -> None:
        x = self.features[arm]
        self._x_hist[self._seen] = x
        self._y_hist[self._seen] = reward
        self._seen += 1
        if self.state is not None:
            self.state.add(x, reward)

    def get_params(self) -> dict:
        return {"alpha": self.params.alpha, "z": self.params.z,
                "ridge_lambda": self.params.ridge_lambda,
                "auto_ridge": self.params.auto_ridge}
