"""Top-K list policies for the cascade environment.

Each policy keeps per-item attraction statistics under the cascade feedback
convention (positions above a click were examined and did not attract; with
no click every shown position was examined) and reranks items by a per-item
score: a KL-based upper confidence bound, a Thompson sample, a perturbed
history estimate, or a reward-pool perturbed mean.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .envs import CascadeInstance
from .pool import build_pool
from .agents import PoolParams


def kl_bernoulli(p: float, q: float) -> float:
    """KL divergence between Bernoulli(p) and Bernoulli(q)."""
    if p <= 0.0:
        return -math.log(1.0 - q) if q < 1.0 else math.inf
    if p >= 1.0:
        return -math.log(q) if q > 0.0 else math.inf
    if q <= 0.0 or q >= 1.0:
        return math.inf
    return (p * math.log(p / q)
            + (1.0 - p) * math.log((1.0 - p) / (1.0 - q)))


def exploration_budget(t: int) -> float:
    """KL budget ``ln t + 3 ln ln t`` (log-log term clamped below t = 3)."""
    if t < 1:
        raise ValueError(f"round must be >= 1, got {t}")
    log_t = math.log(t)
    return log_t + 3.0 * math.log(max(log_t, 1.0))


def klucb_solve(mean: float, observations: int, budget: float,
                tol: float = 1e-6) -> float:
    """Largest q in [mean, 1] with ``observations * kl(mean, q) <= budget``.

    Bisects to absolute tolerance ``tol`` on q and keeps halving until the
    scaled divergence also lands within 1e-6 of the budget (the divergence is
    steep near 1, so the q tolerance alone does not bound the residual).
    """
    if mean >= 1.0:
        return 1.0
    target = budget / observations
    lo, hi = mean, 1.0
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if kl_bernoulli(mean, mid) <= target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol and abs(observations * kl_bernoulli(mean, lo) - budget) <= 1e-6:
            break
    return lo


def klucb_index(clicks: int, observations: int, t: int,
                tol: float = 1e-6) -> float:
    """Per-item upper confidence bound; items never observed score 1.0."""
    if observations < 1:
        return 1.0
    return klucb_solve(clicks / observations, observations,
                       exploration_budget(t), tol)


def rank_topk(scores, k: int) -> list[int]:
    """Indices of the ``k`` largest scores, descending, stable on ties."""
    scores = np.asarray(scores, dtype=float)
    if k > scores.size:
        raise ValueError(f"cannot rank top {k} of {scores.size} items")
    order = np.argsort(-scores, kind="stable")
    return [int(i) for i in order[:k]]


@dataclass
class ItemStats:
    """Per-item attraction observations and clicks."""

    observations: np.ndarray
    clicks: np.ndarray

    @classmethod
    def empty(cls, n_items: int) -> "ItemStats":
        return cls(observations=np.zeros(n_items, dtype=np.int64),
                   clicks=np.zeros(n_items, dtype=np.int64))


def cascade_update(stats: ItemStats, ranked, click_pos: int | None) -> ItemStats:
    """Fold one round of cascade feedback into the per-item statistics.

    With a click at position p, items above p were examined without
    attracting, the clicked item attracted, and items below p stay untouched.
    Without a click every shown item was examined without attracting.
    """
    if click_pos is None:
        examined = len(ranked)
    else:
        if not 0 <= click_pos < len(ranked):
            raise ValueError(
                f"click position {click_pos} inconsistent with a slate of "
                f"{len(ranked)} items")
        examined = click_pos + 1
        stats.clicks[ranked[click_pos]] += 1
    for pos in range(examined):
        stats.observations[ranked[pos]] += 1
    return stats


def ranking_regret(instance: CascadeInstance, ranked) -> float:
    """Expected click loss of a slate against the best possible slate."""
    optimal = instance.expected_clicks(instance.best_slate())
    return optimal - instance.expected_clicks(ranked)


# ---------------------------------------------------------------------------
# List policies
# ---------------------------------------------------------------------------


class RankerPolicy:
    """Single-run list policy: ``select_list(t)`` then ``update(t, slate, click)``."""

    name = "ranker"

    def __init__(self, n_items: int, slate_size: int, horizon: int) -> None:
        if not 1 <= slate_size <= n_items:
            raise ValueError(
                f"slate size must be in [1, {n_items}], got {slate_size}")
        if horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {horizon}")
        self.n_items = n_items
        self.slate_size = slate_size
        self.horizon = horizon
        self.stats = ItemStats.empty(n_items)
        self._pending: tuple[int, tuple[int, ...]] | None = None

    def select_list(self, t: int) -> list[int]:
        if not 1 <= t <= self.horizon:
            raise ValueError(f"round {t} outside [1, {self.horizon}]")
        if self._pending is not None:
            raise RuntimeError(f"round {self._pending[0]} still awaits feedback")
        ranked = rank_topk(self._scores(t), self.slate_size)
        self._pending = (t, tuple(ranked))
        return ranked

    def update(self, t: int, ranked, click_pos: int | None) -> None:
        if self._pending != (t, tuple(ranked)):
            raise RuntimeError(
                f"feedback for round {t} does not match the pending slate")
        self._pending = None
        cascade_update(self.stats, ranked, click_pos)
        self._learn(ranked, click_pos)

    def _scores(self, t: int) -> np.ndarray:
        raise NotImplementedError

    def _learn(self, ranked, click_pos: int | None) -> None:
        pass

    def get_params(self) -> dict:
        return {}


class KLUCBRanker(RankerPolicy):
    """Rank by per-item KL upper confidence bounds."""

    name = "klucb"

    def _scores(self, t: int) -> np.ndarray:
        return np.array([
            klucb_index(int(self.stats.clicks[i]), int(self.stats.observations[i]), t)
            for i in range(self.n_items)
        ])


class BernoulliTSRanker(RankerPolicy):
    """Rank by Beta posterior samples of the attraction probabilities."""

    name = "bern_ts"

    def __init__(self, n_items: int, slate_size: int, horizon: int,
                 rng: np.random.Generator | None = None) -> None:
        super().__init__(n_items, slate_size, horizon)
        self.rng = rng if rng is not None else np.random.default_rng()

    def _scores(self, t: int) -> np.ndarray:
        return self.rng.beta(1.0 + self.stats.clicks,
                             1.0 + self.stats.observations - self.stats.clicks)


class BernoulliPHERanker(RankerPolicy):
    """Rank by perturbed-history estimates with fresh coin pseudo rewards."""

    name = "bern_phe"

    def __init__(self, n_items: int, slate_size: int, horizon: int,
                 a: float = 0.5, rng: np.random.Generator | None = None) -> None:
        super().__init__(n_items, slate_size, horizon)
        if a <= 0:
            raise ValueError(f"perturbation scale a must be positive, got {a}")
        self.a = float(a)
        self.rng = rng if rng is not None else np.random.default_rng()

    def _scores(self, t: int) -> np.ndarray:
        counts = np.ceil(self.a * self.stats.observations).astype(np.int64)
        pseudo = self.rng.integers(0, 2, size=int(counts.sum())).astype(float)
        owner = np.repeat(np.arange(self.n_items), counts)
        pseudo_sums = np.bincount(owner, weights=pseudo, minlength=self.n_items)
        denom = self.stats.observations + counts
        scores = np.full(self.n_items, np.inf)
        seen = denom > 0
        scores[seen] = (self.stats.clicks[seen] + pseudo_sums[seen]) / denom[seen]
        return scores

    def get_params(self) -> dict:
        return {"a": self.a}


class RewardPoolRanker(RankerPolicy):
    """Rank by reward-pool perturbed attraction estimates.

    All binary attraction observations across items feed one shared pool;
    each item's estimate perturbs its own observations with draws from it,
    exactly as the multi-armed agent treats arms.
    """

    name = "pool"

    def __init__(self, n_items: int, slate_size: int, horizon: int,
                 params: PoolParams = PoolParams(),
                 rng: np.random.Generator | None = None) -> None:
        super().__init__(n_items, slate_size, horizon)
        self.params = params
        self.rng = rng if rng is not None else np.random.default_rng()
        capacity = horizon * slate_size
        self._values = np.empty(capacity, dtype=float)
        self._items = np.empty(capacity, dtype=np.int64)
        self._seen = 0

    def _scores(self, t: int) -> np.ndarray:
        scores = np.full(self.n_items, np.inf)
        observed = self.stats.observations > 0
        if self._seen == 0 or not observed.any():
            return scores
        pool = build_pool(self._values[: self._seen], self.params.alpha)
        draws = pool.draw(self._seen, self.rng)
        noise = np.bincount(self._items[: self._seen], weights=draws,
                            minlength=self.n_items)
        scores[observed] = ((self.stats.clicks[observed] + noise[observed])
                            / self.stats.observations[observed])
        return scores

    def _learn(self, ranked, click_pos: int | None) -> None:
        examined = len(ranked) if click_pos is None else click_pos + 1
        for pos in range(examined):
            self._values[self._seen] = 1.0 if pos == click_pos else 0.0
            self._items[self._seen] = ranked[pos]
            self._seen += 1

    def get_params(self) -> dict:
        return {"alpha": self.params.alpha, "z": self.params.z}
