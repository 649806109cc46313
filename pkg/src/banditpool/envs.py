"""Bandit problem instances: multi-armed, linear, and cascade ranking.

Instances are immutable after generation and safe to share across concurrent
runs; all sampling goes through a caller-owned ``numpy.random.Generator``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

FAMILIES = ("bernoulli", "beta", "gaussian")

DEFAULT_BETA_CONCENTRATION = 4.0
DEFAULT_GAUSSIAN_STD = 0.5


def _check_family(family: str, means: np.ndarray, v: float, sigma: float) -> None:
    if family not in FAMILIES:
        raise ValueError(f"family must be one of {FAMILIES}, got {family!r}")
    if np.any(means < 0.0) or np.any(means > 1.0):
        raise ValueError("mean rewards must lie in [0, 1]")
    if family == "beta":
        if v <= 0:
            raise ValueError(f"beta concentration v must be positive, got {v}")
        if np.any(means <= 0.0) or np.any(means >= 1.0):
            raise ValueError("beta rewards need means strictly inside (0, 1)")
    if family == "gaussian" and sigma <= 0:
        raise ValueError(f"gaussian reward std must be positive, got {sigma}")


def _draw_reward(mean: float, family: str, v: float, sigma: float,
                 rng: np.random.Generator) -> float:
    if family == "bernoulli":
        return float(rng.random() < mean)
    if family == "beta":
        return float(rng.beta(v * mean, v * (1.0 - mean)))
    return float(rng.normal(mean, sigma))


@dataclass(frozen=True, eq=False)
class MabInstance:
    """K independent arms with means in [0, 1] and a common reward family."""

    means: np.ndarray
    family: str
    v: float = DEFAULT_BETA_CONCENTRATION       # beta concentration
    sigma: float = DEFAULT_GAUSSIAN_STD         # gaussian reward std

    def __post_init__(self) -> None:
        object.__setattr__(self, "means", np.asarray(self.means, dtype=float))
        if self.means.ndim != 1 or self.means.size < 2:
            raise ValueError("a bandit instance needs at least two arms")
        _check_family(self.family, self.means, self.v, self.sigma)

    @property
    def n_arms(self) -> int:
        return self.means.size

    def mean_rewards(self) -> np.ndarray:
        return self.means

    def sample_reward(self, arm: int, rng: np.random.Generator) -> float:
        if not 0 <= arm < self.n_arms:
            raise IndexError(f"arm {arm} out of range [0, {self.n_arms})")
        return _draw_reward(float(self.means[arm]), self.family, self.v,
                            self.sigma, rng)

    def gaps(self) -> np.ndarray:
        """Per-arm suboptimality: best mean minus each arm's mean."""
        return float(self.means.max()) - self.means

    def best_arm(self) -> int:
        return int(np.argmax(self.means))


@dataclass(frozen=True, eq=False)
class LinearInstance:
    """Arms with feature vectors; mean reward of arm i is ``x_i . theta``.

    The trailing ``d`` feature rows must form a basis, which the generator
    guarantees by rejection.
    """

    features: np.ndarray       # (K, d)
    theta_star: np.ndarray     # (d,)
    family: str
    v: float = DEFAULT_BETA_CONCENTRATION
    sigma: float = DEFAULT_GAUSSIAN_STD

    def __post_init__(self) -> None:
        object.__setattr__(self, "features", np.asarray(self.features, dtype=float))
        object.__setattr__(self, "theta_star", np.asarray(self.theta_star, dtype=float))
        if self.features.ndim != 2:
            raise ValueError("features must be a (K, d) matrix")
        k, d = self.features.shape
        if self.theta_star.shape != (d,):
            raise ValueError("theta_star dimension must match the features")
        if k < d or d < 1:
            raise ValueError(f"need K >= d >= 1, got K={k}, d={d}")
        means = self.mean_rewards()
        _check_family(self.family, means, self.v, self.sigma)
        if np.linalg.matrix_rank(self.features[-d:]) != d:
            raise ValueError("the last d feature vectors must form a basis")

    @property
    def n_arms(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def mean_rewards(self) -> np.ndarray:
        return self.features @ self.theta_star

    def sample_reward(self, arm: int, rng: np.random.Generator) -> float:
        if not 0 <= arm < self.n_arms:
            raise IndexError(f"arm {arm} out of range [0, {self.n_arms})")
        mean = float(self.features[arm] @ self.theta_star)
        return _draw_reward(mean, self.family, self.v, self.sigma, rng)

    def gaps(self) -> np.ndarray:
        means = self.mean_rewards()
        return float(means.max()) - means

    def best_arm(self) -> int:
        return int(np.argmax(self.mean_rewards()))


@dataclass(frozen=True, eq=False)
class CascadeInstance:
    """Ranking environment: L items with attraction probabilities, top-down user.

    Each round the agent shows ``slate_size`` items; the simulated user scans
    from the top and clicks the first attracting item, then stops.
    """

    attractions: np.ndarray    # (L,) per-item attraction probabilities
    slate_size: int            # positions shown per round

    def __post_init__(self) -> None:
        object.__setattr__(self, "attractions", np.asarray(self.attractions, dtype=float))
        if self.attractions.ndim != 1 or self.attractions.size < 1:
            raise ValueError("need at least one item")
        if np.any(self.attractions < 0.0) or np.any(self.attractions > 1.0):
            raise ValueError("attraction probabilities must lie in [0, 1]")
        if not 1 <= self.slate_size <= self.attractions.size:
            raise ValueError(
                f"slate size must be in [1, {self.attractions.size}], got {self.slate_size}")

    @property
    def n_items(self) -> int:
        return self.attractions.size

    def _validate_slate(self, ranked: list) -> np.ndarray:
        items = np.asarray(ranked, dtype=int)
        if items.size != self.slate_size:
            raise ValueError(f"slate must contain exactly {self.slate_size} items")
        if np.any(items < 0) or np.any(items >= self.n_items):
            raise ValueError("slate contains out-of-range item ids")
        if np.unique(items).size != items.size:
            raise ValueError("slate contains duplicate items")
        return items

    def expected_clicks(self, ranked) -> float:
        """Probability of at least one click: ``1 - prod(1 - w(item))``."""
        items = self._validate_slate(ranked)
        return float(1.0 - np.prod(1.0 - self.attractions[items]))

    def best_slate(self) -> list[int]:
        """Top ``slate_size`` items by attraction (stable, lowest index first)."""
        order = np.argsort(-self.attractions, kind="stable")
        return [int(i) for i in order[: self.slate_size]]

    def step(self, ranked, rng: np.random.Generator) -> int | None:
        """Simulate one user: return the clicked position, or None.

        Positions above the click were examined and did not attract; with no
        click, every shown position was examined.
        """
        for pos, item in enumerate(ranked):
            if rng.random() < self.attractions[item]:
                return pos
        return None


def generate_mab(n_arms: int, family: str, rng: np.random.Generator,
                 v: float = DEFAULT_BETA_CONCENTRATION,
                 sigma: float = DEFAULT_GAUSSIAN_STD) -> MabInstance:
    """Draw a random K-armed instance with means i.i.d. Uniform[0.25, 0.75]."""
    if n_arms < 2:
        raise ValueError(f"need at least two arms, got {n_arms}")
    means = rng.uniform(0.25, 0.75, size=n_arms)
    return MabInstance(means=means, family=family, v=v, sigma=sigma)


def generate_linear(n_arms: int, dim: int, family: str, rng: np.random.Generator,
                    v: float = DEFAULT_BETA_CONCENTRATION,
                    sigma: float = DEFAULT_GAUSSIAN_STD,
                    max_tries: int = 100) -> LinearInstance:
    """Draw a random linear instance with mean rewards inside [0.25, 0.75].

    Raw coordinates are negated lognormal magnitudes with a positive random
    weight vector, so raw scores are left-skewed: most arms sit near the top
    of the mean range with a thin tail of poor arms.  The raw scores are
    affinely remapped onto [0.25, 0.75], folded into the model by appending a
    constant feature coordinate and rescaling the weights, so the instance is
    exactly linear in ``dim`` dimensions.  Resamples until the trailing
    ``dim`` feature rows form a basis.
    """
    if not n_arms >= dim >= 1:
        raise ValueError(f"need K >= d >= 1, got K={n_arms}, d={dim}")
    for _ in range(max_tries):
        if dim == 1:
            # No room for a constant coordinate: put the target means into
            # the features directly and keep the parameter at 1.
            features = rng.uniform(0.25, 0.75, size=(n_arms, 1))
            theta = np.ones(1)
        else:
            raw = -rng.lognormal(0.0, 1.0, size=(n_arms, dim - 1))
            theta_raw = rng.uniform(0.0, 1.0, size=dim - 1)
            scores = raw @ theta_raw
            lo, hi = float(scores.min()), float(scores.max())
            if hi - lo < 1e-9:
                continue
            scale = 0.5 / (hi - lo)
            offset = 0.25 - scale * lo
            features = np.hstack([raw, np.ones((n_arms, 1))])
            theta = np.concatenate([scale * theta_raw, [offset]])
        if np.linalg.matrix_rank(features[-dim:]) == dim:
            return LinearInstance(features=features, theta_star=theta,
                                  family=family, v=v, sigma=sigma)
    raise RuntimeError(
        f"failed to generate a linear instance with a feature basis in {max_tries} tries")


def generate_cascade(n_items: int, slate_size: int, rng: np.random.Generator,
                     low: float = 0.1, high: float = 0.7) -> CascadeInstance:
    """Draw a synthetic cascade instance with Uniform[low, high] attractions."""
    if not 0.0 <= low <= high <= 1.0:
        raise ValueError(f"need 0 <= low <= high <= 1, got {low}, {high}")
    attractions = rng.uniform(low, high, size=n_items)
    return CascadeInstance(attractions=attractions, slate_size=slate_size)


def save_cascade_file(instance: CascadeInstance, path) -> None:
    """Write a cascade model file: header ``L=<int> K=<int>``, then one
    ``item_id<TAB>attraction`` record per line."""
    lines = [f"L={instance.n_items} K={instance.slate_size}"]
    for item, w in enumerate(instance.attractions):
        lines.append(f"{item}\t{float(w)!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_cascade_file(path) -> CascadeInstance:
    """Read a cascade model file written by :func:`save_cascade_file`."""
    text = Path(path).read_text().strip().splitlines()
    if not text:
        raise ValueError(f"{path}: empty cascade model file")
    header = text[0].split()
    try:
        keys = dict(part.split("=", 1) for part in header)
        n_items = int(keys["L"])
        slate = int(keys["K"])
    except (ValueError, KeyError) as exc:
        raise ValueError(f"{path}: malformed header {text[0]!r}") from exc
    if len(text) - 1 != n_items:
        raise ValueError(f"{path}: expected {n_items} records, found {len(text) - 1}")
    attractions = np.full(n_items, -1.0)
    for line in text[1:]:
        fields = line.split("\t")
        if len(fields) != 2:
            raise ValueError(f"{path}: malformed record {line!r}")
        item = int(fields[0])
        if not 0 <= item < n_items:
            raise ValueError(f"{path}: item id {item} out of range")
        if attractions[item] >= 0:
            raise ValueError(f"{path}: duplicate record for item {item}")
        attractions[item] = float(fields[1])
    if np.any(attractions < 0.0) or np.any(attractions > 1.0):
        raise ValueError(f"{path}: attractions must lie in [0, 1]")
    return CascadeInstance(attractions=attractions, slate_size=slate)
