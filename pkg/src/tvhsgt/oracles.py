"""Per-agent streaming loss oracles.

Three objective families share one interface: binary logistic loss over
structured data, softmax logistic loss over image data (both with L2
regularization), and a synthetic strongly convex quadratic with additive
gradient noise. Oracles are time-indexed: ``f(i, t, x)`` is agent i's loss
at round t, and the stochastic gradient at round t is evaluated on a
minibatch that is deterministic given (sample_seed, agent, t).

Decision variables are flat vectors; the softmax oracle reshapes them to a
(dim, n_classes) matrix internally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy.special import expit, logsumexp

from .errors import AnalysisError, ConfigError, StreamError

_BATCH_TAG = 23
_NOISE_TAG = 29
_DRIFT_TAG = 31
_PROBE_TAG = 37


@dataclass(frozen=True)
class Sample:
    """One labeled observation: dense feature vector plus integer label."""

    features: np.ndarray
    label: int


class Shard:
    """Columnar batch of samples: features (M, d) and labels (M,)."""

    __slots__ = ("features", "labels")

    def __init__(self, features: np.ndarray, labels: np.ndarray):
        features = np.asarray(features, dtype=np.float64)
        labels = np.asarray(labels)
        if features.ndim != 2 or features.shape[0] != labels.shape[0]:
            raise ConfigError("shard features/labels shapes disagree")
        if not np.isfinite(features).all():
            raise ConfigError("shard contains non-finite features")
        self.features = features
        self.labels = labels.astype(np.int64)

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @classmethod
    def from_samples(cls, samples: Sequence[Sample]) -> "Shard":
        if not samples:
            raise ValueError("cannot build a shard from zero samples")
        return cls(
            np.stack([s.features for s in samples]),
            np.array([s.label for s in samples]),
        )

    def subset(self, idx: np.ndarray) -> "Shard":
        return Shard(self.features[idx], self.labels[idx])


@dataclass(frozen=True)
class LossProfile:
    """Curvature and noise constants of a loss family.

    L_g bounds the mean-square Lipschitz constant of the stochastic
    gradient, mu the strong convexity of the global objective, sigma2 the
    gradient noise variance, reg the L2 coefficient.
    """

    L_g: float
    mu: float
    sigma2: float
    reg: float

    def __post_init__(self):
        if self.L_g < self.mu or self.mu < 0 or self.sigma2 < 0:
            raise ConfigError(
                f"inconsistent loss profile: L_g={self.L_g}, mu={self.mu}, "
                f"sigma2={self.sigma2}"
            )


# ---------------------------------------------------------------------------
# loss functions


def binary_logistic_value_grad(
    theta: np.ndarray, batch: Shard, reg: float = 0.0
) -> tuple[float, np.ndarray]:
    """Average binary logistic loss and gradient on a batch.

    value = mean_s [(1-b_s) a_s.theta + log(1 + exp(-a_s.theta))]
            + reg/2 ||theta||^2
    grad  = mean_s (sigmoid(a_s.theta) - b_s) a_s + reg theta
    """
    if len(batch) == 0:
        raise ValueError("empty batch")
    if reg < 0:
        raise ConfigError(f"regularization must be nonnegative, got {reg}")
    z = batch.features @ theta
    b = batch.labels.astype(np.float64)
    value = float(np.mean((1.0 - b) * z + np.logaddexp(0.0, -z)))
    value += 0.5 * reg * float(theta @ theta)
    grad = batch.features.T @ (expit(z) - b) / len(batch) + reg * theta
    return value, grad


def softmax_logistic_value_grad(
    theta: np.ndarray, batch: Shard, reg: float = 0.0
) -> tuple[float, np.ndarray]:
    """Average multinomial logistic loss and gradient on a batch.

    ``theta`` has one column per class; the value is the negative log
    softmax probability of the true class, averaged, plus reg/2 times the
    squared Frobenius norm.
    """
    if len(batch) == 0:
        raise ValueError("empty batch")
    if theta.ndim != 2:
        raise ValueError("softmax loss needs a (dim, n_classes) matrix")
    n_classes = theta.shape[1]
    if batch.labels.min() < 0 or batch.labels.max() >= n_classes:
        raise ValueError(
            f"label outside 0..{n_classes - 1}: {int(batch.labels.max())}"
        )
    scores = batch.features @ theta
    lse = logsumexp(scores, axis=1)
    rows = np.arange(len(batch))
    value = float(np.mean(lse - scores[rows, batch.labels]))
    value += 0.5 * reg * float(np.sum(theta * theta))
    probs = np.exp(scores - lse[:, None])
    probs[rows, batch.labels] -= 1.0
    grad = batch.features.T @ probs / len(batch) + reg * theta
    return value, grad


def quadratic_value_grad(
    x: np.ndarray, target: np.ndarray
) -> tuple[float, np.ndarray]:
    diff = x - target
    return 0.5 * float(diff @ diff), diff


# ---------------------------------------------------------------------------
# streams


class MinibatchStream:
    """Deterministic per-round minibatches over a pre-shuffled shard.

    The shard positions are permuted once with the stream seed; round t
    takes the contiguous slice starting at t*batch_size, wrapping around
    when cycling is enabled. Identical (seed, agent, t) always yields the
    same indices.
    """

    def __init__(
        self,
        agent: int,
        shard_size: int,
        batch_size: int,
        seed: int,
        cycle: bool = True,
    ):
        if batch_size < 1 or batch_size > shard_size:
            raise ConfigError(
                f"batch_size must be in 1..{shard_size}, got {batch_size}"
            )
        self.agent = agent
        self.batch_size = batch_size
        self.shard_size = shard_size
        self.cycle = cycle
        rng = np.random.default_rng([seed, _BATCH_TAG, agent])
        self._order = rng.permutation(shard_size)

    def indices(self, t: int) -> np.ndarray:
        start = t * self.batch_size
        if not self.cycle and start + self.batch_size > self.shard_size:
            raise StreamError(
                f"agent {self.agent} stream exhausted at round {t}"
            )
        pos = (start + np.arange(self.batch_size)) % self.shard_size
        return self._order[pos]


# ---------------------------------------------------------------------------
# strongly convex solver (round optima)


def minimize_strongly_convex(
    grad_fn: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    mu: float,
    L: float,
    tol: float = 1e-10,
    max_iter: int = 200_000,
) -> np.ndarray:
    """Nesterov-accelerated gradient descent to gradient norm <= tol."""
    if mu <= 0:
        raise ConfigError("solver requires a strongly convex objective")
    step = 1.0 / L
    rho = (math.sqrt(L) - math.sqrt(mu)) / (math.sqrt(L) + math.sqrt(mu))
    x = np.array(x0, dtype=np.float64)
    y = x.copy()
    for _ in range(max_iter):
        g = grad_fn(y)
        x_new = y - step * g
        y = x_new + rho * (x_new - x)
        x = x_new
        if float(np.linalg.norm(grad_fn(x))) <= tol:
            return x
    res = float(np.linalg.norm(grad_fn(x)))
    raise AnalysisError(
        f"round optimum solver hit {max_iter} iterations, "
        f"residual gradient norm {res:.3e} (tol {tol:.1e})"
    )


# ---------------------------------------------------------------------------
# oracles


@dataclass(frozen=True)
class DriftSpec:
    """Per-round data drift knobs for synthetic streams.

    label_flip_rate flips that fraction of labels (fresh per round, drawn
    from the data seed); rotate_rate rotates features in the plane of the
    first two coordinates by rotate_rate radians per round.
    """

    label_flip_rate: float = 0.0
    rotate_rate: float = 0.0

    @property
    def active(self) -> bool:
        return self.label_flip_rate > 0 or self.rotate_rate > 0


class LogisticOracle:
    """Streaming binary or softmax logistic losses over per-agent shards.

    f_{i,t} is the average loss over agent i's (possibly drifted) round-t
    pool plus the L2 term; the stochastic gradient evaluates the same loss
    on a deterministic minibatch.
    """

    def __init__(
        self,
        shards: Sequence[Shard],
        batch_size: int,
        reg: float = 1e-5,
        kind: str = "binary",
        n_classes: int = 10,
        drift: DriftSpec | None = None,
        data_seed: int = 0,
        sample_seed: int = 0,
    ):
        if kind not in ("binary", "softmax"):
            raise ConfigError(f"unknown logistic kind {kind!r}")
        if not shards:
            raise ConfigError("oracle needs at least one shard")
        self.kind = kind
        self.n_classes = n_classes if kind == "softmax" else 2
        self.shards = list(shards)
        self.n_agents = len(shards)
        self.dim = shards[0].dim
        self.reg = float(reg)
        self.drift = drift or DriftSpec()
        self.data_seed = data_seed
        self.sample_seed = sample_seed
        self.flat_dim = (
            self.dim if kind == "binary" else self.dim * n_classes
        )
        self.streams = [
            MinibatchStream(i, len(s), batch_size, sample_seed)
            for i, s in enumerate(shards)
        ]
        self._shard_cache = lru_cache(maxsize=8 * self.n_agents)(
            self._shard_at_uncached
        )
        self._profile: LossProfile | None = None

    @property
    def static(self) -> bool:
        return not self.drift.active

    # -- pools --------------------------------------------------------------

    def _shard_at_uncached(self, agent: int, t: int) -> Shard:
        base = self.shards[agent]
        if not self.drift.active or t == 0:
            return base
        features = base.features
        labels = base.labels
        if self.drift.rotate_rate > 0 and self.dim >= 2:
            angle = self.drift.rotate_rate * t
            cos_a, sin_a = math.cos(angle), math.sin(angle)
            features = features.copy()
            f0 = base.features[:, 0]
            f1 = base.features[:, 1]
            features[:, 0] = cos_a * f0 - sin_a * f1
            features[:, 1] = sin_a * f0 + cos_a * f1
        if self.drift.label_flip_rate > 0:
            rng = np.random.default_rng(
                [self.data_seed, _DRIFT_TAG, t, agent]
            )
            flip = rng.random(len(base)) < self.drift.label_flip_rate
            labels = labels.copy()
            if self.kind == "binary":
                labels[flip] = 1 - labels[flip]
            else:
                labels[flip] = (labels[flip] + 1) % self.n_classes
        return Shard(features, labels)

    def shard_at(self, agent: int, t: int) -> Shard:
        return self._shard_cache(agent, t)

    def minibatch(self, agent: int, t: int) -> Shard:
        idx = self.streams[agent].indices(t)
        return self.shard_at(agent, t).subset(idx)

    # -- losses -------------------------------------------------------------

    def _value_grad(self, batch: Shard, x: np.ndarray) -> tuple[float, np.ndarray]:
        if self.kind == "binary":
            return binary_logistic_value_grad(x, batch, self.reg)
        theta = x.reshape(self.dim, self.n_classes)
        value, grad = softmax_logistic_value_grad(theta, batch, self.reg)
        return value, grad.ravel()

    def stochastic_value_grad(
        self, agent: int, t: int, x: np.ndarray
    ) -> tuple[float, np.ndarray]:
        return self._value_grad(self.minibatch(agent, t), x)

    def stochastic_grad(self, agent: int, t: int, x: np.ndarray) -> np.ndarray:
        return self.stochastic_value_grad(agent, t, x)[1]

    def stochastic_grad_pair(
        self, agent: int, t: int, x_new: np.ndarray, x_old: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray]:
        """Both gradients on the *same* round-t minibatch."""
        batch = self.minibatch(agent, t)
        return self._value_grad(batch, x_new)[1], self._value_grad(batch, x_old)[1]

    def stochastic_grad_all(self, t: int, xs: np.ndarray) -> np.ndarray:
        return np.stack(
            [self.stochastic_grad(i, t, xs[i]) for i in range(self.n_agents)]
        )

    def stochastic_grad_pair_all(
        self, t: int, xs_new: np.ndarray, xs_old: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray]:
        g_new = np.empty_like(xs_new)
        g_old = np.empty_like(xs_old)
        for i in range(self.n_agents):
            g_new[i], g_old[i] = self.stochastic_grad_pair(i, t, xs_new[i], xs_old[i])
        return g_new, g_old

    def exact_value_grad(
        self, agent: int, t: int, x: np.ndarray
    ) -> tuple[float, np.ndarray]:
        return self._value_grad(self.shard_at(agent, t), x)

    def exact_grad(self, agent: int, t: int, x: np.ndarray) -> np.ndarray:
        return self.exact_value_grad(agent, t, x)[1]

    def exact_grad_all(self, t: int, xs: np.ndarray) -> np.ndarray:
        return np.stack(
            [self.exact_grad(i, t, xs[i]) for i in range(self.n_agents)]
        )

    def exact_grad_batch(self, agent: int, t: int, points: np.ndarray) -> np.ndarray:
        """Full-shard gradients at several decision points, stacked (P, dim)."""
        shard = self.shard_at(agent, t)
        if self.kind == "binary":
            logits = shard.features @ points.T
            resid = expit(logits) - shard.labels[:, None].astype(np.float64)
            return (shard.features.T @ resid / len(shard)).T + self.reg * points
        return np.stack(
            [self.exact_grad(agent, t, points[k]) for k in range(points.shape[0])]
        )

    def global_value_grad(self, t: int, x: np.ndarray) -> tuple[float, np.ndarray]:
        value = 0.0
        grad = np.zeros(self.flat_dim)
        for i in range(self.n_agents):
            v, g = self.exact_value_grad(i, t, x)
            value += v
            grad += g
        return value / self.n_agents, grad / self.n_agents

    def accuracy(self, t: int, x: np.ndarray) -> float:
        good = 0
        total = 0
        for i in range(self.n_agents):
            shard = self.shard_at(i, t)
            if self.kind == "binary":
                pred = (shard.features @ x >= 0).astype(np.int64)
            else:
                theta = x.reshape(self.dim, self.n_classes)
                pred = np.argmax(shard.features @ theta, axis=1)
            good += int(np.sum(pred == shard.labels))
            total += len(shard)
        return good / total

    # -- constants and optima -------------------------------------------------

    def profile(self) -> LossProfile:
        if self._profile is None:
            pooled = Shard(
                np.concatenate([s.features for s in self.shards]),
                np.concatenate([s.labels for s in self.shards]),
            )
            self._profile = estimate_constants(
                pooled,
                self.reg,
                kind=self.kind,
                n_classes=self.n_classes,
                batch_size=self.streams[0].batch_size,
                seed=self.sample_seed,
            )
        return self._profile

    def round_optimum(
        self,
        t: int,
        tol: float = 1e-10,
        warm: np.ndarray | None = None,
        max_iter: int = 200_000,
    ) -> np.ndarray:
        prof = self.profile()
        if prof.mu <= 0:
            raise ConfigError(
                "round optimum requires positive regularization (mu > 0)"
            )
        x0 = warm if warm is not None else np.zeros(self.flat_dim)
        return minimize_strongly_convex(
            lambda x: self.global_value_grad(t, x)[1],
            x0,
            prof.mu,
            prof.L_g,
            tol=tol,
            max_iter=max_iter,
        )


class QuadraticOracle:
    """Synthetic quadratic objectives with additive gradient noise.

    f_{i,t}(x) = 0.5 ||x - target_i(t)||^2 where target_i(t) walks along a
    shared unit direction with per-round step ``drift_step``. The stochastic
    gradient adds a Gaussian vector with E||noise||^2 = sigma2, drawn per
    (sample_seed, agent, t) and shared by both evaluation points of a pair.
    """

    kind = "quadratic"

    def __init__(
        self,
        targets: np.ndarray,
        sigma2: float = 0.0,
        drift_step: float = 0.0,
        data_seed: int = 0,
        sample_seed: int = 0,
    ):
        targets = np.asarray(targets, dtype=np.float64)
        if targets.ndim != 2:
            raise ConfigError("targets must be an (agents, dim) array")
        if sigma2 < 0:
            raise ConfigError(f"sigma2 must be nonnegative, got {sigma2}")
        self.targets = targets
        self.n_agents, self.dim = targets.shape
        self.flat_dim = self.dim
        self.sigma2 = float(sigma2)
        self.drift_step = float(drift_step)
        self.data_seed = data_seed
        self.sample_seed = sample_seed
        rng = np.random.default_rng([data_seed, _DRIFT_TAG])
        direction = rng.normal(size=self.dim)
        self._direction = direction / np.linalg.norm(direction)
        self.reg = 0.0
        self._noise_t = -1
        self._noise_mat = np.zeros((self.n_agents, self.dim))
        self._zero_noise = np.zeros((self.n_agents, self.dim))

    @property
    def static(self) -> bool:
        return self.drift_step == 0.0

    def target_at(self, agent: int, t: int) -> np.ndarray:
        if self.drift_step == 0.0:
            return self.targets[agent]
        return self.targets[agent] + self.drift_step * t * self._direction

    def targets_at(self, t: int) -> np.ndarray:
        if self.drift_step == 0.0:
            return self.targets
        return self.targets + self.drift_step * t * self._direction

    def _noise_round(self, t: int) -> np.ndarray:
        if self.sigma2 == 0.0:
            return self._zero_noise
        if t != self._noise_t:
            rng = np.random.default_rng([self.sample_seed, _NOISE_TAG, t])
            self._noise_t = t
            self._noise_mat = math.sqrt(self.sigma2 / self.dim) * rng.normal(
                size=(self.n_agents, self.dim)
            )
        return self._noise_mat

    def _noise(self, agent: int, t: int) -> np.ndarray:
        return self._noise_round(t)[agent]

    def stochastic_grad(self, agent: int, t: int, x: np.ndarray) -> np.ndarray:
        return (x - self.target_at(agent, t)) + self._noise(agent, t)

    def stochastic_grad_all(self, t: int, xs: np.ndarray) -> np.ndarray:
        return (xs - self.targets_at(t)) + self._noise_round(t)

    def stochastic_grad_pair(
        self, agent: int, t: int, x_new: np.ndarray, x_old: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray]:
        noise = self._noise(agent, t)
        target = self.target_at(agent, t)
        return (x_new - target) + noise, (x_old - target) + noise

    def stochastic_grad_pair_all(
        self, t: int, xs_new: np.ndarray, xs_old: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray]:
        targets = self.targets_at(t)
        noise = self._noise_round(t)
        return (xs_new - targets) + noise, (xs_old - targets) + noise

    def exact_value_grad(
        self, agent: int, t: int, x: np.ndarray
    ) -> tuple[float, np.ndarray]:
        return quadratic_value_grad(x, self.target_at(agent, t))

    def exact_grad(self, agent: int, t: int, x: np.ndarray) -> np.ndarray:
        return x - self.target_at(agent, t)

    def exact_grad_all(self, t: int, xs: np.ndarray) -> np.ndarray:
        """Exact gradients for every agent at its own iterate, stacked."""
        return xs - self.targets_at(t)

    def exact_grad_batch(self, agent: int, t: int, points: np.ndarray) -> np.ndarray:
        return points - self.target_at(agent, t)

    def global_value_grad(self, t: int, x: np.ndarray) -> tuple[float, np.ndarray]:
        # the agent-wise constant offsets matter for the value, not the grad
        diffs = x - self.targets_at(t)
        value = 0.5 * float(np.mean(np.sum(diffs * diffs, axis=1)))
        return value, diffs.mean(axis=0)

    def accuracy(self, t: int, x: np.ndarray) -> float:
        return math.nan

    def profile(self) -> LossProfile:
        return LossProfile(L_g=1.0, mu=1.0, sigma2=self.sigma2, reg=0.0)

    def round_optimum(
        self,
        t: int,
        tol: float = 1e-10,
        warm: np.ndarray | None = None,
        max_iter: int = 200_000,
    ) -> np.ndarray:
        x0 = warm if warm is not None else np.zeros(self.dim)
        return minimize_strongly_convex(
            lambda x: self.global_value_grad(t, x)[1],
            x0,
            1.0,
            1.0,
            tol=tol,
            max_iter=max_iter,
        )


def make_synthetic_binary_shards(
    n_agents: int,
    shard_size: int,
    dim: int,
    seed: int,
    separation: float = 2.0,
    feature_scale: float | None = None,
    whitened: bool = False,
) -> list[Shard]:
    """Seeded binary logistic data: Gaussian features, Bernoulli labels.

    Labels are drawn from the true sigmoid probabilities of a planted
    parameter vector, so the stream carries irreducible label noise. Each
    agent additionally gets a feature-mean offset for heterogeneity.
    feature_scale defaults to 1/sqrt(dim) (unit expected feature norm);
    larger values raise the loss curvature quadratically. ``whitened``
    swaps the Gaussian design for an orthonormalized one, which makes the
    objective nearly perfectly conditioned.
    """
    if feature_scale is None:
        feature_scale = 1.0 / math.sqrt(dim)
    rng = np.random.default_rng([seed, 3])
    truth = rng.normal(size=dim)
    truth *= separation / (np.linalg.norm(truth) * feature_scale * math.sqrt(dim))
    shards = []
    for i in range(n_agents):
        offset = 0.5 * feature_scale * rng.normal(size=dim)
        features = feature_scale * rng.normal(size=(shard_size, dim)) + offset
        if whitened:
            # orthonormalize the design so the Gram spectrum is flat; the
            # loss curvature spread then comes from the sigmoid alone
            q, _ = np.linalg.qr(rng.normal(size=(shard_size, dim)))
            features = feature_scale * math.sqrt(shard_size) * q
        probs = expit(features @ truth)
        labels = (rng.random(shard_size) < probs).astype(np.int64)
        shards.append(Shard(features, labels))
    return shards


def estimate_constants(
    shard: Shard,
    reg: float,
    kind: str = "binary",
    n_classes: int = 10,
    batch_size: int | None = None,
    seed: int = 0,
    theta: np.ndarray | None = None,
    mc_samples: int = 1000,
    power_tol: float = 1e-9,
    power_max_iter: int = 10_000,
) -> LossProfile:
    """Curvature and noise constants of a logistic shard.

    L_g comes from a power iteration on the scaled Gram matrix (factor 1/4
    for the binary loss, 1/2 for softmax), mu equals the regularization
    coefficient, sigma2 is a Monte-Carlo estimate of the minibatch gradient
    variance at ``theta`` (default zero).
    """
    if len(shard) == 0:
        raise ConfigError("cannot estimate constants on an empty shard")
    scale = 0.25 if kind == "binary" else 0.5
    F = shard.features
    m = len(shard)
    rng = np.random.default_rng([seed, 41])
    v = rng.normal(size=shard.dim)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(power_max_iter):
        w = F.T @ (F @ v) * (scale / m)
        norm = float(np.linalg.norm(w))
        if norm == 0.0:
            lam = 0.0
            break
        lam_new = float(v @ w)
        v = w / norm
        if abs(lam_new - lam) <= power_tol * max(1.0, abs(lam_new)):
            lam = lam_new
            break
        lam = lam_new
    else:
        raise AnalysisError(
            f"power iteration did not converge in {power_max_iter} iterations"
        )

    sigma2 = 0.0
    if batch_size is not None and batch_size < m:
        if kind == "binary":
            point = theta if theta is not None else np.zeros(shard.dim)
            full = binary_logistic_value_grad(point, shard, reg)[1]
        else:
            point = (
                theta
                if theta is not None
                else np.zeros((shard.dim, n_classes))
            )
            full = softmax_logistic_value_grad(point, shard, reg)[1]
        acc = 0.0
        for _ in range(mc_samples):
            idx = rng.choice(m, size=batch_size, replace=False)
            batch = shard.subset(idx)
            if kind == "binary":
                g = binary_logistic_value_grad(point, batch, reg)[1]
            else:
                g = softmax_logistic_value_grad(point, batch, reg)[1]
            acc += float(np.sum((g - full) ** 2))
        sigma2 = acc / mc_samples

    return LossProfile(L_g=lam + reg, mu=reg, sigma2=sigma2, reg=reg)


def gradient_drift_probe(
    oracle,
    t: int,
    iterates: np.ndarray,
    n_perturbations: int = 8,
    seed: int = 0,
) -> float:
    """Estimate of the worst gradient change between rounds t and t+1.

    Maximizes ||grad f_{i,t+1}(x) - grad f_{i,t}(x)|| over agents and a
    probe set of the current iterates plus Gaussian perturbations of their
    mean. A declared estimator of the true supremum, not the supremum.
    """
    rng = np.random.default_rng([seed, _PROBE_TAG, t])
    center = iterates.mean(axis=0)
    probes = np.concatenate(
        [iterates, center + rng.normal(size=(n_perturbations, center.shape[0]))]
    )
    worst = 0.0
    for i in range(oracle.n_agents):
        delta = oracle.exact_grad_batch(i, t + 1, probes) - oracle.exact_grad_batch(
            i, t, probes
        )
        worst = max(worst, float(np.sqrt((delta * delta).sum(axis=1).max())))
    return worst
