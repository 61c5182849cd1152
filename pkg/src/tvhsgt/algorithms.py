"""Per-round state machines for the decentralized online methods.

tv_hsgt follows the adapt-then-combine ordering over the AB matrix pair:
decisions mix through the row-stochastic A after the tracker step is
applied, the hybrid gradient z blends the fresh stochastic gradient with a
recursive correction evaluated on the same sample, and the trackers mix
the z-increments through the column-stochastic B. The fixed-graph
baselines (dsgd, dsgt, dsgt_hb) run over a complete uniform doubly
stochastic matrix; dsgt and dsgt_hb use the same ATC tracking scheme with
plain stochastic gradients, dsgt_hb adds a heavy-ball term.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace as dc_replace
from typing import Sequence

import numpy as np

from . import metrics as met
from .errors import ConfigError, DivergenceError
from .network import (
    Digraph,
    MixingPair,
    ProbSequences,
    build_mixing_pair,
    generate_round_graph,
    phi_table,
    pi_sequence,
)
from .oracles import gradient_drift_probe

METHODS = ("tv_hsgt", "dsgd", "dsgt", "dsgt_hb")

_SNAPSHOT_MAGIC = b"TVHSGTS1"


@dataclass(frozen=True)
class AlgoConfig:
    """Step size, mixing parameter and method selection."""

    alpha: float
    beta: float = 0.01
    method: str = "tv_hsgt"
    momentum: float = 0.9

    def __post_init__(self):
        # alpha = 0 is a valid diagnostic setting (frozen decisions)
        if self.alpha < 0:
            raise ConfigError(f"alpha must be nonnegative, got {self.alpha}")
        if not 0.0 <= self.beta <= 1.0:
            raise ConfigError(f"beta must be in [0, 1], got {self.beta}")
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}")
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigError(f"momentum must be in [0, 1), got {self.momentum}")


@dataclass
class AgentStates:
    """Stacked per-agent state, one row per agent.

    x holds the decisions, y the trackers, z the hybrid gradients (for the
    baselines, the most recent stochastic gradients), x_prev the pre-mix
    decisions needed by the recursive gradient correction, and x_momentum
    the previous decisions for the heavy-ball term.
    """

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    x_prev: np.ndarray
    x_momentum: np.ndarray

    @property
    def n_agents(self) -> int:
        return self.x.shape[0]

    def copy(self) -> "AgentStates":
        return AgentStates(
            self.x.copy(),
            self.y.copy(),
            self.z.copy(),
            self.x_prev.copy(),
            self.x_momentum.copy(),
        )

    def save(self, path) -> None:
        n, d = self.x.shape
        with open(path, "wb") as fh:
            fh.write(_SNAPSHOT_MAGIC)
            fh.write(struct.pack("<QQ", n, d))
            for arr in (self.x, self.y, self.z, self.x_prev, self.x_momentum):
                fh.write(np.ascontiguousarray(arr, dtype=np.float64).tobytes())

    @classmethod
    def load(cls, path) -> "AgentStates":
        with open(path, "rb") as fh:
            magic = fh.read(len(_SNAPSHOT_MAGIC))
            if magic != _SNAPSHOT_MAGIC:
                raise ConfigError(f"{path}: not a state snapshot (bad header)")
            n, d = struct.unpack("<QQ", fh.read(16))
            arrays = []
            for _ in range(5):
                buf = fh.read(8 * n * d)
                if len(buf) != 8 * n * d:
                    raise ConfigError(f"{path}: truncated state snapshot")
                arrays.append(np.frombuffer(buf, dtype=np.float64).reshape(n, d).copy())
        return cls(*arrays)


def _check_finite(arr: np.ndarray, t: int, name: str) -> None:
    finite = np.isfinite(arr).all(axis=1)
    if not finite.all():
        raise DivergenceError(int(np.argmin(finite)), t, name)


def init_agents(x0: np.ndarray, oracle) -> AgentStates:
    """Round-zero state: z holds the first stochastic gradient, y copies it."""
    x0 = np.asarray(x0, dtype=np.float64)
    if x0.shape != (oracle.n_agents, oracle.flat_dim):
        raise ConfigError(
            f"x0 must have shape ({oracle.n_agents}, {oracle.flat_dim})"
        )
    z0 = oracle.stochastic_grad_all(0, x0)
    return AgentStates(
        x=x0.copy(), y=z0.copy(), z=z0, x_prev=x0.copy(), x_momentum=x0.copy()
    )


def tvhsgt_round(
    states: AgentStates, pair: MixingPair, oracle, cfg: AlgoConfig, t: int
) -> AgentStates:
    """One round of the hybrid tracking method over the round-t pair.

    Ordering: (1) mix x - alpha*y through A, (2) refresh the hybrid
    gradient on the round-(t+1) sample evaluated at both the new and the
    old iterate, (3) mix the tracker increments through B.
    """
    alpha, beta = cfg.alpha, cfg.beta
    X, Y, Z = states.x, states.y, states.z
    X1 = pair.A @ (X - alpha * Y)
    _check_finite(X1, t + 1, "x")
    g_new, g_old = oracle.stochastic_grad_pair_all(t + 1, X1, X)
    if beta == 1.0:
        Z1 = g_new.copy()
    else:
        Z1 = g_new + (1.0 - beta) * (Z - g_old)
    Y1 = pair.B @ (Y + Z1 - Z)
    _check_finite(Y1, t + 1, "y")
    _check_finite(Z1, t + 1, "z")
    return AgentStates(x=X1, y=Y1, z=Z1, x_prev=X, x_momentum=X)


def baseline_round(
    states: AgentStates, W: np.ndarray, oracle, cfg: AlgoConfig, t: int
) -> AgentStates:
    """One round of dsgd, dsgt, or dsgt_hb over a doubly stochastic W.

    z caches the latest stochastic gradient so the round-t state always
    carries the estimate used at round t.
    """
    alpha = cfg.alpha
    X, Y, G = states.x, states.y, states.z
    if cfg.method == "dsgd":
        X1 = W @ X - alpha * G
    elif cfg.method == "dsgt":
        X1 = W @ (X - alpha * Y)
    elif cfg.method == "dsgt_hb":
        X1 = W @ (X - alpha * Y) + cfg.momentum * (X - states.x_momentum)
    else:
        raise ConfigError(f"{cfg.method!r} is not a baseline method")
    _check_finite(X1, t + 1, "x")
    G1 = oracle.stochastic_grad_all(t + 1, X1)
    if cfg.method == "dsgd":
        Y1 = G1.copy()
    else:
        Y1 = W @ (Y + G1 - G)
        _check_finite(Y1, t + 1, "y")
    return AgentStates(x=X1, y=Y1, z=G1, x_prev=X, x_momentum=X)


def complete_mixing_matrix(n: int) -> np.ndarray:
    """Uniform doubly stochastic weights of the complete graph."""
    return np.full((n, n), 1.0 / n)


@dataclass
class TopologyPlan:
    """Deterministic time-varying topology: base graph, keep probability, seed.

    Round graphs and mixing pairs are generated lazily and cached; the
    phi/pi tables extend the generated horizon as needed for the backward
    products to reach their rank-one regime.
    """

    base: Digraph
    keep_prob: float = 1.0
    seed: int = 0
    phi_tol: float = 1e-10
    max_window: int = 4096
    _pairs: list = field(default_factory=list, repr=False)

    def pairs(self, count: int) -> list[MixingPair]:
        while len(self._pairs) < count:
            t = len(self._pairs)
            if self.keep_prob == 1.0 and self._pairs:
                # static topology: one weight matrix serves every round
                self._pairs.append(dc_replace(self._pairs[0], t=t))
                continue
            g = generate_round_graph(self.base, self.keep_prob, self.seed, t)
            self._pairs.append(build_mixing_pair(g, t=t))
        return self._pairs[:count]

    def tables(self, rounds: int) -> ProbSequences:
        """phi_t and pi_t for t = 0..rounds."""
        window = 64
        while True:
            pairs = self.pairs(rounds + 1 + window)
            try:
                phi = phi_table(pairs, rounds, tol=self.phi_tol)
                break
            except Exception:
                if window >= self.max_window:
                    raise
                window *= 2
        pi = pi_sequence(pairs[: rounds + 1])[: rounds + 1]
        return ProbSequences(phi=phi, pi=pi, window=window)


@dataclass(frozen=True)
class OptimumTrack:
    """Round optima x*_t and the objective values f_t(x*_t)."""

    optima: np.ndarray
    values: np.ndarray


def compute_optimum_track(
    oracle, T: int, tol: float = 1e-10
) -> OptimumTrack:
    optima = np.empty((T, oracle.flat_dim))
    values = np.empty(T)
    warm = None
    for t in range(T):
        if t > 0 and oracle.static:
            optima[t] = optima[t - 1]
            values[t] = values[t - 1]
            continue
        warm = oracle.round_optimum(t, tol=tol, warm=warm)
        optima[t] = warm
        values[t] = oracle.global_value_grad(t, warm)[0]
    return OptimumTrack(optima=optima, values=values)


@dataclass
class RunResult:
    """Metrics stream, final state, and optional monitor trace of one run."""

    metrics: list
    final: AgentStates
    seqs: ProbSequences | None
    trace: dict | None = None

    def metric(self, name: str) -> np.ndarray:
        return np.array([getattr(m, name) for m in self.metrics])

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="ascii") as fh:
            fh.write(met.rows_to_csv(self.metrics))


def run_horizon(
    cfg: AlgoConfig,
    plan: TopologyPlan,
    oracle,
    T: int,
    x0: np.ndarray | None = None,
    optimum_track: OptimumTrack | None = None,
    optimum_tol: float = 1e-10,
    collect_trace: bool = False,
    probe_seed: int = 0,
) -> RunResult:
    """Execute T rounds and emit one RoundMetrics row per round.

    Deterministic for fixed (plan.seed, oracle seeds, x0). tv_hsgt runs on
    the time-varying plan; the baselines run on the fixed complete uniform
    matrix and use uniform phi/pi weights in their metrics.
    """
    n, d = oracle.n_agents, oracle.flat_dim
    if x0 is None:
        x0 = np.zeros((n, d))
    states = init_agents(x0, oracle)
    if T == 0:
        return RunResult(metrics=[], final=states, seqs=None)

    if cfg.method == "tv_hsgt":
        pairs = plan.pairs(T)
        seqs = plan.tables(T)
    else:
        W = complete_mixing_matrix(n)
        uniform = np.full((T + 1, n), 1.0 / n)
        seqs = ProbSequences(phi=uniform, pi=uniform.copy(), window=0)

    if optimum_track is None:
        optimum_track = compute_optimum_track(oracle, T, tol=optimum_tol)

    rows = []
    regret_sum = 0.0
    trace: dict[str, np.ndarray] | None = None
    if collect_trace:
        trace = {
            name: np.zeros(T)
            for name in (
                "consensus2",
                "tracking2",
                "opt2",
                "gradest2",
                "sum_y2",
                "y_pinv2",
                "dx2",
                "dz2",
                "q",
                "p",
            )
        }

    p_series = met.optimum_path_lengths(optimum_track.optima)
    for t in range(T):
        phi_t = seqs.phi[t]
        pi_t = seqs.pi[t]
        x_hat = met.weighted_average(states.x, phi_t)
        consensus2 = met.consensus_error(states.x, phi_t)
        tracking2 = met.tracking_error(states.y, pi_t)
        diff = x_hat - optimum_track.optima[t]
        opt2 = float(diff @ diff)
        grad_err = states.z - oracle.exact_grad_all(t, states.x)
        gradest2 = float(np.sum(grad_err * grad_err))
        regret_inc = (
            oracle.global_value_grad(t, x_hat)[0] - optimum_track.values[t]
        )
        regret_sum += regret_inc
        x_bar = states.x.mean(axis=0)
        loss = oracle.global_value_grad(t, x_bar)[0]
        accuracy = oracle.accuracy(t, x_bar)
        if oracle.static or t == T - 1:
            q_t = 0.0
        else:
            q_t = gradient_drift_probe(oracle, t, states.x, seed=probe_seed)
        rows.append(
            met.RoundMetrics(
                t=t,
                regret_inc=regret_inc,
                regret_avg=regret_sum / (t + 1),
                consensus2=consensus2,
                tracking2=tracking2,
                opt2=opt2,
                gradest2=gradest2,
                q_t=q_t,
                p_t=float(p_series[t]),
                loss=loss,
                accuracy=accuracy,
            )
        )
        if trace is not None:
            trace["consensus2"][t] = consensus2
            trace["tracking2"][t] = tracking2
            trace["opt2"][t] = opt2
            trace["gradest2"][t] = gradest2
            total_y = states.y.sum(axis=0)
            trace["sum_y2"][t] = float(total_y @ total_y)
            trace["y_pinv2"][t] = float(
                np.sum(states.y * states.y / pi_t[:, None])
            )
            trace["q"][t] = q_t
            trace["p"][t] = float(p_series[t])

        if cfg.method == "tv_hsgt":
            new_states = tvhsgt_round(states, pairs[t], oracle, cfg, t)
        else:
            new_states = baseline_round(states, W, oracle, cfg, t)
        if trace is not None:
            dx = new_states.x - states.x
            dz = new_states.z - states.z
            trace["dx2"][t] = float(np.sum(dx * dx))
            trace["dz2"][t] = float(np.sum(dz * dz))
        states = new_states

    return RunResult(metrics=rows, final=states, seqs=seqs, trace=trace)
