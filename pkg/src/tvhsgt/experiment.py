"""Declarative experiment runner.

Configs are flat key=value text with sections (configparser dialect),
versioned. A run produces, per (method, beta, seed) cell, a metrics CSV
with the pinned column order, plus seed-averaged summary CSVs, an optional
stability-certificate report, an optional monitor report, optional SVG
charts, and a manifest that pins the config text and output hashes so a
rerun can be byte-compared.
"""

from __future__ import annotations

import configparser
import hashlib
import json
import os
import struct
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .algorithms import (
    METHODS,
    AlgoConfig,
    OptimumTrack,
    TopologyPlan,
    compute_optimum_track,
    run_horizon,
)
from .analysis import (
    MonitorTrace,
    attach_steady_state,
    certify_step_size,
    lemma_monitors,
    measure_contraction,
)
from .errors import ConfigError, IngestError
from .metrics import CSV_COLUMNS
from .network import (
    Digraph,
    complete_digraph,
    graph_stats,
    random_base_digraph,
    ring_digraph,
    save_graph_sequence,
)
from .oracles import (
    DriftSpec,
    LogisticOracle,
    QuadraticOracle,
    Shard,
    make_synthetic_binary_shards,
)

CONFIG_VERSION = 1

_INIT_TAG = 53


@dataclass
class ExperimentConfig:
    """Validated experiment description (see `to_text` for the file layout)."""

    # dataset
    kind: str = "synthetic"
    agents: int = 10
    dim: int = 20
    shard_size: int = 400
    batch_size: int = 10
    reg: float = 1e-5
    label_flip_rate: float = 0.0
    rotate_rate: float = 0.0
    noise_sigma2: float = 0.0
    drift_step: float = 0.0
    data_seed: int = 7
    separation: float = 2.0
    feature_scale: float = 0.0
    path: str = ""
    labels_path: str = ""
    max_samples: int = 20000
    # topology
    base: str = "complete"
    keep_prob: float = 1.0
    edge_prob: float = 0.5
    # run
    methods: tuple = ("tv_hsgt",)
    T: int = 100
    alpha: float = 0.001
    betas: tuple = (0.01,)
    seeds: tuple = (1,)
    momentum: float = 0.9
    optimum_tol: float = 1e-10
    x0: str = "zeros"
    # output
    outdir: str = "out"
    svg: bool = False
    certificate: bool = False
    monitor: bool = False
    monitor_replicas: int = 20
    monitor_slack: float = 1.1
    export_graphs: bool = False
    workers: int = 1

    def validate(self) -> None:
        def bad(path, msg):
            raise ConfigError(f"{path}: {msg}")

        if self.kind not in ("synthetic", "quadratic", "libsvm", "idx"):
            bad("dataset.kind", f"unknown kind {self.kind!r}")
        if self.agents < 2:
            bad("dataset.agents", f"needs n >= 2, got {self.agents}")
        if self.batch_size < 1:
            bad("dataset.batch_size", "must be at least 1")
        if self.reg < 0:
            bad("dataset.reg", "must be nonnegative")
        if self.kind in ("libsvm", "idx") and not self.path:
            bad("dataset.path", "required for file-backed datasets")
        if self.kind == "idx" and not self.labels_path:
            bad("dataset.labels_path", "required for idx datasets")
        if self.base not in ("complete", "ring", "random"):
            bad("topology.base", f"unknown base graph {self.base!r}")
        if not 0.0 < self.keep_prob <= 1.0:
            bad("topology.keep_prob", f"must be in (0, 1], got {self.keep_prob}")
        if self.T < 1:
            bad("run.T", f"must be at least 1, got {self.T}")
        if self.alpha <= 0:
            bad("run.alpha", "must be positive")
        for beta in self.betas:
            if not 0.0 <= beta <= 1.0:
                bad("run.betas", f"beta {beta} outside [0, 1]")
        if not self.seeds:
            bad("run.seeds", "at least one seed required")
        for m in self.methods:
            if m not in METHODS:
                bad("run.methods", f"unknown method {m!r}")
        if self.x0 not in ("zeros", "gauss"):
            bad("run.x0", f"unknown initializer {self.x0!r}")
        if self.workers < 1:
            bad("output.workers", "must be at least 1")

    # -- serialization -------------------------------------------------------

    def to_text(self) -> str:
        lines = [
            "[experiment]",
            f"version = {CONFIG_VERSION}",
            "",
            "[dataset]",
            f"kind = {self.kind}",
            f"agents = {self.agents}",
            f"dim = {self.dim}",
            f"shard_size = {self.shard_size}",
            f"batch_size = {self.batch_size}",
            f"reg = {self.reg!r}",
            f"label_flip_rate = {self.label_flip_rate!r}",
            f"rotate_rate = {self.rotate_rate!r}",
            f"noise_sigma2 = {self.noise_sigma2!r}",
            f"drift_step = {self.drift_step!r}",
            f"data_seed = {self.data_seed}",
            f"separation = {self.separation!r}",
            f"feature_scale = {self.feature_scale!r}",
            f"path = {self.path}",
            f"labels_path = {self.labels_path}",
            f"max_samples = {self.max_samples}",
            "",
            "[topology]",
            f"base = {self.base}",
            f"keep_prob = {self.keep_prob!r}",
            f"edge_prob = {self.edge_prob!r}",
            "",
            "[run]",
            f"methods = {','.join(self.methods)}",
            f"T = {self.T}",
            f"alpha = {self.alpha!r}",
            f"betas = {','.join(format(b, 'g') for b in self.betas)}",
            f"seeds = {','.join(str(s) for s in self.seeds)}",
            f"momentum = {self.momentum!r}",
            f"optimum_tol = {self.optimum_tol!r}",
            f"x0 = {self.x0}",
            "",
            "[output]",
            f"dir = {self.outdir}",
            f"svg = {self.svg}",
            f"certificate = {self.certificate}",
            f"monitor = {self.monitor}",
            f"monitor_replicas = {self.monitor_replicas}",
            f"monitor_slack = {self.monitor_slack!r}",
            f"export_graphs = {self.export_graphs}",
            f"workers = {self.workers}",
        ]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"config parse failure: {exc}") from exc

        def get(section, key, conv, default):
            if not parser.has_option(section, key):
                return default
            raw = parser.get(section, key).strip()
            if raw == "" and conv is not str:
                return default
            try:
                return conv(raw)
            except ValueError as exc:
                raise ConfigError(f"{section}.{key}: cannot parse {raw!r}") from exc

        def boolean(raw: str) -> bool:
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)

        def floats(raw: str) -> tuple:
            return tuple(float(tok) for tok in raw.split(",") if tok.strip())

        def ints(raw: str) -> tuple:
            return tuple(int(tok) for tok in raw.split(",") if tok.strip())

        def strings(raw: str) -> tuple:
            return tuple(tok.strip() for tok in raw.split(",") if tok.strip())

        version = get("experiment", "version", int, CONFIG_VERSION)
        if version != CONFIG_VERSION:
            raise ConfigError(
                f"experiment.version: unsupported version {version} "
                f"(expected {CONFIG_VERSION})"
            )
        cfg = cls(
            kind=get("dataset", "kind", str, "synthetic"),
            agents=get("dataset", "agents", int, 10),
            dim=get("dataset", "dim", int, 20),
            shard_size=get("dataset", "shard_size", int, 400),
            batch_size=get("dataset", "batch_size", int, 10),
            reg=get("dataset", "reg", float, 1e-5),
            label_flip_rate=get("dataset", "label_flip_rate", float, 0.0),
            rotate_rate=get("dataset", "rotate_rate", float, 0.0),
            noise_sigma2=get("dataset", "noise_sigma2", float, 0.0),
            drift_step=get("dataset", "drift_step", float, 0.0),
            data_seed=get("dataset", "data_seed", int, 7),
            separation=get("dataset", "separation", float, 2.0),
            feature_scale=get("dataset", "feature_scale", float, 0.0),
            path=get("dataset", "path", str, ""),
            labels_path=get("dataset", "labels_path", str, ""),
            max_samples=get("dataset", "max_samples", int, 20000),
            base=get("topology", "base", str, "complete"),
            keep_prob=get("topology", "keep_prob", float, 1.0),
            edge_prob=get("topology", "edge_prob", float, 0.5),
            methods=get("run", "methods", strings, ("tv_hsgt",)),
            T=get("run", "T", int, 100),
            alpha=get("run", "alpha", float, 0.001),
            betas=get("run", "betas", floats, (0.01,)),
            seeds=get("run", "seeds", ints, (1,)),
            momentum=get("run", "momentum", float, 0.9),
            optimum_tol=get("run", "optimum_tol", float, 1e-10),
            x0=get("run", "x0", str, "zeros"),
            outdir=get("output", "dir", str, "out"),
            svg=get("output", "svg", boolean, False),
            certificate=get("output", "certificate", boolean, False),
            monitor=get("output", "monitor", boolean, False),
            monitor_replicas=get("output", "monitor_replicas", int, 20),
            monitor_slack=get("output", "monitor_slack", float, 1.1),
            export_graphs=get("output", "export_graphs", boolean, False),
            workers=get("output", "workers", int, 1),
        )
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_text(text)


# ---------------------------------------------------------------------------
# data ingestion


def parse_libsvm(path, max_samples: int | None = None) -> Shard:
    """Sparse "label idx:val" text to a dense shard.

    Labels -1/+1 (or 0/1) map to 0/1; the feature dimension is the largest
    index seen (indices are 1-based).
    """
    rows: list[dict[int, float]] = []
    labels: list[int] = []
    dim = 0
    try:
        fh = open(path, "r", encoding="ascii")
    except OSError as exc:
        raise IngestError(f"cannot open {path}: {exc}") from exc
    with fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            tokens = line.split()
            try:
                label = int(float(tokens[0]))
            except ValueError as exc:
                raise IngestError(
                    f"{path}:{lineno}: bad label token {tokens[0]!r}"
                ) from exc
            if label == -1:
                label = 0
            if label not in (0, 1):
                raise IngestError(f"{path}:{lineno}: label {label} not binary")
            entries: dict[int, float] = {}
            for col, token in enumerate(tokens[1:], start=2):
                idx_val = token.split(":")
                if len(idx_val) != 2:
                    raise IngestError(
                        f"{path}:{lineno}: column {col}: bad token {token!r}"
                    )
                try:
                    idx = int(idx_val[0])
                    val = float(idx_val[1])
                except ValueError as exc:
                    raise IngestError(
                        f"{path}:{lineno}: column {col}: bad token {token!r}"
                    ) from exc
                if idx < 1:
                    raise IngestError(
                        f"{path}:{lineno}: column {col}: index {idx} < 1"
                    )
                entries[idx - 1] = val
                dim = max(dim, idx)
            rows.append(entries)
            labels.append(label)
            if max_samples is not None and len(rows) >= max_samples:
                break
    if not rows:
        return Shard(np.zeros((0, max(dim, 1))), np.zeros(0, dtype=np.int64))
    features = np.zeros((len(rows), dim))
    for r, entries in enumerate(rows):
        for idx, val in entries.items():
            features[r, idx] = val
    return Shard(features, np.array(labels, dtype=np.int64))


def write_libsvm(path, shard: Shard) -> None:
    with open(path, "w", encoding="ascii") as fh:
        for r in range(len(shard)):
            label = "+1" if shard.labels[r] == 1 else "-1"
            cols = " ".join(
                f"{j + 1}:{format(v, '.17g')}"
                for j, v in enumerate(shard.features[r])
                if v != 0.0
            )
            fh.write(f"{label} {cols}".strip() + "\n")


_IDX_IMAGE_MAGIC = 0x00000803
_IDX_LABEL_MAGIC = 0x00000801


def parse_idx(images_path, labels_path, max_samples: int | None = None) -> Shard:
    """IDX image/label pair to a shard with pixels scaled to [0, 1]."""
    try:
        img_bytes = Path(images_path).read_bytes()
        lab_bytes = Path(labels_path).read_bytes()
    except OSError as exc:
        raise IngestError(f"cannot read idx files: {exc}") from exc
    if len(img_bytes) < 16 or len(lab_bytes) < 8:
        raise IngestError("idx file too short for its header")
    magic, count, rows, cols = struct.unpack(">IIII", img_bytes[:16])
    if magic != _IDX_IMAGE_MAGIC:
        raise IngestError(
            f"{images_path}: bad image magic 0x{magic:08x}"
        )
    lab_magic, lab_count = struct.unpack(">II", lab_bytes[:8])
    if lab_magic != _IDX_LABEL_MAGIC:
        raise IngestError(f"{labels_path}: bad label magic 0x{lab_magic:08x}")
    if count != lab_count:
        raise IngestError(
            f"image/label counts disagree: {count} images, {lab_count} labels"
        )
    if len(img_bytes) - 16 < count * rows * cols:
        raise IngestError(f"{images_path}: truncated image payload")
    if len(lab_bytes) - 8 < count:
        raise IngestError(f"{labels_path}: truncated label payload")
    take = count if max_samples is None else min(count, max_samples)
    pixels = np.frombuffer(
        img_bytes, dtype=np.uint8, count=take * rows * cols, offset=16
    )
    features = pixels.reshape(take, rows * cols).astype(np.float64) / 255.0
    labels = np.frombuffer(lab_bytes, dtype=np.uint8, count=take, offset=8)
    if labels.size and labels.max() > 9:
        raise IngestError(f"{labels_path}: label {int(labels.max())} > 9")
    return Shard(features, labels.astype(np.int64))


def write_idx(images_path, labels_path, shard: Shard, rows: int, cols: int) -> None:
    count = len(shard)
    pixels = np.clip(np.rint(shard.features * 255.0), 0, 255).astype(np.uint8)
    with open(images_path, "wb") as fh:
        fh.write(struct.pack(">IIII", _IDX_IMAGE_MAGIC, count, rows, cols))
        fh.write(pixels.tobytes())
    with open(labels_path, "wb") as fh:
        fh.write(struct.pack(">II", _IDX_LABEL_MAGIC, count))
        fh.write(shard.labels.astype(np.uint8).tobytes())


def split_into_shards(shard: Shard, n_agents: int, seed: int) -> list[Shard]:
    """Global pre-shuffle, then contiguous per-agent blocks."""
    if len(shard) < n_agents:
        raise ConfigError(
            f"{len(shard)} samples cannot cover {n_agents} agents"
        )
    rng = np.random.default_rng([seed, 5])
    order = rng.permutation(len(shard))
    blocks = np.array_split(order, n_agents)
    return [shard.subset(b) for b in blocks]


# ---------------------------------------------------------------------------
# experiment assembly


def make_base_graph(cfg: ExperimentConfig) -> Digraph:
    if cfg.base == "complete":
        return complete_digraph(cfg.agents)
    if cfg.base == "ring":
        return ring_digraph(cfg.agents)
    return random_base_digraph(cfg.agents, cfg.edge_prob, cfg.data_seed)


def make_oracle(cfg: ExperimentConfig, sample_seed: int):
    """Oracle for one replicate: pools from data_seed, sampling from sample_seed."""
    if cfg.kind == "quadratic":
        rng = np.random.default_rng([cfg.data_seed, 2])
        targets = rng.normal(size=(cfg.agents, cfg.dim))
        return QuadraticOracle(
            targets,
            sigma2=cfg.noise_sigma2,
            drift_step=cfg.drift_step,
            data_seed=cfg.data_seed,
            sample_seed=sample_seed,
        )
    drift = DriftSpec(
        label_flip_rate=cfg.label_flip_rate, rotate_rate=cfg.rotate_rate
    )
    if cfg.kind == "synthetic":
        shards = make_synthetic_binary_shards(
            cfg.agents,
            cfg.shard_size,
            cfg.dim,
            cfg.data_seed,
            cfg.separation,
            feature_scale=cfg.feature_scale if cfg.feature_scale > 0 else None,
        )
        kind = "binary"
    elif cfg.kind == "libsvm":
        pool = parse_libsvm(cfg.path, max_samples=cfg.max_samples)
        if len(pool) == 0:
            raise IngestError(f"{cfg.path}: no samples parsed")
        shards = split_into_shards(pool, cfg.agents, cfg.data_seed)
        kind = "binary"
    else:
        pool = parse_idx(cfg.path, cfg.labels_path, max_samples=cfg.max_samples)
        shards = split_into_shards(pool, cfg.agents, cfg.data_seed)
        kind = "softmax"
    batch = min(cfg.batch_size, min(len(s) for s in shards))
    return LogisticOracle(
        shards,
        batch_size=batch,
        reg=cfg.reg,
        kind=kind,
        drift=drift,
        data_seed=cfg.data_seed,
        sample_seed=sample_seed,
    )


def initial_states(cfg: ExperimentConfig, oracle, seed: int) -> np.ndarray:
    if cfg.x0 == "zeros":
        return np.zeros((oracle.n_agents, oracle.flat_dim))
    rng = np.random.default_rng([seed, _INIT_TAG])
    return rng.normal(size=(oracle.n_agents, oracle.flat_dim))


def _atomic_write(path: Path, data) -> None:
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name)
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _cell_name(method: str, beta: float, seed: int) -> str:
    return f"{method}_beta{format(beta, 'g')}_seed{seed}.csv"


def _run_cell(cfg: ExperimentConfig, method: str, beta: float, seed: int,
              track_arrays: tuple) -> tuple[str, str]:
    oracle = make_oracle(cfg, sample_seed=seed)
    track = OptimumTrack(optima=track_arrays[0], values=track_arrays[1])
    plan = TopologyPlan(
        base=make_base_graph(cfg), keep_prob=cfg.keep_prob, seed=seed
    )
    algo = AlgoConfig(
        alpha=cfg.alpha, beta=beta, method=method, momentum=cfg.momentum
    )
    result = run_horizon(
        algo,
        plan,
        oracle,
        cfg.T,
        x0=initial_states(cfg, oracle, seed),
        optimum_track=track,
        optimum_tol=cfg.optimum_tol,
        probe_seed=seed,
    )
    from .metrics import rows_to_csv

    name = _cell_name(method, beta, seed)
    payload = rows_to_csv(result.metrics)
    if cfg.export_graphs and method == "tv_hsgt":
        graphs = [p.graph for p in plan.pairs(cfg.T)]
        gname = f"graphs_{format(beta, 'g')}_seed{seed}.txt"
        gpath = Path(cfg.outdir) / gname
        save_graph_sequence(gpath, graphs)
    return name, payload


def summarize_cells(
    outdir: Path, method: str, beta: float, seeds, T: int
) -> str:
    """Seed-averaged curves for one (method, beta) pair."""
    acc = None
    for seed in seeds:
        data = np.genfromtxt(
            outdir / _cell_name(method, beta, seed), delimiter=",", skip_header=1
        )
        data = data.reshape(T, len(CSV_COLUMNS))
        acc = data if acc is None else acc + data
    mean = acc / len(seeds)
    lines = [",".join(CSV_COLUMNS)]
    for row in mean:
        cells = [str(int(row[0]))]
        cells.extend(format(v, ".17g") for v in row[1:])
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def certificate_report(cfg: ExperimentConfig, beta: float) -> str:
    """Measure the run topology, certify a step size, and render the report."""
    oracle = make_oracle(cfg, sample_seed=cfg.seeds[0])
    profile = oracle.profile()
    plan = TopologyPlan(
        base=make_base_graph(cfg), keep_prob=cfg.keep_prob, seed=cfg.seeds[0]
    )
    pairs = plan.pairs(cfg.T)
    seqs = plan.tables(cfg.T)
    stats = [graph_stats(p.graph) for p in pairs]
    params = measure_contraction(pairs, seqs, stats, L_g=profile.L_g)
    mu = profile.mu if profile.mu > 0 else None
    if mu is None:
        raise ConfigError(
            "certificate needs a strongly convex objective (mu > 0)"
        )
    cert = certify_step_size(
        params, cfg.agents, mu, profile.L_g, beta, static=oracle.static
    )
    if oracle.static:
        cert = attach_steady_state(cert, beta, profile.sigma2, cfg.agents)
    return render_certificate(cert, profile.sigma2)


def render_certificate(cert, sigma2: float) -> str:
    p = cert.params
    lines = [
        "stability certificate",
        f"  agents n            : {cert.n}",
        f"  mu / L_g            : {cert.mu:.6g} / {cert.L_g:.6g}",
        f"  beta / zeta0        : {cert.beta:.6g} / {cert.zeta0:.6g}",
        f"  static mode         : {cert.static}",
        "",
        "uniform network constants",
        f"  c (row contraction) : {p.c:.12g}",
        f"  tau (col contraction): {p.tau:.12g}",
        f"  eta (min phi.pi)    : {p.eta:.12g}",
        f"  psi / kappa / varphi: {p.psi:.6g} / {p.kappa:.6g} / {p.varphi:.6g}",
        f"  gamma               : {p.gamma:.6g}",
        f"  a_min / b_min       : {p.a_min:.6g} / {p.b_min:.6g}",
        "",
        "per-round audit ranges",
        f"  c_t in [{p.per_round['c_t'].min():.6g}, {p.per_round['c_t'].max():.6g}]",
        f"  tau_t in [{p.per_round['tau_t'].min():.6g}, {p.per_round['tau_t'].max():.6g}]",
        f"  per-round zeta_t max {p.zeta:.6g}, nu_t max {p.nu:.6g}",
        "  note: the transition matrix uses the uniform constants with the",
        "  loose (1+c)^2 envelope; the per-round values above are tighter",
        "  and kept for audit only.",
        "",
        "transition-matrix constants",
    ]
    for key in sorted(cert.m_consts, key=lambda k: (len(k), k)):
        if key == "zeta0":
            continue
        lines.append(f"  {key:<4s}= {cert.m_consts[key]:.12g}")
    b1, b2, b3, gd = cert.bounds
    lines.extend(
        [
            "",
            "step-size bounds",
            f"  B1 = {b1:.12g}",
            f"  B2 = {b2:.12g}",
            f"  B3 = {b3:.12g}",
            f"  gradient-step bound = {gd:.12g}",
            f"  certified alpha (0.9 safety) = {cert.alpha:.12g}",
            "",
            "verification",
            f"  delta = {np.array2string(cert.delta, precision=8)}",
            f"  M(alpha) delta < delta : True",
            f"  rho(M(alpha)) = {cert.rho:.12g}",
        ]
    )
    if cert.steady_state is not None:
        lines.extend(
            [
                "",
                f"static-case limiting bound (sigma2 = {sigma2:.6g})",
                f"  (I - M)^-1 b = {np.array2string(cert.steady_state, precision=8)}",
            ]
        )
    return "\n".join(lines) + "\n"


def monitor_report_text(cfg: ExperimentConfig, beta: float) -> str:
    """Run seed replicas on one topology realization and check the monitors."""
    oracle0 = make_oracle(cfg, sample_seed=0)
    profile = oracle0.profile()
    plan = TopologyPlan(
        base=make_base_graph(cfg), keep_prob=cfg.keep_prob, seed=cfg.data_seed
    )
    pairs = plan.pairs(cfg.T)
    seqs = plan.tables(cfg.T)
    stats = [graph_stats(p.graph) for p in pairs]
    params = measure_contraction(pairs, seqs, stats, L_g=profile.L_g)
    track = compute_optimum_track(oracle0, cfg.T, tol=cfg.optimum_tol)
    results = []
    for rep in range(cfg.monitor_replicas):
        oracle = make_oracle(cfg, sample_seed=1000 + rep)
        algo = AlgoConfig(alpha=cfg.alpha, beta=beta, method="tv_hsgt",
                          momentum=cfg.momentum)
        results.append(
            run_horizon(
                algo,
                plan,
                oracle,
                cfg.T,
                x0=initial_states(cfg, oracle, cfg.data_seed),
                optimum_track=track,
                optimum_tol=cfg.optimum_tol,
                collect_trace=True,
                probe_seed=cfg.data_seed,
            )
        )
    trace = MonitorTrace.from_results(results)
    report = lemma_monitors(
        trace,
        params,
        alpha=cfg.alpha,
        beta=beta,
        mu=max(profile.mu, 1e-300),
        L_g=profile.L_g,
        sigma2=profile.sigma2,
        n=cfg.agents,
        slack=cfg.monitor_slack,
        min_replicas=min(cfg.monitor_replicas, 20),
    )
    return report.summary() + "\n"


def run_experiment(cfg: ExperimentConfig) -> Path:
    """Execute every (method, beta, seed) cell and write the artifact directory."""
    cfg.validate()
    outdir = Path(cfg.outdir)
    outdir.mkdir(parents=True, exist_ok=True)

    reference = make_oracle(cfg, sample_seed=cfg.seeds[0])
    track = compute_optimum_track(reference, cfg.T, tol=cfg.optimum_tol)
    track_arrays = (track.optima, track.values)

    cells = [
        (method, beta, seed)
        for method in cfg.methods
        for beta in cfg.betas
        for seed in cfg.seeds
    ]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            futures = [
                pool.submit(_run_cell, cfg, m, b, s, track_arrays)
                for m, b, s in cells
            ]
            outputs = [f.result() for f in futures]
    else:
        outputs = [_run_cell(cfg, m, b, s, track_arrays) for m, b, s in cells]
    for name, payload in outputs:
        _atomic_write(outdir / name, payload)

    for method in cfg.methods:
        for beta in cfg.betas:
            summary = summarize_cells(outdir, method, beta, cfg.seeds, cfg.T)
            _atomic_write(
                outdir / f"summary_{method}_beta{format(beta, 'g')}.csv", summary
            )

    if cfg.certificate:
        for beta in cfg.betas:
            text = certificate_report(cfg, beta)
            _atomic_write(
                outdir / f"certificate_beta{format(beta, 'g')}.txt", text
            )
    if cfg.monitor:
        for beta in cfg.betas:
            text = monitor_report_text(cfg, beta)
            _atomic_write(outdir / f"monitor_beta{format(beta, 'g')}.txt", text)
    if cfg.svg:
        for method in cfg.methods:
            for beta in cfg.betas:
                _write_svgs(outdir, method, beta, cfg.T)

    manifest = build_manifest(cfg, outdir)
    _atomic_write(outdir / "manifest.json", manifest)
    return outdir


def build_manifest(cfg: ExperimentConfig, outdir: Path) -> str:
    config_text = cfg.to_text()
    entries = {}
    for path in sorted(outdir.iterdir()):
        if path.name == "manifest.json" or not path.is_file():
            continue
        entries[path.name] = hashlib.sha256(path.read_bytes()).hexdigest()
    doc = {
        "config_sha256": hashlib.sha256(config_text.encode()).hexdigest(),
        "config_text": config_text,
        "package_version": __version__,
        "numpy_version": np.__version__,
        "seeds": list(cfg.seeds),
        "outputs": entries,
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def replay(manifest_path) -> list[str]:
    """Re-run a manifest's config in a scratch directory and diff the hashes.

    Returns the list of files whose bytes differ (empty means reproduced).
    """
    try:
        doc = json.loads(Path(manifest_path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot load manifest {manifest_path}: {exc}") from exc
    cfg = ExperimentConfig.from_text(doc["config_text"])
    with tempfile.TemporaryDirectory() as tmp:
        cfg.outdir = tmp
        run_experiment(cfg)
        mismatches = []
        for name, digest in doc["outputs"].items():
            path = Path(tmp) / name
            if not path.exists():
                mismatches.append(name)
                continue
            if hashlib.sha256(path.read_bytes()).hexdigest() != digest:
                mismatches.append(name)
    return mismatches


# ---------------------------------------------------------------------------
# plot-ready SVG emission


_SVG_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


def svg_line_chart(series: dict, title: str, width=640, height=400) -> str:
    """Self-contained SVG line chart; series maps label -> y array."""
    pad = 50
    xs_max = max(len(y) for y in series.values()) - 1
    ys_all = np.concatenate([np.asarray(y, dtype=float) for y in series.values()])
    ys_all = ys_all[np.isfinite(ys_all)]
    lo = float(ys_all.min()) if ys_all.size else 0.0
    hi = float(ys_all.max()) if ys_all.size else 1.0
    if hi == lo:
        hi = lo + 1.0
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2}" y="20" text-anchor="middle" '
        f'font-family="sans-serif" font-size="14">{title}</text>',
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" '
        f'y2="{height - pad}" stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" '
        f'stroke="black"/>',
        f'<text x="{pad}" y="{height - pad + 16}" font-family="sans-serif" '
        f'font-size="10">0</text>',
        f'<text x="{width - pad}" y="{height - pad + 16}" text-anchor="end" '
        f'font-family="sans-serif" font-size="10">{xs_max}</text>',
        f'<text x="{pad - 4}" y="{height - pad}" text-anchor="end" '
        f'font-family="sans-serif" font-size="10">{lo:.3g}</text>',
        f'<text x="{pad - 4}" y="{pad + 4}" text-anchor="end" '
        f'font-family="sans-serif" font-size="10">{hi:.3g}</text>',
    ]
    for k, (label, y) in enumerate(series.items()):
        y = np.asarray(y, dtype=float)
        color = _SVG_COLORS[k % len(_SVG_COLORS)]
        pts = []
        for i, v in enumerate(y):
            if not np.isfinite(v):
                continue
            px = pad + (width - 2 * pad) * (i / max(xs_max, 1))
            py = height - pad - (height - 2 * pad) * ((v - lo) / (hi - lo))
            pts.append(f"{px:.2f},{py:.2f}")
        parts.append(
            f'<polyline points="{" ".join(pts)}" fill="none" '
            f'stroke="{color}" stroke-width="1.5"/>'
        )
        parts.append(
            f'<text x="{width - pad + 4}" y="{pad + 14 * k}" '
            f'font-family="sans-serif" font-size="10" fill="{color}">{label}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _write_svgs(outdir: Path, method: str, beta: float, T: int) -> None:
    summary = np.genfromtxt(
        outdir / f"summary_{method}_beta{format(beta, 'g')}.csv",
        delimiter=",",
        skip_header=1,
    ).reshape(T, len(CSV_COLUMNS))
    for col, name in enumerate(CSV_COLUMNS):
        if name == "t":
            continue
        chart = svg_line_chart(
            {name: summary[:, col]},
            f"{method} beta={format(beta, 'g')}: {name}",
        )
        _atomic_write(
            outdir / f"{method}_beta{format(beta, 'g')}_{name}.svg", chart
        )
