"""Experiment orchestration: config parsing, seeded runs, CSV and plots.

A run config is flat ``section.key = value`` text. Every run is fully
determined by (config, seed): datasets, partitions, and oracle draws all
derive from seeded generators, so repeated runs emit byte-identical CSV.
"""

from __future__ import annotations

import dataclasses
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .algorithms import (
    ALGORITHMS,
    BIASED_DMT,
    DSGD,
    DSGDM,
    GT_DSGD,
    AlgoConfig,
    init_state,
    parameter_guard,
    stepper,
)
from .data import (
    LABEL_SORTED,
    PARTITION_MODES,
    build_objectives,
    parse_libsvm,
    partition,
    synthetic_blobs,
)
from .errors import ConfigurationError
from .metrics import IterationRecord, ensure_finite, record, running_average_grad_norm
from .objective import estimate_smoothness
from .oracle import (
    AbsoluteGaussianMean,
    AdditiveGaussian,
    Exact,
    MiniBatch,
    NoBias,
    OracleSpec,
    RelativeScale,
    TopK,
    bias_bounds,
    check_spec,
    mean_shift,
)
from .topology import SCHEMES, TOPOLOGIES, UNIFORM_NEIGHBOR, build_mixing_matrix, parse_edge_list

CSV_HEADER = "t,loss,grad_norm_sq,consensus_err,tracking_err,avg_mom_err,mom_est_err,heterogeneity"

SCHEDULE_FIXED = "fixed"
SCHEDULE_COROLLARY_ONE = "corollary_one"
SCHEDULES = (SCHEDULE_FIXED, SCHEDULE_COROLLARY_ONE)

NOISE_NAMES = ("none", "minibatch", "gaussian")
BIAS_NAMES = ("none", "absolute", "relative", "topk")

# fixed probe settings so the smoothness estimate never depends on run seeds
_L_PROBES = 16
_L_RADIUS = 1.0
_L_SEED = 0xA11CE

_FLOOR_FRACTION = 0.1


@dataclass
class DatasetConfig:
    kind: str  # "synthetic" | "libsvm"
    path: str | None = None
    m: int = 0
    d: int = 0
    seed: int = 0
    separation: float = 4.0
    scale: float = 1.0


@dataclass
class OracleConfig:
    batch_size: int = 1
    noise: str = "none"
    sigma: float = 0.0
    bias: str = "none"
    mu_norm: float = 0.0
    sigma_e: float = 0.0
    delta: float = 0.0
    k: int = 0

    def materialize(self, dim: int) -> OracleSpec:
        if self.noise == "minibatch":
            noise = MiniBatch()
        elif self.noise == "gaussian":
            noise = AdditiveGaussian(self.sigma)
        else:
            noise = Exact()
        if self.bias == "absolute":
            bias = AbsoluteGaussianMean(mean_shift(self.mu_norm, dim), self.sigma_e)
        elif self.bias == "relative":
            bias = RelativeScale(self.delta)
        elif self.bias == "topk":
            bias = TopK(self.k)
        else:
            bias = NoBias()
        return OracleSpec(batch_size=self.batch_size, noise=noise, bias=bias)


@dataclass
class RunConfig:
    dataset: DatasetConfig
    n_agents: int
    algo: AlgoConfig
    iterations: int
    seeds: tuple[int, ...]
    alpha: float = 0.01
    topology: str = "ring"
    scheme: str = UNIFORM_NEIGHBOR
    edge_list: str | None = None
    partition_mode: str = LABEL_SORTED
    oracle_cfg: OracleConfig = field(default_factory=OracleConfig)
    eval_every: int = 1
    schedule: str = SCHEDULE_FIXED


@dataclass
class SeedRun:
    seed: int
    records: list[IterationRecord]
    summary: dict


@dataclass
class RunResult:
    config: RunConfig
    spectral_gap: float
    seed_runs: list[SeedRun]
    aggregate: dict


# --- config text ----------------------------------------------------------


def _get(table: dict, key: str, convert, default=...):
    if key not in table:
        if default is ...:
            raise ConfigurationError("missing required setting", field=key)
        return default
    raw = table.pop(key)
    try:
        return convert(raw)
    except (TypeError, ValueError):
        raise ConfigurationError(f"cannot read value {raw!r}", field=key) from None


def _choice(options):
    def convert(raw):
        if raw not in options:
            raise ValueError(raw)
        return raw

    return convert


def _seed_list(raw: str) -> tuple[int, ...]:
    values = tuple(int(tok) for tok in raw.replace(",", " ").split())
    if not values:
        raise ValueError(raw)
    return values


def parse_config(text: str) -> RunConfig:
    """Parse flat ``section.key = value`` text into a validated RunConfig."""
    table: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigurationError(
                f"expected 'key = value' on line {lineno}, got {line!r}"
            )
        table[key.strip()] = value.strip()

    kind = _get(table, "dataset.kind", _choice(("synthetic", "libsvm")))
    if kind == "libsvm":
        dataset = DatasetConfig(kind=kind, path=_get(table, "dataset.path", str))
    else:
        dataset = DatasetConfig(
            kind=kind,
            m=_get(table, "dataset.m", int),
            d=_get(table, "dataset.d", int),
            seed=_get(table, "dataset.seed", int, 0),
            separation=_get(table, "dataset.separation", float, 4.0),
            scale=_get(table, "dataset.scale", float, 1.0),
        )
        if dataset.m < 1 or dataset.d < 1:
            raise ConfigurationError("synthetic dataset needs m >= 1 and d >= 1", field="dataset.m")

    algo_name = _get(table, "algorithm.name", _choice(ALGORITHMS))
    default_momentum = 1.0 if algo_name == BIASED_DMT else 0.0
    algo = AlgoConfig(
        algorithm=algo_name,
        step_size=_get(table, "algorithm.step_size", float),
        momentum=_get(table, "algorithm.momentum", float, default_momentum),
    )

    oracle_cfg = OracleConfig(
        batch_size=_get(table, "oracle.batch_size", int, 1),
        noise=_get(table, "oracle.noise", _choice(NOISE_NAMES), "none"),
        sigma=_get(table, "oracle.noise.sigma", float, 0.0),
        bias=_get(table, "oracle.bias", _choice(BIAS_NAMES), "none"),
        mu_norm=_get(table, "oracle.bias.mu_norm", float, 0.0),
        sigma_e=_get(table, "oracle.bias.sigma_e", float, 0.0),
        delta=_get(table, "oracle.bias.delta", float, 0.0),
        k=_get(table, "oracle.bias.k", int, 0),
    )

    cfg = RunConfig(
        dataset=dataset,
        alpha=_get(table, "objective.alpha", float, 0.01),
        n_agents=_get(table, "network.n_agents", int),
        topology=_get(table, "network.topology", _choice(TOPOLOGIES), "ring"),
        scheme=_get(table, "network.scheme", _choice(SCHEMES), UNIFORM_NEIGHBOR),
        edge_list=_get(table, "network.edge_list", str, None),
        partition_mode=_get(table, "partition.mode", _choice(PARTITION_MODES), LABEL_SORTED),
        algo=algo,
        oracle_cfg=oracle_cfg,
        iterations=_get(table, "run.iterations", int),
        seeds=_get(table, "run.seeds", _seed_list),
        eval_every=_get(table, "run.eval_every", int, 1),
        schedule=_get(table, "run.schedule", _choice(SCHEDULES), SCHEDULE_FIXED),
    )
    if table:
        raise ConfigurationError("unknown setting", field=sorted(table)[0])
    validate_config(cfg)
    return cfg


def load_config(path: str) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def validate_config(cfg: RunConfig) -> None:
    if cfg.iterations < 1:
        raise ConfigurationError(f"need at least 1 iteration, got {cfg.iterations}", field="run.iterations")
    if not cfg.seeds:
        raise ConfigurationError("need at least one seed", field="run.seeds")
    if cfg.eval_every < 1:
        raise ConfigurationError(f"eval_every must be >= 1, got {cfg.eval_every}", field="run.eval_every")
    if cfg.n_agents < 1:
        raise ConfigurationError(f"need at least one agent, got {cfg.n_agents}", field="network.n_agents")
    if cfg.topology == "custom" and not cfg.edge_list:
        raise ConfigurationError("custom topology needs an edge-list file", field="network.edge_list")
    if cfg.alpha < 0:
        raise ConfigurationError(f"alpha must be >= 0, got {cfg.alpha}", field="objective.alpha")


# --- orchestration --------------------------------------------------------


def _load_samples(cfg: RunConfig):
    ds = cfg.dataset
    if ds.kind == "libsvm":
        with open(ds.path, encoding="utf-8") as fh:
            return parse_libsvm(fh)
    samples = synthetic_blobs(ds.m, ds.d, ds.seed, ds.separation, ds.scale)
    return samples, ds.d


def _build_mixing(cfg: RunConfig):
    adjacency = None
    if cfg.topology == "custom":
        with open(cfg.edge_list, encoding="utf-8") as fh:
            adjacency = parse_edge_list(fh.read(), n=cfg.n_agents)
    return build_mixing_matrix(cfg.topology, cfg.n_agents, cfg.scheme, adjacency)


def _floor(records: list[IterationRecord]) -> float:
    tail = max(1, int(len(records) * _FLOOR_FRACTION))
    return float(np.mean([r.grad_norm_sq for r in records[-tail:]]))


def run(cfg: RunConfig, seed_override: int | None = None) -> RunResult:
    """Execute one config over its seeds and summarize each trajectory.

    Records are taken at iterations 0, eval_every, 2*eval_every, ...
    strictly below the iteration budget, i.e. on the state *entering*
    each recorded round.
    """
    validate_config(cfg)
    samples, dim = _load_samples(cfg)
    mix = _build_mixing(cfg)
    spec = cfg.oracle_cfg.materialize(dim)
    relative_bias, _ = bias_bounds(spec, dim)

    seeds = cfg.seeds if seed_override is None else (seed_override,)
    seed_runs = []
    for seed in seeds:
        children = np.random.SeedSequence(seed).spawn(2)
        part_rng = np.random.default_rng(children[0])
        part = partition(samples, cfg.n_agents, cfg.partition_mode, part_rng)
        glob = build_objectives(samples, dim, part, cfg.alpha)
        smallest = min(glob.locals, key=lambda obj: obj.n_samples)
        check_spec(spec, smallest)

        lipschitz = estimate_smoothness(
            glob, _L_PROBES, _L_RADIUS, np.random.default_rng(_L_SEED)
        )
        algo = cfg.algo
        if cfg.schedule == SCHEDULE_COROLLARY_ONE:
            n, T = cfg.n_agents, cfg.iterations
            if T < 16.0 * n * n / mix.spectral_gap**2:
                warnings.warn(
                    f"iteration budget {T} is below the asymptotic-regime "
                    f"threshold {16.0 * n * n / mix.spectral_gap ** 2:.0f}",
                    stacklevel=2,
                )
            ratio = np.sqrt(n / T)
            algo = replace(algo, step_size=ratio / (16.0 * lipschitz), momentum=min(1.0, ratio))
        guard = parameter_guard(
            cfg.n_agents, mix.spectral_gap, algo.momentum, algo.step_size,
            lipschitz, relative_bias,
        )

        streams = [np.random.default_rng(s) for s in children[1].spawn(cfg.n_agents)]
        state = init_state(algo, glob, mix, spec, np.zeros(dim), streams)
        step = stepper(algo)
        records = []
        for t in range(cfg.iterations):
            if t % cfg.eval_every == 0:
                rec = record(state, glob)
                ensure_finite(rec)
                records.append(rec)
            state = step(state, algo, glob, mix, spec, streams)
        final = records[-1]
        summary = {
            "seed": seed,
            "step_size": algo.step_size,
            "momentum": algo.momentum,
            "lipschitz_estimate": lipschitz,
            "spectral_gap": mix.spectral_gap,
            "final_loss": final.loss,
            "final_grad_norm_sq": final.grad_norm_sq,
            "running_avg_grad_norm_sq": running_average_grad_norm(records),
            "floor_grad_norm_sq": _floor(records),
            "n_records": len(records),
            "guard": guard,
        }
        seed_runs.append(SeedRun(seed=seed, records=records, summary=summary))

    aggregate = _aggregate(seed_runs)
    return RunResult(config=cfg, spectral_gap=mix.spectral_gap, seed_runs=seed_runs, aggregate=aggregate)


def _aggregate(seed_runs: list[SeedRun]) -> dict:
    def stats(key):
        values = np.array([sr.summary[key] for sr in seed_runs], dtype=float)
        se = float(values.std(ddof=1) / np.sqrt(len(values))) if len(values) > 1 else 0.0
        return float(values.mean()), se

    out = {"n_seeds": len(seed_runs)}
    for key in ("final_loss", "final_grad_norm_sq", "floor_grad_norm_sq", "running_avg_grad_norm_sq"):
        mean, se = stats(key)
        out[f"mean_{key}"] = mean
        out[f"se_{key}"] = se
    return out


def grid_search(
    cfg: RunConfig, step_sizes: list[float], seed: int | None = None
) -> list[dict]:
    """Evaluate candidate step sizes on one seed; sorted best-first by loss."""
    if not step_sizes:
        raise ConfigurationError("grid needs at least one step size", field="grid")
    probe_seed = cfg.seeds[0] if seed is None else seed
    rows = []
    for eta in step_sizes:
        trial = replace(cfg, algo=replace(cfg.algo, step_size=eta))
        result = run(trial, seed_override=probe_seed)
        rows.append(
            {
                "step_size": eta,
                "final_loss": result.seed_runs[0].summary["final_loss"],
                "final_grad_norm_sq": result.seed_runs[0].summary["final_grad_norm_sq"],
            }
        )
    rows.sort(key=lambda r: r["final_loss"])
    return rows


# --- output files ---------------------------------------------------------


def emit_csv(records: list[IterationRecord], path: str) -> None:
    """Write records as CSV with 17-significant-digit decimal fields."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(CSV_HEADER + "\n")
        for r in records:
            fields = (
                r.loss,
                r.grad_norm_sq,
                r.consensus_err,
                r.tracking_err,
                r.avg_mom_err,
                r.mom_est_err,
                r.heterogeneity_at_mean,
            )
            fh.write(str(r.t) + "," + ",".join(f"{v:.17g}" for v in fields) + "\n")


def read_csv(path: str) -> list[IterationRecord]:
    """Parse a CSV written by ``emit_csv`` back into records."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header != CSV_HEADER:
            raise ConfigurationError(f"unexpected CSV header {header!r}")
        records = []
        for line in fh:
            parts = line.rstrip("\n").split(",")
            records.append(
                IterationRecord(
                    t=int(parts[0]),
                    loss=float(parts[1]),
                    grad_norm_sq=float(parts[2]),
                    consensus_err=float(parts[3]),
                    tracking_err=float(parts[4]),
                    avg_mom_err=float(parts[5]),
                    mom_est_err=float(parts[6]),
                    heterogeneity_at_mean=float(parts[7]),
                )
            )
    return records


def emit_plot_script(csv_paths: list[str], out_path: str) -> None:
    """Write a gnuplot script charting loss and gradient norm per CSV.

    The script is plain text and is never executed here; curves appear in
    the order the CSV paths were given.
    """
    if not csv_paths:
        raise ConfigurationError("need at least one CSV path", field="csv_paths")

    def clauses(column: int) -> str:
        parts = []
        for p in csv_paths:
            stem = p.rsplit("/", 1)[-1]
            title = stem[:-4] if stem.endswith(".csv") else stem
            parts.append(f"    '{p}' every ::1 using 1:{column} with lines title '{title}'")
        return ", \\\n".join(parts)

    script = "\n".join(
        [
            "# loss and squared gradient norm against iteration, one curve per file",
            "set datafile separator ','",
            "set logscale y",
            "set xlabel 't'",
            "set terminal pngcairo size 1000,640",
            "set output 'loss.png'",
            "set ylabel 'loss'",
            "plot \\",
            clauses(2),
            "set output 'grad_norm_sq.png'",
            "set ylabel 'grad_norm_sq'",
            "plot \\",
            clauses(3),
            "",
        ]
    )
    with open(out_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(script)


def config_as_dict(cfg: RunConfig) -> dict:
    return dataclasses.asdict(cfg)


# --- presets ---------------------------------------------------------------

# Step sizes picked with grid_search over {0.005, 0.01, 0.02, 0.05, 0.1, 0.2}
# (plus a momentum grid for the tracking method) on seed 1 of the comparison
# setup; every algorithm's final loss kept improving down to the grid edge.
COMPARISON_STEP_SIZES = {
    BIASED_DMT: 0.005,
    GT_DSGD: 0.005,
    DSGD: 0.005,
    DSGDM: 0.005,
}
COMPARISON_MOMENTUM = {BIASED_DMT: 0.05, DSGDM: 0.9}
SWEEP_BIAS_LEVELS = (0.0, 0.05, 0.1, 0.2)
# the sweep studies steady-state floors, so it runs a smaller momentum
# weight and step: the zero-bias noise floor must sit far below the
# smallest bias floor or the stair steps would blur together
SWEEP_STEP_SIZE = 0.02
SWEEP_MOMENTUM = 0.01


def _experiment_base() -> RunConfig:
    return RunConfig(
        dataset=DatasetConfig(kind="synthetic", m=2000, d=50, seed=7),
        alpha=0.01,
        n_agents=20,
        topology="ring",
        scheme=UNIFORM_NEIGHBOR,
        partition_mode=LABEL_SORTED,
        algo=AlgoConfig(algorithm=BIASED_DMT, step_size=0.005, momentum=0.05),
        oracle_cfg=OracleConfig(
            batch_size=64, noise="minibatch", bias="absolute", mu_norm=0.1, sigma_e=0.1
        ),
        iterations=3000,
        seeds=(1, 2, 3, 4, 5),
        eval_every=10,
    )


def preset_comparison() -> list[tuple[str, RunConfig]]:
    """Four-way algorithm comparison on the heterogeneous synthetic setup."""
    base = _experiment_base()
    configs = []
    for name in (BIASED_DMT, GT_DSGD, DSGD, DSGDM):
        algo = AlgoConfig(
            algorithm=name,
            step_size=COMPARISON_STEP_SIZES[name],
            momentum=COMPARISON_MOMENTUM.get(name, 1.0 if name == BIASED_DMT else 0.0),
        )
        configs.append((name, replace(base, algo=algo)))
    return configs


def preset_bias_sweep() -> list[tuple[str, RunConfig]]:
    """Momentum tracking only, across increasing absolute-bias levels."""
    base = _experiment_base()
    base = replace(
        base,
        algo=AlgoConfig(algorithm=BIASED_DMT, step_size=SWEEP_STEP_SIZE, momentum=SWEEP_MOMENTUM),
        oracle_cfg=replace(base.oracle_cfg, noise="none"),
    )
    configs = []
    for level in SWEEP_BIAS_LEVELS:
        ocfg = replace(base.oracle_cfg, mu_norm=level)
        configs.append((f"mu{level:g}", replace(base, oracle_cfg=ocfg)))
    return configs


PRESETS = {
    "paper-fig1": preset_comparison,
    "paper-fig2": preset_bias_sweep,
}


def preset_configs(name: str) -> list[tuple[str, RunConfig]]:
    if name not in PRESETS:
        raise ConfigurationError(f"unknown preset {name!r} (have {sorted(PRESETS)})", field="preset")
    return PRESETS[name]()
