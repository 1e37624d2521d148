"""Experiment harness: config ingestion, seeded sampling, runs, sweeps, persistence.

One master seed fans out into named, order-independent substreams (instance,
warmup, per-agent policy) so results are reproducible and adding an algorithm
never perturbs instance sampling.
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .agents import GreedyAgent, PpoAgent, PpoConfig, RandomAgent, TinyMadrlAgent
from .env import EnvConfig, PricingEnv, theoretical_baseline
from .game import (
    ChannelLink,
    GameInstance,
    RsuProfile,
    SsimTriple,
    UavProfile,
    solve_equilibrium,
    verify_equilibrium,
)
from .tinynet import PruneSchedule

SCHEMA_VERSION = 1

ALGORITHMS = ("tiny_madrl", "ppo", "greedy", "random")

# Default simulation parameter ranges (dB quantities stay in the dB domain).
DEFAULT_RANGES = {
    "noise_dbm": (-116.0, -112.0),
    "channel_gain_db": (-25.0, -22.0),
    "transmit_power_dbm": (20.0, 25.0),
    "similarity": (0.0, 1.0),
    "ssim_threshold": (0.5, 0.55),
    "delta": (10.0, 20.0),
    "budget": (1.0, 10.0),
    "bandwidth_cost": (1.0, 4.0),
    "price_cap": (5.0, 35.0),
}

CSV_COLUMNS = ["run_id", "seed", "episode", "agent_id", "reward", "avg_reward",
               "sparsity", "theoretical", "wall_ms"]


class ConfigError(ValueError):
    pass


def named_rng(master_seed: int, name: str) -> np.random.Generator:
    """Independent stream keyed by (seed, name); insensitive to creation order."""
    tag = int.from_bytes(hashlib.sha256(name.encode()).digest()[:8], "big")
    return np.random.default_rng(np.random.SeedSequence((master_seed, tag)))


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    num_uavs: int = 3
    num_rsus: int = 2
    ranges: dict = field(default_factory=lambda: dict(DEFAULT_RANGES))
    env: EnvConfig = field(default_factory=EnvConfig)
    ppo: PpoConfig = field(default_factory=PpoConfig)
    schedule: PruneSchedule = field(
        default_factory=lambda: PruneSchedule(0.0, 0.5, 150, 30, 5))
    floor_neurons: int = 4
    prune_critic: bool = False
    greedy_levels: int = 16
    greedy_epsilon: float = 0.1
    episodes: int = 300
    seeds: list[int] = field(default_factory=lambda: [0])
    out: str = "results"
    strict: bool = False
    verify_probes: int = 200

    def validate(self):
        for key, (lo, hi) in self.ranges.items():
            if key not in DEFAULT_RANGES:
                raise ConfigError(f"unknown parameter range {key!r}")
            if lo > hi:
                raise ConfigError(f"empty range for {key!r}: [{lo}, {hi}]")
        if self.ranges["bandwidth_cost"][1] > self.ranges["price_cap"][0]:
            raise ConfigError(
                "bandwidth_cost range upper bound exceeds price_cap lower bound; "
                "sampled boxes could be empty")
        if self.num_uavs < 1 or self.num_rsus < 1:
            raise ConfigError("need at least one UAV and one RSU")
        if self.episodes < 1:
            raise ConfigError("episodes must be >= 1")
        if not self.seeds:
            raise ConfigError("seeds list is empty")
        return self


def _take(d: dict, cls, **renames):
    import dataclasses
    fields = {f.name for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, val in d.items():
        key = renames.get(key, key)
        if key not in fields:
            raise ConfigError(f"unknown {cls.__name__} option {key!r}")
        kwargs[key] = tuple(val) if isinstance(val, list) else val
    return cls(**kwargs)


def config_from_dict(doc: dict) -> ExperimentConfig:
    doc = dict(doc)
    version = doc.pop("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version}")
    cfg = ExperimentConfig()
    inst = doc.pop("instance", {})
    cfg.num_uavs = int(inst.get("I", cfg.num_uavs))
    cfg.num_rsus = int(inst.get("J", cfg.num_rsus))
    for key, rng_pair in inst.get("ranges", {}).items():
        cfg.ranges[key] = (float(rng_pair[0]), float(rng_pair[1]))
    if "env" in doc:
        cfg.env = _take(doc.pop("env"), EnvConfig)
    if "ppo" in doc:
        cfg.ppo = _take(doc.pop("ppo"), PpoConfig)
    if "schedule" in doc:
        cfg.schedule = _take(doc.pop("schedule"), PruneSchedule)
    for key in ("floor_neurons", "prune_critic", "greedy_levels", "greedy_epsilon",
                "episodes", "out", "strict", "verify_probes"):
        if key in doc:
            setattr(cfg, key, doc.pop(key))
    if "seeds" in doc:
        cfg.seeds = [int(s) for s in doc.pop("seeds")]
    if doc:
        raise ConfigError(f"unknown config keys: {sorted(doc)}")
    return cfg.validate()


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        doc = yaml.safe_load(fh)
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: config must be a mapping")
    try:
        return config_from_dict(doc)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def config_hash(cfg: ExperimentConfig) -> str:
    """Stable digest of the canonical config serialization."""
    def canon(obj):
        if hasattr(obj, "__dataclass_fields__"):
            import dataclasses
            return {f.name: canon(getattr(obj, f.name))
                    for f in dataclasses.fields(obj)}
        if isinstance(obj, dict):
            return {str(k): canon(v) for k, v in sorted(obj.items())}
        if isinstance(obj, (list, tuple)):
            return [canon(v) for v in obj]
        return obj
    blob = json.dumps(canon(cfg), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


# ---------------------------------------------------------------------------
# Instance sampling
# ---------------------------------------------------------------------------

def sample_instance(ranges: dict, num_uavs: int, num_rsus: int,
                    seed: int | np.random.Generator) -> GameInstance:
    """Uniform per-entity draws from the parameter ranges; deterministic per seed."""
    full = dict(DEFAULT_RANGES)
    full.update(ranges)
    if full["bandwidth_cost"][1] > full["price_cap"][0]:
        raise ConfigError("bandwidth_cost range may exceed price_cap range")
    rng = (seed if isinstance(seed, np.random.Generator)
           else np.random.default_rng(seed))
    # One substream per entity index, so seller j (and buyer i) keeps the same
    # parameters whatever the market size; sweeps over I or J stay paired.
    rsu_parent, uav_parent = rng.spawn(2)

    def draw(gen, key):
        lo, hi = full[key]
        return float(gen.uniform(lo, hi))

    rsus = []
    for gen in rsu_parent.spawn(num_rsus):
        link = ChannelLink(draw(gen, "transmit_power_dbm"),
                           draw(gen, "channel_gain_db"), draw(gen, "noise_dbm"))
        rsus.append(RsuProfile(draw(gen, "bandwidth_cost"),
                               draw(gen, "price_cap"), link))
    uavs = []
    for gen in uav_parent.spawn(num_uavs):
        delta = draw(gen, "delta")
        budget = draw(gen, "budget")
        threshold = draw(gen, "ssim_threshold")
        triples = [SsimTriple(draw(gen, "similarity"), draw(gen, "similarity"),
                              draw(gen, "similarity")) for _ in range(num_rsus)]
        uavs.append(UavProfile(delta, budget, threshold, triples))
    return GameInstance(uavs, rsus)


# ---------------------------------------------------------------------------
# Run records
# ---------------------------------------------------------------------------

@dataclass
class RunRecord:
    run_id: str
    config_hash: str
    seed: int
    algorithm: str
    episode_rewards: np.ndarray      # episodes x agents (empty for solve runs)
    sparsity: np.ndarray             # per-episode mean sparsity (may be empty)
    theoretical: float
    consistent: bool
    wall_ms: float

    @property
    def avg_rewards(self) -> np.ndarray:
        """Per-episode reward averaged across agents."""
        if self.episode_rewards.size == 0:
            return np.array([])
        return self.episode_rewards.mean(axis=1)

    def final_average(self, tail_fraction: float = 0.1) -> float:
        avg = self.avg_rewards
        if avg.size == 0:
            return self.theoretical
        k = max(1, int(round(tail_fraction * avg.size)))
        return float(avg[-k:].mean())


def _build_agents(cfg: ExperimentConfig, env: PricingEnv, algorithm: str,
                  seed: int):
    agents = []
    for j in range(env.num_agents):
        low = np.full(env.num_uavs, env.instance.rsus[j].bandwidth_cost)
        high = np.full(env.num_uavs, env.instance.rsus[j].price_cap)
        rng = named_rng(seed, f"init:{j}")
        if algorithm == "ppo":
            agents.append(PpoAgent(env.observation_dim, low, high, cfg.ppo, rng))
        elif algorithm == "tiny_madrl":
            agents.append(TinyMadrlAgent(env.observation_dim, low, high,
                                         cfg.schedule, cfg.ppo, rng,
                                         cfg.floor_neurons, cfg.prune_critic))
        elif algorithm == "greedy":
            agents.append(GreedyAgent(low, high, cfg.greedy_levels,
                                      cfg.greedy_epsilon))
        elif algorithm == "random":
            agents.append(RandomAgent(low, high))
        else:
            raise ConfigError(f"unknown algorithm {algorithm!r}")
    return agents


def run_training(cfg: ExperimentConfig, algorithm: str, seed: int,
                 instance: GameInstance | None = None) -> RunRecord:
    """Train one agent per seller for the configured number of episodes."""
    start = time.perf_counter()
    if instance is None:
        instance = sample_instance(cfg.ranges, cfg.num_uavs, cfg.num_rsus,
                                   named_rng(seed, "instance"))
    env = PricingEnv(instance, cfg.env)
    baseline, consistent = theoretical_baseline(instance)
    agents = _build_agents(cfg, env, algorithm, seed)
    policy_rngs = [named_rng(seed, f"policy:{j}") for j in range(env.num_agents)]
    warmup_rng = named_rng(seed, "warmup")
    costs = instance.costs()

    episode_rewards = np.zeros((cfg.episodes, env.num_agents))
    sparsity = np.zeros(cfg.episodes)
    learned = algorithm in ("ppo", "tiny_madrl")

    for episode in range(cfg.episodes):
        if learned:
            frac = episode / max(cfg.episodes - 1, 1)
            for agent in agents:
                agent.set_progress(frac)
        obs = env.reset(warmup_rng)
        ep_rewards = np.zeros(env.num_agents)
        for _ in range(cfg.env.episode_length):
            actions, acts_meta = [], []
            for j, agent in enumerate(agents):
                if learned:
                    prices, u, logp, value = agent.act(obs[j], policy_rngs[j])
                    acts_meta.append((u, logp, value))
                else:
                    prices = agent.act(obs[j], policy_rngs[j])
                actions.append(prices)
            out = env.step(actions)
            if not np.all(np.isfinite(out.rewards)):
                raise RuntimeError(
                    f"non-finite reward in episode {episode} ({algorithm})")
            for j, agent in enumerate(agents):
                if learned:
                    u, logp, value = acts_meta[j]
                    agent.record(obs[j], u, logp, out.rewards[j], value, out.done)
                elif algorithm == "greedy":
                    margins = (actions[j] - costs[j]) * out.demands.demands[:, j]
                    agent.update(margins)
            ep_rewards += out.rewards
            obs = out.next_observations
        episode_rewards[episode] = ep_rewards / cfg.env.episode_length
        for agent in agents:
            if algorithm == "tiny_madrl":
                agent.tiny_madrl_step(episode)
            elif algorithm == "ppo":
                agent.ppo_update()
        if algorithm == "tiny_madrl":
            sparsity[episode] = float(np.mean(
                [a.current_sparsity() for a in agents]))

    wall_ms = (time.perf_counter() - start) * 1000.0
    run_id = f"{algorithm}-{config_hash(cfg)}-{seed}"
    return RunRecord(run_id, config_hash(cfg), seed, algorithm, episode_rewards,
                     sparsity if algorithm == "tiny_madrl" else np.array([]),
                     baseline, consistent, wall_ms)


def run_solve(cfg: ExperimentConfig, seed: int,
              instance: GameInstance | None = None) -> RunRecord:
    """Solve and verify the analytic equilibrium for one sampled instance."""
    start = time.perf_counter()
    if instance is None:
        instance = sample_instance(cfg.ranges, cfg.num_uavs, cfg.num_rsus,
                                   named_rng(seed, "instance"))
    sol = solve_equilibrium(instance)
    consistent = sol.consistent
    if consistent and cfg.verify_probes > 0:
        report = verify_equilibrium(instance, sol, cfg.verify_probes,
                                    rng_seed=seed)
        consistent = consistent and report.passed
    if cfg.strict and not consistent:
        raise RuntimeError(f"equilibrium verification failed for seed {seed}")
    wall_ms = (time.perf_counter() - start) * 1000.0
    theoretical = float(np.mean(sol.rsu_utilities))
    run_id = f"solve-{config_hash(cfg)}-{seed}"
    return RunRecord(run_id, config_hash(cfg), seed, "solve", np.zeros((0, 0)),
                     np.array([]), theoretical, consistent, wall_ms)


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

@dataclass
class SweepSpec:
    parameter: str                  # one of: c, p_bar, I, J
    grid: list
    seeds: list[int]
    train_algorithms: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.parameter not in ("c", "p_bar", "I", "J"):
            raise ConfigError(f"unknown sweep parameter {self.parameter!r}")
        if any(b <= a for a, b in zip(self.grid, self.grid[1:])):
            raise ConfigError("sweep grid must be strictly increasing")


def _apply_sweep_value(cfg: ExperimentConfig, parameter: str, value):
    import copy
    cfg = copy.deepcopy(cfg)
    if parameter == "c":
        # one scalar cost for every seller
        cfg.ranges["bandwidth_cost"] = (float(value), float(value))
    elif parameter == "p_bar":
        cfg.ranges["price_cap"] = (float(value), float(value))
    elif parameter == "I":
        cfg.num_uavs = int(value)
    elif parameter == "J":
        cfg.num_rsus = int(value)
    return cfg


def run_sweep(cfg: ExperimentConfig, spec: SweepSpec):
    """Analytic (and optionally trained) runs over a parameter grid.

    Returns (records, aggregate) where aggregate maps grid value to the
    mean/sd of the equilibrium average reward across seeds.
    """
    records = []
    aggregate = {}
    for value in spec.grid:
        sub = _apply_sweep_value(cfg, spec.parameter, value)
        cell = []
        for seed in spec.seeds:
            rec = run_solve(sub, seed)
            records.append(rec)
            cell.append(rec.theoretical)
            for algo in spec.train_algorithms:
                records.append(run_training(sub, algo, seed))
        aggregate[value] = (float(np.mean(cell)), float(np.std(cell)))
    return records, aggregate


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

def record_rows(record: RunRecord) -> list[dict]:
    """Flatten a run into CSV rows (fixed column order)."""
    rows = []
    if record.episode_rewards.size == 0:
        rows.append({
            "run_id": record.run_id, "seed": record.seed, "episode": 0,
            "agent_id": "", "reward": repr(record.theoretical),
            "avg_reward": repr(record.theoretical), "sparsity": "",
            "theoretical": repr(record.theoretical),
            "wall_ms": repr(record.wall_ms),
        })
        return rows
    avg = record.avg_rewards
    for episode in range(record.episode_rewards.shape[0]):
        spars = (repr(float(record.sparsity[episode]))
                 if record.sparsity.size else "")
        for agent in range(record.episode_rewards.shape[1]):
            rows.append({
                "run_id": record.run_id, "seed": record.seed, "episode": episode,
                "agent_id": agent,
                "reward": repr(float(record.episode_rewards[episode, agent])),
                "avg_reward": repr(float(avg[episode])),
                "sparsity": spars,
                "theoretical": repr(record.theoretical),
                "wall_ms": repr(record.wall_ms),
            })
    return rows


def emit_results(records: list[RunRecord], out_dir, fmt: str = "csv",
                 name: str = "results") -> Path:
    """Write records as CSV or JSONL; re-emission is byte-identical."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = [row for rec in sorted(records, key=lambda r: (r.run_id, r.seed))
            for row in record_rows(rec)]
    if fmt == "csv":
        path = out_dir / f"{name}.csv"
        try:
            with open(path, "w", newline="") as fh:
                writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
                writer.writeheader()
                writer.writerows(rows)
        except OSError as exc:
            raise OSError(f"cannot write results to {path}: {exc}") from exc
    elif fmt == "jsonl":
        path = out_dir / f"{name}.jsonl"
        try:
            with open(path, "w") as fh:
                for row in rows:
                    fh.write(json.dumps(row, sort_keys=True) + "\n")
        except OSError as exc:
            raise OSError(f"cannot write results to {path}: {exc}") from exc
    else:
        raise ValueError(f"unknown format {fmt!r}")
    return path


def parse_results_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_summary(records: list[RunRecord], out_dir) -> Path:
    """summary.json: final average reward and percent-of-theoretical per algorithm."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    by_algo: dict[str, list[RunRecord]] = {}
    for rec in records:
        by_algo.setdefault(rec.algorithm, []).append(rec)
    summary = {}
    for algo, recs in sorted(by_algo.items()):
        finals = [r.final_average() for r in recs]
        theos = [r.theoretical for r in recs]
        mean_final = float(np.mean(finals))
        mean_theo = float(np.mean(theos))
        summary[algo] = {
            "final_average_reward": mean_final,
            "theoretical": mean_theo,
            "percent_of_theoretical": (100.0 * mean_final / mean_theo
                                       if mean_theo > 0 else None),
            "num_runs": len(recs),
        }
    path = out_dir / "summary.json"
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path
