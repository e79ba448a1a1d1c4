"""Experiment driver: scenario presets, evaluation, policy comparison, artifacts."""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from .baseline import MipPolicy, SolverConfig
from .env import Event, ScenarioConfig, WorldState, observe, quadrant_zones, reset, step
from .learner import QNetwork, TrainerConfig, load_network

POLICIES = ("dqn", "mip", "random")
EVAL_SEED_BASE = 1_000_000_000

HET_SHARES = (0.3, 0.4, 0.2, 0.1)
HET_REWARDS = ((12, 8), (8, 6), (5, 3), (3, 1))  # (max, min) per zone
MAX_FLEET = 5


class PresetError(KeyError):
    pass


class SeedMismatchError(ValueError):
    pass


def _scenario(grid: int, orders: int, fleet: int = 1, het: bool = False,
              obs_fleet: int | None = None) -> ScenarioConfig:
    zones = quadrant_zones(grid, HET_SHARES, HET_REWARDS) if het else None
    return ScenarioConfig(grid_size=grid, expected_orders=orders, fleet_size=fleet,
                          n_slots=5 if orders <= 5 else 15, zones=zones, obs_fleet=obs_fleet)


def _registry() -> dict[str, ScenarioConfig]:
    reg = {
        "hom-5x5-5": _scenario(5, 5),
        "hom-5x5-30": _scenario(5, 30),
        "hom-10x10-5": _scenario(10, 5),
        "hom-10x10-30": _scenario(10, 30),
        "het-5x5-30": _scenario(5, 30, het=True),
        "het-10x10-30": _scenario(10, 30, het=True),
    }
    # the fleet-size family shares one observation layout, hence one network shape
    for m in range(1, MAX_FLEET + 1):
        reg[f"hom-10x10-30-m{m}"] = _scenario(10, 30, fleet=m, obs_fleet=MAX_FLEET)
    return reg


PRESETS = _registry()
SINGLE_AGENT_PRESETS = ("hom-5x5-5", "hom-5x5-30", "hom-10x10-5", "hom-10x10-30", "het-5x5-30", "het-10x10-30")


@dataclass
class ExperimentSpec:
    scenario: ScenarioConfig
    policy: str = "mip"
    trainer: TrainerConfig | None = None
    model_path: str | None = None
    repetitions: int = 3
    eval_episodes: int = 100
    eval_seed: int = EVAL_SEED_BASE
    solver: SolverConfig = field(default_factory=SolverConfig)
    name: str = "custom"

    def validate(self, have_net: bool = False) -> None:
        if self.policy not in POLICIES:
            raise ValueError(f"policy must be one of {POLICIES}, got {self.policy!r}")
        if self.policy == "dqn" and self.trainer is None and self.model_path is None and not have_net:
            raise ValueError("dqn policy needs a trainer config or a saved model")
        if self.eval_episodes < 0 or self.repetitions < 1:
            raise ValueError("eval_episodes must be >= 0 and repetitions >= 1")
        self.scenario.validate()

    def eval_seeds(self) -> list[int]:
        return [self.eval_seed + i for i in range(self.eval_episodes)]

    def with_policy(self, policy: str, **changes) -> "ExperimentSpec":
        return dataclasses.replace(self, policy=policy, **changes)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "scenario": self.scenario.to_dict(),
            "policy": self.policy,
            "trainer": None if self.trainer is None else self.trainer.to_dict(),
            "model_path": self.model_path,
            "repetitions": self.repetitions,
            "eval_episodes": self.eval_episodes,
            "eval_seed": self.eval_seed,
            "solver": dataclasses.asdict(self.solver),
        }


def preset(name: str) -> ExperimentSpec:
    try:
        scenario = PRESETS[name]
    except KeyError:
        raise PresetError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return ExperimentSpec(scenario=scenario, name=name)


# -- policies ---------------------------------------------------------------

class Policy(Protocol):
    name: str

    def reset(self) -> None: ...

    def act(self, state: WorldState) -> list[int]: ...


class RandomPolicy:
    """Uniform over the whole action space; a floor for the learned policy."""

    name = "random"

    def __init__(self, config: ScenarioConfig, seed: int = 0):
        self.config = config
        self.seed = seed
        self.rng = np.random.default_rng(seed)

    def reset(self) -> None:
        pass

    def seed_episode(self, seed: int) -> None:
        self.rng = np.random.default_rng([self.seed, seed])

    def act(self, state: WorldState) -> list[int]:
        return [int(a) for a in self.rng.integers(self.config.action_dim, size=self.config.fleet_size)]


class DqnPolicy:
    """Greedy shared-network policy: one batched forward pass per decision point."""

    name = "dqn"

    def __init__(self, net: QNetwork, config: ScenarioConfig):
        if net.obs_dim != config.obs_dim or net.action_dim != config.action_dim:
            raise ValueError(
                f"model expects obs {net.obs_dim} / actions {net.action_dim}, "
                f"scenario has {config.obs_dim} / {config.action_dim}")
        self.net = net
        self.config = config
        self._obs = np.zeros((config.fleet_size, config.obs_dim), dtype=np.float32)
        # load the compiled inference kernel now rather than inside the first timed decision
        self.net(self._obs)

    def reset(self) -> None:
        pass

    def act(self, state: WorldState) -> list[int]:
        for i in range(self.config.fleet_size):
            observe(state, i, self.config, self._obs[i])
        return self.net(self._obs).argmax(axis=1).tolist()


def make_policy(spec: ExperimentSpec, net: QNetwork | None = None):
    spec.validate(have_net=net is not None)
    if spec.policy == "random":
        return RandomPolicy(spec.scenario, seed=spec.eval_seed)
    if spec.policy == "mip":
        return MipPolicy(spec.scenario, spec.solver)
    if net is None:
        if spec.model_path is None:
            raise FileNotFoundError("dqn evaluation needs a model path or a network")
        net, _ = load_network(spec.model_path)
    return DqnPolicy(net, spec.scenario)


# -- evaluation -------------------------------------------------------------

def exogenous_hash(state: WorldState) -> str:
    """Digest of the day's arrival stream (times, cells, rewards, zones)."""
    h = hashlib.sha256()
    for t in sorted(state.arrivals):
        a = state.arrivals[t]
        h.update(f"{a.t},{a.location.x},{a.location.y},{a.reward!r},{a.zone};".encode())
    return h.hexdigest()[:16]


@dataclass
class EvaluationResult:
    policy: str
    preset: str
    seeds: list[int]
    rewards: list[float] = field(default_factory=list)
    decision_times: list[float] = field(default_factory=list)
    near_optimal: list[bool] = field(default_factory=list)
    exogenous: list[str] = field(default_factory=list)
    events: list[list[Event]] = field(default_factory=list)

    @property
    def mean_reward(self) -> float:
        return float(np.mean(self.rewards)) if self.rewards else math.nan

    @property
    def mean_time(self) -> float:
        return float(np.mean(self.decision_times)) if self.decision_times else math.nan

    @property
    def near_optimal_rate(self) -> float:
        return float(np.mean(self.near_optimal)) if self.near_optimal else 0.0


def run_episode(policy, config: ScenarioConfig, seed: int, keep_events: bool = False):
    """One evaluation day. Only the ``policy.act`` calls are timed."""
    state = reset(config, seed)
    digest = exogenous_hash(state)
    policy.reset()
    if hasattr(policy, "seed_episode"):
        policy.seed_episode(seed)
    total = 0.0
    spent = 0.0
    log: list[Event] = []
    flagged = False
    while True:
        t0 = time.perf_counter()
        actions = policy.act(state)
        spent += time.perf_counter() - t0
        out = step(state, actions, config)
        total += math.fsum(out.rewards)
        if keep_events:
            log.extend(out.events)
        if out.done:
            break
    if isinstance(policy, MipPolicy):
        flagged = policy.near_optimal_solves > 0
    return total, spent, flagged, digest, log


def run_evaluation(spec: ExperimentSpec, net: QNetwork | None = None, keep_events: bool = False,
                   progress=None) -> EvaluationResult:
    policy = make_policy(spec, net)
    res = EvaluationResult(spec.policy, spec.name, spec.eval_seeds())
    for k, seed in enumerate(res.seeds):
        total, spent, flagged, digest, log = run_episode(policy, spec.scenario, seed, keep_events)
        res.rewards.append(total)
        res.decision_times.append(spent)
        res.near_optimal.append(flagged)
        res.exogenous.append(digest)
        if keep_events:
            res.events.append(log)
        if progress is not None:
            progress(k, total)
    return res


@dataclass
class ComparisonReport:
    preset: str
    policy_a: str
    policy_b: str
    mean_a: float
    mean_b: float
    time_a: float
    time_b: float
    near_optimal_rate: float
    episodes: int

    @property
    def difference_pct(self) -> float:
        """``(a - b) / b * 100``: the first policy relative to the second."""
        if self.mean_a == self.mean_b:
            return 0.0
        if self.mean_b == 0:
            return math.copysign(math.inf, self.mean_a)
        return (self.mean_a - self.mean_b) / self.mean_b * 100.0

    @property
    def time_ratio(self) -> float:
        """Second policy's decision time over the first's."""
        return self.time_b / self.time_a if self.time_a > 0 else math.inf

    @property
    def time_ratio_rounded(self) -> float:
        return round_sig(self.time_ratio, 2)

    def reward_row(self) -> dict:
        return {"scenario": self.preset, f"{self.policy_a}_reward": self.mean_a,
                f"{self.policy_b}_reward": self.mean_b, "difference_pct": self.difference_pct,
                "episodes": self.episodes}

    def timing_row(self) -> dict:
        return {"scenario": self.preset, f"{self.policy_a}_time_s": self.time_a,
                f"{self.policy_b}_time_s": self.time_b, "time_ratio": self.time_ratio,
                "time_ratio_rounded": self.time_ratio_rounded,
                "near_optimal_rate": self.near_optimal_rate}


def round_sig(x: float, digits: int) -> float:
    if x == 0 or not math.isfinite(x):
        return x
    return round(x, digits - 1 - int(math.floor(math.log10(abs(x)))))


def compare_results(a: EvaluationResult, b: EvaluationResult) -> ComparisonReport:
    if a.seeds != b.seeds:
        raise SeedMismatchError("policies were evaluated on different seeds")
    if a.exogenous != b.exogenous:
        raise SeedMismatchError("order streams differ between the two evaluations")
    rate = b.near_optimal_rate if b.policy == "mip" else a.near_optimal_rate
    return ComparisonReport(a.preset, a.policy, b.policy, a.mean_reward, b.mean_reward,
                            a.mean_time, b.mean_time, rate, len(a.seeds))


def compare(spec_a: ExperimentSpec, spec_b: ExperimentSpec, net_a: QNetwork | None = None,
            net_b: QNetwork | None = None) -> tuple[ComparisonReport, EvaluationResult, EvaluationResult]:
    """Evaluate both specs on the same days and summarise ``a`` against ``b``."""
    if spec_a.eval_seeds() != spec_b.eval_seeds():
        raise SeedMismatchError("specs use different evaluation seeds")
    if spec_a.scenario != spec_b.scenario:
        raise SeedMismatchError("specs use different scenarios")
    ra = run_evaluation(spec_a, net_a)
    rb = run_evaluation(spec_b, net_b)
    return compare_results(ra, rb), ra, rb


# -- artifacts --------------------------------------------------------------

def git_blob_hash(data: bytes) -> str:
    """Content hash in git's blob format, so ``git hash-object`` agrees."""
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def write_results_csv(path: str | Path, results: Sequence[EvaluationResult]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["preset", "policy", "episode", "seed", "reward", "decision_time_s", "near_optimal", "order_stream"])
        for res in results:
            for k, seed in enumerate(res.seeds):
                w.writerow([res.preset, res.policy, k, seed, repr(res.rewards[k]),
                            repr(res.decision_times[k]), int(res.near_optimal[k]), res.exogenous[k]])


def write_rows_csv(path: str | Path, rows: Sequence[dict]) -> None:
    if not rows:
        raise ValueError("no rows to write")
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        for row in rows:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})


def write_events_jsonl(path: str | Path, result: EvaluationResult) -> None:
    with open(path, "w") as fh:
        for k, log in enumerate(result.events):
            for ev in log:
                fh.write(json.dumps({"episode": k, "seed": result.seeds[k], "policy": result.policy, **ev.to_dict()}))
                fh.write("\n")


def write_manifest(path: str | Path, command: str, spec: ExperimentSpec, seeds: Sequence[int],
                   artifacts: Sequence[str | Path] = (), **extra) -> dict:
    """Run manifest: full configuration, seeds, and content hashes of every artifact."""
    doc = {
        "command": command,
        "experiment": spec.to_dict(),
        "seeds": list(seeds),
        "artifacts": {Path(p).name: git_blob_hash(Path(p).read_bytes()) for p in artifacts},
        **extra,
    }
    body = json.dumps(doc, sort_keys=True).encode()
    doc["content_hash"] = git_blob_hash(body)
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return doc
