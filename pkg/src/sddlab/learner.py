"""Parameter-sharing deep Q-learning in plain numpy.

One multilayer perceptron scores every vehicle's egocentric observation;
all vehicles write their own transitions into one replay buffer and a
single optimiser updates the shared weights. The target network is a
lagged copy refreshed by :func:`sync_target`.
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .env import SameDayEnv, ScenarioConfig
from .kernels import adam_update, dense_rows

logger = logging.getLogger(__name__)

DEFAULT_HIDDEN = (256, 256, 128)
SMALL_BATCH = 8  # up to this many rows, inference uses the fused row kernel
MODEL_MAGIC = b"SDDQNET1"


class QNetwork:
    """ReLU MLP; ``weights[l]`` has shape ``(fan_in, fan_out)``.

    All parameters live in one contiguous buffer, ``flat``, laid out as
    ``w0, b0, w1, b1, ...``; ``weights`` and ``biases`` are views into it.
    """

    def __init__(self, widths: Sequence[int], rng: np.random.Generator | None = None,
                 dtype=np.float32, zero: bool = False):
        if len(widths) < 2:
            raise ValueError("need at least input and output widths")
        self.widths = tuple(int(w) for w in widths)
        self.dtype = np.dtype(dtype)
        self._bind(np.zeros(sum(a * b + b for a, b in zip(self.widths[:-1], self.widths[1:])), dtype=self.dtype))
        if zero:
            return
        rng = np.random.default_rng(0) if rng is None else rng
        last = len(self.widths) - 2
        for l, (fan_in, fan_out) in enumerate(zip(self.widths[:-1], self.widths[1:])):
            # He-uniform on rectified layers, plain fan-in scaling on the head
            limit = math.sqrt((1.0 if l == last else 6.0) / fan_in)
            self.weights[l][...] = rng.uniform(-limit, limit, size=(fan_in, fan_out))
            self.biases[l][...] = rng.uniform(-1.0 / math.sqrt(fan_in), 1.0 / math.sqrt(fan_in), size=fan_out)

    def _bind(self, flat: np.ndarray) -> None:
        self.flat = flat
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        k = 0
        for fan_in, fan_out in zip(self.widths[:-1], self.widths[1:]):
            self.weights.append(flat[k:k + fan_in * fan_out].reshape(fan_in, fan_out))
            k += fan_in * fan_out
            self.biases.append(flat[k:k + fan_out])
            k += fan_out
        self._layout = np.array(self.widths, dtype=np.int64)

    @property
    def obs_dim(self) -> int:
        return self.widths[0]

    @property
    def action_dim(self) -> int:
        return self.widths[-1]

    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def param_count(self) -> int:
        return sum(p.size for p in self.params())

    def copy(self) -> "QNetwork":
        other = QNetwork.__new__(QNetwork)
        other.widths = self.widths
        other.dtype = self.dtype
        other._bind(self.flat.copy())
        return other

    def __call__(self, obs: np.ndarray) -> np.ndarray:
        return forward(self, obs)

    def forward_cached(self, x: np.ndarray) -> list[np.ndarray]:
        acts = [x]
        h = x
        last = len(self.weights) - 1
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if l < last:
                np.maximum(h, 0, out=h)
            acts.append(h)
        return acts

    def gradients(self, obs: np.ndarray, actions: np.ndarray, targets: np.ndarray):
        """Mean squared TD error on the taken actions and its gradient."""
        x = np.asarray(obs, dtype=self.dtype)
        acts = self.forward_cached(x)
        q = acts[-1]
        n = x.shape[0]
        rows = np.arange(n)
        err = q[rows, actions] - targets
        loss = float(np.mean(err.astype(np.float64) ** 2))
        g = np.zeros_like(q)
        g[rows, actions] = (2.0 / n) * err
        grads_w = [None] * len(self.weights)
        grads_b = [None] * len(self.weights)
        for l in range(len(self.weights) - 1, -1, -1):
            grads_w[l] = acts[l].T @ g
            grads_b[l] = g.sum(axis=0)
            if l:
                g = g @ self.weights[l].T
                g *= acts[l] > 0
        grads = []
        for gw, gb in zip(grads_w, grads_b):
            grads += [gw, gb]
        return loss, grads


def forward(net: QNetwork, obs: np.ndarray) -> np.ndarray:
    """Q-values for one observation (1-D) or a batch (2-D)."""
    x = np.asarray(obs, dtype=net.dtype)
    if x.shape[-1] != net.obs_dim:
        raise ValueError(f"observation has {x.shape[-1]} features, network expects {net.obs_dim}")
    if x.ndim == 1:
        return dense_rows(net.flat, net._layout, x[None, :])[0]
    if x.ndim == 2 and x.shape[0] <= SMALL_BATCH:
        return dense_rows(net.flat, net._layout, np.ascontiguousarray(x))
    return net.forward_cached(x)[-1]


class Transition(NamedTuple):
    obs: np.ndarray
    action: int
    reward: float
    next_obs: np.ndarray
    done: bool


class Batch(NamedTuple):
    obs: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_obs: np.ndarray
    dones: np.ndarray

    @classmethod
    def from_transitions(cls, items: Sequence[Transition]) -> "Batch":
        return cls(
            np.stack([t.obs for t in items]),
            np.array([t.action for t in items], dtype=np.int64),
            np.array([t.reward for t in items], dtype=np.float64),
            np.stack([t.next_obs for t in items]),
            np.array([t.done for t in items], dtype=bool),
        )


class ReplayBuffer:
    def __init__(self, capacity: int, obs_dim: int, dtype=np.float32):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = int(capacity)
        self.obs = np.zeros((capacity, obs_dim), dtype=dtype)
        self.next_obs = np.zeros((capacity, obs_dim), dtype=dtype)
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity, dtype=np.float64)
        self.dones = np.zeros(capacity, dtype=bool)
        self.size = 0
        self._next = 0

    def __len__(self) -> int:
        return self.size

    def add(self, obs, action, reward, next_obs, done) -> None:
        k = self._next
        self.obs[k] = obs
        self.actions[k] = action
        self.rewards[k] = reward
        self.next_obs[k] = next_obs
        self.dones[k] = done
        self._next = (k + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample_indices(self, batch_size: int, rng: np.random.Generator) -> np.ndarray:
        return rng.choice(self.size, size=min(batch_size, self.size), replace=False)

    def sample(self, batch_size: int, rng: np.random.Generator) -> Batch:
        idx = self.sample_indices(batch_size, rng)
        return Batch(self.obs[idx], self.actions[idx], self.rewards[idx], self.next_obs[idx], self.dones[idx])


@dataclass
class TrainerConfig:
    gamma: float = 0.99
    learning_rate: float = 1e-4
    batch_size: int = 64
    buffer_capacity: int = 100_000
    target_sync_interval: int = 2_000  # environment steps
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_episodes: int | None = None  # None: first half of training
    episodes: int = 1_000
    eval_episodes: int = 100
    warmup: int = 1_000
    hidden: tuple[int, ...] = DEFAULT_HIDDEN
    optimizer: str = "adam"
    dtype: str = "float32"
    seed: int = 0

    def validate(self) -> None:
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        for eps in (self.epsilon_start, self.epsilon_end):
            if not 0.0 <= eps <= 1.0:
                raise ValueError("epsilon must lie in [0, 1]")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.batch_size < 1 or self.buffer_capacity < 1 or self.target_sync_interval < 1:
            raise ValueError("batch size, capacity and sync interval must be positive")

    def epsilon(self, episode: int) -> float:
        horizon = self.epsilon_decay_episodes
        if horizon is None:
            horizon = max(self.episodes // 2, 1)
        frac = min(episode / horizon, 1.0) if horizon > 0 else 1.0
        return self.epsilon_start + frac * (self.epsilon_end - self.epsilon_start)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "TrainerConfig":
        data = dict(data)
        if "hidden" in data:
            data["hidden"] = tuple(data["hidden"])
        return cls(**data)


class Adam:
    def __init__(self, params: Sequence[np.ndarray], lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.steps = 0

    def update(self, params, grads) -> None:
        self.steps += 1
        b1, b2 = self.beta1, self.beta2
        scale = self.lr * math.sqrt(1 - b2 ** self.steps) / (1 - b1 ** self.steps)
        for p, g, m, v in zip(params, grads, self.m, self.v):
            adam_update(p, np.ascontiguousarray(g, dtype=p.dtype), m, v, scale, b1, b2, self.eps)


class SGD:
    def __init__(self, params, lr: float):
        self.lr = lr

    def update(self, params, grads) -> None:
        for p, g in zip(params, grads):
            p -= self.lr * g


def make_optimizer(net: QNetwork, config: TrainerConfig):
    if config.optimizer == "adam":
        return Adam(net.params(), config.learning_rate)
    return SGD(net.params(), config.learning_rate)


def td_target(transition: Transition, target_net: QNetwork, gamma: float) -> float:
    if transition.done:
        return float(transition.reward)
    return float(transition.reward + gamma * np.max(forward(target_net, transition.next_obs)))


def td_targets(batch: Batch, target_net: QNetwork, gamma: float) -> np.ndarray:
    q_next = forward(target_net, batch.next_obs).max(axis=1).astype(np.float64)
    return batch.rewards + gamma * np.where(batch.dones, 0.0, q_next)


def train_step(net: QNetwork, target_net: QNetwork, batch: Batch, config: TrainerConfig,
               optimizer=None) -> float:
    """One gradient update of ``net`` on ``batch``; ``target_net`` is only read."""
    if len(batch.actions) == 0:
        raise ValueError("empty batch")
    targets = td_targets(batch, target_net, config.gamma).astype(net.dtype)
    loss, grads = net.gradients(batch.obs, batch.actions, targets)
    if not math.isfinite(loss):
        raise FloatingPointError(
            f"non-finite loss {loss}: reward range [{batch.rewards.min()}, {batch.rewards.max()}], "
            f"max |target| {np.abs(targets).max()}, max |w| "
            f"{max(float(np.abs(w).max()) for w in net.weights)}"
        )
    if optimizer is None:
        optimizer = SGD(None, config.learning_rate)
    optimizer.update(net.params(), grads)
    return loss


def sync_target(net: QNetwork, target_net: QNetwork) -> QNetwork:
    if net.widths != target_net.widths:
        raise ValueError(f"architecture mismatch: {net.widths} vs {target_net.widths}")
    for dst, src in zip(target_net.params(), net.params()):
        np.copyto(dst, src)
    return target_net


def select_action(net: QNetwork, obs: np.ndarray, epsilon: float, rng: np.random.Generator) -> int:
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0, 1]")
    if epsilon > 0.0 and rng.random() < epsilon:
        return int(rng.integers(net.action_dim))
    return int(np.argmax(forward(net, obs)))


def select_actions(net: QNetwork, obs: np.ndarray, epsilon: float, rng: np.random.Generator) -> list[int]:
    """ε-greedy for every row of ``obs`` with one batched forward pass."""
    greedy = np.argmax(forward(net, obs), axis=1)
    out = []
    for a in greedy:
        if epsilon > 0.0 and rng.random() < epsilon:
            out.append(int(rng.integers(net.action_dim)))
        else:
            out.append(int(a))
    return out


def build_network(config: ScenarioConfig, trainer: TrainerConfig, rng: np.random.Generator | None = None) -> QNetwork:
    widths = (config.obs_dim, *trainer.hidden, config.action_dim)
    return QNetwork(widths, rng=rng, dtype=np.dtype(trainer.dtype))


def training_seed(seed: int, episode: int) -> int:
    return seed * 10_000_000 + episode


@dataclass
class TrainingCurveRow:
    episode: int
    total_reward: float
    epsilon: float
    loss: float


@dataclass
class TrainResult:
    net: QNetwork
    curve: list[TrainingCurveRow] = field(default_factory=list)
    transitions: int = 0
    updates: int = 0


def train(config: ScenarioConfig, trainer: TrainerConfig, net: QNetwork | None = None,
          progress: Callable[[TrainingCurveRow], None] | None = None) -> TrainResult:
    """Run ``trainer.episodes`` ε-greedy episodes with one shared network."""
    trainer.validate()
    rng = np.random.default_rng(trainer.seed)
    if net is None:
        net = build_network(config, trainer, rng)
    target = net.copy()
    opt = make_optimizer(net, trainer)
    env = SameDayEnv(config)
    buffer = ReplayBuffer(trainer.buffer_capacity, config.obs_dim, dtype=net.dtype)
    m = config.fleet_size
    result = TrainResult(net)
    env_steps = 0
    for ep in range(trainer.episodes):
        eps = trainer.epsilon(ep)
        obs = env.reset(training_seed(trainer.seed, ep))
        done = False
        total = 0.0
        losses = []
        while not done:
            actions = select_actions(net, obs, eps, rng)
            next_obs, rewards, done, _ = env.step(actions)
            for i in range(m):
                buffer.add(obs[i], actions[i], rewards[i], next_obs[i], done)
            result.transitions += m
            total += sum(rewards)
            obs = next_obs
            env_steps += 1
            if len(buffer) >= max(trainer.warmup, 1):
                losses.append(train_step(net, target, buffer.sample(trainer.batch_size, rng), trainer, opt))
                result.updates += 1
            if env_steps % trainer.target_sync_interval == 0:
                sync_target(net, target)
        row = TrainingCurveRow(ep, total, eps, float(np.mean(losses)) if losses else float("nan"))
        result.curve.append(row)
        if progress is not None:
            progress(row)
    return result


def write_curve(path: str | Path, curve: Sequence[TrainingCurveRow]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["episode", "total_reward", "epsilon", "loss"])
        for row in curve:
            w.writerow([row.episode, repr(row.total_reward), repr(row.epsilon), repr(row.loss)])


def config_hash(*docs: dict) -> str:
    blob = json.dumps(docs, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def save_network(net: QNetwork, path: str | Path, **meta) -> None:
    """Magic, little-endian u32 header length, JSON header, then raw float32 tensors."""
    header = {"widths": list(net.widths), "dtype": "float32", **meta}
    raw = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(struct.pack("<I", len(raw)))
        fh.write(raw)
        for p in net.params():
            fh.write(np.ascontiguousarray(p, dtype="<f4").tobytes())


def load_network(path: str | Path) -> tuple[QNetwork, dict]:
    with open(path, "rb") as fh:
        if fh.read(len(MODEL_MAGIC)) != MODEL_MAGIC:
            raise ValueError(f"{path} is not a saved Q-network")
        (n,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(n))
        net = QNetwork(header["widths"], zero=True, dtype=np.float32)
        for p in net.params():
            chunk = fh.read(p.size * 4)
            if len(chunk) != p.size * 4:
                raise ValueError(f"{path} is truncated")
            p[...] = np.frombuffer(chunk, dtype="<f4").reshape(p.shape)
        if fh.read(1):
            raise ValueError(f"{path} has trailing bytes")
    return net, header
