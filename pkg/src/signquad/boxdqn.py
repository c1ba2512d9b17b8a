"""Box refinement by deep Q-learning against a recognition-score oracle.

An agent nudges the vertices of a text box one coordinate at a time and is
rewarded by the change in the oracle's score.  The recognizer is abstracted
as :class:`RewardOracle`; :class:`SyntheticOracle` is a stand-in whose
optimum is a hidden target quad, which makes learning measurable.

The state, action set, reward and network here are our own reconstruction:
the method this mirrors only says that the box shape is adjusted to suit the
recognizer.  Everything below the interface is a configurable default.

Observation layout (``features``):

* 8 vertex coordinates scaled by the image size
* 8 offsets of those coordinates from the episode's initial box, same scale
* steps taken / max steps
* (``probe_features``) 16 one-step look-ahead score gains, one per move,
  times ``PROBE_SCALE``.  These stand in for the image evidence a real
  refiner sees; they are computed with nothing but ``oracle.score``.
"""
from __future__ import annotations

import csv
import io
import math
import struct
from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

import numpy as np

from .geometry import GeometryError, Quad, iou

N_ACTIONS = 17
STOP = 16
BASE_FEATURES = 17
PROBE_FEATURES = 16
PROBE_SCALE = 30.0

# action a < 16 moves vertex a // 4 along axis (a % 4) // 2 by sign (+1, -1)
ACTIONS = tuple((a // 4, (a % 4) // 2, 1 if a % 2 == 0 else -1) for a in range(16)) + (None,)


class TrainingDiverged(RuntimeError):
    pass


class EpisodeDone(RuntimeError):
    pass


class RewardOracle(Protocol):
    def score(self, quad: Quad) -> float: ...


@dataclass(frozen=True)
class SyntheticOracle:
    """``iou(quad, target) ** sharpness``, optionally with deterministic noise.

    Noise is a pure function of (seed, quad coordinates), so repeated calls on
    the same quad agree.
    """

    target: Quad
    sharpness: float = 4.0
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not self.sharpness > 0:
            raise ValueError("sharpness must be positive")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")

    def score(self, quad: Quad) -> float:
        s = iou(quad, self.target) ** self.sharpness
        if self.noise_sigma > 0:
            key = np.frombuffer(np.array(quad.flat(), dtype="<f8").tobytes(), dtype=np.uint32)
            rng = np.random.default_rng([self.seed, *key.tolist()])
            s += rng.normal(0.0, self.noise_sigma)
        return min(max(s, 0.0), 1.0)


class BoxEnv:
    """Vertex-nudging environment over a single box.

    Moves clamp to the image; a move that would break the quad (bow-tie,
    zero or negative area) leaves it unchanged with zero reward.
    """

    def __init__(self, image_size: tuple[int, int], oracle: RewardOracle, initial: Quad,
                 delta: float | None = None, max_steps: int = 32, probe_features: bool = True,
                 probe_scale: float = PROBE_SCALE):
        self.image_size = (float(image_size[0]), float(image_size[1]))
        self.oracle = oracle
        self.initial = initial
        self.delta = 0.02 * min(self.image_size) if delta is None else float(delta)
        self.max_steps = int(max_steps)
        self.probe_features = probe_features
        self.probe_scale = probe_scale
        self.reset()

    @property
    def n_features(self) -> int:
        return BASE_FEATURES + (PROBE_FEATURES if self.probe_features else 0)

    def reset(self) -> np.ndarray:
        self.quad = self.initial
        self.steps = 0
        self.done = False
        self.current_score = self.oracle.score(self.quad)
        self.initial_score = self.current_score
        return self.features()

    def moved(self, action: int) -> Quad | None:
        """Quad after ``action``, or None when the move is invalid or a no-op."""
        vertex, axis, sign = ACTIONS[action]
        pts = [list(p) for p in self.quad.v]
        limit = self.image_size[axis]
        new = min(max(pts[vertex][axis] + sign * self.delta, 0.0), limit)
        if new == pts[vertex][axis]:
            return None
        pts[vertex][axis] = new
        try:
            return Quad(tuple(tuple(p) for p in pts))
        except GeometryError:
            return None

    def features(self) -> np.ndarray:
        w, h = self.image_size
        scale = np.array([w, h] * 4)
        cur = np.array(self.quad.flat())
        init = np.array(self.initial.flat())
        base = np.concatenate([cur / scale, (cur - init) / scale, [self.steps / self.max_steps]])
        if not self.probe_features:
            return base
        gains = np.zeros(PROBE_FEATURES)
        for a in range(PROBE_FEATURES):
            q = self.moved(a)
            if q is not None:
                gains[a] = self.oracle.score(q) - self.current_score
        return np.concatenate([base, self.probe_scale * gains])

    def step(self, action: int) -> tuple[np.ndarray, float, bool]:
        if self.done:
            raise EpisodeDone("step() called on a finished episode")
        if not 0 <= action < N_ACTIONS:
            raise ValueError(f"action out of range: {action}")
        self.steps += 1
        reward = 0.0
        if action == STOP:
            self.done = True
        else:
            q = self.moved(action)
            if q is not None:
                new_score = self.oracle.score(q)
                reward = new_score - self.current_score
                self.quad, self.current_score = q, new_score
            if self.steps >= self.max_steps:
                self.done = True
        return self.features(), reward, self.done

    def target_iou(self) -> float:
        target = getattr(self.oracle, "target", None)
        if target is None:
            raise AttributeError("oracle has no target quad")
        return iou(self.quad, target)


# --- Q-network ----------------------------------------------------------

@dataclass
class QNet:
    """Fully connected ReLU network; ``weights[k]`` has shape (in, out)."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @classmethod
    def init(cls, sizes: Sequence[int], rng: np.random.Generator) -> "QNet":
        ws, bs = [], []
        for k, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            last = k == len(sizes) - 2
            std = (0.01 if last else math.sqrt(2.0 / n_in))
            ws.append(rng.normal(0.0, std, size=(n_in, n_out)))
            bs.append(np.zeros(n_out))
        return cls(ws, bs)

    @classmethod
    def zeros(cls, sizes: Sequence[int]) -> "QNet":
        return cls([np.zeros((a, b)) for a, b in zip(sizes[:-1], sizes[1:])],
                   [np.zeros(b) for b in sizes[1:]])

    @property
    def sizes(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    def copy(self) -> "QNet":
        return QNet([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend([w, b])
        return out


def _forward(net: QNet, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    acts = [x]
    n = len(net.weights)
    for k, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = acts[-1] @ w + b
        acts.append(z if k == n - 1 else np.maximum(z, 0.0))
    return acts[-1], acts


def qnet_forward(net: QNet, features: np.ndarray) -> np.ndarray:
    x = np.asarray(features, dtype=float)
    if x.shape[-1] != net.sizes[0]:
        raise ValueError(f"expected {net.sizes[0]} features, got {x.shape[-1]}")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite features")
    out, _ = _forward(net, x)
    return out


@dataclass
class Batch:
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    dones: np.ndarray


def td_targets(batch: Batch, target_net: QNet, gamma: float) -> np.ndarray:
    q_next = qnet_forward(target_net, batch.next_states).max(axis=1)
    return batch.rewards + gamma * np.where(batch.dones, 0.0, q_next)


def td_loss_and_grads(net: QNet, batch: Batch, targets: np.ndarray
                      ) -> tuple[float, list[np.ndarray], list[np.ndarray]]:
    """Mean of 0.5 * (Q(s, a) - target)^2 and its gradients."""
    q, acts = _forward(net, batch.states)
    m = len(batch.actions)
    idx = np.arange(m)
    err = q[idx, batch.actions] - targets
    loss = 0.5 * float(np.mean(err ** 2))
    delta = np.zeros_like(q)
    delta[idx, batch.actions] = err / m
    gw: list[np.ndarray] = [None] * len(net.weights)  # type: ignore[list-item]
    gb: list[np.ndarray] = [None] * len(net.weights)  # type: ignore[list-item]
    for k in range(len(net.weights) - 1, -1, -1):
        gw[k] = acts[k].T @ delta
        gb[k] = delta.sum(axis=0)
        if k:
            delta = (delta @ net.weights[k].T) * (acts[k] > 0)
    return loss, gw, gb


def qnet_backward_step(net: QNet, batch: Batch, target_net: QNet, gamma: float,
                       lr: float) -> float:
    """One plain gradient-descent step on the TD(0) loss; updates ``net`` in place."""
    if len(batch.actions) == 0:
        raise ValueError("empty batch")
    targets = td_targets(batch, target_net, gamma)

    def diverged(loss):
        return TrainingDiverged(f"non-finite TD loss ({loss}); "
                                f"max |reward| {np.abs(batch.rewards).max():.3g}, "
                                f"max |target| {np.abs(targets).max():.3g}")

    if not np.all(np.isfinite(targets)):
        raise diverged(float("nan"))
    loss, gw, gb = td_loss_and_grads(net, batch, targets)
    if not math.isfinite(loss):
        raise diverged(loss)
    for k in range(len(net.weights)):
        net.weights[k] -= lr * gw[k]
        net.biases[k] -= lr * gb[k]
    return loss


class ReplayBuffer:
    """Fixed-capacity FIFO of transitions with seeded uniform sampling."""

    def __init__(self, capacity: int, n_features: int, rng: np.random.Generator):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.rng = rng
        self.states = np.zeros((capacity, n_features))
        self.next_states = np.zeros((capacity, n_features))
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity)
        self.dones = np.zeros(capacity, dtype=bool)
        self.size = 0
        self._next = 0

    def __len__(self):
        return self.size

    def add(self, state, action, reward, next_state, done) -> None:
        i = self._next
        self.states[i] = state
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_states[i] = next_state
        self.dones[i] = done
        self._next = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, n: int) -> Batch:
        idx = self.rng.integers(0, self.size, size=n)
        return Batch(self.states[idx], self.actions[idx], self.rewards[idx],
                     self.next_states[idx], self.dones[idx])


# --- environments -------------------------------------------------------

EnvFactory = Callable[[np.random.Generator], BoxEnv]


@dataclass(frozen=True)
class SyntheticTaskFactory:
    """Random text-box refinement tasks under a noiseless synthetic oracle.

    Targets are rectangles of random size, slightly rotated, placed inside the
    image.  The starting box is the target with every coordinate perturbed by
    up to ``init_noise`` of the image size, clamped to the image.
    """

    image_size: tuple[int, int] = (100, 100)
    width_range: tuple[float, float] = (0.3, 0.55)
    height_range: tuple[float, float] = (0.15, 0.3)
    max_rotation_deg: float = 8.0
    init_noise: float = 0.1
    sharpness: float = 4.0
    noise_sigma: float = 0.0
    max_steps: int = 32
    probe_features: bool = True
    probe_scale: float = PROBE_SCALE
    start_at_target: bool = False

    def target(self, rng: np.random.Generator) -> Quad:
        w, h = self.image_size
        bw = rng.uniform(*self.width_range) * w
        bh = rng.uniform(*self.height_range) * h
        theta = math.radians(rng.uniform(-self.max_rotation_deg, self.max_rotation_deg))
        c, s = math.cos(theta), math.sin(theta)
        corners = [(-bw / 2, -bh / 2), (bw / 2, -bh / 2), (bw / 2, bh / 2), (-bw / 2, bh / 2)]
        rot = [(x * c - y * s, x * s + y * c) for x, y in corners]
        xs = [p[0] for p in rot]
        ys = [p[1] for p in rot]
        cx = rng.uniform(-min(xs), w - max(xs))
        cy = rng.uniform(-min(ys), h - max(ys))
        return Quad(tuple((x + cx, y + cy) for x, y in rot))

    def perturb(self, target: Quad, rng: np.random.Generator) -> Quad:
        w, h = self.image_size
        while True:
            noise = rng.uniform(-self.init_noise, self.init_noise, size=(4, 2)) * (w, h)
            pts = np.array(target.v) + noise
            pts[:, 0] = np.clip(pts[:, 0], 0, w)
            pts[:, 1] = np.clip(pts[:, 1], 0, h)
            try:
                return Quad(tuple(map(tuple, pts.tolist())))
            except GeometryError:
                continue

    def __call__(self, rng: np.random.Generator) -> BoxEnv:
        target = self.target(rng)
        initial = target if self.start_at_target else self.perturb(target, rng)
        oracle = SyntheticOracle(target, self.sharpness, self.noise_sigma,
                                 seed=int(rng.integers(0, 2 ** 31)))
        return BoxEnv(self.image_size, oracle, initial, max_steps=self.max_steps,
                      probe_features=self.probe_features, probe_scale=self.probe_scale)


# --- training -----------------------------------------------------------

@dataclass(frozen=True)
class TrainConfig:
    episodes: int = 2000
    gamma: float = 0.95
    learning_rate: float = 1e-3
    batch_size: int = 64
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_fraction: float = 0.5
    target_sync: int = 200
    replay_capacity: int = 10_000
    hidden: tuple[int, ...] = (64, 64)
    reward_scale: float = 30.0
    seed: int = 7
    curve_window: int = 100

    def __post_init__(self):
        if self.episodes < 0:
            raise ValueError("episodes must be non-negative")
        for name in ("gamma", "learning_rate", "batch_size", "target_sync",
                     "replay_capacity", "reward_scale", "curve_window"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not (0 <= self.epsilon_end <= 1 and 0 <= self.epsilon_start <= 1):
            raise ValueError("epsilon must lie in [0, 1]")

    def epsilon(self, episode: int) -> float:
        horizon = self.epsilon_decay_fraction * self.episodes
        if horizon <= 0 or episode >= horizon:
            return self.epsilon_end
        return self.epsilon_start + (self.epsilon_end - self.epsilon_start) * episode / horizon


@dataclass
class CurvePoint:
    episode: int
    mean_final_score: float
    epsilon: float
    loss: float


@dataclass
class TrainResult:
    net: QNet
    curve: list[CurvePoint] = field(default_factory=list)


def _greedy(net: QNet, state: np.ndarray) -> int:
    return int(np.argmax(qnet_forward(net, state)))


def train(cfg: TrainConfig, env_factory: EnvFactory = SyntheticTaskFactory()) -> TrainResult:
    """Epsilon-greedy DQN with replay and a periodically synced target network.

    ``mean_final_score`` in the curve is the trailing mean of final oracle
    scores over the last ``curve_window`` episodes; ``loss`` is the mean TD
    loss of the episode's gradient steps (NaN before learning starts).
    """
    seeds = np.random.SeedSequence(cfg.seed).spawn(3)
    env_rng, act_rng, buf_rng = (np.random.default_rng(s) for s in seeds)
    probe_env = env_factory(np.random.default_rng(seeds[0].spawn(1)[0]))
    sizes = [probe_env.n_features, *cfg.hidden, N_ACTIONS]
    net = QNet.init(sizes, np.random.default_rng(cfg.seed))
    target_net = net.copy()
    buffer = ReplayBuffer(cfg.replay_capacity, probe_env.n_features, buf_rng)
    curve: list[CurvePoint] = []
    finals: list[float] = []
    grad_steps = 0
    for ep in range(cfg.episodes):
        eps = cfg.epsilon(ep)
        env = env_factory(env_rng)
        state = env.reset()
        losses = []
        done = False
        while not done:
            if act_rng.random() < eps:
                action = int(act_rng.integers(N_ACTIONS))
            else:
                action = _greedy(net, state)
            nxt, reward, done = env.step(action)
            buffer.add(state, action, reward * cfg.reward_scale, nxt, done)
            state = nxt
            if len(buffer) >= cfg.batch_size:
                losses.append(qnet_backward_step(net, buffer.sample(cfg.batch_size), target_net,
                                                 cfg.gamma, cfg.learning_rate))
                grad_steps += 1
                if grad_steps % cfg.target_sync == 0:
                    target_net = net.copy()
        finals.append(env.current_score)
        window = finals[-cfg.curve_window:]
        curve.append(CurvePoint(ep, float(np.mean(window)), eps,
                                float(np.mean(losses)) if losses else float("nan")))
    return TrainResult(net, curve)


@dataclass
class PolicyReport:
    n_episodes: int
    mean_final_score: float
    mean_final_iou: float
    mean_initial_iou: float
    mean_steps: float

    def to_dict(self) -> dict:
        return {
            "n_episodes": self.n_episodes,
            "mean_final_score": self.mean_final_score,
            "mean_final_iou": self.mean_final_iou,
            "mean_initial_iou": self.mean_initial_iou,
            "mean_steps": self.mean_steps,
        }


def _rollouts(choose: Callable[[BoxEnv, np.ndarray], int], n_episodes: int, seed: int,
              env_factory: EnvFactory) -> PolicyReport:
    if n_episodes <= 0:
        return PolicyReport(0, float("nan"), float("nan"), float("nan"), float("nan"))
    env_rng = np.random.default_rng(seed)
    scores, ious, init_ious, steps = [], [], [], []
    for _ in range(n_episodes):
        env = env_factory(env_rng)
        state = env.reset()
        init_ious.append(env.target_iou())
        done = False
        while not done:
            state, _, done = env.step(choose(env, state))
        scores.append(env.current_score)
        ious.append(env.target_iou())
        steps.append(env.steps)
    return PolicyReport(n_episodes, float(np.mean(scores)), float(np.mean(ious)),
                        float(np.mean(init_ious)), float(np.mean(steps)))


def evaluate_policy(net: QNet, n_episodes: int, seed: int,
                    env_factory: EnvFactory = SyntheticTaskFactory()) -> PolicyReport:
    """Greedy rollouts on ``n_episodes`` environments drawn from ``seed``."""
    return _rollouts(lambda env, s: _greedy(net, s), n_episodes, seed, env_factory)


def evaluate_random_policy(n_episodes: int, seed: int,
                           env_factory: EnvFactory = SyntheticTaskFactory(),
                           action_seed: int | None = None) -> PolicyReport:
    """Uniform random actions on the same environments ``evaluate_policy`` would see."""
    rng = np.random.default_rng(seed + 1 if action_seed is None else action_seed)
    return _rollouts(lambda env, s: int(rng.integers(N_ACTIONS)), n_episodes, seed, env_factory)


# --- persistence --------------------------------------------------------

MAGIC = b"SIGNQUAD-QNET\x00v1"


def dumps_checkpoint(net: QNet) -> bytes:
    """Magic, layer count and sizes (uint32 LE), then each layer's weights
    (row-major, in x out) and biases as little-endian float64."""
    sizes = net.sizes
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<I", len(sizes)))
    buf.write(struct.pack(f"<{len(sizes)}I", *sizes))
    for w, b in zip(net.weights, net.biases):
        buf.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
        buf.write(np.ascontiguousarray(b, dtype="<f8").tobytes())
    return buf.getvalue()


def loads_checkpoint(data: bytes) -> QNet:
    if not data.startswith(MAGIC):
        raise ValueError("not a Q-network checkpoint (bad magic)")
    pos = len(MAGIC)
    (n,) = struct.unpack_from("<I", data, pos)
    pos += 4
    sizes = list(struct.unpack_from(f"<{n}I", data, pos))
    pos += 4 * n
    ws, bs = [], []
    for a, b in zip(sizes[:-1], sizes[1:]):
        w = np.frombuffer(data, dtype="<f8", count=a * b, offset=pos).reshape(a, b)
        pos += 8 * a * b
        bias = np.frombuffer(data, dtype="<f8", count=b, offset=pos)
        pos += 8 * b
        ws.append(w.astype(float))
        bs.append(bias.astype(float))
    if pos != len(data):
        raise ValueError("checkpoint has trailing bytes")
    return QNet(ws, bs)


def curve_csv(curve: Sequence[CurvePoint]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["episode", "mean_final_score", "epsilon", "loss"])
    for p in curve:
        writer.writerow([p.episode, repr(p.mean_final_score), repr(p.epsilon), repr(p.loss)])
    return out.getvalue()
