"""Numerical checks on the Q-learning code shared by unit and acceptance tests."""
from __future__ import annotations

import time

import numpy as np

from signquad.boxdqn import (N_ACTIONS, Batch, SyntheticTaskFactory, TrainConfig, QNet,
                             td_loss_and_grads, train)

from oracles import numeric_grad


def gradient_check(n_configs: int = 100, seed: int = 0) -> float:
    """Worst elementwise |analytic - numeric| / max(|analytic|, |numeric|) over
    ``n_configs`` random tiny networks (entries where both are exactly 0 skip)."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_configs):
        hidden = [int(rng.integers(2, 7)) for _ in range(int(rng.integers(1, 3)))]
        sizes = [int(rng.integers(2, 6)), *hidden, int(rng.integers(2, 5))]
        net = QNet.init(sizes, rng)
        for b in net.biases:
            b[:] = rng.normal(0, 0.5, b.shape)
        m = int(rng.integers(1, 6))
        batch = Batch(rng.normal(size=(m, sizes[0])), rng.integers(0, sizes[-1], m),
                      rng.normal(size=m), rng.normal(size=(m, sizes[0])), rng.random(m) < 0.3)
        targets = rng.normal(size=m)
        _, gw, gb = td_loss_and_grads(net, batch, targets)
        analytic = [g for pair in zip(gw, gb) for g in pair]
        for param, g in zip(net.params(), analytic):
            n = numeric_grad(lambda: td_loss_and_grads(net, batch, targets)[0], param)
            den = np.maximum(np.abs(g), np.abs(n))
            mask = den > 0
            if mask.any():
                worst = max(worst, float((np.abs(g - n)[mask] / den[mask]).max()))
    return worst


def telescoping_check(n_episodes: int = 1000, seed: int = 0) -> float:
    """Worst |sum of rewards - (final score - initial score)| over random-action episodes."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    plain = SyntheticTaskFactory(probe_features=False)
    noisy = SyntheticTaskFactory(probe_features=False, noise_sigma=0.05)
    for k in range(n_episodes):
        env = (noisy if k % 2 else plain)(rng)
        env.reset()
        total, done = 0.0, False
        while not done:
            _, r, done = env.step(int(rng.integers(N_ACTIONS)))
            total += r
        worst = max(worst, abs(total - (env.current_score - env.initial_score)))
    return worst


_trained = {}


def trained_default():
    """Default-config training run, cached for the session: (result, seconds)."""
    if "run" not in _trained:
        start = time.perf_counter()
        result = train(TrainConfig(), SyntheticTaskFactory())
        _trained["run"] = (result, time.perf_counter() - start)
    return _trained["run"]
