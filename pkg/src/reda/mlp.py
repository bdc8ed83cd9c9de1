"""Small float64 multilayer perceptron with hand-written backprop and Adam.

One network is shared by all agents; per-agent differences enter through
the observation. Only the chosen action's output enters the loss.
"""

from __future__ import annotations

import json

import numpy as np

__all__ = ["Adam", "MLP", "load_checkpoint", "save_checkpoint", "soft_update"]

CHECKPOINT_VERSION = 1


class MLP:
    """ReLU hidden layers, linear output. ``params`` = [W0, b0, W1, b1, ...]."""

    def __init__(self, sizes, rng: np.random.Generator | None = None):
        self.sizes = tuple(int(s) for s in sizes)
        if len(self.sizes) < 2:
            raise ValueError("need at least input and output sizes")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.params = []
        for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            self.params.append(rng.uniform(-bound, bound, (fan_in, fan_out)))
            self.params.append(rng.uniform(-bound, bound, fan_out))

    @property
    def n_layers(self) -> int:
        return len(self.params) // 2

    def copy(self) -> "MLP":
        clone = MLP.__new__(MLP)
        clone.sizes = self.sizes
        clone.params = [p.copy() for p in self.params]
        return clone

    def forward(self, x: np.ndarray, cache: list | None = None) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.sizes[0]:
            raise ValueError(f"observation length {x.shape[-1]} != network input {self.sizes[0]}")
        lead = x.shape[:-1]
        h = x.reshape(-1, self.sizes[0])
        for layer in range(self.n_layers):
            W, b = self.params[2 * layer], self.params[2 * layer + 1]
            if cache is not None:
                cache.append(h)
            h = h @ W + b
            if layer < self.n_layers - 1:
                h = np.maximum(h, 0.0)
        return h.reshape(lead + (self.sizes[-1],))

    __call__ = forward

    def loss_and_grad(self, obs, actions, targets, batch_size: int | None = None):
        """Squared error on chosen actions, summed over rows, divided by
        ``batch_size`` (number of transitions; defaults to the leading dim).

        ``obs`` is ``(..., d)``, ``actions`` and ``targets`` share its
        leading shape.
        """
        obs = np.asarray(obs, dtype=np.float64)
        targets = np.asarray(targets, dtype=np.float64)
        if not np.all(np.isfinite(targets)):
            raise ValueError("non-finite targets")
        if obs.shape[:-1] == () or targets.size == 0:
            raise ValueError("empty batch")
        B = obs.shape[0] if batch_size is None else batch_size
        cache: list = []
        q = self.forward(obs, cache).reshape(-1, self.sizes[-1])
        a = np.asarray(actions).reshape(-1)
        y = targets.reshape(-1)
        rows = np.arange(len(a))
        err = q[rows, a] - y
        loss = float(np.sum(err**2) / B)
        delta = np.zeros_like(q)
        delta[rows, a] = 2.0 * err / B
        grads = [None] * len(self.params)
        for layer in reversed(range(self.n_layers)):
            h_in = cache[layer]
            W = self.params[2 * layer]
            grads[2 * layer] = h_in.T @ delta
            grads[2 * layer + 1] = delta.sum(axis=0)
            if layer > 0:
                # h_in is the ReLU output of the previous layer
                delta = (delta @ W.T) * (h_in > 0)
        return loss, grads


class Adam:
    def __init__(self, params, lr: float = 5e-4, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, params, grads) -> None:
        """In-place bias-corrected Adam update."""
        self.t += 1
        c1 = 1 - self.beta1**self.t
        c2 = 1 - self.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            if p.shape != g.shape:
                raise ValueError("gradient shape mismatch")
            m *= self.beta1
            m += (1 - self.beta1) * g
            v *= self.beta2
            v += (1 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def soft_update(online: MLP, target: MLP, tau: float) -> MLP:
    if online.sizes != target.sizes:
        raise ValueError("network shapes differ")
    for p, q in zip(online.params, target.params):
        q *= 1 - tau
        q += tau * p
    return target


def save_checkpoint(path, online: MLP, target: MLP, adam: Adam, step: int, extra: dict | None = None) -> None:
    """``.npz`` archive: JSON header (version, sizes, step, Adam hyperparameters,
    free-form ``extra``) plus every array at full precision."""
    header = {
        "version": CHECKPOINT_VERSION,
        "sizes": list(online.sizes),
        "step": int(step),
        "adam": {"lr": adam.lr, "beta1": adam.beta1, "beta2": adam.beta2, "eps": adam.eps, "t": adam.t},
        "extra": extra or {},
    }
    arrays = {"header": np.frombuffer(json.dumps(header).encode(), dtype=np.uint8)}
    for name, group in (("online", online.params), ("target", target.params), ("adam_m", adam.m), ("adam_v", adam.v)):
        for i, p in enumerate(group):
            arrays[f"{name}_{i}"] = p
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_checkpoint(path):
    """Inverse of :func:`save_checkpoint` -> (online, target, adam, step, extra)."""
    with np.load(path) as data:
        header = json.loads(data["header"].tobytes().decode())
        if header.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {header.get('version')}")
        sizes = header["sizes"]
        n = 2 * (len(sizes) - 1)
        online, target = MLP(sizes), MLP(sizes)
        online.params = [data[f"online_{i}"].copy() for i in range(n)]
        target.params = [data[f"target_{i}"].copy() for i in range(n)]
        a = header["adam"]
        adam = Adam(online.params, a["lr"], a["beta1"], a["beta2"], a["eps"])
        adam.t = a["t"]
        adam.m = [data[f"adam_m_{i}"].copy() for i in range(n)]
        adam.v = [data[f"adam_v_{i}"].copy() for i in range(n)]
    return online, target, adam, header["step"], header["extra"]
