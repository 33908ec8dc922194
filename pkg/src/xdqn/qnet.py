"""Online Q-network: a fully-connected ReLU MLP with hand-written
forward/backward passes and an Adam step on the importance-weighted squared
temporal-difference loss of the taken action."""
from __future__ import annotations

import logging
import struct

import numpy as np

log = logging.getLogger("xdqn.qnet")

_SAVE_MAGIC = b"XQN1"
_ADAM_B1, _ADAM_B2, _ADAM_EPS = 0.9, 0.999, 1e-8


class QNetwork:
    """State -> per-action Q-values. Forward passes are deterministic given
    the parameters; `td_step` requires exclusive access."""

    def __init__(self, state_dim, n_actions, hidden=(256, 256), rng=None,
                 clip_norm=10.0):
        self.state_dim = int(state_dim)
        self.n_actions = int(n_actions)
        self.dims = [self.state_dim, *[int(h) for h in hidden], self.n_actions]
        self.clip_norm = float(clip_norm)
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(self.dims[:-1], self.dims[1:]):
            if rng is None:
                w = np.zeros((fan_in, fan_out))
            else:
                w = rng.standard_normal((fan_in, fan_out)) * np.sqrt(2.0 / fan_in)
            self.weights.append(w)
            self.biases.append(np.zeros(fan_out))
        self._adam_m = [np.zeros_like(p) for p in self._params()]
        self._adam_v = [np.zeros_like(p) for p in self._params()]
        self._adam_t = 0
        self.skipped_steps = 0

    def _params(self):
        return [*self.weights, *self.biases]

    def copy(self):
        """Frozen parameter snapshot (used as the plain-DQN target)."""
        clone = QNetwork(self.state_dim, self.n_actions,
                         hidden=self.dims[1:-1], clip_norm=self.clip_norm)
        clone.weights = [w.copy() for w in self.weights]
        clone.biases = [b.copy() for b in self.biases]
        return clone

    # --- forward ----------------------------------------------------------

    def forward_batch(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.state_dim:
            raise ValueError(f"expected (n, {self.state_dim}) states, got {x.shape}")
        if not np.isfinite(x).all():
            raise ValueError("non-finite state input")
        a = x
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            a = np.maximum(a @ w + b, 0.0)
        return a @ self.weights[-1] + self.biases[-1]

    def forward(self, state):
        return self.forward_batch(np.asarray(state, dtype=np.float64)[None, :])[0]

    def greedy_action(self, state) -> int:
        # np.argmax takes the lowest index on ties
        return int(np.argmax(self.forward(state)))

    def epsilon_greedy_action(self, state, epsilon, rng) -> int:
        if not 0.0 <= epsilon <= 1.0:
            raise ValueError(f"epsilon must be in [0,1], got {epsilon}")
        if rng.random() < epsilon:
            return int(rng.integers(self.n_actions))
        return self.greedy_action(state)

    # --- training ---------------------------------------------------------

    def loss_and_grads(self, states, actions, targets, weights):
        """Importance-weighted squared TD loss and its analytic gradients.

        loss = mean_i w_i * (Q(s_i, a_i) - y_i)^2, gradient flowing only
        through the taken action's output.
        """
        states = np.asarray(states, dtype=np.float64)
        actions = np.asarray(actions, dtype=np.int64)
        targets = np.asarray(targets, dtype=np.float64)
        weights = np.asarray(weights, dtype=np.float64)
        if not np.isfinite(targets).all():
            raise ValueError("non-finite TD target")
        n = len(states)
        pre = []
        post = [states]
        a = states
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            z = a @ w + b
            pre.append(z)
            a = np.maximum(z, 0.0)
            post.append(a)
        out = a @ self.weights[-1] + self.biases[-1]

        rows = np.arange(n)
        diff = out[rows, actions] - targets
        loss = float(np.mean(weights * diff * diff))

        dout = np.zeros_like(out)
        dout[rows, actions] = 2.0 * weights * diff / n
        grads_w = [None] * len(self.weights)
        grads_b = [None] * len(self.biases)
        delta = dout
        for layer in range(len(self.weights) - 1, -1, -1):
            grads_w[layer] = post[layer].T @ delta
            grads_b[layer] = delta.sum(axis=0)
            if layer > 0:
                delta = (delta @ self.weights[layer].T) * (pre[layer - 1] > 0.0)
        return loss, [*grads_w, *grads_b]

    def td_step(self, batch, lr) -> float:
        """One Adam step on a minibatch of (transition, target, weight).

        Returns the pre-step loss. A non-finite gradient skips the step and
        is counted in ``skipped_steps``.
        """
        states = np.stack([t.state for t, _, _ in batch])
        actions = np.array([t.action for t, _, _ in batch], dtype=np.int64)
        targets = np.array([y for _, y, _ in batch])
        weights = np.array([w for _, _, w in batch])
        return self.td_step_arrays(states, actions, targets, weights, lr)

    def td_step_arrays(self, states, actions, targets, weights, lr) -> float:
        loss, grads = self.loss_and_grads(states, actions, targets, weights)
        if not all(np.isfinite(g).all() for g in grads):
            self.skipped_steps += 1
            log.warning("skipping td_step: non-finite gradient (incident %d)",
                        self.skipped_steps)
            return loss
        gnorm = np.sqrt(sum(float(np.sum(g * g)) for g in grads))
        if gnorm > self.clip_norm:
            scale = self.clip_norm / gnorm
            grads = [g * scale for g in grads]
        self._adam_t += 1
        t = self._adam_t
        for p, m, v, g in zip(self._params(), self._adam_m, self._adam_v, grads):
            m *= _ADAM_B1
            m += (1.0 - _ADAM_B1) * g
            v *= _ADAM_B2
            v += (1.0 - _ADAM_B2) * g * g
            mhat = m / (1.0 - _ADAM_B1 ** t)
            vhat = v / (1.0 - _ADAM_B2 ** t)
            p -= lr * mhat / (np.sqrt(vhat) + _ADAM_EPS)
        return loss

    def finite(self) -> bool:
        return all(np.isfinite(p).all() for p in self._params())

    # --- serialization ------------------------------------------------------

    def save(self, path):
        with open(path, "wb") as fh:
            fh.write(_SAVE_MAGIC)
            fh.write(struct.pack("<I", len(self.dims)))
            fh.write(struct.pack(f"<{len(self.dims)}I", *self.dims))
            for w, b in zip(self.weights, self.biases):
                fh.write(np.ascontiguousarray(w).tobytes())
                fh.write(b.tobytes())

    @classmethod
    def load(cls, path, expected_dims=None):
        with open(path, "rb") as fh:
            magic = fh.read(4)
            if magic != _SAVE_MAGIC:
                raise ValueError(f"not a q-network file (magic {magic!r})")
            (n_dims,) = struct.unpack("<I", fh.read(4))
            dims = list(struct.unpack(f"<{n_dims}I", fh.read(4 * n_dims)))
            if expected_dims is not None and dims != list(expected_dims):
                raise ValueError(
                    f"architecture mismatch: file has {dims}, expected {list(expected_dims)}"
                )
            net = cls(dims[0], dims[-1], hidden=dims[1:-1])
            for layer, (fan_in, fan_out) in enumerate(zip(dims[:-1], dims[1:])):
                w = np.frombuffer(fh.read(8 * fan_in * fan_out), dtype=np.float64)
                if w.size != fan_in * fan_out:
                    raise ValueError("truncated q-network file")
                net.weights[layer] = w.reshape(fan_in, fan_out).copy()
                b = np.frombuffer(fh.read(8 * fan_out), dtype=np.float64)
                if b.size != fan_out:
                    raise ValueError("truncated q-network file")
                net.biases[layer] = b.copy()
        return net
