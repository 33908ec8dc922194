"""Prioritized experience replay with a recency-window view for mimic refits.

Proportional prioritization over a sum-tree (O(log N) updates, stratified
sampling), plus uniform without-replacement sampling restricted to
transitions stored during the last K global steps.
"""
from __future__ import annotations

import struct

import numpy as np

from . import _kernels
from .core import Transition

_DUMP_MAGIC = b"XRB1"


class RecencyWindowError(RuntimeError):
    """Too few transitions inside the recency window; callers should defer
    the mimic update until the window fills."""


class ReplayBuffer:
    """Circular transition store with sum-tree priorities.

    Single-writer, single-reader; the trainer owns it exclusively. Sampled
    transition indices are global insertion sequence numbers, which makes
    staleness (eviction between sampling and the priority write-back)
    detectable.
    """

    def __init__(self, capacity, state_dim, priority_alpha=0.6,
                 priority_beta=0.4, priority_epsilon=0.01):
        if capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {capacity}")
        self.capacity = int(capacity)
        self.state_dim = int(state_dim)
        self.priority_alpha = float(priority_alpha)
        self.priority_beta = float(priority_beta)
        self.priority_epsilon = float(priority_epsilon)
        self._states = np.zeros((capacity, state_dim))
        self._actions = np.zeros(capacity, dtype=np.int64)
        self._rewards = np.zeros(capacity)
        self._next_states = np.zeros((capacity, state_dim))
        self._terminals = np.zeros(capacity, dtype=bool)
        self._stored_at = np.zeros(capacity, dtype=np.int64)
        # heap layout, root at 1, leaves at capacity..2*capacity-1
        self._sums = np.zeros(2 * capacity)
        self._maxs = np.zeros(2 * capacity)
        self.push_count = 0
        self.stale_skipped = 0

    def __len__(self):
        return min(self.push_count, self.capacity)

    @property
    def size(self):
        return len(self)

    @property
    def priority_floor(self):
        return self.priority_epsilon ** self.priority_alpha

    def total_priority(self):
        return float(self._sums[1])

    def max_priority(self):
        return float(self._maxs[1])

    def leaf_priorities(self):
        """Live leaf priorities by slot (audit/debug)."""
        return self._sums[self.capacity:self.capacity + len(self)].copy()

    def push(self, t: Transition, initial_priority: float = 0.0):
        """Store a transition, evicting the oldest when full.

        The stored priority is max(initial_priority, current max, floor) so
        fresh samples are drawn at least once.
        """
        if t.state.shape != (self.state_dim,):
            raise ValueError(
                f"transition state dim {t.state.shape} does not match "
                f"buffer dim ({self.state_dim},)"
            )
        slot = self.push_count % self.capacity
        self._states[slot] = t.state
        self._actions[slot] = t.action
        self._rewards[slot] = t.reward
        self._next_states[slot] = t.next_state
        self._terminals[slot] = t.terminal
        self._stored_at[slot] = t.stored_at
        priority = max(float(initial_priority), self.max_priority(), self.priority_floor)
        _kernels.sumtree_set(self._sums, self._maxs, self.capacity, slot, priority)
        self.push_count += 1

    def _transition(self, slot) -> Transition:
        return Transition(
            state=self._states[slot].copy(),
            action=int(self._actions[slot]),
            reward=float(self._rewards[slot]),
            next_state=self._next_states[slot].copy(),
            terminal=bool(self._terminals[slot]),
            stored_at=int(self._stored_at[slot]),
        )

    def _seq_of_slot(self, slot):
        return self.push_count - 1 - ((self.push_count - 1 - slot) % self.capacity)

    def sample_prioritized(self, batch, rng):
        """Stratified proportional sample.

        Returns a list of (index, transition, importance_weight); weights are
        (N * P(i))**-beta normalized by the batch maximum.
        """
        size = len(self)
        if batch > size:
            raise ValueError(f"batch {batch} exceeds buffer size {size}")
        total = self.total_priority()
        segment = total / batch
        targets = (np.arange(batch) + rng.random(batch)) * segment
        slots = _kernels.sumtree_find(self._sums, self.capacity, targets)
        # float roundoff at segment boundaries can land on an empty slot
        slots = np.minimum(slots, size - 1)
        probs = self._sums[self.capacity + slots] / total
        weights = (size * probs) ** (-self.priority_beta)
        weights = weights / weights.max()
        return [
            (self._seq_of_slot(int(s)), self._transition(int(s)), float(w))
            for s, w in zip(slots, weights)
        ]

    def update_priorities(self, indices, td_errors):
        """Write back |TD error|-based priorities for sampled indices.

        Indices evicted since sampling are skipped and counted in
        ``stale_skipped``.
        """
        oldest_live = self.push_count - len(self)
        for seq, delta in zip(indices, td_errors):
            if seq < 0 or seq >= self.push_count:
                raise ValueError(f"index {seq} was never issued")
            if seq < oldest_live:
                self.stale_skipped += 1
                continue
            slot = seq % self.capacity
            priority = (abs(float(delta)) + self.priority_epsilon) ** self.priority_alpha
            _kernels.sumtree_set(self._sums, self._maxs, self.capacity, slot, priority)

    # --- recency window --------------------------------------------------

    def _window_slots(self, window, now):
        size = len(self)
        live = self._stored_at[:size]
        return np.nonzero(live > now - window)[0]

    def recency_count(self, window, now):
        return int(len(self._window_slots(window, now)))

    def sample_recent_uniform(self, batch, window, now, rng):
        """Uniform without-replacement draw among transitions with
        stored_at > now - window."""
        slots = self._sample_recent_slots(batch, window, now, rng, prioritized=False)
        return [self._transition(int(s)) for s in slots]

    def sample_recent_arrays(self, batch, window, now, rng, prioritized=False):
        """Array view of a recency-window sample: (states, actions, rewards,
        next_states, terminals)."""
        slots = self._sample_recent_slots(batch, window, now, rng, prioritized)
        return (
            self._states[slots].copy(),
            self._actions[slots].copy(),
            self._rewards[slots].copy(),
            self._next_states[slots].copy(),
            self._terminals[slots].copy(),
        )

    def _sample_recent_slots(self, batch, window, now, rng, prioritized):
        eligible = self._window_slots(window, now)
        if len(eligible) < batch:
            raise RecencyWindowError(
                f"only {len(eligible)} transitions newer than step "
                f"{now - window}; need {batch} — defer the mimic update"
            )
        if prioritized:
            p = self._sums[self.capacity + eligible]
            return rng.choice(eligible, size=batch, replace=False, p=p / p.sum())
        return rng.choice(eligible, size=batch, replace=False)

    # --- debug dump -------------------------------------------------------

    def dump(self, path):
        """Flat binary record dump (oldest first) for offline inspection."""
        size = len(self)
        start = self.push_count - size
        with open(path, "wb") as fh:
            fh.write(_DUMP_MAGIC)
            fh.write(struct.pack("<IQQ", self.state_dim, size, self.push_count))
            for seq in range(start, self.push_count):
                slot = seq % self.capacity
                fh.write(self._states[slot].tobytes())
                fh.write(struct.pack("<qd", int(self._actions[slot]),
                                     float(self._rewards[slot])))
                fh.write(self._next_states[slot].tobytes())
                fh.write(struct.pack("<Bqd", int(self._terminals[slot]),
                                     int(self._stored_at[slot]),
                                     float(self._sums[self.capacity + slot])))


def load_dump(path):
    """Read a buffer dump; returns a list of (Transition, priority)."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _DUMP_MAGIC:
            raise ValueError(f"not a replay dump (magic {magic!r})")
        d, size, _ = struct.unpack("<IQQ", fh.read(20))
        records = []
        for _ in range(size):
            state = np.frombuffer(fh.read(8 * d), dtype=np.float64).copy()
            action, reward = struct.unpack("<qd", fh.read(16))
            next_state = np.frombuffer(fh.read(8 * d), dtype=np.float64).copy()
            terminal, stored_at, priority = struct.unpack("<Bqd", fh.read(17))
            records.append((
                Transition(state, action, reward, next_state,
                           bool(terminal), stored_at),
                priority,
            ))
    return records
