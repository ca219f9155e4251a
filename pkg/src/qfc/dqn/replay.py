"""Prioritized replay buffer on a binary sum tree.

Sampling probability follows p = (min(|L|, L_max) + p_eps)^alpha with L
the last training loss of the entry; importance weights are
w = (N P(i))^-beta normalized by the batch maximum.  When the buffer is
full, new data preferentially evicts a pre-sorted pool holding the
lowest-loss 1% of entries; otherwise eviction is uniform.
"""

from dataclasses import dataclass

import numpy as np


class SumTree:
    """Binary partial-sum tree over `capacity` leaf priorities.

    Internal nodes occupy indices 1..capacity-1 of a flat array (index 0
    unused); leaf i lives at base + i.  The capacity is rounded up to a
    power of two internally.
    """

    def __init__(self, capacity: int):
        self.capacity = capacity
        self._base = 1
        while self._base < capacity:
            self._base *= 2
        self.nodes = np.zeros(2 * self._base)

    @property
    def total(self) -> float:
        return float(self.nodes[1])

    def priority(self, index: int) -> float:
        return float(self.nodes[self._base + index])

    def update(self, index: int, priority: float) -> None:
        if not 0 <= index < self.capacity:
            raise IndexError(index)
        node = self._base + index
        delta = priority - self.nodes[node]
        while node >= 1:
            self.nodes[node] += delta
            node //= 2

    def sample(self, u: float) -> int:
        """Leaf whose prefix-sum interval contains u, 0 <= u < total."""
        if not 0 <= u < self.total:
            raise ValueError(f"u={u} outside [0, {self.total})")
        node = 1
        while node < self._base:
            left = 2 * node
            if u < self.nodes[left]:
                node = left
            else:
                u -= self.nodes[left]
                node = left + 1
        return node - self._base

    def sample_batch(self, us: np.ndarray) -> np.ndarray:
        """Vectorized descent for many draws at once."""
        us = np.asarray(us, dtype=float).copy()
        nodes = np.ones(len(us), dtype=np.int64)
        while nodes[0] < self._base:
            left = 2 * nodes
            left_sums = self.nodes[left]
            go_left = us < left_sums
            nodes = np.where(go_left, left, left + 1)
            us = np.where(go_left, us, us - left_sums)
        return nodes - self._base

    def consistency_error(self) -> float:
        """Max |node - sum(children)| over internal nodes."""
        internal = self.nodes[1 : self._base]
        children = self.nodes[2 : 2 * self._base].reshape(-1, 2).sum(axis=1)
        return float(np.max(np.abs(internal - children)))


def priority_and_weight(
    loss: float, alpha: float, beta: float, n: int, total: float,
    p_eps: float = 0.001, l_max: float = 10.0,
):
    """(unnormalized priority, importance weight before batch normalization).

    total is the sum-tree total used to normalize P(i) = p_i / total.
    """
    p = (min(abs(loss), l_max) + p_eps) ** alpha
    if total <= 0:
        return p, 1.0
    prob = p / total
    w = (n * prob) ** (-beta)
    return p, w


@dataclass
class ReplaySettings:
    alpha: float = 0.4
    beta0: float = 0.2
    beta_increment: float = 0.001
    p_eps: float = 0.001
    l_max: float = 10.0
    replace_low_loss: float = 0.9
    low_loss_fraction: float = 0.01


class ReplayBuffer:
    """Fixed-capacity transition store with prioritized sampling."""

    def __init__(self, capacity: int, settings: ReplaySettings, rng: np.random.Generator):
        self.capacity = capacity
        self.settings = settings
        self.rng = rng
        self.tree = SumTree(capacity)
        self.entries = [None] * capacity
        self.losses = np.zeros(capacity)
        self.size = 0
        self._next = 0
        self._low_pool: list = []

    def __len__(self) -> int:
        return self.size

    def _priority(self, loss: float) -> float:
        s = self.settings
        return (min(abs(loss), s.l_max) + s.p_eps) ** s.alpha

    def _eviction_index(self) -> int:
        s = self.settings
        if self.rng.random() < s.replace_low_loss:
            if not self._low_pool:
                count = max(1, int(s.low_loss_fraction * self.capacity))
                order = np.argsort(self.losses[: self.size], kind="stable")
                self._low_pool = list(order[:count][::-1])  # pop lowest first
            return int(self._low_pool.pop())
        return int(self.rng.integers(0, self.capacity))

    def add(self, entry, loss: float = None) -> int:
        """Insert an entry; evicts per the low-loss policy when full."""
        loss = self.settings.l_max if loss is None else loss
        if self.size < self.capacity:
            index = self._next
            self._next += 1
            self.size += 1
        else:
            index = self._eviction_index()
        self.entries[index] = entry
        self.losses[index] = loss
        self.tree.update(index, self._priority(loss))
        return index

    def sample(self, batch_size: int, beta: float):
        """(indices, entries, weights) by prioritized proportional sampling."""
        if self.size == 0:
            raise ValueError("cannot sample from an empty buffer")
        total = self.tree.total
        us = self.rng.random(batch_size) * total
        indices = self.tree.sample_batch(us)
        indices = np.minimum(indices, self.size - 1)
        probs = np.array([self.tree.priority(int(i)) for i in indices]) / total
        weights = (self.size * probs) ** (-beta)
        weights = weights / np.max(weights)
        entries = [self.entries[int(i)] for i in indices]
        return indices, entries, weights

    def update_losses(self, indices, losses) -> None:
        # the low-loss eviction pool is intentionally not invalidated here:
        # it is consumed slot by slot and re-sorted only once exhausted
        for i, loss in zip(indices, losses):
            i = int(i)
            self.losses[i] = abs(loss)
            self.tree.update(i, self._priority(loss))
