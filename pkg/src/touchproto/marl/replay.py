"""Transition records and the ring-buffer replay memory."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class Transition:
    state: np.ndarray
    action: np.ndarray
    reward: float
    next_state: np.ndarray
    done: bool
    peer_action: np.ndarray | None = None  # interface action logged for the user's estimator
    env_state: np.ndarray | None = None       # privileged state for the centralized critic
    next_env_state: np.ndarray | None = None
    bootstrap: float | None = None  # n-step: gamma^k * (1 - done_k); reward is the
                                    # discounted k-step sum and next_* are k ahead


class ReplayMemory:
    """Fixed-capacity ring buffer; sampling is uniform over current contents."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = int(capacity)
        self.count = 0
        self._buf = None

    def __len__(self) -> int:
        return min(self.count, self.capacity)

    def _alloc(self, tr: Transition):
        def col(dim):
            return np.zeros((self.capacity, dim), dtype=np.float32)
        self._buf = {
            "state": col(len(tr.state)),
            "action": col(len(tr.action)),
            "reward": np.zeros(self.capacity, dtype=np.float32),
            "next_state": col(len(tr.next_state)),
            "done": np.zeros(self.capacity, dtype=np.float32),
        }
        if tr.peer_action is not None:
            self._buf["peer_action"] = col(len(tr.peer_action))
        if tr.env_state is not None:
            self._buf["env_state"] = col(len(tr.env_state))
            self._buf["next_env_state"] = col(len(tr.next_env_state))
        if tr.bootstrap is not None:
            self._buf["bootstrap"] = np.zeros(self.capacity, dtype=np.float32)

    def push(self, tr: Transition):
        if not np.isfinite(tr.reward):
            raise ValueError("non-finite reward")
        if self._buf is None:
            self._alloc(tr)
        i = self.count % self.capacity
        self._buf["state"][i] = tr.state
        self._buf["action"][i] = tr.action
        self._buf["reward"][i] = tr.reward
        self._buf["next_state"][i] = tr.next_state
        self._buf["done"][i] = float(tr.done)
        if "peer_action" in self._buf:
            if tr.peer_action is None:
                raise ValueError("transition missing peer_action for this memory")
            self._buf["peer_action"][i] = tr.peer_action
        if "env_state" in self._buf:
            if tr.env_state is None or tr.next_env_state is None:
                raise ValueError("transition missing env_state for this memory")
            self._buf["env_state"][i] = tr.env_state
            self._buf["next_env_state"][i] = tr.next_env_state
        if "bootstrap" in self._buf:
            if tr.bootstrap is None:
                raise ValueError("transition missing bootstrap for this memory")
            self._buf["bootstrap"][i] = tr.bootstrap
        self.count += 1

    def sample(self, n: int, rng: np.random.Generator):
        """Uniform sample with replacement; flags when memory holds less than n."""
        size = len(self)
        if size == 0:
            raise ValueError("cannot sample from an empty replay memory")
        idx = rng.integers(0, size, size=n)
        batch = {k: v[idx] for k, v in self._buf.items()}
        batch["undersized"] = size < n
        return batch
