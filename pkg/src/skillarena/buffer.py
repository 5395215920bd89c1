"""Fixed-capacity transition store with FIFO eviction."""
from __future__ import annotations

import numpy as np

from .errors import UsageError


class ReplayBuffer:
    def __init__(self, capacity: int, obs_dim: int):
        if capacity <= 0 or obs_dim <= 0:
            raise UsageError("replay buffer capacity and obs_dim must be positive")
        self.capacity = capacity
        self.obs = np.zeros((capacity, obs_dim))
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity)
        self.next_obs = np.zeros((capacity, obs_dim))
        self.dones = np.zeros(capacity, dtype=bool)
        self.size = 0
        self._head = 0

    def add(self, obs, action: int, reward: float, next_obs, done: bool) -> None:
        i = self._head
        self.obs[i] = obs
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_obs[i] = next_obs
        self.dones[i] = done
        self._head = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator):
        """Uniform without replacement within the batch."""
        if batch_size > self.size:
            raise UsageError(
                f"cannot sample {batch_size} transitions from a buffer of {self.size}"
            )
        idx = rng.choice(self.size, size=batch_size, replace=False)
        return (
            self.obs[idx],
            self.actions[idx],
            self.rewards[idx],
            self.next_obs[idx],
            self.dones[idx],
        )
