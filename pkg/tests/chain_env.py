"""Deterministic 5-state chain MDP with a tabular value-iteration oracle."""

import numpy as np


class ChainEnv:
    """Move left/right on states 0..4; reaching state 4 pays 1 and ends."""

    n_states = 5
    n_actions = 2
    gamma = 0.9

    def __init__(self):
        self.state = 0
        self.duration = 0.0

    def _obs(self):
        v = np.zeros(self.n_states, dtype=np.float32)
        v[self.state] = 1.0
        return v

    def reset(self, rng):
        self.state = 0
        self.duration = 0.0
        return self._obs()

    def step(self, action):
        self.state = (
            min(self.state + 1, self.n_states - 1)
            if action == 1
            else max(self.state - 1, 0)
        )
        self.duration += 1.0
        done = self.state == self.n_states - 1
        reward = 1.0 if done else -0.05
        if self.duration >= 30:
            done = True
        return self._obs(), reward, done

    def q_star(self):
        q = np.zeros((self.n_states, self.n_actions))
        for _ in range(500):
            v = q.max(axis=1)
            new = np.zeros_like(q)
            for s in range(self.n_states - 1):
                for a in (0, 1):
                    s2 = min(s + 1, self.n_states - 1) if a == 1 else max(s - 1, 0)
                    terminal = s2 == self.n_states - 1
                    r = 1.0 if terminal else -0.05
                    new[s, a] = r + (0.0 if terminal else self.gamma * v[s2])
            q = new
        return q
