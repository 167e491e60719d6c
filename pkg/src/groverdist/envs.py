"""Finite test environments and a value-iteration reference solver."""
from __future__ import annotations

from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from .errors import ConfigError

# up, right, down, left
MOVES = ((-1, 0), (0, 1), (1, 0), (0, -1))
ACTION_NAMES = ("up", "right", "down", "left")


class Environment(Protocol):
    """What the training loop needs from an environment.

    Actions of a state are addressed by their position in
    ``allowed_actions(s)``.
    """

    def reset(self, rng: np.random.Generator | None = None) -> int: ...

    def allowed_actions(self, s: int) -> Sequence[int]: ...

    def step(self, s: int, a: int, rng: np.random.Generator) -> tuple[int, float]: ...

    def is_terminal(self, s: int) -> bool: ...


class GridWorld:
    """Rectangular grid with walls; -1 per move, +10 for entering a goal cell.

    States are ``row * width + col``.  Moves into a wall or off the grid leave
    the agent in place.  With ``exploring_starts`` every episode begins in a
    uniformly drawn non-goal cell instead of the start cell.
    """

    def __init__(
        self,
        width,
        height,
        start=(0, 0),
        goals=None,
        walls=(),
        step_reward=-1.0,
        goal_reward=10.0,
        exploring_starts=False,
    ):
        if width < 1 or height < 1:
            raise ConfigError(f"grid must be at least 1x1, got {width}x{height}")
        self.width, self.height = int(width), int(height)
        goals = [(height - 1, width - 1)] if goals is None else list(goals)
        self.walls = frozenset(tuple(w) for w in walls)
        cells = [tuple(start), *goals, *self.walls]
        for r, c in cells:
            if not (0 <= r < self.height and 0 <= c < self.width):
                raise ConfigError(f"cell {(r, c)} outside the {width}x{height} grid")
        if tuple(start) in self.walls or any(g in self.walls for g in goals):
            raise ConfigError("start and goal cells cannot be walls")
        if not goals:
            raise ConfigError("grid needs at least one goal")
        self.start = self._id(*start)
        self.goals = frozenset(self._id(*g) for g in goals)
        self.step_reward = float(step_reward)
        self.goal_reward = float(goal_reward)
        self.exploring_starts = bool(exploring_starts)

    @classmethod
    def from_text(cls, text: str, **kwargs) -> "GridWorld":
        """Parse a layout: ``S`` start, ``G`` goal, ``#`` wall, ``.`` floor."""
        rows = [line.strip() for line in text.strip().splitlines() if line.strip()]
        if not rows:
            raise ConfigError("empty grid layout")
        width = len(rows[0])
        if any(len(r) != width for r in rows):
            raise ConfigError("grid rows have different lengths")
        start, goals, walls = None, [], []
        for i, row in enumerate(rows):
            for j, ch in enumerate(row):
                if ch == "S":
                    if start is not None:
                        raise ConfigError("grid has more than one start cell")
                    start = (i, j)
                elif ch == "G":
                    goals.append((i, j))
                elif ch == "#":
                    walls.append((i, j))
                elif ch != ".":
                    raise ConfigError(f"unknown grid character {ch!r}")
        if start is None:
            raise ConfigError("grid has no start cell")
        if not goals:
            raise ConfigError("grid has no goal cell")
        return cls(width, len(rows), start, goals, walls, **kwargs)

    @classmethod
    def from_file(cls, path, **kwargs) -> "GridWorld":
        return cls.from_text(Path(path).read_text(), **kwargs)

    def _id(self, r, c) -> int:
        return r * self.width + c

    def cell(self, s: int) -> tuple[int, int]:
        return divmod(s, self.width)

    @property
    def states(self) -> list[int]:
        return [s for s in range(self.width * self.height) if self.cell(s) not in self.walls]

    def reset(self, rng=None) -> int:
        if self.exploring_starts and rng is not None:
            free = [s for s in self.states if s not in self.goals]
            return free[int(rng.integers(len(free)))]
        return self.start

    def allowed_actions(self, s):
        return (0, 1, 2, 3)

    def is_terminal(self, s) -> bool:
        return s in self.goals

    def next_state(self, s: int, a: int) -> int:
        r, c = self.cell(s)
        dr, dc = MOVES[a]
        nr, nc = r + dr, c + dc
        if not (0 <= nr < self.height and 0 <= nc < self.width) or (nr, nc) in self.walls:
            return s
        return self._id(nr, nc)

    def step(self, s, a, rng=None):
        s2 = self.next_state(s, a)
        return s2, self.goal_reward if s2 in self.goals else self.step_reward

    def transitions(self, s, a):
        s2, reward = self.step(s, a)
        return [(1.0, s2, reward)]

    def render_policy(self, policy: dict) -> str:
        arrows = "^>v<"
        lines = []
        for r in range(self.height):
            row = []
            for c in range(self.width):
                s = self._id(r, c)
                if (r, c) in self.walls:
                    row.append("#")
                elif s in self.goals:
                    row.append("G")
                else:
                    row.append(arrows[policy[s]] if s in policy else "?")
            lines.append("".join(row))
        return "\n".join(lines)


class KArmedBandit:
    """Single-state bandit: pulling arm ``a`` pays ``means[a]`` plus bounded uniform noise."""

    def __init__(self, means, noise=0.1):
        self.means = np.asarray(means, dtype=float)
        if self.means.ndim != 1 or self.means.size < 1:
            raise ConfigError("bandit needs at least one arm")
        if noise < 0:
            raise ConfigError("noise amplitude must be non-negative")
        self.noise = float(noise)
        self._actions = tuple(range(self.means.size))

    @classmethod
    def dominant(cls, n_arms: int, rng: np.random.Generator, gap=0.5, noise=0.1) -> "KArmedBandit":
        """Arms with means in ``[0, 0.5)`` except one random arm lifted by ``gap``."""
        means = rng.uniform(0.0, 0.5, n_arms)
        means[rng.integers(n_arms)] = 0.5 + gap
        return cls(means, noise)

    @property
    def states(self):
        return [0]

    @property
    def best_arm(self) -> int:
        return int(np.argmax(self.means))

    def reset(self, rng=None):
        return 0

    def allowed_actions(self, s):
        return self._actions

    def is_terminal(self, s):
        return False

    def step(self, s, a, rng):
        return 0, float(self.means[a] + rng.uniform(-self.noise, self.noise))

    def transitions(self, s, a):
        return [(1.0, 0, float(self.means[a]))]


def value_iteration(env, discount: float, tol: float = 1e-12, max_sweeps: int = 100_000) -> dict:
    """Optimal action values ``{state: array over allowed actions}`` by value iteration."""
    states = list(env.states)
    v = {s: 0.0 for s in states}
    q = {}
    for _ in range(max_sweeps):
        delta = 0.0
        for s in states:
            if env.is_terminal(s):
                q[s] = np.zeros(len(env.allowed_actions(s)))
                continue
            qs = np.array(
                [
                    sum(p * (rew + (0.0 if env.is_terminal(s2) else discount * v[s2])) for p, s2, rew in env.transitions(s, a))
                    for a in env.allowed_actions(s)
                ]
            )
            q[s] = qs
            new = qs.max()
            delta = max(delta, abs(new - v[s]))
            v[s] = new
        if delta < tol:
            break
    return q


def optimal_actions(q_star: dict, s: int, tol: float = 1e-6) -> set[int]:
    qs = q_star[s]
    return set(np.flatnonzero(qs >= qs.max() - tol).tolist())
