"""Hybrid Q-learning: class-aggregated Boltzmann action selection.

Per decision the action values of the current state are bracketed by
``[m, M]``, cut into ``J`` equal sub-intervals and every action is filed into
the class of the sub-interval its value falls in.  Each class gets a Boltzmann
weight and actions inside a class are equally likely.  The quantum selector
counts the classes, encodes the distribution on the simulated register and
measures it; the classical selector evaluates every action and samples the
same class-level distribution directly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .counting import CountingConfig, count_all_classes
from .encoder import REMAINDER_RULES, TargetDistribution, encode, sample_value
from .errors import GroverDistError, InconsistentCountsError, InvalidActionError, StalePartitionError

# tolerance when checking that values sit inside [m, M]
_RANGE_TOL = 1e-12


class TabularQ:
    """Lookup table of action values, one array per visited state."""

    def __init__(self, env, initial: float = 0.0):
        self._env = env
        self._initial = float(initial)
        self.table: dict[int, np.ndarray] = {}

    def values(self, s) -> np.ndarray:
        arr = self.table.get(s)
        if arr is None:
            arr = np.full(len(self._env.allowed_actions(s)), self._initial)
            self.table[s] = arr
        return arr

    def evaluate(self, s, a) -> float:
        return float(self.values(s)[a])

    def update(self, s, a, target: float, lr: float) -> None:
        vals = self.values(s)
        vals[a] += lr * (target - vals[a])


class LinearQ:
    """``Q(s, a) = theta . phi(s, a)`` over a fixed feature map."""

    def __init__(self, env, features: Callable[[int, int], np.ndarray], n_features: int):
        self._env = env
        self.features = features
        self.theta = np.zeros(n_features)

    @classmethod
    def one_hot(cls, env) -> "LinearQ":
        """Indicator features per (state, action); equivalent to a table."""
        index = {}
        for s in env.states:
            for a in range(len(env.allowed_actions(s))):
                index[(s, a)] = len(index)
        n = len(index)

        def phi(s, a):
            v = np.zeros(n)
            v[index[(s, a)]] = 1.0
            return v

        return cls(env, phi, n)

    def gradient(self, s, a) -> np.ndarray:
        return self.features(s, a)

    def evaluate(self, s, a) -> float:
        return float(self.theta @ self.features(s, a))

    def values(self, s) -> np.ndarray:
        return np.array([self.evaluate(s, a) for a in range(len(self._env.allowed_actions(s)))])

    def update(self, s, a, target: float, lr: float) -> None:
        phi = self.features(s, a)
        self.theta += lr * (target - self.theta @ phi) * phi


@dataclass(frozen=True)
class IntervalPartition:
    """Equal-width cut of ``[m, M]``; intervals are ``[lo, hi)`` except the last, which is closed."""

    m: float
    M: float
    boundaries: tuple[float, ...]

    @property
    def n_intervals(self) -> int:
        return len(self.boundaries) - 1

    @property
    def midpoints(self) -> np.ndarray:
        b = np.asarray(self.boundaries)
        return 0.5 * (b[:-1] + b[1:])


def partition_intervals(m: float, M: float, n_intervals: int) -> IntervalPartition:
    if n_intervals < 1:
        raise ValueError(f"need at least one interval, got {n_intervals}")
    if M < m:
        raise ValueError(f"max {M} below min {m}")
    if M == m:
        return IntervalPartition(float(m), float(M), (float(m), float(M)))
    b = np.linspace(m, M, n_intervals + 1)
    b[0], b[-1] = m, M
    return IntervalPartition(float(m), float(M), tuple(float(x) for x in b))


@dataclass(frozen=True)
class ClassAssignment:
    """Sub-interval label (0-based) of every action and the resulting classes."""

    labels: np.ndarray
    n_classes: int

    @property
    def classes(self) -> list[tuple[int, ...]]:
        return [tuple(np.flatnonzero(self.labels == j).tolist()) for j in range(self.n_classes)]

    @property
    def counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)


def classify_values(values: np.ndarray, p: IntervalPartition) -> ClassAssignment:
    values = np.asarray(values, dtype=float)
    span_tol = _RANGE_TOL * max(1.0, abs(p.m), abs(p.M))
    if values.size and (values.min() < p.m - span_tol or values.max() > p.M + span_tol):
        raise StalePartitionError(
            f"values in [{values.min():.6g}, {values.max():.6g}] fall outside [{p.m:.6g}, {p.M:.6g}]"
        )
    inner = np.asarray(p.boundaries[1:-1])
    labels = np.searchsorted(inner, values, side="right")
    return ClassAssignment(labels.astype(int), p.n_intervals)


def classify_actions(q, s, p: IntervalPartition) -> ClassAssignment:
    """File every action of ``s`` into the sub-interval holding its value."""
    return classify_values(q.values(s), p)


def class_probabilities(
    p: IntervalPartition,
    counts: Sequence[int],
    temperature: float,
    values: Optional[np.ndarray] = None,
    labels: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Boltzmann weight per class, normalised.

    By default a class weighs ``|C_j| * exp(mid_j / T)``, which needs only the
    class sizes and the interval bounds.  Passing ``values`` and ``labels``
    switches to the exact sum ``sum_{a in C_j} exp(Q(a) / T)``; that needs
    every action value and is meant for comparison runs only.
    """
    counts = np.asarray(counts, dtype=float)
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    if (counts < 0).any() or counts.sum() < 1:
        raise ValueError(f"class counts {counts.tolist()} must be non-negative with a positive total")
    if values is not None:
        values = np.asarray(values, dtype=float)
        labels = np.asarray(labels)
        logw = np.full(counts.size, -np.inf)
        for j in range(counts.size):
            sel = values[labels == j] / temperature
            if sel.size:
                top = sel.max()
                logw[j] = top + math.log(np.exp(sel - top).sum())
    else:
        with np.errstate(divide="ignore"):
            logw = np.log(counts) + p.midpoints / temperature
    logw = logw - logw.max()
    w = np.exp(logw)
    w[counts == 0] = 0.0
    return w / w.sum()


def per_action_probabilities(assign: ClassAssignment, class_probs: np.ndarray) -> np.ndarray:
    """Spread every class probability evenly over its members."""
    out = np.zeros(assign.labels.size)
    for j in range(assign.n_classes):
        members = assign.labels == j
        if members.any():
            out[members] = class_probs[j] / members.sum()
    return out


def exponential_schedule(t0: float = 1.0, t_min: float = 0.05):
    """Temperature decaying geometrically from ``t0`` to ``t_min`` over the run."""
    if t0 <= 0 or t_min <= 0:
        raise ValueError("temperatures must be positive")

    def schedule(episode: int, n_episodes: int) -> float:
        if n_episodes <= 1:
            return t0
        return t0 * (t_min / t0) ** (episode / (n_episodes - 1))

    return schedule


@dataclass
class PolicyConfig:
    n_intervals: int = 4
    t0: float = 1.0
    t_min: float = 0.1
    selector: str = "quantum"
    # the plane reduction gives the same outcome distribution at a fraction of the cost
    counting: CountingConfig = field(default_factory=lambda: CountingConfig(backend="subspace"))
    weighting: str = "midpoint"
    # heaviest classes first so low-value classes can fall below their uniform share
    remainder: str = "least-likely"
    max_count_retries: int = 3

    def __post_init__(self):
        if self.n_intervals < 1:
            raise ValueError("n_intervals must be >= 1")
        if self.t0 <= 0 or self.t_min <= 0:
            raise ValueError("temperatures must be positive")
        if self.selector not in ("quantum", "classical"):
            raise ValueError(f"unknown selector {self.selector!r}")
        if self.weighting not in ("midpoint", "exact"):
            raise ValueError(f"unknown weighting {self.weighting!r}")
        if self.remainder not in REMAINDER_RULES:
            raise ValueError(f"unknown remainder rule {self.remainder!r}")
        if self.max_count_retries < 0:
            raise ValueError("max_count_retries must be >= 0")

    def temperature(self, episode: int, n_episodes: int) -> float:
        return exponential_schedule(self.t0, self.t_min)(episode, n_episodes)


@dataclass
class TrainingConfig:
    learning_rate: float = 0.5
    discount: float = 0.9
    episodes: int = 500
    max_steps: int = 100
    seed: int = 0
    # optimistic start values keep rarely tried actions in the top class
    initial_q: float = 0.0

    def __post_init__(self):
        if not 0 <= self.learning_rate <= 1:
            raise ValueError("learning_rate must lie in [0, 1]")
        if not 0 <= self.discount < 1:
            raise ValueError("discount must lie in [0, 1)")
        if self.episodes < 0 or self.max_steps < 1:
            raise ValueError("episodes must be >= 0 and max_steps >= 1")


@dataclass
class SelectionStats:
    """Cost of one decision.

    ``j_calls`` charges one class-oracle call per oracle application of the
    encoding plus one per counting invocation.  The controlled Grover powers
    inside counting are tallied apart in ``counting_oracle_calls``, and the
    classical min/max scan that fixes ``[m, M]`` in ``minmax_scan_calls``.
    """

    n_actions: int = 0
    j_calls: int = 0
    grover_iterations: int = 0
    counting_invocations: int = 0
    counting_oracle_calls: int = 0
    q_calls: int = 0
    minmax_scan_calls: int = 0
    max_class_error: float = 0.0
    infeasible_steps: int = 0
    count_retries: int = 0


_COUNTERS = (
    "j_calls",
    "grover_iterations",
    "counting_invocations",
    "counting_oracle_calls",
    "q_calls",
    "minmax_scan_calls",
    "infeasible_steps",
    "count_retries",
)


@dataclass
class RunStats:
    episode_returns: list = field(default_factory=list)
    episode_lengths: list = field(default_factory=list)
    decisions: int = 0
    j_calls: int = 0
    grover_iterations: int = 0
    counting_invocations: int = 0
    counting_oracle_calls: int = 0
    q_calls: int = 0
    minmax_scan_calls: int = 0
    infeasible_steps: int = 0
    count_retries: int = 0
    # (n_actions, j_calls, max_class_error) per decision
    selection_log: list = field(default_factory=list)
    # per-episode counter increments, one dict per episode
    episode_counts: list = field(default_factory=list)
    q: object = None

    def record(self, d: SelectionStats) -> None:
        self.decisions += 1
        for name in _COUNTERS:
            setattr(self, name, getattr(self, name) + getattr(d, name))
        self.selection_log.append((d.n_actions, d.j_calls, d.max_class_error))

    @property
    def mean_selection_error(self) -> float:
        if not self.selection_log:
            return 0.0
        return float(np.mean([e for _, _, e in self.selection_log]))

    def counters(self) -> dict:
        return {"decisions": self.decisions, **{name: getattr(self, name) for name in _COUNTERS}}

    def totals(self) -> dict:
        out = {"episodes": len(self.episode_returns), "decisions": self.decisions}
        out.update({name: getattr(self, name) for name in _COUNTERS})
        out["mean_selection_error"] = self.mean_selection_error
        return out


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def _class_setup(values: np.ndarray, n_intervals: int):
    part = partition_intervals(float(values.min()), float(values.max()), n_intervals)
    return part, classify_values(values, part)


def select_action_classical(s, q, policy: PolicyConfig, rng_seed, temperature: Optional[float] = None):
    """Evaluate every action, build the class distribution and sample it."""
    rng = _rng(rng_seed)
    values = np.asarray(q.values(s), dtype=float)
    n = values.size
    stats = SelectionStats(n_actions=n, q_calls=n)
    if n == 1:
        return 0, stats
    temp = policy.t_min if temperature is None else temperature
    part, assign = _class_setup(values, policy.n_intervals)
    counts = assign.counts
    exact = (values, assign.labels) if policy.weighting == "exact" else (None, None)
    probs = class_probabilities(part, counts, temp, *exact)
    per_action = per_action_probabilities(assign, probs)
    return int(rng.choice(n, p=per_action)), stats


def quantum_distribution(s, q, policy: PolicyConfig, rng_seed, temperature: Optional[float] = None):
    """Run the quantum pipeline up to the encoded register.

    Returns ``(encoded_state, stats)``; ``encoded_state`` is None for a
    single-action state.
    """
    rng = _rng(rng_seed)
    values = np.asarray(q.values(s), dtype=float)
    n = values.size
    stats = SelectionStats(n_actions=n)
    if n == 1:
        return None, stats
    temp = policy.t_min if temperature is None else temperature
    stats.minmax_scan_calls = n
    part, assign = _class_setup(values, policy.n_intervals)
    classes = assign.classes

    for attempt in range(policy.max_count_retries + 1):
        try:
            counted = count_all_classes(n, classes, policy.counting, rng)
        except InconsistentCountsError:
            counted = None
        stats.counting_invocations += len(classes) - 1
        stats.counting_oracle_calls += (len(classes) - 1) * ((1 << policy.counting.bits_for(n)) - 1)
        if counted is not None:
            sizes = counted.sizes
            if all((sz > 0) == bool(c) for sz, c in zip(sizes, classes)):
                break
        stats.count_retries += 1
    else:
        raise InconsistentCountsError(f"class counts disagreed with the oracle {policy.max_count_retries + 1} times")

    exact = (values, assign.labels) if policy.weighting == "exact" else (None, None)
    probs = class_probabilities(part, sizes, temp, *exact)
    dist = TargetDistribution(n, tuple(classes), tuple(float(p) for p in probs))
    enc = encode(dist, remainder=policy.remainder, planning_sizes=sizes, strict=False)
    stats.grover_iterations = enc.total_grover_iterations
    stats.j_calls = stats.grover_iterations + stats.counting_invocations
    stats.max_class_error = enc.max_class_error
    stats.infeasible_steps = sum(not st.feasible for st in enc.plan.steps)
    return enc, stats


def select_action_quantum(s, q, policy: PolicyConfig, rng_seed, temperature: Optional[float] = None):
    """Count classes, encode their distribution, measure one action."""
    rng = _rng(rng_seed)
    enc, stats = quantum_distribution(s, q, policy, rng, temperature)
    if enc is None:
        return 0, stats
    return sample_value(enc, rng), stats


def td_update(q, s, a, reward: float, s_next, cfg: TrainingConfig, terminal: bool = False):
    """One-step Q-learning: move ``Q(s,a)`` toward ``r + gamma * max Q(s', .)``."""
    n = len(q.values(s))
    if not 0 <= a < n:
        raise InvalidActionError(f"action {a} not among the {n} actions of state {s}")
    bootstrap = 0.0 if terminal else float(np.max(q.values(s_next)))
    q.update(s, a, reward + cfg.discount * bootstrap, cfg.learning_rate)
    return q


def greedy_policy(q, env) -> dict:
    return {s: int(np.argmax(q.values(s))) for s in env.states if not env.is_terminal(s)}


def _with_context(exc: Exception, where: str) -> Exception:
    try:
        return type(exc)(f"{where}: {exc}")
    except TypeError:
        return exc


def train(env, policy: PolicyConfig, cfg: TrainingConfig, q=None) -> RunStats:
    """Run ``cfg.episodes`` episodes; the learned value function is left in ``stats.q``."""
    rng = np.random.default_rng(cfg.seed)
    q = TabularQ(env, cfg.initial_q) if q is None else q
    stats = RunStats(q=q)
    select = select_action_quantum if policy.selector == "quantum" else select_action_classical
    for episode in range(cfg.episodes):
        temp = policy.temperature(episode, cfg.episodes)
        before = stats.counters()
        s = env.reset(rng)
        total = 0.0
        steps = 0
        for steps in range(1, cfg.max_steps + 1):
            try:
                a, d = select(s, q, policy, rng, temp)
            except GroverDistError as exc:
                raise _with_context(exc, f"episode {episode}, step {steps}") from exc
            stats.record(d)
            s2, reward = env.step(s, a, rng)
            done = env.is_terminal(s2)
            td_update(q, s, a, reward, s2, cfg, terminal=done)
            total += reward
            s = s2
            if done:
                break
        stats.episode_returns.append(total)
        stats.episode_lengths.append(steps)
        stats.episode_counts.append({k: v - before[k] for k, v in stats.counters().items()})
    return stats
