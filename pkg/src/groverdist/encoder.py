"""Sequential encoding of a class-level probability distribution on the simulator.

Each non-remainder class is amplified with conditional Grover iterates for the
planned number of iterations and then ticked onto ancilla 0, which freezes its
amplitudes.  Whatever stays on ancilla 1 at the end is the remainder class.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import statevector as sv
from .errors import (
    InconsistentCountsError,
    InfeasibleTargetError,
    NormalizationError,
    OvershootError,
    PartitionError,
    ExhaustedBranchError,
)
from .planner import EncodingPlan, PlannerState, advance, link_steps, plan_encoding, plan_step, scan_probabilities

SUM_TOL = 1e-12

Observer = Callable[[sv.StateVector, str, int], None]


@dataclass(frozen=True)
class TargetDistribution:
    """Disjoint classes covering ``range(n_values)`` and one target per class."""

    n_values: int
    classes: tuple[tuple[int, ...], ...]
    class_targets: tuple[float, ...]

    @classmethod
    def build(cls, n_values: int, classes: Sequence[Sequence[int]], targets: Sequence[float]):
        """Create a distribution; if one target fewer than classes is given the last is implied."""
        classes = tuple(tuple(sorted(int(k) for k in c)) for c in classes)
        targets = [float(p) for p in targets]
        if len(targets) == len(classes) - 1:
            targets.append(1.0 - sum(targets))
        if len(targets) != len(classes):
            raise NormalizationError(
                f"{len(targets)} targets given for {len(classes)} classes"
            )
        return cls(int(n_values), classes, tuple(targets))

    @classmethod
    def from_sizes(cls, sizes: Sequence[int], targets: Sequence[float]):
        """Contiguous classes of the given sizes."""
        bounds = np.cumsum([0, *sizes])
        classes = [range(bounds[i], bounds[i + 1]) for i in range(len(sizes))]
        return cls.build(int(bounds[-1]), classes, targets)

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(c) for c in self.classes)

    def per_state_targets(self) -> np.ndarray:
        out = np.zeros(self.n_values)
        for members, p in zip(self.classes, self.class_targets):
            if members:
                out[list(members)] = p / len(members)
        return out


REMAINDER_RULES = ("last", "largest", "least-likely")


def remainder_index(dist: TargetDistribution, remainder: str = "last") -> int:
    """Class left on ancilla 1: the last, the largest or the least likely non-empty class."""
    nonempty = [j for j, c in enumerate(dist.classes) if c]
    if not nonempty:
        raise PartitionError("every class is empty")
    if remainder == "last":
        return nonempty[-1]
    if remainder == "largest":
        # ties resolve to the later class so the default convention is kept
        return max(nonempty, key=lambda j: (len(dist.classes[j]), j))
    if remainder == "least-likely":
        return min(nonempty, key=lambda j: (dist.class_targets[j], -j))
    raise ValueError(f"unknown remainder rule {remainder!r}")


def encoding_order(dist: TargetDistribution, remainder: str = "last") -> list[int]:
    """Class ids in the order they are encoded; the remainder comes last.

    ``least-likely`` also encodes the other classes from the most to the
    least likely.  Amplification can only raise a class above its uniform
    share, so putting the heavy classes first lets the light ones end up
    below it.
    """
    rem = remainder_index(dist, remainder)
    head = [j for j, c in enumerate(dist.classes) if c and j != rem]
    if remainder == "least-likely":
        head.sort(key=lambda j: (-dist.class_targets[j], j))
    return head + [rem]


def _check_partition(dist: TargetDistribution) -> None:
    if dist.n_values < 1:
        raise PartitionError("n_values must be >= 1")
    seen = np.zeros(dist.n_values, dtype=int)
    for j, members in enumerate(dist.classes):
        for k in members:
            if not 0 <= k < dist.n_values:
                raise PartitionError(f"class {j} member {k} outside [0, {dist.n_values})")
            seen[k] += 1
    if (seen > 1).any():
        raise PartitionError(f"classes overlap at indices {np.flatnonzero(seen > 1).tolist()}")
    if (seen == 0).any():
        raise PartitionError(f"indices {np.flatnonzero(seen == 0).tolist()} belong to no class")


def validate_targets(dist: TargetDistribution, remainder: str = "last") -> EncodingPlan:
    """Raise on a malformed distribution, otherwise return the dry-run plan."""
    _check_partition(dist)
    targets = np.asarray(dist.class_targets)
    if (targets < 0).any():
        raise NormalizationError(f"negative class target in {dist.class_targets}")
    if abs(targets.sum() - 1.0) > SUM_TOL:
        raise NormalizationError(f"class targets sum to {targets.sum():.15g}, not 1")
    for members, p in zip(dist.classes, dist.class_targets):
        if not members and p > 0:
            raise InfeasibleTargetError("an empty class cannot carry probability")
    try:
        return _plan(dist, encoding_order(dist, remainder), None, strict=True)
    except (OvershootError, ExhaustedBranchError) as exc:
        raise InfeasibleTargetError(f"step {exc.step}: {exc}") from exc


def _plan(dist, order, planning_sizes, strict, max_iterations=None) -> EncodingPlan:
    if planning_sizes is None:
        sizes = [len(dist.classes[j]) for j in order]
    else:
        sizes = [int(planning_sizes[j]) for j in order[:-1]]
        sizes.append(dist.n_values - sum(sizes))
        if any(s < 1 for s in sizes):
            raise InconsistentCountsError(f"class counts {list(planning_sizes)} cannot drive a plan")
    targets = [dist.class_targets[j] for j in order]
    return plan_encoding(dist.n_values, sizes, targets, max_iterations=max_iterations, strict=strict)


@dataclass(frozen=True)
class EncodedState:
    dist: TargetDistribution
    state: sv.StateVector
    plan: EncodingPlan
    order: tuple[int, ...]
    per_state: np.ndarray
    per_class: np.ndarray

    @property
    def remainder(self) -> int:
        return self.order[-1]

    @property
    def class_errors(self) -> np.ndarray:
        return np.abs(self.per_class - np.asarray(self.dist.class_targets))

    @property
    def max_class_error(self) -> float:
        return float(self.class_errors.max())

    @property
    def t_f(self) -> dict[int, int]:
        """Grover iterations used for each encoded class id."""
        return {j: s.t_f for j, s in zip(self.order, self.plan.steps)}

    @property
    def total_grover_iterations(self) -> int:
        return self.plan.total_grover_iterations


def encode(
    dist: TargetDistribution,
    remainder: str = "last",
    planning_sizes: Optional[Sequence[int]] = None,
    strict: bool = True,
    max_iterations: Optional[int] = None,
    observer: Optional[Observer] = None,
) -> EncodedState:
    """Run the sequential amplify-then-tick schedule on the simulator.

    ``planning_sizes`` replaces the true class sizes when choosing iteration
    counts (the quantum pipeline only knows counted sizes); oracles always
    mark the true members.  ``observer`` is called after every operator with
    ``(state, operator_name, step)``.
    """
    order = encoding_order(dist, remainder)
    plan = _plan(dist, order, planning_sizes, strict, max_iterations)

    state = sv.new_uniform(dist.n_values)
    if observer is not None:
        observer(state, "init", 0)
    for step_no, (j, step) in enumerate(zip(order[:-1], plan.steps), start=1):
        marked = sv.MarkedSet.of(dist.classes[j], dist.n_values)
        for _ in range(step.t_f):
            state = sv.apply_conditional_grover(state, marked)
            if observer is not None:
                observer(state, "grover", step_no)
        if observer is not None:
            for k in marked:
                state = sv.apply_tick(state, k)
                observer(state, "tick", step_no)
        else:
            state = sv.apply_tick_many(state, marked)

    per_state, per_class = _achieved(dist, state, order[-1])
    return EncodedState(dist, state, plan, tuple(order), per_state, per_class)


def _achieved(dist: TargetDistribution, state: sv.StateVector, rem: int):
    probs = sv.probabilities(state)
    per_state = probs[:, 0].copy()
    members = list(dist.classes[rem])
    per_state[members] += probs[:, 1].sum() / len(members)
    per_class = np.array([per_state[list(c)].sum() if c else 0.0 for c in dist.classes])
    return per_state, per_class


def achieved_distribution(enc: EncodedState) -> tuple[np.ndarray, np.ndarray]:
    """``(per_class, per_state)`` probabilities under the sampling rule of :func:`sample_value`."""
    return enc.per_class.copy(), enc.per_state.copy()


def sample_value(enc: EncodedState, rng_seed) -> int:
    """Measure the ancilla; on 1 return a uniformly chosen member of the remainder class."""
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    k, y = sv.sample(enc.state, rng)
    if y == 0:
        return k
    members = enc.dist.classes[enc.remainder]
    return int(members[rng.integers(len(members))])


def sample_values(enc: EncodedState, n_samples: int, rng_seed) -> np.ndarray:
    """Vectorised :func:`sample_value` for ``n_samples`` independent shots."""
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    p = sv.probabilities(enc.state).reshape(-1)
    flat = rng.choice(p.size, size=n_samples, p=p / p.sum())
    k, y = flat // 2, flat % 2
    members = np.asarray(enc.dist.classes[enc.remainder])
    k = np.where(y == 1, members[rng.integers(len(members), size=n_samples)], k)
    return k


def class_error_report(enc: EncodedState) -> list[dict]:
    """One row per class: size, target, achieved, error and the iterations spent on it."""
    t_f = enc.t_f
    rows = []
    for j, members in enumerate(enc.dist.classes):
        rows.append(
            {
                "class_id": j + 1,
                "size": len(members),
                "role": "remainder" if j == enc.remainder else ("encoded" if members else "empty"),
                "target": enc.dist.class_targets[j],
                "achieved": float(enc.per_class[j]),
                "abs_error": float(enc.class_errors[j]),
                "t_f": t_f.get(j, 0),
            }
        )
    return rows


def ideal_per_state_error(enc: EncodedState) -> float:
    return float(np.abs(enc.per_state - enc.dist.per_state_targets()).max())



def reachable_targets(
    n_values: int, n_classes: int, class_size, fractions: Sequence[float]
) -> TargetDistribution:
    """Targets placed at given fractions of each class's reachable range.

    The first ``n_classes - 1`` classes hold ``class_size`` contiguous values
    (one size for all, or a list with one size per class) and the remainder
    takes the rest.  Class ``i`` gets the target
    ``lo + fractions[i] * (hi - lo)``, where ``lo`` is its current probability
    and ``hi`` the lower of its peak reachable probability and twice an even
    share of the mass left, so later classes are not starved.  The same
    fractions at different ``N`` describe the same distribution shape.
    """
    if n_classes < 2:
        raise ValueError("need at least one encoded class plus the remainder")
    head = [class_size] * (n_classes - 1) if np.isscalar(class_size) else [int(c) for c in class_size]
    if len(head) != n_classes - 1 or min(head) < 1 or sum(head) >= n_values:
        raise ValueError(f"encoded class sizes {head} do not fit {n_classes - 1} classes in N={n_values}")
    if len(fractions) != n_classes - 1:
        raise ValueError(f"need {n_classes - 1} fractions, got {len(fractions)}")
    sizes = head + [n_values - sum(head)]
    state = at = PlannerState.uniform(n_values, head[0])
    targets = []
    for i, (u, r) in enumerate(zip(fractions, head)):
        if i > 0:
            state = link_steps(at, r)
        probs = scan_probabilities(state) * r
        lo, hi = float(probs[0]), float(probs.max())
        hi = max(lo, min(hi, 2.0 * state.b**2 / (n_classes - i)))
        target = lo + float(u) * (hi - lo)
        targets.append(target)
        at = advance(state, plan_step(state, target / r, class_id=i + 1).t_f)
    targets.append(1.0 - sum(targets))
    return TargetDistribution.from_sizes(sizes, targets)


def random_reachable_targets(
    n_values: int, n_classes: int, class_size, rng_seed
) -> TargetDistribution:
    """:func:`reachable_targets` with uniform random fractions.

    Exactly ``n_classes - 1`` uniforms are drawn whatever ``N`` is, so one
    seed yields the same distribution shape at every ``N``.  Targets fall
    between iteration grid points, which is what makes the encoding error
    non-zero.
    """
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    return reachable_targets(n_values, n_classes, class_size, rng.uniform(size=n_classes - 1))
