"""Classical recursion that predicts the register during sequential amplification.

Between Grover iterations the ancilla-1 branch is summarised by four numbers:

* ``k_bar``  common amplitude of the currently marked states,
* ``l_bar``  mean amplitude of every other state,
* ``alpha``  common amplitude of states that were never marked so far,
* ``b``      weight of the whole ancilla-1 branch.

A Grover iterate rotates ``(sqrt(r) * k_bar, sqrt(N - r) * l_bar)`` by the
angle ``w = 2 * arcsin(sqrt(r / N))``, so the summary can be advanced without
simulating the register.  All amplitudes here are of the *normalised* branch
state; multiply by ``b`` to get register amplitudes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .errors import (
    ExhaustedBranchError,
    InvalidMarkedCountError,
    NotApplicableError,
    OvershootError,
)

# Branch weights below this are treated as exhausted.
_EXHAUSTED_TOL = 1e-14


@dataclass(frozen=True)
class PlannerState:
    n_values: int
    r: int
    k_bar: float
    l_bar: float
    alpha: float
    b: float = 1.0
    step: int = 1
    t: int = 0
    # never-marked states outside the current marked set
    n_untouched: int = 0

    @classmethod
    def uniform(cls, n_values: int, r: int) -> "PlannerState":
        """Summary of the freshly initialised register with ``r`` states marked for step 1."""
        if not 1 <= r <= n_values:
            raise InvalidMarkedCountError(f"r={r} must lie in [1, {n_values}]")
        a = 1.0 / math.sqrt(n_values)
        return cls(n_values, r, a, a, a, 1.0, 1, 0, n_values - r)

    @property
    def per_state_probability(self) -> float:
        return self.b**2 * self.k_bar**2


@dataclass(frozen=True)
class IterationBound:
    exact: float
    leading_order: float
    degenerate: bool = False


@dataclass(frozen=True)
class StepPlan:
    class_id: int
    r: int
    target_per_state_probability: float
    t_f: int
    predicted_k_bar: float
    predicted_l_bar: float
    predicted_alpha: float
    b: float
    achieved_per_state_probability: float
    abs_error: float
    feasible: bool = True

    @property
    def target_class_probability(self) -> float:
        return self.r * self.target_per_state_probability

    @property
    def achieved_class_probability(self) -> float:
        return self.r * self.achieved_per_state_probability

    @property
    def class_abs_error(self) -> float:
        return self.r * self.abs_error


@dataclass(frozen=True)
class EncodingPlan:
    """Schedule for one full encoding; the last class is the normalisation remainder."""

    n_values: int
    class_sizes: tuple[int, ...]
    class_targets: tuple[float, ...]
    steps: tuple[StepPlan, ...]
    final_b: float
    # ancilla-1 amplitude of each never-marked (remainder) state at the end
    final_untouched_amplitude: float
    class_probabilities: tuple[float, ...] = field(default=())

    @property
    def total_grover_iterations(self) -> int:
        return sum(s.t_f for s in self.steps)

    @property
    def remainder_probability(self) -> float:
        return self.final_b**2

    @property
    def class_errors(self) -> tuple[float, ...]:
        return tuple(abs(p - q) for p, q in zip(self.class_probabilities, self.class_targets))

    @property
    def max_class_error(self) -> float:
        return max(self.class_errors) if self.class_errors else 0.0

    def per_state_probabilities(self, classes: Sequence[Sequence[int]]) -> np.ndarray:
        """Predicted sampling distribution over basis states.

        Ticked states keep ``b^2 k_bar^2`` each; the ancilla-1 mass is spread
        uniformly over the remainder class.
        """
        out = np.zeros(self.n_values)
        for step, members in zip(self.steps, classes[:-1]):
            out[list(members)] = step.achieved_per_state_probability
        rem = list(classes[-1])
        if rem:
            out[rem] = self.remainder_probability / len(rem)
        return out

    def ancilla0_probabilities(self, classes: Sequence[Sequence[int]]) -> np.ndarray:
        """Predicted ``|amplitude(k, 0)|^2`` for every basis state."""
        out = np.zeros(self.n_values)
        for step, members in zip(self.steps, classes[:-1]):
            out[list(members)] = step.achieved_per_state_probability
        return out


def angular_rate(n_values: int, r: int) -> float:
    """Rotation angle ``2*arcsin(sqrt(r/N))`` of one Grover iterate."""
    if not 1 <= r <= n_values:
        raise InvalidMarkedCountError(f"marked count r={r} must lie in [1, {n_values}]")
    return 2.0 * math.asin(math.sqrt(r / n_values))


def evolve(k0: float, l0: float, n_values: int, r: int, t) -> tuple:
    """Closed-form ``(k_bar(t), l_bar(t))`` after ``t`` Grover iterations.

    ``t`` may be an integer or an integer array.  When every state is marked
    (``r == N``) the unmarked mean does not exist and ``l_bar`` comes back NaN.
    """
    w = angular_rate(n_values, r)
    if isinstance(t, (int, np.integer)):
        # scalar fast path; the planner calls this once per step
        if r == n_values:
            return k0 * math.cos(w * t), math.nan
        c, s = math.cos(w * t), math.sin(w * t)
        return (
            k0 * c + l0 * math.sqrt((n_values - r) / r) * s,
            l0 * c - k0 * math.sqrt(r / (n_values - r)) * s,
        )
    wt = w * np.asarray(t, dtype=float)
    if r == n_values:
        k = k0 * np.cos(wt)
        return _scalar(k), _scalar(np.full_like(k, np.nan))
    c, s = np.cos(wt), np.sin(wt)
    k = k0 * c + l0 * math.sqrt((n_values - r) / r) * s
    l = l0 * c - k0 * math.sqrt(r / (n_values - r)) * s
    return _scalar(k), _scalar(l)


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


def alpha_recursion(planner: PlannerState) -> float:
    """Amplitude of the never-marked states after one more Grover iterate.

    The new amplitude is twice the post-oracle mean minus the old amplitude.
    For ``r == 1`` this is ``(2/N) l_bar (N-1) - (2/N) k - alpha``.
    """
    n, r = planner.n_values, planner.r
    if r >= n or planner.n_untouched < 1:
        raise NotApplicableError("no never-marked states remain")
    return (2.0 / n) * (-r * planner.k_bar + (n - r) * planner.l_bar) - planner.alpha


def advance(planner: PlannerState, iterations: int) -> PlannerState:
    """Planner state after ``iterations`` further Grover iterates in the current step."""
    if iterations < 0:
        raise ValueError("iterations must be non-negative")
    if iterations == 0:
        return planner
    n, r = planner.n_values, planner.r
    alpha = planner.alpha
    if planner.n_untouched > 0:
        ks, ls = evolve(planner.k_bar, planner.l_bar, n, r, np.arange(iterations))
        scale = 2.0 / n
        for k, l in zip(ks.tolist(), ls.tolist()):
            alpha = scale * (-r * k + (n - r) * l) - alpha
    else:
        alpha = math.nan
    k, l = evolve(planner.k_bar, planner.l_bar, n, r, iterations)
    return replace(planner, k_bar=k, l_bar=l, alpha=alpha, t=planner.t + iterations)


def iteration_upper_bound(planner: PlannerState) -> IterationBound:
    """Iteration count at which the marked amplitude peaks, plus its large-N form.

    Degenerate inputs (``l_bar <= 0`` or every state marked) return zero with
    ``degenerate=True``: the amplitude is already at or past its peak.
    """
    n, r = planner.n_values, planner.r
    if r >= n or planner.l_bar <= 0:
        return IterationBound(0.0, 0.0, True)
    ratio = planner.k_bar / planner.l_bar
    exact = (math.pi / 2 - math.atan(ratio * math.sqrt(r / (n - r)))) / math.acos(1 - 2 * r / n)
    leading = -0.5 * ratio + (math.pi / 4) * math.sqrt(n / r)
    return IterationBound(max(exact, 0.0), leading, False)


def precision_bound(n_values: int) -> float:
    """Nominal probability granularity ``1/sqrt(N)`` of one Grover iterate."""
    if n_values < 1:
        raise ValueError("n_values must be >= 1")
    return 1.0 / math.sqrt(n_values)


def scan_probabilities(planner: PlannerState, max_iterations: Optional[int] = None) -> np.ndarray:
    """Per-state probability ``b^2 k_bar(t)^2`` for every admissible ``t``."""
    bound = iteration_upper_bound(planner)
    upper = 0 if bound.degenerate else math.ceil(bound.exact - 1e-12)
    if max_iterations is not None:
        upper = min(upper, max_iterations)
    ts = np.arange(upper + 1)
    ks, _ = evolve(planner.k_bar, planner.l_bar, planner.n_values, planner.r, ts)
    return planner.b**2 * np.atleast_1d(ks) ** 2


def plan_step(
    planner: PlannerState,
    target_per_state_probability: float,
    max_iterations: Optional[int] = None,
    tolerance: Optional[float] = None,
    class_id: int = 1,
    strict: bool = True,
) -> StepPlan:
    """Choose the iteration count whose per-state probability is closest to the target.

    The scan covers ``t = 0 .. ceil(N_I)`` (optionally capped); ties go to the
    smaller ``t``.  If the target sits above the best reachable value by more
    than ``tolerance`` an :class:`OvershootError` is raised unless ``strict``
    is False, in which case the best value is used and ``feasible`` is False.
    ``tolerance`` defaults to the largest one-iteration probability change in
    the scan, i.e. the granularity the scan can resolve.
    """
    target = float(target_per_state_probability)
    if not 0.0 <= target <= 1.0:
        raise ValueError(f"target probability {target} outside [0, 1]")
    probs = scan_probabilities(planner, max_iterations)
    t_f = int(np.argmin(np.abs(probs - target)))
    best = float(probs.max())
    if tolerance is None:
        tolerance = float(np.abs(np.diff(probs)).max()) if probs.size > 1 else 0.0
    feasible = target - best <= tolerance + 1e-15
    if not feasible and strict:
        raise OvershootError(
            f"target {target:.6g} exceeds best achievable {best:.6g}", best=best, target=target
        )
    at = advance(planner, t_f)
    achieved = at.b**2 * at.k_bar**2
    return StepPlan(
        class_id=class_id,
        r=planner.r,
        target_per_state_probability=target,
        t_f=t_f,
        predicted_k_bar=at.k_bar,
        predicted_l_bar=at.l_bar,
        predicted_alpha=at.alpha,
        b=planner.b,
        achieved_per_state_probability=achieved,
        abs_error=abs(achieved - target),
        feasible=feasible,
    )


def remaining_branch_weight(planner_at_tf: PlannerState) -> float:
    """``b_{i+1}``: ancilla-1 weight left once the marked states are ticked."""
    left = 1.0 - planner_at_tf.r * planner_at_tf.k_bar**2
    if left <= _EXHAUSTED_TOL:
        return 0.0
    return planner_at_tf.b * math.sqrt(left)


def link_steps(planner_at_tf: PlannerState, next_r: int) -> PlannerState:
    """Tick the current marked class and seed the next step with ``next_r`` marked states.

    The next class is drawn from the never-marked states, so its common
    amplitude starts at the rescaled ``alpha``.  The unmarked mean is rebuilt
    from the sum of all non-marked amplitudes, with the ticked class now
    contributing zero.
    """
    p = planner_at_tf
    n = p.n_values
    if next_r < 1 or next_r > p.n_untouched:
        raise InvalidMarkedCountError(
            f"next class size {next_r} must lie in [1, {p.n_untouched}] (never-marked states)"
        )
    b_next = remaining_branch_weight(p)
    if b_next <= 0.0:
        raise ExhaustedBranchError(
            f"step {p.step} leaves no ancilla-1 mass for later classes", step=p.step
        )
    scale = p.b / b_next
    alpha = scale * p.alpha
    if next_r < n:
        l_bar = scale * ((n - p.r) * p.l_bar - next_r * p.alpha) / (n - next_r)
    else:
        l_bar = math.nan
    return PlannerState(
        n_values=n,
        r=next_r,
        k_bar=alpha,
        l_bar=l_bar,
        alpha=alpha,
        b=b_next,
        step=p.step + 1,
        t=0,
        n_untouched=p.n_untouched - next_r,
    )


def plan_encoding(
    n_values: int,
    class_sizes: Sequence[int],
    class_targets: Sequence[float],
    max_iterations: Optional[int] = None,
    tolerance: Optional[float] = None,
    strict: bool = True,
) -> EncodingPlan:
    """Plan every step of an encoding without touching the simulator.

    ``class_sizes`` and ``class_targets`` are in encoding order; the last
    entry is the remainder class whose probability is whatever mass stays on
    ancilla 1.  Empty classes other than the remainder are not allowed here.
    """
    sizes = tuple(int(s) for s in class_sizes)
    targets = tuple(float(p) for p in class_targets)
    if len(sizes) != len(targets) or not sizes:
        raise ValueError("class_sizes and class_targets must be non-empty and equally long")
    if sum(sizes) != n_values:
        raise ValueError(f"class sizes sum to {sum(sizes)}, expected {n_values}")
    if any(s < 1 for s in sizes[:-1]):
        raise InvalidMarkedCountError("every encoded class needs at least one member")

    steps: list[StepPlan] = []
    if len(sizes) == 1:
        return EncodingPlan(
            n_values, sizes, targets, (), 1.0, 1.0 / math.sqrt(n_values), (1.0,)
        )

    state = PlannerState.uniform(n_values, sizes[0])
    at = state
    for i, (r, target) in enumerate(zip(sizes[:-1], targets[:-1])):
        if i > 0:
            try:
                state = link_steps(at, r)
            except ExhaustedBranchError as exc:
                if strict:
                    exc.step = i
                    raise
                steps.extend(_empty_steps(sizes[i:-1], targets[i:-1], first_id=i + 1))
                class_probs = tuple(s.achieved_class_probability for s in steps) + (0.0,)
                return EncodingPlan(n_values, sizes, targets, tuple(steps), 0.0, 0.0, class_probs)
        try:
            sp = plan_step(state, target / r, max_iterations, tolerance, class_id=i + 1, strict=strict)
        except OvershootError as exc:
            exc.step = i + 1
            raise
        steps.append(sp)
        at = advance(state, sp.t_f)

    final_b = remaining_branch_weight(at)
    untouched = at.b * at.alpha if at.n_untouched > 0 else 0.0
    class_probs = tuple(s.achieved_class_probability for s in steps) + (final_b**2,)
    return EncodingPlan(n_values, sizes, targets, tuple(steps), final_b, untouched, class_probs)


def _empty_steps(sizes, targets, first_id):
    """Steps after the ancilla-1 branch ran dry: nothing left to amplify."""
    return [
        StepPlan(
            class_id=first_id + n,
            r=r,
            target_per_state_probability=p / r,
            t_f=0,
            predicted_k_bar=0.0,
            predicted_l_bar=0.0,
            predicted_alpha=0.0,
            b=0.0,
            achieved_per_state_probability=0.0,
            abs_error=p / r,
            feasible=p == 0.0,
        )
        for n, (r, p) in enumerate(zip(sizes, targets))
    ]
