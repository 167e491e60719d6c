"""Simulated quantum counting: phase estimation over the plain Grover iterate.

The counting register holds ``t`` qubits.  After the controlled powers the
joint state is ``2**-t/2 * sum_y |y> G^y |phi>``; an inverse Fourier transform
over ``y`` and a measurement yield an outcome whose phase ``y / 2**t``
approximates ``theta / 2pi`` with ``sin^2(theta/2) = r/N``.

Two exact simulation backends are provided:

``statevector``
    the full ``2**t x N`` register, Grover iterate built from the membership
    oracle;
``subspace``
    the same circuit restricted to the two-dimensional plane spanned by the
    uniform marked and uniform unmarked states, which ``G`` and ``|phi>``
    never leave.  Outcome distributions agree to rounding error and the cost
    no longer grows with ``N``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import BudgetError, InconsistentCountsError
from .statevector import grover_iterate

MAX_VALUES = 4096
MAX_PRECISION_BITS = 15
# register elements above which "auto" switches to the plane reduction
DENSE_LIMIT = 1 << 16

Membership = Union[Callable[[int], bool], Sequence[int], np.ndarray]


def default_precision_bits(n_values: int) -> int:
    return max(1, math.ceil(math.log2(n_values))) + 3 if n_values > 1 else 3


@dataclass(frozen=True)
class CountingConfig:
    precision_bits: Optional[int] = None
    mode: str = "deterministic"
    backend: str = "auto"

    def __post_init__(self):
        if self.precision_bits is not None and self.precision_bits < 1:
            raise ValueError("precision_bits must be >= 1")
        if self.mode not in ("deterministic", "stochastic"):
            raise ValueError(f"unknown counting mode {self.mode!r}")
        if self.backend not in ("auto", "statevector", "subspace"):
            raise ValueError(f"unknown counting backend {self.backend!r}")

    def bits_for(self, n_values: int) -> int:
        return self.precision_bits if self.precision_bits is not None else default_precision_bits(n_values)


@dataclass(frozen=True)
class CountEstimate:
    n_values: int
    precision_bits: int
    raw_outcome: int
    phase: float
    estimate_real: float
    estimate: int
    error_bound: float
    oracle_calls: int


def check_budget(n_values: int, precision_bits: int) -> None:
    if n_values > MAX_VALUES or precision_bits > MAX_PRECISION_BITS:
        raise BudgetError(
            f"counting register 2^{precision_bits} x {n_values} exceeds the desk-scale budget "
            f"(N <= {MAX_VALUES}, t <= {MAX_PRECISION_BITS})"
        )


def membership_mask(n_values: int, membership: Membership) -> np.ndarray:
    """Boolean mask of marked indices from a predicate or an index collection."""
    if callable(membership):
        return np.fromiter((bool(membership(k)) for k in range(n_values)), bool, n_values)
    arr = np.asarray(membership)
    if arr.dtype == bool and arr.shape == (n_values,):
        return arr.copy()
    mask = np.zeros(n_values, dtype=bool)
    mask[arr.astype(int)] = True
    return mask


def inverse_qft(register: np.ndarray) -> np.ndarray:
    """Inverse Fourier transform over axis 0 (the counting register index)."""
    m = register.shape[0]
    return np.fft.fft(register, axis=0) / math.sqrt(m)


def _pe_register_dense(mask: np.ndarray, precision_bits: int) -> np.ndarray:
    n = mask.size
    m = 1 << precision_bits
    marked = np.flatnonzero(mask)
    rows = np.empty((m, n), dtype=np.complex128)
    vec = np.full(n, 1.0 / math.sqrt(n), dtype=np.complex128)
    for y in range(m):
        rows[y] = vec
        if marked.size:
            vec = grover_iterate(vec, marked)
    return rows / math.sqrt(m)


def outcome_distribution_dense(mask: np.ndarray, precision_bits: int) -> np.ndarray:
    """Counting-register outcome probabilities from the full register simulation."""
    reg = inverse_qft(_pe_register_dense(mask, precision_bits))
    return np.sum(np.abs(reg) ** 2, axis=1)


@lru_cache(maxsize=4096)
def _outcome_distribution_plane(n_values: int, r: int, precision_bits: int) -> np.ndarray:
    m = 1 << precision_bits
    # coordinates on (uniform marked, uniform unmarked)
    ys = np.arange(m)
    rows = np.zeros((m, 2), dtype=np.complex128)
    if 0 < r < n_values:
        # G rotates the plane by w; phi sits at angle theta0 from the unmarked axis
        theta0 = math.asin(math.sqrt(r / n_values))
        rows[:, 0] = np.sin(theta0 + 2.0 * theta0 * ys)
        rows[:, 1] = np.cos(theta0 + 2.0 * theta0 * ys)
    elif r == 0:
        # G = R fixes phi
        rows[:, 1] = 1.0
    else:
        # O = -I, so G = -R flips the sign of phi each time
        rows[:, 0] = np.where(ys % 2 == 0, 1.0, -1.0)
    reg = inverse_qft(rows / math.sqrt(m))
    out = np.sum(np.abs(reg) ** 2, axis=1)
    out.setflags(write=False)
    return out


def outcome_distribution_subspace(n_values: int, r: int, precision_bits: int) -> np.ndarray:
    """Outcome probabilities from the two-dimensional Grover-plane reduction."""
    return _outcome_distribution_plane(int(n_values), int(r), int(precision_bits))


def phase_to_count(n_values: int, outcome: int, precision_bits: int) -> float:
    return n_values * math.sin(math.pi * outcome / (1 << precision_bits)) ** 2


def error_bound(n_values: int, estimate: float, precision_bits: int) -> float:
    """Standard counting error bound for a given precision."""
    m = 1 << precision_bits
    inner = max(estimate * (n_values - estimate), 0.0)
    return 2 * math.pi * math.sqrt(inner) / m + math.pi**2 * n_values / m**2


def count(
    n_values: int,
    membership: Membership,
    config: CountingConfig = CountingConfig(),
    rng_seed=None,
) -> CountEstimate:
    """Estimate how many indices ``membership`` marks.

    Deterministic mode reports the most probable outcome (lowest index on
    ties); stochastic mode samples one outcome with ``rng_seed``.
    """
    if n_values < 1:
        raise ValueError("n_values must be >= 1")
    bits = config.bits_for(n_values)
    check_budget(n_values, bits)
    mask = membership_mask(n_values, membership)
    backend = config.backend
    if backend == "auto":
        backend = "statevector" if (n_values << bits) <= DENSE_LIMIT else "subspace"
    if backend == "statevector":
        probs = outcome_distribution_dense(mask, bits)
    else:
        probs = outcome_distribution_subspace(n_values, int(mask.sum()), bits)

    if config.mode == "deterministic":
        y = int(np.argmax(probs))
    else:
        rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
        y = int(rng.choice(probs.size, p=probs / probs.sum()))
    real = phase_to_count(n_values, y, bits)
    est = int(min(max(round(real), 0), n_values))
    return CountEstimate(
        n_values=n_values,
        precision_bits=bits,
        raw_outcome=y,
        phase=y / (1 << bits),
        estimate_real=real,
        estimate=est,
        error_bound=error_bound(n_values, real, bits),
        oracle_calls=(1 << bits) - 1,
    )


def is_representable(n_values: int, r: int, precision_bits: int, tol: float = 1e-9) -> bool:
    """True when the Grover eigenphase is an exact multiple of ``2**-t``."""
    scaled = math.asin(math.sqrt(r / n_values)) / math.pi * (1 << precision_bits)
    return abs(scaled - round(scaled)) < tol


@dataclass(frozen=True)
class ClassCounts:
    """Counted sizes of the first ``J-1`` classes and the remainder by difference."""

    n_values: int
    estimates: tuple[CountEstimate, ...]
    remainder: int

    @property
    def sizes(self) -> list[int]:
        return [e.estimate for e in self.estimates] + [self.remainder]

    @property
    def oracle_calls(self) -> int:
        return sum(e.oracle_calls for e in self.estimates)


def count_all_classes(
    n_values: int,
    memberships: Sequence[Membership],
    config: CountingConfig = CountingConfig(),
    rng_seed=None,
) -> ClassCounts:
    """Count every class except the last, which gets ``N`` minus the others."""
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    estimates = tuple(count(n_values, m, config, rng) for m in list(memberships)[:-1])
    remainder = n_values - sum(e.estimate for e in estimates)
    if remainder < 0:
        raise InconsistentCountsError(
            f"counted sizes {[e.estimate for e in estimates]} exceed N={n_values}"
        )
    return ClassCounts(n_values, estimates, remainder)
