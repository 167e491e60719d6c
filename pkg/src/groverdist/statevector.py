"""Exact state-vector simulation of a system register plus one ancilla qubit.

Amplitudes are kept in an ``(N, 2)`` complex array indexed ``[k, y]`` where
``k`` is the system basis index and ``y`` the ancilla bit.  The system
dimension is the number of values itself; nothing is padded to a power of two.

Every operation returns a new :class:`StateVector`; inputs are never mutated.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Union

import numpy as np

from .errors import InvalidDimensionError, InvalidOracleError, OutOfRangeError

NORM_TOL = 1e-12


@dataclass(frozen=True)
class MarkedSet:
    """Basis indices whose sign the oracle flips."""

    indices: tuple[int, ...]

    @classmethod
    def of(cls, indices: Iterable[int], n_values: int | None = None) -> "MarkedSet":
        idx = tuple(sorted(int(i) for i in indices))
        if len(set(idx)) != len(idx):
            raise InvalidOracleError(f"duplicate indices in marked set {idx}")
        if n_values is not None and idx and (idx[0] < 0 or idx[-1] >= n_values):
            raise OutOfRangeError(f"marked indices {idx} not within [0, {n_values})")
        return cls(idx)

    def __len__(self) -> int:
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def __contains__(self, k) -> bool:
        return k in self.indices

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.indices, dtype=np.intp)


MarkedLike = Union[MarkedSet, Iterable[int]]


def _marked_array(marked: MarkedLike, n_values: int) -> np.ndarray:
    if not isinstance(marked, MarkedSet):
        marked = MarkedSet.of(marked, n_values)
    if len(marked) == 0:
        raise InvalidOracleError("oracle needs a non-empty marked set")
    arr = marked.array
    if arr[0] < 0 or arr[-1] >= n_values:
        raise OutOfRangeError(f"marked indices not within [0, {n_values})")
    return arr


class StateVector:
    """Immutable snapshot of the (system x ancilla) register."""

    __slots__ = ("_amps",)

    def __init__(self, amplitudes: np.ndarray):
        amps = np.array(amplitudes, dtype=np.complex128)
        if amps.ndim != 2 or amps.shape[1] != 2 or amps.shape[0] < 1:
            raise InvalidDimensionError(f"expected shape (N, 2), got {amps.shape}")
        amps.setflags(write=False)
        self._amps = amps

    @classmethod
    def _wrap(cls, amps: np.ndarray) -> "StateVector":
        # skips the defensive copy for arrays created inside this module
        obj = cls.__new__(cls)
        amps.setflags(write=False)
        obj._amps = amps
        return obj

    @property
    def n_values(self) -> int:
        return self._amps.shape[0]

    @property
    def amplitudes(self) -> np.ndarray:
        """Read-only ``(N, 2)`` view of the amplitudes."""
        return self._amps

    def amplitude(self, k: int, y: int) -> complex:
        return complex(self._amps[k, y])

    def norm_squared(self) -> float:
        return float(np.sum(np.abs(self._amps) ** 2))

    def to_vector(self) -> np.ndarray:
        """Flatten to a length-2N vector ordered ``k*2 + y``."""
        return self._amps.reshape(-1).copy()

    def __repr__(self) -> str:
        return f"StateVector(n_values={self.n_values})"


def new_uniform(n_values: int) -> StateVector:
    """Uniform superposition over ``n_values`` states, ancilla set to 1."""
    if n_values < 1:
        raise InvalidDimensionError(f"n_values must be >= 1, got {n_values}")
    amps = np.zeros((n_values, 2), dtype=np.complex128)
    amps[:, 1] = 1.0 / np.sqrt(n_values)
    return StateVector._wrap(amps)


def grover_iterate(vec: np.ndarray, marked: np.ndarray) -> np.ndarray:
    """Oracle sign flip on ``marked`` followed by reflection about the mean."""
    out = np.array(vec, dtype=np.complex128)
    out[marked] *= -1
    return 2.0 * out.mean() - out


def apply_grover_plain(vector: np.ndarray, marked: MarkedLike) -> np.ndarray:
    """One Grover iterate on an ancilla-free length-N system vector."""
    vector = np.asarray(vector)
    if vector.ndim != 1 or vector.size < 1:
        raise InvalidDimensionError(f"expected a 1-D system vector, got shape {vector.shape}")
    return grover_iterate(vector, _marked_array(marked, vector.size))


def apply_conditional_grover(state: StateVector, marked: MarkedLike) -> StateVector:
    """Grover iterate on the ancilla-1 branch only; ancilla-0 amplitudes untouched."""
    idx = _marked_array(marked, state.n_values)
    amps = state.amplitudes.copy()
    amps[:, 1] = grover_iterate(amps[:, 1], idx)
    return StateVector._wrap(amps)


def apply_tick(state: StateVector, index: int) -> StateVector:
    """Swap the ancilla value of basis state ``index`` (X on the ancilla, controlled on it)."""
    if not 0 <= index < state.n_values:
        raise OutOfRangeError(f"index {index} not within [0, {state.n_values})")
    amps = state.amplitudes.copy()
    amps[index] = amps[index, ::-1]
    return StateVector._wrap(amps)


def apply_tick_many(state: StateVector, indices: MarkedLike) -> StateVector:
    """Tick every index in ``indices``; equivalent to repeated :func:`apply_tick`."""
    idx = _marked_array(indices, state.n_values)
    amps = state.amplitudes.copy()
    amps[idx] = amps[idx, ::-1]
    return StateVector._wrap(amps)


def probabilities(state: StateVector) -> np.ndarray:
    """``|amplitude|**2`` table with shape ``(N, 2)``."""
    return np.abs(state.amplitudes) ** 2


def sample(state: StateVector, rng_seed: Union[int, np.random.Generator]) -> tuple[int, int]:
    """Measure the whole register once; returns ``(index, ancilla_bit)``."""
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    cdf = np.cumsum(probabilities(state).reshape(-1))
    flat = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    flat = min(flat, cdf.size - 1)
    return flat // 2, flat % 2


def conditional_grover_matrix(n_values: int, marked: MarkedLike) -> np.ndarray:
    """Dense ``2N x 2N`` matrix of the conditional Grover operator.

    Rows/columns follow :meth:`StateVector.to_vector` ordering.  Used only as a
    brute-force reference for small ``N``.
    """
    idx = _marked_array(marked, n_values)
    oracle = np.eye(n_values)
    oracle[idx, idx] = -1.0
    reflect = np.full((n_values, n_values), 2.0 / n_values) - np.eye(n_values)
    grover = reflect @ oracle
    proj0 = np.diag([1.0, 0.0])
    proj1 = np.diag([0.0, 1.0])
    return np.kron(np.eye(n_values), proj0) + np.kron(grover, proj1)
