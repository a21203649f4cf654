"""Pure qudit states in a fixed incoherent basis, sorting and majorization."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InvalidArgumentError, InvalidStateError

NORM_TOL = 1e-12
MAJORIZATION_TOL = 1e-12


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PureState:
    """Normalized complex amplitude vector over basis states ``|0>..|d-1>``.

    Build instances through :func:`make_pure_state`; the constructor trusts
    its input.
    """

    amps: np.ndarray

    @property
    def dim(self) -> int:
        return int(self.amps.shape[0])

    @property
    def probs(self) -> np.ndarray:
        return np.abs(self.amps) ** 2

    def padded(self, dim: int) -> "PureState":
        """Embed into ``dim`` dimensions by appending zero amplitudes."""
        if dim < self.dim:
            raise InvalidArgumentError(f"cannot pad a {self.dim}-dim state down to {dim}")
        if dim == self.dim:
            return self
        out = np.zeros(dim, dtype=complex)
        out[: self.dim] = self.amps
        return PureState(_frozen(out))

    def is_real_nonnegative(self, tol: float = 1e-12) -> bool:
        return bool(np.all(np.abs(self.amps.imag) <= tol) and np.all(self.amps.real >= -tol))

    def __repr__(self) -> str:
        return f"PureState({np.array2string(self.amps, precision=6)})"


def make_pure_state(amps) -> PureState:
    a = np.array(amps, dtype=complex).reshape(-1)
    if a.size == 0:
        raise InvalidStateError("state needs at least one amplitude")
    if not np.all(np.isfinite(a)):
        raise InvalidStateError("amplitudes must be finite")
    norm = np.linalg.norm(a)
    if norm == 0:
        raise InvalidStateError("zero vector is not a state")
    return PureState(_frozen(a / norm))


def basis_state(index: int, dim: int) -> PureState:
    if not 0 <= index < dim:
        raise InvalidArgumentError(f"basis index {index} out of range for dim {dim}")
    a = np.zeros(dim, dtype=complex)
    a[index] = 1.0
    return PureState(_frozen(a))


def maximally_coherent(m: int) -> PureState:
    if int(m) != m or m < 1:
        raise InvalidArgumentError(f"maximally coherent state needs m >= 1, got {m}")
    return PureState(_frozen(np.full(int(m), 1 / np.sqrt(m), dtype=complex)))


def psi3(alpha: float) -> PureState:
    """``sqrt(alpha)|2> + sqrt((1-alpha)/2)(|0> + |1>)`` for alpha in [0, 1]."""
    if not 0.0 <= alpha <= 1.0:
        raise InvalidArgumentError(f"psi3 needs alpha in [0, 1], got {alpha}")
    b = np.sqrt((1 - alpha) / 2)
    return make_pure_state([b, b, np.sqrt(alpha)])


def psi4(alpha: float) -> PureState:
    """``sqrt(alpha)(|0> + |1>) + sqrt(1/2 - alpha)(|2> + |3>)`` for alpha in [0, 1/2]."""
    if not 0.0 <= alpha <= 0.5:
        raise InvalidArgumentError(f"psi4 needs alpha in [0, 1/2], got {alpha}")
    a, b = np.sqrt(alpha), np.sqrt(0.5 - alpha)
    return make_pure_state([a, a, b, b])


FAMILIES = {"psi3": (psi3, (0.0, 1.0)), "psi4": (psi4, (0.0, 0.5))}


def family_state(family: str, alpha: float) -> PureState:
    try:
        ctor, _ = FAMILIES[family]
    except KeyError:
        raise InvalidArgumentError(f"unknown family {family!r}; choose from {sorted(FAMILIES)}")
    return ctor(alpha)


def strip_phases(state: PureState) -> tuple[PureState, np.ndarray]:
    """Split ``state`` into real non-negative amplitudes and per-mode phases.

    ``state.amps == phases * stripped.amps``. The diagonal unitary
    ``diag(phases)`` is incoherent-structured, so synthesis can run on the
    stripped state and re-apply the phases afterwards.
    """
    mags = np.abs(state.amps)
    phases = np.ones(state.dim, dtype=complex)
    nz = mags > 0
    phases[nz] = state.amps[nz] / mags[nz]
    return PureState(_frozen(mags.astype(complex))), phases


@dataclass(frozen=True, eq=False)
class SortedProfile:
    probs_desc: np.ndarray
    permutation: np.ndarray  # sorted position -> original basis index

    def unsorted(self) -> np.ndarray:
        out = np.empty_like(self.probs_desc)
        out[self.permutation] = self.probs_desc
        return out


def sorted_profile(state: PureState) -> SortedProfile:
    p = state.probs
    # stable sort on -p keeps ties in original index order
    perm = np.argsort(-p, kind="stable")
    return SortedProfile(_frozen(p[perm]), _frozen(perm))


@dataclass(frozen=True, eq=False)
class MajorizationVerdict:
    feasible: bool
    partial_sums_src: np.ndarray
    partial_sums_tgt: np.ndarray
    first_violation: Optional[int] = None


def majorizes(source: PureState, target: PureState, tol: float = MAJORIZATION_TOL) -> MajorizationVerdict:
    """Check whether ``source`` can be converted to ``target`` by SIO/IO.

    True iff every prefix sum of the descending source probabilities is
    bounded by the corresponding target prefix sum. The shorter state is
    padded with zeros.
    """
    d = max(source.dim, target.dim)
    src = np.cumsum(sorted_profile(source.padded(d)).probs_desc)
    tgt = np.cumsum(sorted_profile(target.padded(d)).probs_desc)
    bad = np.nonzero(src > tgt + tol)[0]
    first = int(bad[0]) if bad.size else None
    return MajorizationVerdict(first is None, _frozen(src), _frozen(tgt), first)


def overlap_fidelity(a: PureState, b: PureState) -> float:
    d = max(a.dim, b.dim)
    v = np.vdot(a.padded(d).amps, b.padded(d).amps)
    return float(min(1.0, abs(v) ** 2))


def density_matrix(state: PureState) -> np.ndarray:
    return np.outer(state.amps, state.amps.conj())
