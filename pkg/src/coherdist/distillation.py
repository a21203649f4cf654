"""One-shot coherence distillation for pure states.

For pure inputs the distillation fidelity to the m-dimensional maximally
coherent state is ``||psi||_[m]^2 / m`` for every one of MIO, DIO, IO and
SIO, where ``||.||_[m]`` is the m-distillation norm. Everything here is
closed form; :func:`norm_oracle` is a brute convex solve kept only to check
the closed form.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InvalidArgumentError, UnsupportedInputError
from .states import PureState, make_pure_state, maximally_coherent, sorted_profile

THRESHOLD_SLACK = 1e-12
K_TIE_TOL = 1e-12


def _check_m(state: PureState, m: int) -> int:
    if int(m) != m or not 1 <= m <= state.dim:
        raise InvalidArgumentError(f"m must be an integer in [1, {state.dim}], got {m}")
    return int(m)


def _sorted_magnitudes(state: PureState) -> np.ndarray:
    return np.abs(state.amps)[sorted_profile(state).permutation]


def _tail_ratios(mags: np.ndarray, m: int) -> np.ndarray:
    # entry k-1 holds ||psi_{m-k+1:d}||^2 / k for k = 1..m
    tail_sq = np.cumsum((mags**2)[::-1])[::-1]  # tail_sq[i] = sum_{j >= i} mags[j]^2
    ks = np.arange(1, m + 1)
    return tail_sq[m - ks] / ks


def k_star(state: PureState, m: int) -> int:
    m = _check_m(state, m)
    ratios = _tail_ratios(_sorted_magnitudes(state), m)
    # smallest k among (near-)minimizers; tied k give the same norm
    return int(np.nonzero(ratios <= ratios.min() + K_TIE_TOL)[0][0]) + 1


@dataclass(frozen=True)
class NormBreakdown:
    m: int
    k_star: int
    head_l1: float
    tail_l2: float
    norm_value: float


def m_distillation_norm(state: PureState, m: int) -> NormBreakdown:
    m = _check_m(state, m)
    k = k_star(state, m)
    mags = _sorted_magnitudes(state)
    head = float(mags[: m - k].sum())
    tail = float(np.linalg.norm(mags[m - k :]))
    return NormBreakdown(m, k, head, tail, head + math.sqrt(k) * tail)


def distillation_fidelity(state: PureState, m: int) -> float:
    nb = m_distillation_norm(state, m)
    f = nb.norm_value**2 / nb.m
    if f > 1.0 and f - 1.0 <= 1e-12:
        f = 1.0
    return f


def optimal_target(state: PureState, m: int) -> PureState:
    """Best m-dimensional target for ``state``, in descending order.

    Keeps the ``m - k*`` largest magnitudes and spreads the remaining weight
    evenly over ``k*`` coefficients. Its overlap with the maximally coherent
    state equals :func:`distillation_fidelity` and the input majorizes into
    it. Use :func:`embed_target` to place it on the input's modes.
    """
    nb = m_distillation_norm(state, m)
    mags = _sorted_magnitudes(state)
    coeffs = np.concatenate([mags[: nb.m - nb.k_star], np.full(nb.k_star, nb.tail_l2 / math.sqrt(nb.k_star))])
    return make_pure_state(coeffs)


def embed_target(state: PureState, target: PureState) -> PureState:
    """Place a descending-order target on the modes of ``state``.

    Coefficient r lands on the mode holding the r-th largest amplitude of
    ``state``; the remaining modes get zero.
    """
    perm = sorted_profile(state).permutation
    out = np.zeros(state.dim, dtype=complex)
    out[perm[: target.dim]] = target.amps
    return make_pure_state(out)


@dataclass(frozen=True)
class MResult:
    m: int
    fidelity: float
    target: PureState


@dataclass(frozen=True)
class DistillationReport:
    input: PureState
    epsilon: float
    per_m: tuple[MResult, ...]
    best_m: int
    coherence_bits: float

    def fidelities(self) -> list[float]:
        return [r.fidelity for r in self.per_m]

    @property
    def best_target(self) -> PureState:
        return self.per_m[self.best_m - 1].target


def one_shot_distillable_coherence(state: PureState, epsilon: float) -> DistillationReport:
    if not 0.0 <= epsilon <= 1.0:
        raise InvalidArgumentError(f"epsilon must lie in [0, 1], got {epsilon}")
    per_m = tuple(
        MResult(m, distillation_fidelity(state, m), optimal_target(state, m)) for m in range(1, state.dim + 1)
    )
    threshold = 1.0 - epsilon - THRESHOLD_SLACK
    best = max(r.m for r in per_m if r.fidelity >= threshold)
    return DistillationReport(state, float(epsilon), per_m, best, math.log2(best))


# --- independent check of the closed form -----------------------------------


@functools.lru_cache(maxsize=None)
def _oracle_problem(d: int, m: int):
    import cvxpy as cp

    psi = cp.Parameter(d)
    y = cp.Variable(d)
    objective = cp.Minimize(cp.norm1(psi - y) + math.sqrt(m) * cp.norm2(y))
    return cp.Problem(objective), psi


def norm_oracle(state: PureState, m: int) -> float:
    """m-distillation norm by direct minimization over splits ``psi = x + y``.

    Solves ``min ||x||_1 + sqrt(m) ||y||_2`` as a second-order cone program.
    Only real non-negative states up to dimension 8 are accepted.
    """
    m = _check_m(state, m)
    if not state.is_real_nonnegative():
        raise UnsupportedInputError("norm_oracle needs real non-negative amplitudes")
    if state.dim > 8:
        raise UnsupportedInputError("norm_oracle is limited to dim <= 8")
    prob, psi = _oracle_problem(state.dim, m)
    psi.value = state.amps.real.copy()
    prob.solve(solver="CLARABEL")
    return float(prob.value)


# --- parameter sweeps and region boundaries ---------------------------------


def fidelity_curve(family: Callable[[float], PureState], m: int, alphas) -> np.ndarray:
    return np.array([distillation_fidelity(family(float(a)), m) for a in alphas])


def _bisect(pred, lo: float, hi: float, tol: float) -> float:
    """Boundary between ``pred(lo)`` and ``pred(hi)``, which must differ."""
    plo = pred(lo)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if pred(mid) == plo:
            lo = mid
        else:
            hi = mid
    return float(0.5 * (lo + hi))


def fidelity_regions(
    family: Callable[[float], PureState],
    m: int,
    epsilon: float,
    domain: tuple[float, float],
    tol: float = 1e-9,
    grid: int = 2001,
) -> list[tuple[float, float]]:
    """Closed intervals of alpha where ``F(family(alpha), m) >= 1 - epsilon``.

    A grid scan brackets every crossing, isolated maxima are refined with a
    bounded scalar search so single-point regions are not missed, and each
    endpoint is bisected to ``tol``.
    """
    from scipy.optimize import minimize_scalar

    threshold = 1.0 - epsilon - THRESHOLD_SLACK

    def fid(a: float) -> float:
        return distillation_fidelity(family(a), m)

    def ok(a: float) -> bool:
        return fid(a) >= threshold

    xs = np.linspace(domain[0], domain[1], grid)
    fs = np.array([fid(x) for x in xs])
    pts = list(xs)
    # refine interior local maxima that sit below the threshold on the grid
    for i in range(1, grid - 1):
        if fs[i] >= fs[i - 1] and fs[i] >= fs[i + 1] and fs[i] < threshold:
            res = minimize_scalar(lambda a: -fid(a), bounds=(xs[i - 1], xs[i + 1]), method="bounded",
                                  options={"xatol": 1e-13})
            if -res.fun >= threshold:
                pts.append(float(res.x))
    pts = sorted(set(pts))
    flags = [ok(x) for x in pts]

    regions = []
    start = float(pts[0]) if flags[0] else None
    for (x0, f0), (x1, f1) in zip(zip(pts, flags), zip(pts[1:], flags[1:])):
        if f0 == f1:
            continue
        edge = _bisect(ok, x0, x1, tol)
        if f1:
            start = edge
        else:
            regions.append((start, edge))
            start = None
    if start is not None:
        regions.append((start, float(pts[-1])))
    return regions
