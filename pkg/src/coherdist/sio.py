"""Kraus-operator channels realizing pure-state conversions under SIO.

A conversion ``psi -> phi`` with real non-negative amplitudes is split into
two-mode steps. Each step acts on modes ``(i, j)`` with the Kraus pair

    K1 = sin2t1 |i><i| + cos2t2 |j><j| + cos2t3 I_k
    K2 = cos2t1 |j><i| + sin2t2 |i><j| + sin2t3 I_k

which is what a half-wave-plate/beam-displacer module implements with the
photon polarization as the ancilla (K1 is the V outcome, K2 the H outcome).
Both branches carry the same normalized output state, so the composed
channel is deterministic.
"""

from __future__ import annotations

import enum
import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import (
    InfeasibleConversionError,
    InvalidArgumentError,
    InvalidChannelError,
    UnsupportedInputError,
)
from .states import PureState, make_pure_state, majorizes, overlap_fidelity, sorted_profile

COMPLETENESS_TOL = 1e-10
ZERO_TOL = 1e-12
BRANCH_DROP = 1e-14
PROB_TOL = 1e-13


@dataclass(frozen=True, eq=False)
class Channel:
    """Finite Kraus set, stored as an array of shape (n_kraus, d_out, d_in)."""

    kraus: np.ndarray

    def __post_init__(self):
        k = np.asarray(self.kraus, dtype=complex)
        if k.ndim == 2:
            k = k[None]
        if k.ndim != 3 or k.shape[0] == 0:
            raise InvalidChannelError("need a non-empty stack of Kraus matrices")
        k = k.copy()
        k.setflags(write=False)
        object.__setattr__(self, "kraus", k)

    @classmethod
    def from_list(cls, mats: Sequence[np.ndarray]) -> "Channel":
        return cls(np.stack([np.asarray(m, dtype=complex) for m in mats]))

    @classmethod
    def identity(cls, d: int) -> "Channel":
        return cls(np.eye(d, dtype=complex)[None])

    def __len__(self) -> int:
        return self.kraus.shape[0]

    def __iter__(self):
        return iter(self.kraus)

    @property
    def d_in(self) -> int:
        return self.kraus.shape[2]

    @property
    def d_out(self) -> int:
        return self.kraus.shape[1]

    def completeness_error(self) -> float:
        s = np.einsum("kji,kjl->il", self.kraus.conj(), self.kraus)
        return float(np.linalg.norm(s - np.eye(self.d_in)))

    def is_complete(self, tol: float = COMPLETENESS_TOL) -> bool:
        return self.completeness_error() <= tol

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return np.einsum("kij,jl,kml->im", self.kraus, rho, self.kraus.conj())

    def then(self, other: "Channel") -> "Channel":
        """Channel that applies ``self`` first and ``other`` second."""
        if other.d_in != self.d_out:
            raise InvalidArgumentError("shape mismatch in composition")
        return Channel(np.stack([b @ a for b in other.kraus for a in self.kraus]))

    def to_dict(self) -> dict:
        return {
            "d_in": self.d_in,
            "d_out": self.d_out,
            "n_kraus": len(self),
            "kraus": [{"re": k.real.tolist(), "im": k.imag.tolist()} for k in self.kraus],
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, doc: dict) -> "Channel":
        mats = [np.array(k["re"], dtype=float) + 1j * np.array(k["im"], dtype=float) for k in doc["kraus"]]
        ch = cls.from_list(mats)
        if (ch.d_in, ch.d_out, len(ch)) != (doc["d_in"], doc["d_out"], doc["n_kraus"]):
            raise InvalidChannelError("channel document metadata does not match its matrices")
        return ch

    @classmethod
    def from_json(cls, text: str) -> "Channel":
        return cls.from_dict(json.loads(text))


def spanning_inputs(d: int) -> list[np.ndarray]:
    """d^2 pure density matrices spanning all d x d operators."""
    out = []
    for k in range(d):
        out.append(np.outer(np.eye(d)[k], np.eye(d)[k]).astype(complex))
        for l in range(k + 1, d):
            for ph in (1.0, 1j):
                v = np.zeros(d, dtype=complex)
                v[k], v[l] = 1 / math.sqrt(2), ph / math.sqrt(2)
                out.append(np.outer(v, v.conj()))
    return out


def trace_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    return 0.5 * float(np.abs(np.linalg.eigvalsh(rho - sigma)).sum())


def channel_distance(a: Channel, b: Channel) -> float:
    """Largest output trace distance over :func:`spanning_inputs`.

    Zero exactly when both Kraus sets describe the same channel, whatever
    their ordering or unitary mixing.
    """
    if (a.d_in, a.d_out) != (b.d_in, b.d_out):
        raise InvalidArgumentError(f"channel shapes differ: {a.d_out}x{a.d_in} vs {b.d_out}x{b.d_in}")
    return max(trace_distance(a.apply(r), b.apply(r)) for r in spanning_inputs(a.d_in))


class OperationClass(str, enum.Enum):
    SIO = "SIO"
    IO_NOT_SIO = "IO-not-SIO"
    NOT_IO = "not-IO"


def _max_nonzeros(k: np.ndarray, axis: int) -> int:
    return int((np.abs(k) > ZERO_TOL).sum(axis=axis).max())


def classify_operation(ch: Channel) -> OperationClass:
    if not ch.is_complete():
        raise InvalidChannelError(f"Kraus set is not complete (error {ch.completeness_error():.3g})")
    per_column = max(_max_nonzeros(k, 0) for k in ch.kraus)
    per_row = max(_max_nonzeros(k, 1) for k in ch.kraus)
    if per_column > 1:
        return OperationClass.NOT_IO
    return OperationClass.SIO if per_row <= 1 else OperationClass.IO_NOT_SIO


def apply_channel(ch: Channel, state: PureState) -> tuple[np.ndarray, list[tuple[float, PureState]]]:
    if state.dim != ch.d_in:
        raise InvalidArgumentError(f"channel expects dim {ch.d_in}, state has {state.dim}")
    outs = ch.kraus @ state.amps
    rho = np.einsum("ki,kj->ij", outs, outs.conj())
    branches = []
    for v in outs:
        w = float(np.vdot(v, v).real)
        if w >= BRANCH_DROP:
            branches.append((w, make_pure_state(v)))
    return rho, branches


# --- two-mode steps ---------------------------------------------------------


@dataclass(frozen=True)
class SioStep:
    """One two-mode step. Angles are plate angles; the matrices use 2*theta."""

    i: int
    j: int
    theta1: float
    theta2: float
    theta3: float
    a_ij: float
    intermediate_state: Optional[PureState] = field(default=None, compare=False)


def _real_amps(x) -> np.ndarray:
    a = x.amps if isinstance(x, PureState) else np.asarray(x, dtype=complex)
    if np.any(np.abs(a.imag) > ZERO_TOL) or np.any(a.real < -ZERO_TOL):
        raise UnsupportedInputError("synthesis needs real non-negative amplitudes; use strip_phases first")
    return np.clip(a.real, 0.0, None)


def _step_matrices(step: SioStep, d: int, i: int, j: int) -> tuple[np.ndarray, np.ndarray]:
    s1, c1 = math.sin(2 * step.theta1), math.cos(2 * step.theta1)
    s2, c2 = math.sin(2 * step.theta2), math.cos(2 * step.theta2)
    s3, c3 = math.sin(2 * step.theta3), math.cos(2 * step.theta3)
    k1 = np.diag(np.full(d, c3, dtype=complex))
    k2 = np.diag(np.full(d, s3, dtype=complex))
    k1[i, i], k1[j, j] = s1, c2
    k2[i, i] = k2[j, j] = 0.0
    k2[j, i], k2[i, j] = c1, s2
    return k1, k2


def step_angles(psi_i: float, psi_j: float, phi_i: float, phi_j: float) -> tuple[float, float, float, float]:
    """Plate angles ``(theta1, theta2, theta3, a)`` for ``(psi_i, psi_j) -> (phi_i, phi_j)``.

    Amplitudes are real and non-negative and the two pairs carry the same
    weight. A zero source amplitude leaves its column free; it is then set
    like a bystander so the pair stays an isometry.
    """
    p_i, p_j, q_i, q_j = psi_i**2, psi_j**2, phi_i**2, phi_j**2
    scale = max(p_i + p_j, 1e-300)
    if abs((p_i + p_j) - (q_i + q_j)) > 1e-10 * max(scale, 1.0):
        raise InvalidArgumentError("two-mode step must preserve the weight on its pair")
    if max(q_i, q_j) < max(p_i, p_j) - PROB_TOL * max(scale, 1.0):
        raise InfeasibleConversionError(
            f"pair ({psi_i:.6g}, {psi_j:.6g}) cannot be spread to ({phi_i:.6g}, {phi_j:.6g})"
        )
    if abs(q_i - q_j) <= PROB_TOL * max(scale, 1.0):
        a, b = 1.0, 0.0  # uniform target: only reachable as the identity
    else:
        # weight preservation gives two forms for each numerator; take the one
        # with smaller operands, and get b = 1 - a without cancellation
        num_a = (q_i - p_j) if max(q_i, p_j) < max(p_i, q_j) else (p_i - q_j)
        num_b = (p_j - q_j) if max(p_j, q_j) < max(p_i, q_i) else (q_i - p_i)
        a = min(1.0, max(0.0, num_a / (q_i - q_j)))
        b = min(1.0, max(0.0, num_b / (q_i - q_j)))
    ra, rb = math.sqrt(a), math.sqrt(b)
    # atan2 on (sin, cos) numerators keeps both entries accurate near 0 and pi/2
    t1 = 0.5 * (math.atan2(ra * phi_i, rb * phi_j) if psi_i > ZERO_TOL else math.atan2(ra, rb))
    t2 = 0.5 * (math.atan2(rb * phi_i, ra * phi_j) if psi_j > ZERO_TOL else math.atan2(rb, ra))
    t3 = 0.5 * math.atan2(rb, ra)
    return t1, t2, t3, a


def two_mode_kraus(source, target, i: int = 0, j: int = 1) -> tuple[SioStep, Channel]:
    """Two-mode SIO step converting ``source[i], source[j]`` into ``target[i], target[j]``.

    ``source`` and ``target`` are PureStates or amplitude vectors of equal
    length. Returns the step, with the state after it as
    ``intermediate_state``, and its Kraus pair on the ordered subspace
    ``(|i>, |j>)``.
    """
    src, tgt = _real_amps(source), _real_amps(target)
    if src.shape != tgt.shape:
        raise InvalidArgumentError("source and target must have the same dimension")
    if i == j or not (0 <= i < src.size and 0 <= j < src.size):
        raise InvalidArgumentError(f"bad mode pair ({i}, {j}) for dim {src.size}")
    t1, t2, t3, a = step_angles(src[i], src[j], tgt[i], tgt[j])
    after = src.copy()
    after[[i, j]] = tgt[[i, j]]
    step = SioStep(i, j, t1, t2, t3, a, make_pure_state(after))
    return step, Channel.from_list(_step_matrices(step, 2, 0, 1))


def embed_step(step: SioStep, d: int) -> Channel:
    if step.i == step.j or not (0 <= step.i < d and 0 <= step.j < d):
        raise InvalidArgumentError(f"mode pair ({step.i}, {step.j}) out of range for dim {d}")
    return Channel.from_list(_step_matrices(step, d, step.i, step.j))


def pure_output_condition(alpha: float, beta: float, theta1: float, theta2: float) -> float:
    """Residual of ``|alpha|^2 sin4t1 - |beta|^2 sin4t2``; zero iff the pair output is pure."""
    return abs(alpha) ** 2 * math.sin(4 * theta1) - abs(beta) ** 2 * math.sin(4 * theta2)


def angle_pair_channel(theta1: float, theta2: float) -> Channel:
    """Two-mode Kraus pair on ``(|0>, |1>)`` for free plate angles."""
    return Channel.from_list(_step_matrices(SioStep(0, 1, theta1, theta2, 0.0, 1.0), 2, 0, 1))


# --- multi-step planning ----------------------------------------------------


@dataclass(frozen=True, eq=False)
class ConversionPlan:
    steps: tuple[SioStep, ...]
    source: PureState
    target: PureState
    total_channel: Channel
    relabel: Optional[np.ndarray] = None  # relabel[m] = final mode of mode m, applied last

    @property
    def dim(self) -> int:
        return self.source.dim


def _t_transform_moves(x: np.ndarray, y: np.ndarray) -> list[tuple[int, int, np.ndarray, np.ndarray]]:
    """Averaging moves carrying sorted ``y`` down to sorted ``x`` (x majorized by y).

    Each move transfers weight from rank j to a later rank k and fixes at
    least one coordinate, so there are at most d - 1 of them.
    """
    tol = PROB_TOL
    v = y.astype(float).copy()
    moves = []
    for _ in range(len(x)):
        diff = v - x
        above = np.nonzero(diff > tol)[0]
        if above.size == 0:
            break
        j = int(above[-1])
        below = np.nonzero(diff[j + 1 :] < -tol)[0]
        if below.size == 0:
            break
        k = j + 1 + int(below[0])
        before = v.copy()
        if v[j] - x[j] <= x[k] - v[k]:
            v[k] += v[j] - x[j]
            v[j] = x[j]
        else:
            v[j] -= x[k] - v[k]
            v[k] = x[k]
        moves.append((j, k, v.copy(), before))
    return moves


def plan_conversion(source: PureState, target: PureState) -> ConversionPlan:
    """Multi-step SIO plan turning ``source`` into ``target`` deterministically.

    Works on the descending ranks of the source: a T-transform sequence from
    the sorted target down to the sorted source is run backwards, so each
    forward step spreads weight between two modes and resolves one
    coordinate. If the target's modes differ from where the ranks ended up,
    a final mode permutation is folded into every Kraus operator.
    """
    src_amps, tgt_amps = _real_amps(source), _real_amps(target)
    d = max(src_amps.size, tgt_amps.size)
    src_amps = np.pad(src_amps, (0, d - src_amps.size))
    tgt_amps = np.pad(tgt_amps, (0, d - tgt_amps.size))
    src_state, tgt_state = make_pure_state(src_amps), make_pure_state(tgt_amps)
    src_amps, tgt_amps = src_state.amps.real, tgt_state.amps.real

    verdict = majorizes(src_state, tgt_state)
    if not verdict.feasible:
        raise InfeasibleConversionError(
            f"source is not majorized by target (first violation at k={verdict.first_violation})", verdict
        )

    sp, tp = sorted_profile(src_state), sorted_profile(tgt_state)
    sigma, tau = sp.permutation, tp.permutation
    moves = _t_transform_moves(sp.probs_desc, tp.probs_desc)

    cur = src_amps.copy()
    steps = []
    for j, k, before, after in reversed(moves):
        mi, mj = int(sigma[j]), int(sigma[k])
        nxt = cur.copy()
        nxt[mi], nxt[mj] = math.sqrt(after[j]), math.sqrt(max(after[k], 0.0))
        t1, t2, t3, a = step_angles(cur[mi], cur[mj], nxt[mi], nxt[mj])
        steps.append(SioStep(mi, mj, t1, t2, t3, a, make_pure_state(nxt)))
        cur = nxt

    relabel = np.empty(d, dtype=int)
    relabel[sigma] = tau
    if np.array_equal(relabel, np.arange(d)):
        relabel = None

    total = compose_steps(steps, d, relabel)
    return ConversionPlan(tuple(steps), src_state, tgt_state, total, relabel)


def permutation_matrix(relabel: Sequence[int]) -> np.ndarray:
    d = len(relabel)
    p = np.zeros((d, d), dtype=complex)
    p[np.asarray(relabel), np.arange(d)] = 1.0
    return p


def compose_steps(steps: Sequence[SioStep], d: int, relabel=None) -> Channel:
    """Products ``P K_{q_n}^{(n)} ... K_{q_1}^{(1)}`` over all 2^n branch choices."""
    pairs = [embed_step(s, d).kraus for s in steps]
    p = permutation_matrix(relabel) if relabel is not None else np.eye(d, dtype=complex)
    mats = []
    for choice in itertools.product((0, 1), repeat=len(pairs)):
        m = np.eye(d, dtype=complex)
        for pair, q in zip(pairs, choice):
            m = pair[q] @ m
        mats.append(p @ m)
    return Channel.from_list(mats)


def realized_fidelities(plan: ConversionPlan) -> list[float]:
    """Overlap of every non-negligible output branch with the plan's target."""
    _, branches = apply_channel(plan.total_channel, plan.source)
    return [overlap_fidelity(b, plan.target) for _, b in branches]


# --- fixed constructions for 3D -> 2D conversions ---------------------------


def kraus_3to2(theta1: float, theta2: float, theta3: float, theta4: float, theta5: float) -> tuple[Channel, bool]:
    """Four-operator 3D -> 2D channel of the two-group interferometer.

    Returns the channel and whether its Kraus set is complete. The
    operators are the (group, polarization) projections of an isometry, so
    the flag is true for every real angle choice.
    """
    c1, s1 = math.cos(2 * theta1), math.sin(2 * theta1)
    c2, s2 = math.cos(2 * theta2), math.sin(2 * theta2)
    c3, s3 = math.cos(2 * theta3), math.sin(2 * theta3)
    c4, s4 = math.cos(2 * theta4), math.sin(2 * theta4)
    c5, s5 = math.cos(2 * theta5), math.sin(2 * theta5)
    k = np.zeros((4, 2, 3), dtype=complex)
    k[0, 0, 0], k[0, 1, 2] = -c1 * s4, c3
    k[1, 0, 0], k[1, 1, 1] = c1 * c4, s2
    k[2, 0, 1], k[2, 1, 2] = -c2 * s5, -s3
    k[3, 1, 0], k[3, 0, 1] = s1, c2 * c5
    ch = Channel(k)
    return ch, ch.is_complete()


def angles_for_3to2(alpha: float) -> tuple[float, float, float, float, float]:
    """Plate angles sending ``psi3(alpha)`` to the 2D maximally coherent state."""
    if not 0.0 <= alpha <= 0.5:
        raise InvalidArgumentError(f"alpha must lie in [0, 1/2], got {alpha}")
    t12 = 0.5 * math.acos(1.0 / math.sqrt(2.0 * (1.0 - alpha)))
    t45 = -0.5 * math.acos(math.sqrt(max(0.0, 1.0 - 2.0 * alpha)))
    return t12, t12, -math.pi / 8, t45, t45


def polarization_tagged_channel(d_in: int, d_out: int, routes) -> Channel:
    """Two-Kraus SIO whose outcomes are the final photon polarization.

    ``routes[k] = ((out_V, amp_V), (out_H, amp_H))`` sends input mode k to
    ``out_V`` with amplitude ``amp_V`` in the V outcome and to ``out_H``
    with ``amp_H`` in the H outcome. Returns ``[K_V, K_H]``.
    """
    kv = np.zeros((d_out, d_in), dtype=complex)
    kh = np.zeros((d_out, d_in), dtype=complex)
    for k, ((ov, av), (oh, ah)) in enumerate(routes):
        kv[ov, k] += av
        kh[oh, k] += ah
    return Channel.from_list([kv, kh])


def merge_3to2_channel(psi0: float, psi1: float) -> Channel:
    """Merge modes 0 and 1 into output mode 1 and send mode 2 to output mode 0.

    Mode 2's polarization is prepared as ``(psi0 H + psi1 V)/n`` so it
    matches the merged path and the output stays pure. With no weight on
    modes 0 and 1 mode 2 keeps its V polarization.
    """
    n = math.hypot(psi0, psi1)
    if n == 0:
        psi0, psi1, n = 0.0, 1.0, 1.0
    return polarization_tagged_channel(3, 2, [((1, 0.0), (1, 1.0)), ((1, 1.0), (1, 0.0)), ((0, psi1 / n), (0, psi0 / n))])


def merge_4to2_channel() -> Channel:
    """Merge mode 0 into mode 2 and mode 1 into mode 3 (modes 0, 1 end empty)."""
    return polarization_tagged_channel(4, 4, [((2, 0.0), (2, 1.0)), ((3, 0.0), (3, 1.0)), ((2, 1.0), (2, 0.0)), ((3, 1.0), (3, 0.0))])
