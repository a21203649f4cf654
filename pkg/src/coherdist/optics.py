"""Element-level simulation of path/polarization photonic circuits.

A single photon lives on labels ``(path, pol)`` with pol H = 0, V = 1. The
spatial path is the system; polarization is the ancilla. States are kept as
ensembles of pure branches: unitary elements act inside each branch and a
polarizing beam splitter may split a branch into its H and V groups.
Density matrices are only formed at readout.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import CircuitError, InvalidArgumentError, LeakageError
from .sio import Channel, angles_for_3to2, channel_distance, kraus_3to2, merge_3to2_channel, merge_4to2_channel
from .states import PureState, family_state, make_pure_state

H, V = 0, 1
POL_NAMES = {"H": H, "V": V}
LEAK_TOL = 1e-12
_EMPTY = 1e-30


def hwp_unitary(theta: float) -> np.ndarray:
    """Half-wave plate at angle ``theta`` on the (H, V) basis."""
    c, s = math.cos(2 * theta), math.sin(2 * theta)
    return np.array([[c, s], [s, -c]])


def _pol(x) -> int:
    return POL_NAMES[x] if isinstance(x, str) else int(x)


def _pol_name(q: int) -> str:
    return "H" if q == H else "V"


# --- elements ---------------------------------------------------------------


@dataclass(frozen=True)
class HWP:
    path: int
    theta: float

    def paths(self):
        return (self.path,)

    def apply(self, amps: np.ndarray) -> np.ndarray:
        out = amps.copy()
        out[self.path] = hwp_unitary(self.theta) @ amps[self.path]
        return out

    def to_dict(self):
        return {"kind": "HWP", "path": self.path, "theta": self.theta}


def flip(path: int) -> HWP:
    """Plate at pi/4: exchanges H and V."""
    return HWP(path, math.pi / 4)


@dataclass(frozen=True)
class PhaseComp:
    """Phase ``exp(i phase)`` on one path, optionally on one polarization only."""

    path: int
    phase: float
    pol: Optional[int] = None

    def paths(self):
        return (self.path,)

    def apply(self, amps):
        out = amps.copy()
        f = np.exp(1j * self.phase)
        if self.pol is None:
            out[self.path] *= f
        else:
            out[self.path, self.pol] *= f
        return out

    def to_dict(self):
        return {"kind": "PC", "path": self.path, "phase": self.phase,
                "pol": None if self.pol is None else _pol_name(self.pol)}


def _label_map(routes, n_paths: int) -> dict:
    """Full label permutation from explicit routes; unlisted labels stay put."""
    mapping = {}
    for src, dst in routes:
        mapping[src] = dst
    images = {}
    for p in range(n_paths):
        for q in (H, V):
            dst = mapping.get((p, q), (p, q))
            if dst in images:
                raise CircuitError(f"routing sends both {images[dst]} and {(p, q)} to {dst}")
            images[dst] = (p, q)
    return mapping


@dataclass(frozen=True)
class BD:
    """Beam displacer given as an explicit label routing ``(path, pol) -> (path, pol)``.

    A physical displacer walks one polarization sideways and transmits the
    other; here the walk is spelled out per instance, and it must be a
    permutation of labels.
    """

    routes: tuple

    @classmethod
    def swap(cls, *pairs) -> "BD":
        """Displacer exchanging each pair of labels, e.g. ``((0, H), (1, H))``."""
        routes = []
        for a, b in pairs:
            a = (a[0], _pol(a[1]))
            b = (b[0], _pol(b[1]))
            routes += [(a, b), (b, a)]
        return cls(tuple(routes))

    def paths(self):
        return tuple(p for r in self.routes for p, _ in r)

    def apply(self, amps):
        mapping = _label_map(self.routes, amps.shape[0])
        out = amps.copy()
        for (p, q), (p2, q2) in mapping.items():
            out[p2, q2] = amps[p, q]
        return out

    def to_dict(self):
        return {"kind": "BD", "routes": [[[p, _pol_name(q)], [p2, _pol_name(q2)]] for (p, q), (p2, q2) in self.routes]}


@dataclass(frozen=True)
class Relabel:
    """Path permutation; ``perm[p]`` is the new index of path p."""

    perm: tuple

    def paths(self):
        return tuple(range(len(self.perm)))

    def apply(self, amps):
        if sorted(self.perm) != list(range(amps.shape[0])):
            raise CircuitError("relabel must permute every path")
        out = np.empty_like(amps)
        out[list(self.perm)] = amps
        return out

    def to_dict(self):
        return {"kind": "Relabel", "perm": list(self.perm)}


@dataclass(frozen=True)
class PBS:
    """Polarizing beam splitter routing the V light of ``paths`` to ``p + offset``.

    The V group and the rest become distinguishable path groups. With
    ``dephase`` the branch is split into the two groups right away, tagged
    ``'0'`` (H group) and ``'1'`` (V group).
    """

    paths_in: tuple
    offset: int
    dephase: bool = True

    def paths(self):
        return tuple(self.paths_in) + tuple(p + self.offset for p in self.paths_in)

    def route(self, amps):
        out = amps.copy()
        for p in self.paths_in:
            out[p, V], out[p + self.offset, V] = amps[p + self.offset, V], amps[p, V]
        return out

    def group_mask(self, n_paths: int) -> np.ndarray:
        mask = np.zeros((n_paths, 2), dtype=bool)
        for p in self.paths_in:
            mask[p + self.offset, V] = True
        return mask

    def to_dict(self):
        return {"kind": "PBS", "paths": list(self.paths_in), "offset": self.offset, "dephase": self.dephase}


Element = Union[HWP, BD, PBS, PhaseComp, Relabel]


def element_from_dict(doc: dict) -> Element:
    kind = doc["kind"]
    if kind == "HWP":
        return HWP(int(doc["path"]), float(doc["theta"]))
    if kind == "PC":
        return PhaseComp(int(doc["path"]), float(doc["phase"]), None if doc["pol"] is None else _pol(doc["pol"]))
    if kind == "BD":
        return BD(tuple(((int(a[0]), _pol(a[1])), (int(b[0]), _pol(b[1]))) for a, b in doc["routes"]))
    if kind == "PBS":
        return PBS(tuple(int(p) for p in doc["paths"]), int(doc["offset"]), bool(doc["dephase"]))
    if kind == "Relabel":
        return Relabel(tuple(int(p) for p in doc["perm"]))
    raise CircuitError(f"unknown element kind {kind!r}")


# --- states and circuits ----------------------------------------------------


@dataclass(frozen=True, eq=False)
class Branch:
    weight: float
    amps: np.ndarray  # (n_paths, 2), normalized
    tag: tuple = ()


@dataclass(frozen=True, eq=False)
class DualRailState:
    branches: tuple
    n_paths: int
    readout: Optional[tuple] = None  # readout[p] = spatial mode of path p, -1 if unread

    @classmethod
    def product(cls, state: PureState, n_paths: Optional[int] = None, pol: str = "V") -> "DualRailState":
        n = state.dim if n_paths is None else n_paths
        if n < state.dim:
            raise InvalidArgumentError("not enough paths for the state")
        amps = np.zeros((n, 2), dtype=complex)
        amps[: state.dim, _pol(pol)] = state.amps
        return cls((Branch(1.0, amps),), n)

    @property
    def total_weight(self) -> float:
        return float(sum(b.weight for b in self.branches))


@dataclass(frozen=True)
class CircuitTemplate:
    elements: tuple
    input_paths: int
    n_paths: int
    readout: tuple  # spatial mode per physical path, -1 for paths that must end dark

    def __post_init__(self):
        if len(self.readout) != self.n_paths:
            raise CircuitError("readout must list every path")
        for e in self.elements:
            bad = [p for p in e.paths() if not 0 <= p < self.n_paths]
            if bad:
                raise CircuitError(f"{type(e).__name__} touches path {bad[0]} outside 0..{self.n_paths - 1}")

    @property
    def n_modes(self) -> int:
        return max(self.readout) + 1

    def to_dict(self) -> dict:
        return {
            "input_paths": self.input_paths,
            "n_paths": self.n_paths,
            "readout": list(self.readout),
            "elements": [e.to_dict() for e in self.elements],
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, doc: dict) -> "CircuitTemplate":
        return cls(tuple(element_from_dict(e) for e in doc["elements"]), int(doc["input_paths"]),
                   int(doc["n_paths"]), tuple(int(r) for r in doc["readout"]))

    @classmethod
    def from_json(cls, text: str) -> "CircuitTemplate":
        return cls.from_dict(json.loads(text))


def _split(branch: Branch, mask: np.ndarray) -> list[Branch]:
    out = []
    for label, part in (("0", np.where(mask, 0, branch.amps)), ("1", np.where(mask, branch.amps, 0))):
        w = float(np.vdot(part, part).real)
        if w > _EMPTY:
            out.append(Branch(branch.weight * w, part / math.sqrt(w), branch.tag + (label,)))
    return out


def run_circuit(c: CircuitTemplate, state: DualRailState) -> DualRailState:
    if state.n_paths != c.input_paths:
        raise CircuitError(f"circuit takes {c.input_paths} input paths, state has {state.n_paths}")
    branches = []
    for b in state.branches:
        amps = np.zeros((c.n_paths, 2), dtype=complex)
        amps[: state.n_paths] = b.amps
        branches.append(Branch(b.weight, amps, b.tag))
    for e in c.elements:
        nxt = []
        for b in branches:
            if isinstance(e, PBS):
                routed = Branch(b.weight, e.route(b.amps), b.tag)
                nxt.extend(_split(routed, e.group_mask(c.n_paths)) if e.dephase else [routed])
            else:
                nxt.append(Branch(b.weight, e.apply(b.amps), b.tag))
        branches = nxt
    return DualRailState(tuple(branches), c.n_paths, c.readout)


def _copy_index(readout: Sequence[int]) -> list[int]:
    seen: dict = {}
    out = []
    for m in readout:
        out.append(seen.get(m, 0))
        seen[m] = out[-1] + 1
    return out


def _leaked(amps: np.ndarray, readout) -> float:
    dark = np.asarray(readout) < 0
    return float(np.sum(np.abs(amps[dark]) ** 2))


def spatial_tomography(s: DualRailState) -> np.ndarray:
    """Density matrix over spatial modes, tracing out polarization and path copies."""
    readout = s.readout if s.readout is not None else tuple(range(s.n_paths))
    n_modes = max(readout) + 1
    copies = _copy_index(readout)
    leaked = sum(b.weight * _leaked(b.amps, readout) for b in s.branches)
    if leaked > LEAK_TOL:
        raise LeakageError(f"weight {leaked:.3g} left on unread paths", leaked)
    rho = np.zeros((n_modes, n_modes), dtype=complex)
    for b in s.branches:
        for c in set(copies):
            for q in (H, V):
                v = np.zeros(n_modes, dtype=complex)
                for p, m in enumerate(readout):
                    if m >= 0 and copies[p] == c:
                        v[m] += b.amps[p, q]
                rho += b.weight * np.outer(v, v.conj())
    return rho


def induced_channel(c: CircuitTemplate) -> Channel:
    """Kraus channel on spatial modes realized by ``c`` with a V-polarized input.

    Each basis path is sent through the circuit; every (branch tag, path
    copy, final polarization) outcome contributes one Kraus operator. Kraus
    operators are ordered by tag, then copy, then V before H; outcomes that
    never occur are dropped.
    """
    n_modes = c.n_modes
    copies = _copy_index(c.readout)
    cols: dict = {}
    for k in range(c.input_paths):
        amps = np.zeros((c.input_paths, 2), dtype=complex)
        amps[k, V] = 1.0
        out = run_circuit(c, DualRailState((Branch(1.0, amps),), c.input_paths))
        for b in out.branches:
            vec = math.sqrt(b.weight) * b.amps
            leaked = _leaked(vec, c.readout)
            if leaked > LEAK_TOL:
                raise LeakageError(f"input path {k} leaks weight {leaked:.3g} onto unread paths", leaked)
            for p, m in enumerate(c.readout):
                if m < 0:
                    continue
                for qi, q in enumerate((V, H)):
                    key = (b.tag, copies[p], qi)
                    mat = cols.setdefault(key, np.zeros((n_modes, c.input_paths), dtype=complex))
                    mat[m, k] += vec[p, q]
    mats = [cols[key] for key in sorted(cols) if np.any(np.abs(cols[key]) > _EMPTY)]
    return Channel.from_list(mats)


# --- circuit builders -------------------------------------------------------


def module_f(i: int, j: int, theta1: float, theta2: float, theta3: float, bystanders=()) -> list:
    """Two-mode SIO block on paths i, j; inputs are V polarized.

    Realizes |iV> -> cos2t1 |jH> + sin2t1 |iV>, |jV> -> cos2t2 |jV> + sin2t2 |iH>
    and |kV> -> |k>(cos2t3 |V> + sin2t3 |H>) for every bystander k.
    """
    els = [flip(i), HWP(i, theta1), flip(j), HWP(j, theta2), flip(j)]
    for k in bystanders:
        els += [flip(k), HWP(k, theta3), flip(k)]
    els.append(BD.swap(((i, H), (j, H))))
    return els


def module_m(n_occupied: int, dephase: bool = True) -> list:
    """PBS sending V light of paths ``0..n-1`` to ``n..2n-1``, then H -> V on the H group."""
    return [PBS(tuple(range(n_occupied)), n_occupied, dephase)] + [flip(p) for p in range(n_occupied)]


def module_f_circuit(d: int, i: int, j: int, theta1: float, theta2: float, theta3: float) -> CircuitTemplate:
    by = [k for k in range(d) if k not in (i, j)]
    return CircuitTemplate(tuple(module_f(i, j, theta1, theta2, theta3, by)), d, d, tuple(range(d)))


def protocol_circuit(plan, dephase: bool = True) -> CircuitTemplate:
    """Multi-step circuit for a :class:`~coherdist.sio.ConversionPlan`.

    Module F runs on every path group for each step; between steps module M
    doubles the number of groups. Group g holds mode m on path ``g*d + m``.
    """
    d = plan.dim
    groups = 1
    els: list = []
    for t, step in enumerate(plan.steps):
        if t:
            els += module_m(groups * d, dephase)
            groups *= 2
        by = [k for k in range(d) if k not in (step.i, step.j)]
        for g in range(groups):
            off = g * d
            els += module_f(step.i + off, step.j + off, step.theta1, step.theta2, step.theta3, [k + off for k in by])
    if plan.relabel is not None:
        perm = [g * d + int(plan.relabel[m]) for g in range(groups) for m in range(d)]
        els.append(Relabel(tuple(perm)))
    return CircuitTemplate(tuple(els), d, groups * d, tuple(p % d for p in range(groups * d)))


def circuit_3to2(theta1, theta2, theta3, theta4, theta5, dephase: bool = True) -> CircuitTemplate:
    """Two-group 3D -> 2D interferometer with a single combining displacer.

    Paths 0-2 form the H group after the PBS and paths 3-5 the V group. The
    basis maps are

        |0V> -> cos2t1 (cos2t4 |0,g0,H> - sin2t4 |0,g0,V>) + sin2t1 |1,g1,H>
        |1V> -> cos2t2 (cos2t5 |0,g1,H> - sin2t5 |0,g1,V>) + sin2t2 |1,g0,H>
        |2V> -> cos2t3 |1,g0,V> - sin2t3 |1,g1,V>
    """
    pi = math.pi
    els = [
        flip(0), HWP(0, theta1),
        flip(1), HWP(1, theta2), flip(1),
        flip(2), HWP(2, theta3), PhaseComp(2, pi, V),
        PBS((0, 1, 2), 3, dephase),
        # H group
        HWP(0, theta4), PhaseComp(0, pi, V), flip(2),
        # V group
        flip(3), flip(4), HWP(4, theta5), PhaseComp(4, pi, V),
        BD.swap(((2, V), (1, V)), ((5, V), (3, V))),
        Relabel((0, 1, 2, 4, 3, 5)),
    ]
    return CircuitTemplate(tuple(els), 3, 6, (0, 1, -1, 0, 1, -1))


def circuit_merge_3to2(psi0: float, psi1: float) -> CircuitTemplate:
    """Combine paths 0, 1 into one path and move path 2 to output mode 0.

    The plate on path 2 turns V into ``(psi0 H + psi1 V)/n``, the polarization
    the combined path carries.
    """
    if psi0 == 0 and psi1 == 0:
        psi1 = 1.0
    theta = 0.5 * math.atan2(psi0, -psi1)
    els = [flip(0), BD.swap(((0, H), (1, H))), HWP(2, theta), Relabel((2, 1, 0))]
    return CircuitTemplate(tuple(els), 3, 3, (0, 1, -1))


def circuit_merge_4to2() -> CircuitTemplate:
    """Combine path 0 into path 2 and path 1 into path 3."""
    els = [flip(0), flip(1), BD.swap(((0, H), (2, H)), ((1, H), (3, H)))]
    return CircuitTemplate(tuple(els), 4, 4, (0, 1, 2, 3))


def circuit_fig2b(alpha: float) -> CircuitTemplate:
    if not 0.0 <= alpha <= 0.5:
        raise InvalidArgumentError(f"the 3D -> 2D SIO circuit needs alpha in [0, 1/2], got {alpha}")
    return circuit_3to2(*angles_for_3to2(alpha))


def circuit_fig2d(alpha: float) -> CircuitTemplate:
    if not 0.5 < alpha <= 1.0:
        raise InvalidArgumentError(f"the 3D merge circuit needs alpha in (1/2, 1], got {alpha}")
    b = math.sqrt((1 - alpha) / 2)
    return circuit_merge_3to2(b, b)


def circuit_fig2e(alpha: float) -> CircuitTemplate:
    if not 0.0 <= alpha <= 0.5:
        raise InvalidArgumentError(f"the 4D merge circuit needs alpha in [0, 1/2], got {alpha}")
    return circuit_merge_4to2()


# --- figure registry --------------------------------------------------------


def _phi2_on(d: int, modes) -> PureState:
    amps = np.zeros(d)
    amps[list(modes)] = 1.0
    return make_pure_state(amps)


@dataclass(frozen=True)
class FigureSpec:
    name: str
    family: str
    domain: tuple  # (lo, hi, lo_open)
    build: Callable[[float], CircuitTemplate]
    reference: Callable[[float], Channel]
    target: Callable[[float], PureState]

    def in_regime(self, alpha: float) -> bool:
        lo, hi, lo_open = self.domain
        return (lo < alpha if lo_open else lo <= alpha) and alpha <= hi

    def check_alpha(self, alpha: float) -> None:
        if not self.in_regime(alpha):
            lo, hi, lo_open = self.domain
            raise InvalidArgumentError(
                f"figure {self.name} needs alpha in {'(' if lo_open else '['}{lo}, {hi}], got {alpha}"
            )


def _ref_3to2(alpha):
    b = math.sqrt((1 - alpha) / 2)
    return merge_3to2_channel(b, b)


FIGURES = {
    "2b": FigureSpec("2b", "psi3", (0.0, 0.5, False), circuit_fig2b,
                     lambda a: kraus_3to2(*angles_for_3to2(a))[0], lambda a: _phi2_on(2, (0, 1))),
    "2d": FigureSpec("2d", "psi3", (0.5, 1.0, True), circuit_fig2d, _ref_3to2,
                     lambda a: make_pure_state([math.sqrt(a), math.sqrt(1 - a)])),
    "2e": FigureSpec("2e", "psi4", (0.0, 0.5, False), circuit_fig2e,
                     lambda a: merge_4to2_channel(), lambda a: _phi2_on(4, (2, 3))),
}


@dataclass(frozen=True, eq=False)
class FigureRun:
    figure: str
    alpha: float
    rho: np.ndarray
    target: PureState
    fidelity: float
    worst_branch_fidelity: float
    channel_distance: float


def branch_fidelities(s: DualRailState, target: PureState) -> list[float]:
    """Overlap with ``target`` of every (branch, polarization) spatial component."""
    readout = s.readout if s.readout is not None else tuple(range(s.n_paths))
    n_modes = max(readout) + 1
    copies = _copy_index(readout)
    t = target.padded(n_modes).amps
    out = []
    for b in s.branches:
        for c in set(copies):
            for q in (H, V):
                v = np.zeros(n_modes, dtype=complex)
                for p, m in enumerate(readout):
                    if m >= 0 and copies[p] == c:
                        v[m] += b.amps[p, q]
                w = float(np.vdot(v, v).real)
                if w > LEAK_TOL:
                    out.append(abs(np.vdot(t, v)) ** 2 / w)
    return out


def simulate_figure(name: str, alpha: float) -> FigureRun:
    try:
        fig = FIGURES[name]
    except KeyError:
        raise InvalidArgumentError(f"unknown figure {name!r}; choose from {sorted(FIGURES)}")
    fig.check_alpha(alpha)
    circuit = fig.build(alpha)
    out = run_circuit(circuit, DualRailState.product(family_state(fig.family, alpha)))
    rho = spatial_tomography(out)
    target = fig.target(alpha)
    t = target.padded(rho.shape[0]).amps
    fid = float(np.vdot(t, rho @ t).real)
    dist = channel_distance(induced_channel(circuit), fig.reference(alpha))
    return FigureRun(name, float(alpha), rho, target, fid, min(branch_fidelities(out, target)), dist)
