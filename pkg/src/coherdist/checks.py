"""Invariant suite behind ``coherdist validate``.

Each check returns ``(ok, detail)``. Faults can be injected by name to
confirm that a check actually fires; see :data:`FAULTS`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import distillation as dist
from . import optics, sio
from .errors import InfeasibleConversionError
from .states import make_pure_state, psi3, psi4

FAULTS = ("perturb-kraus", "oracle-mismatch", "plan-branch", "optics-angle")


@dataclass(frozen=True)
class CheckResult:
    name: str
    ok: bool
    detail: str


def _sample_channels(rng, faults):
    chans = []
    for _ in range(20):
        d = int(rng.integers(2, 6))
        x = make_pure_state(rng.random(d))
        t = dist.embed_target(x, dist.optimal_target(x, int(rng.integers(1, d + 1))))
        chans.append(sio.plan_conversion(x, t).total_channel)
    for a in np.linspace(0, 0.5, 11):
        chans.append(sio.kraus_3to2(*sio.angles_for_3to2(float(a)))[0])
    chans.append(sio.two_mode_kraus([math.sqrt(0.5), math.sqrt(0.5)], [math.sqrt(0.75), 0.5])[1])
    if "perturb-kraus" in faults:
        k = chans[0].kraus.copy()
        k[0, 0, 0] += 1e-3
        chans[0] = sio.Channel(k)
    return chans


def check_completeness(rng, faults):
    errs = [c.completeness_error() for c in _sample_channels(rng, faults)]
    worst = max(errs)
    return worst <= sio.COMPLETENESS_TOL, f"worst completeness error {worst:.2e}"


def check_sio_structure(rng, faults):
    chans = [c for c in _sample_channels(rng, ()) if c.is_complete()]
    bad = [i for i, c in enumerate(chans) if sio.classify_operation(c) is not sio.OperationClass.SIO]
    return not bad, f"{len(chans) - len(bad)}/{len(chans)} channels strictly incoherent"


def check_oracle(rng, faults):
    worst = 0.0
    for _ in range(30):
        d = int(rng.integers(2, 7))
        x = make_pure_state(rng.random(d))
        m = int(rng.integers(1, d + 1))
        oracle = dist.norm_oracle(x, m) + (1e-3 if "oracle-mismatch" in faults else 0.0)
        worst = max(worst, abs(dist.m_distillation_norm(x, m).norm_value - oracle))
    return worst <= 1e-6, f"worst |closed form - oracle| {worst:.2e}"


def check_determinism(rng, faults):
    worst, refused = 0.0, 0
    for _ in range(30):
        d = int(rng.integers(2, 6))
        x = make_pure_state(rng.random(d))
        t = dist.embed_target(x, dist.optimal_target(x, int(rng.integers(1, d + 1))))
        plan = sio.plan_conversion(x, t)
        if "plan-branch" in faults:
            plan = sio.ConversionPlan(plan.steps, plan.source, make_pure_state(np.roll(t.amps, 1)),
                                      plan.total_channel, plan.relabel)
        worst = max(worst, 1 - min(sio.realized_fidelities(plan)))
        try:
            sio.plan_conversion(t, make_pure_state(np.ones(d)))
        except InfeasibleConversionError:
            refused += 1
    return worst <= 1e-9 and refused == 30, f"worst branch infidelity {worst:.2e}, refused {refused}/30 infeasible"


def check_figures(rng, faults):
    worst = 0.0
    for name, fig in optics.FIGURES.items():
        lo, hi, lo_open = fig.domain
        for a in np.linspace(lo, hi, 6)[1 if lo_open else 0:]:
            run = optics.simulate_figure(name, float(a))
            worst = max(worst, run.channel_distance, 1 - run.fidelity, 1 - run.worst_branch_fidelity)
    if "optics-angle" in faults:
        c = optics.circuit_3to2(*np.add(sio.angles_for_3to2(0.3), (0.01, 0, 0, 0, 0)))
        worst = max(worst, sio.channel_distance(optics.induced_channel(c), optics.FIGURES["2b"].reference(0.3)))
    return worst <= 1e-9, f"worst figure deviation {worst:.2e}"


def check_protocol_circuits(rng, faults):
    worst = 0.0
    for _ in range(10):
        d = int(rng.integers(2, 5))
        x = make_pure_state(rng.random(d))
        t = dist.embed_target(x, dist.optimal_target(x, int(rng.integers(1, d + 1))))
        plan = sio.plan_conversion(x, t)
        for dephase in (True, False):
            ch = optics.induced_channel(optics.protocol_circuit(plan, dephase))
            worst = max(worst, sio.channel_distance(ch, plan.total_channel))
    return worst <= 1e-9, f"worst optical vs Kraus distance {worst:.2e}"


def check_closed_forms(rng, faults):
    worst = 0.0
    for a in np.linspace(0, 1, 101):
        exact = 1.0 if a <= 0.5 else 0.5 * (math.sqrt(a) + math.sqrt(1 - a)) ** 2
        worst = max(worst, abs(dist.distillation_fidelity(psi3(float(a)), 2) - exact))
    for a in np.linspace(0, 0.5, 51):
        worst = max(worst, abs(dist.distillation_fidelity(psi4(float(a)), 2) - 1.0))
    return worst <= 1e-10, f"worst closed-form deviation {worst:.2e}"


CHECKS: dict[str, Callable] = {
    "completeness": check_completeness,
    "sio-structure": check_sio_structure,
    "norm-oracle": check_oracle,
    "conversion-determinism": check_determinism,
    "figure-circuits": check_figures,
    "protocol-circuits": check_protocol_circuits,
    "closed-forms": check_closed_forms,
}


def run_checks(faults=(), seed: int = 0) -> list[CheckResult]:
    unknown = set(faults) - set(FAULTS)
    if unknown:
        raise ValueError(f"unknown fault(s) {sorted(unknown)}; choose from {list(FAULTS)}")
    out = []
    for name, fn in CHECKS.items():
        try:
            ok, detail = fn(np.random.default_rng(seed), tuple(faults))
        except Exception as exc:  # a crashing check is a failed check
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        out.append(CheckResult(name, bool(ok), detail))
    return out
