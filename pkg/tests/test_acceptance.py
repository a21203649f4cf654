"""Acceptance criteria, one test each, at their stated tolerances.

Every test records a one-line PASS/FAIL verdict that is printed in the
"acceptance criteria" section at the end of the pytest run.
"""

import math
import subprocess
import sys
import time

import numpy as np
import pytest

from coherdist import optics
from coherdist.distillation import (
    distillation_fidelity,
    embed_target,
    fidelity_regions,
    m_distillation_norm,
    norm_oracle,
    one_shot_distillable_coherence,
    optimal_target,
)
from coherdist.errors import InfeasibleConversionError
from coherdist.sio import (
    OperationClass,
    angles_for_3to2,
    classify_operation,
    embed_step,
    kraus_3to2,
    plan_conversion,
    realized_fidelities,
    two_mode_kraus,
)
from coherdist.states import majorizes, make_pure_state, psi3, psi4

from conftest import ACCEPTANCE_LINES


def record(n: int, ok: bool, detail: str) -> None:
    ACCEPTANCE_LINES[n] = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"


def grid(lo, hi, step):
    return [round(lo + k * step, 12) for k in range(int(round((hi - lo) / step)) + 1)]


def test_criterion_1_psi3_fidelity_curve():
    t0 = time.perf_counter()
    err = 0.0
    for a in grid(0.0, 1.0, 0.005):
        exact = 1.0 if a <= 0.5 else 0.5 * (math.sqrt(a) + math.sqrt(1 - a)) ** 2
        err = max(err, abs(distillation_fidelity(psi3(a), 2) - exact))
    dt = time.perf_counter() - t0
    ok = err <= 1e-10 and dt < 1.0
    record(1, ok, f"max abs error {err:.2e} (tol 1e-10), {dt:.3f} s (limit 1 s)")
    assert ok


@pytest.mark.xfail(strict=True, reason="the stated m=3 formula is wrong on [1/3, 1/2]; see test_psi4_m3_upper_branch_closed_form")
def test_criterion_2_psi4_fidelity():
    t0 = time.perf_counter()
    printed = lambda a: (2 / 3) * (math.sqrt(a) + math.sqrt(1 - 2 * a)) ** 2
    err_m2 = err_low = err_mid = err_high = 0.0
    for a in grid(0.0, 0.5, 0.005):
        s = psi4(a)
        err_m2 = max(err_m2, abs(distillation_fidelity(s, 2) - 1.0))
        f3 = distillation_fidelity(s, 3)
        if a <= 1 / 6:
            err_low = max(err_low, abs(f3 - printed(a)))
        if 1 / 6 <= a <= 1 / 3:
            err_mid = max(err_mid, abs(f3 - 1.0))
        if a >= 1 / 3:
            err_high = max(err_high, abs(f3 - printed(a)))
    dt = time.perf_counter() - t0
    worst = max(err_m2, err_low, err_mid, err_high)
    ok = worst <= 1e-10 and dt < 1.0
    record(2, ok, f"m=2 err {err_m2:.1e}; m=3 err on [0,1/6] {err_low:.1e}, [1/6,1/3] {err_mid:.1e}, "
                  f"[1/3,1/2] {err_high:.1e} (tol 1e-10); {dt:.3f} s")
    assert ok


def test_criterion_3_region_boundaries():
    t0 = time.perf_counter()
    (lo, hi), = fidelity_regions(psi3, 3, 0.1, (0.0, 1.0))
    regions_m2 = fidelity_regions(psi3, 2, 0.1, (0.0, 1.0))
    up = regions_m2[-1][1]
    dt = time.perf_counter() - t0
    ok = abs(lo - 0.0838) <= 5e-5 and abs(hi - 0.6495) <= 5e-5 and abs(up - 0.8) <= 1e-6 and dt < 1.0
    record(3, ok, f"m=3 region [{lo:.6f}, {hi:.6f}], m=2 upper {up:.9f}; {dt:.3f} s")
    assert ok


def test_criterion_4_special_points():
    c3 = one_shot_distillable_coherence(psi3(1 / 3), 0.0).coherence_bits
    c4 = one_shot_distillable_coherence(psi4(1 / 6), 0.0).coherence_bits
    ok = c3 == math.log2(3) and c4 == math.log2(3)
    record(4, ok, f"psi3(1/3): {c3!r}, psi4(1/6): {c4!r}, log2(3) = {math.log2(3)!r}")
    assert ok


def test_criterion_5_norm_oracle_equivalence():
    rng = np.random.default_rng(20241015)
    t0 = time.perf_counter()
    worst, n = 0.0, 0
    for _ in range(500):
        d = int(rng.integers(2, 9))
        v = rng.random(d)
        v[rng.random(d) < 0.15] = 0.0
        if not v.any():
            v[0] = 1.0
        s = make_pure_state(v)
        for m in range(1, d + 1):
            worst = max(worst, abs(m_distillation_norm(s, m).norm_value - norm_oracle(s, m)))
            n += 1
    dt = time.perf_counter() - t0
    ok = worst <= 1e-6 and dt < 30.0
    record(5, ok, f"{n} (state, m) pairs, max |closed form - oracle| {worst:.2e} (tol 1e-6), {dt:.1f} s (limit 30 s)")
    assert ok


def test_criterion_6_channel_validity():
    rng = np.random.default_rng(6)
    chans = []
    for _ in range(100):
        d = int(rng.integers(2, 6))
        s = make_pure_state(rng.random(d))
        t = embed_target(s, optimal_target(s, int(rng.integers(1, d + 1))))
        plan = plan_conversion(s, t)
        chans.append(plan.total_channel)
        chans += [embed_step(step, d) for step in plan.steps]
        # concentrate a random pair: target share u is at least the source's largest share
        src = rng.random(2)
        w = float(src @ src)
        u = rng.uniform(max(src**2) / w, 1.0)
        tgt = np.sqrt([u * w, (1 - u) * w])
        chans.append(two_mode_kraus(src, tgt[::-1] if rng.random() < 0.5 else tgt)[1])
    for a in grid(0.0, 0.5, 0.005):
        chans.append(kraus_3to2(*angles_for_3to2(a))[0])
    errs = [c.completeness_error() for c in chans]
    classes = [classify_operation(c) for c in chans]
    n_sio = sum(c is OperationClass.SIO for c in classes)
    ok = max(errs) <= 1e-10 and n_sio == len(chans)
    record(6, ok, f"{len(chans)} channels, worst completeness {max(errs):.2e} (tol 1e-10), {n_sio}/{len(chans)} SIO")
    assert ok


def test_criterion_7_conversion_determinism():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(200):
        d = int(rng.integers(2, 6))
        s = make_pure_state(rng.random(d))
        t = embed_target(s, optimal_target(s, int(rng.integers(1, d + 1))))
        worst = max(worst, 1 - min(realized_fidelities(plan_conversion(s, t))))
    refused = tried = 0
    while tried < 200:
        d = int(rng.integers(2, 6))
        s, t = make_pure_state(rng.random(d)), make_pure_state(rng.random(d))
        if majorizes(s, t).feasible:
            continue
        tried += 1
        try:
            plan_conversion(s, t)
        except InfeasibleConversionError:
            refused += 1
    ok = worst <= 1e-9 and refused == 200
    record(7, ok, f"worst branch infidelity {worst:.2e} (tol 1e-9) over 200 pairs; refused {refused}/200 infeasible")
    assert ok


def test_criterion_8_optics_kraus_equivalence():
    t0 = time.perf_counter()
    worst_dist, worst_infid, n = 0.0, 0.0, 0
    for name, fig in optics.FIGURES.items():
        lo, hi, lo_open = fig.domain
        alphas = np.linspace(lo, hi, 21)[1:] if lo_open else np.linspace(lo, hi, 20)
        for a in alphas:
            run = optics.simulate_figure(name, float(a))
            worst_dist = max(worst_dist, run.channel_distance)
            worst_infid = max(worst_infid, 1 - run.fidelity)
            n += 1
    dt = time.perf_counter() - t0
    ok = worst_dist <= 1e-9 and worst_infid <= 1e-9 and n == 60 and dt < 10.0
    record(8, ok, f"{n} runs, worst trace distance {worst_dist:.2e}, worst 1-F {worst_infid:.2e} (tol 1e-9), {dt:.2f} s")
    assert ok


def _sweep(args, jobs):
    r = subprocess.run([sys.executable, "-m", "coherdist.cli", "sweep", *args, "--jobs", str(jobs)],
                       capture_output=True, check=True)
    return r.stdout


def test_criterion_9_golden_csv():
    specs = {"psi3": ["--family", "psi3", "--step", "0.01"], "psi4": ["--family", "psi4", "--step", "0.005"]}
    same = {}
    for fam, args in specs.items():
        first, second, parallel = _sweep(args, 1), _sweep(args, 1), _sweep(args, 4)
        same[fam] = first == second == parallel and len(first) > 0
    ok = all(same.values())
    record(9, ok, "byte-identical across reruns and --jobs 1 vs 4: " + ", ".join(f"{k}={v}" for k, v in same.items()))
    assert ok
