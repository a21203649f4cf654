import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from coherdist.distillation import embed_target, optimal_target
from coherdist.errors import CircuitError, InvalidArgumentError, LeakageError
from coherdist.optics import (
    BD,
    FIGURES,
    HWP,
    PBS,
    Branch,
    CircuitTemplate,
    DualRailState,
    PhaseComp,
    Relabel,
    circuit_3to2,
    circuit_fig2b,
    circuit_fig2d,
    circuit_fig2e,
    flip,
    hwp_unitary,
    induced_channel,
    module_f_circuit,
    protocol_circuit,
    run_circuit,
    simulate_figure,
    spatial_tomography,
)
from coherdist.sio import angles_for_3to2, channel_distance, embed_step, kraus_3to2, plan_conversion, two_mode_kraus
from coherdist.states import density_matrix, make_pure_state, psi3

H, V = 0, 1


def test_hwp_matrix():
    assert np.allclose(hwp_unitary(math.pi / 4), [[0, 1], [1, 0]])
    assert np.allclose(hwp_unitary(0), np.diag([1, -1]))
    u = hwp_unitary(0.37)
    assert np.allclose(u @ u.T, np.eye(2)) and np.linalg.det(u) == pytest.approx(-1)


def test_empty_circuit_and_identity_channel():
    c = CircuitTemplate((), 3, 3, (0, 1, 2))
    s = DualRailState.product(psi3(0.2))
    out = run_circuit(c, s)
    assert np.array_equal(out.branches[0].amps, s.branches[0].amps)
    ch = induced_channel(c)
    assert len(ch) == 1 and np.allclose(ch.kraus[0], np.eye(3))


def test_tomography_of_product_and_mixture():
    s = psi3(0.4)
    assert np.allclose(spatial_tomography(DualRailState.product(s)), density_matrix(s))
    amps0 = np.zeros((2, 2), dtype=complex)
    amps1 = amps0.copy()
    amps0[0, V] = 1
    amps1[1, H] = 1
    mix = DualRailState((Branch(0.5, amps0, ("0",)), Branch(0.5, amps1, ("1",))), 2)
    assert np.allclose(spatial_tomography(mix), np.diag([0.5, 0.5]))


def test_module_f_basis_map():
    step, _ = two_mode_kraus([0.8, 0.6, 0.0], [math.sqrt(0.82), math.sqrt(0.18), 0.0])
    c = module_f_circuit(3, 0, 1, step.theta1, step.theta2, step.theta3)
    t1, t2, t3 = step.theta1, step.theta2, step.theta3
    expect = {
        0: {(1, H): math.cos(2 * t1), (0, V): math.sin(2 * t1)},
        1: {(1, V): math.cos(2 * t2), (0, H): math.sin(2 * t2)},
        2: {(2, V): math.cos(2 * t3), (2, H): math.sin(2 * t3)},
    }
    for k, amp in expect.items():
        x = np.zeros(3)
        x[k] = 1
        (b,) = run_circuit(c, DualRailState.product(make_pure_state(x))).branches
        want = np.zeros((3, 2))
        for (p, q), v in amp.items():
            want[p, q] = v
        assert np.allclose(b.amps, want, atol=1e-14)
    assert np.abs(induced_channel(c).kraus - embed_step(step, 3).kraus).max() <= 1e-10


def test_module_f_leaves_bystanders_alone():
    s = make_pure_state([0.5, 0.3, 0.6, 0.55])
    amps = s.amps.real
    w = amps[0] ** 2 + amps[2] ** 2
    step, _ = two_mode_kraus(amps, [math.sqrt(0.8 * w), amps[1], math.sqrt(0.2 * w), amps[3]], 0, 2)
    c = module_f_circuit(4, 0, 2, step.theta1, step.theta2, step.theta3)
    rho = spatial_tomography(run_circuit(c, DualRailState.product(s)))
    assert rho[1, 1].real == pytest.approx(amps[1] ** 2) and rho[3, 3].real == pytest.approx(amps[3] ** 2)


def test_pbs_splits_only_at_dephasing():
    c = CircuitTemplate((HWP(0, math.pi / 8), PBS((0,), 1, True)), 1, 2, (0, 0))
    out = run_circuit(c, DualRailState.product(make_pure_state([1])))
    assert [b.tag for b in out.branches] == [("0",), ("1",)]
    assert sum(b.weight for b in out.branches) == pytest.approx(1, abs=1e-12)
    c = CircuitTemplate((HWP(0, math.pi / 8), PBS((0,), 1, False)), 1, 2, (0, 0))
    assert len(run_circuit(c, DualRailState.product(make_pure_state([1]))).branches) == 1


def test_fig2b_matches_printed_kraus_in_order():
    for a in (0.0, 0.1, 0.3, 0.5):
        ch = induced_channel(circuit_fig2b(a))
        ref, _ = kraus_3to2(*angles_for_3to2(a))
        assert np.abs(ch.kraus - ref.kraus).max() <= 1e-12


@given(st.lists(st.floats(-4, 4), min_size=5, max_size=5), st.booleans())
def test_3to2_circuit_matches_kraus_for_any_angles(angles, dephase):
    ch = induced_channel(circuit_3to2(*angles, dephase=dephase))
    assert np.abs(ch.kraus - kraus_3to2(*angles)[0].kraus).max() <= 1e-12


def test_figure_examples():
    assert simulate_figure("2b", 0.3).fidelity == pytest.approx(1, abs=1e-9)
    assert simulate_figure("2b", 0.5).fidelity == pytest.approx(1, abs=1e-9)
    run = simulate_figure("2d", 0.75)
    assert run.fidelity == pytest.approx(1, abs=1e-9)
    assert np.allclose(run.target.amps, [math.sqrt(0.75), 0.5])
    run = simulate_figure("2e", 0.25)
    assert run.fidelity == pytest.approx(1, abs=1e-9) and run.rho.shape == (4, 4)
    assert simulate_figure("2e", 0.1).fidelity == pytest.approx(1, abs=1e-9)


def test_figure_regimes():
    with pytest.raises(InvalidArgumentError):
        circuit_fig2b(0.7)
    with pytest.raises(InvalidArgumentError):
        circuit_fig2d(0.5)
    with pytest.raises(InvalidArgumentError):
        circuit_fig2e(-0.1)
    with pytest.raises(InvalidArgumentError):
        simulate_figure("2z", 0.1)


def test_every_figure_branch_is_the_target():
    for name, fig in FIGURES.items():
        lo, hi, lo_open = fig.domain
        for a in np.linspace(lo, hi, 7)[1 if lo_open else 0:]:
            run = simulate_figure(name, float(a))
            assert run.worst_branch_fidelity >= 1 - 1e-12
            assert run.channel_distance <= 1e-12
            assert np.trace(run.rho).real == pytest.approx(1, abs=1e-12)


def test_leakage_reported():
    c = CircuitTemplate((flip(0),), 2, 3, (0, 1, -1))
    c_leaky = CircuitTemplate((BD.swap(((0, V), (2, V))),), 2, 3, (0, 1, -1))
    induced_channel(c)
    with pytest.raises(LeakageError) as exc:
        induced_channel(c_leaky)
    assert exc.value.leaked_weight == pytest.approx(1)
    with pytest.raises(LeakageError):
        spatial_tomography(run_circuit(c_leaky, DualRailState.product(make_pure_state([1, 0]))))


def test_bad_circuits():
    with pytest.raises(CircuitError):
        CircuitTemplate((HWP(5, 0.1),), 2, 2, (0, 1))
    with pytest.raises(CircuitError):
        CircuitTemplate((), 2, 2, (0,))
    bad_bd = CircuitTemplate((BD((((0, H), (1, H)),)),), 2, 2, (0, 1))
    with pytest.raises(CircuitError):
        induced_channel(bad_bd)
    with pytest.raises(CircuitError):
        run_circuit(CircuitTemplate((), 2, 2, (0, 1)), DualRailState.product(psi3(0.1)))


def test_circuit_json_roundtrip_is_stable():
    c = circuit_fig2b(0.3)
    text = c.to_json()
    again = CircuitTemplate.from_json(text)
    assert again.to_json() == text
    assert list(c.to_dict()) == ["input_paths", "n_paths", "readout", "elements"]
    assert text.index('"kind": "HWP"') < text.index('"kind": "PBS"')
    assert np.allclose(induced_channel(again).kraus, induced_channel(c).kraus)


def test_phase_comp_and_relabel():
    amps = np.zeros((2, 2), dtype=complex)
    amps[0] = [1, 1]
    assert np.allclose(PhaseComp(0, math.pi, V).apply(amps)[0], [1, -1])
    assert np.allclose(PhaseComp(0, math.pi).apply(amps)[0], [-1, -1])
    assert np.allclose(Relabel((1, 0)).apply(amps)[1], [1, 1])


@st.composite
def plans(draw):
    d = draw(st.integers(2, 4))
    v = draw(st.lists(st.floats(0.01, 1), min_size=d, max_size=d))
    s = make_pure_state(v)
    return s, plan_conversion(s, embed_target(s, optimal_target(s, draw(st.integers(1, d)))))


@given(plans())
def test_protocol_circuit_matches_plan_with_and_without_dephasing(sp):
    s, plan = sp
    for dephase in (True, False):
        c = protocol_circuit(plan, dephase)
        assert channel_distance(induced_channel(c), plan.total_channel) <= 1e-10
        out = run_circuit(c, DualRailState.product(s))
        assert abs(sum(b.weight for b in out.branches) - 1) <= 1e-12
        assert np.abs(spatial_tomography(out) - density_matrix(plan.target)).max() <= 1e-9
