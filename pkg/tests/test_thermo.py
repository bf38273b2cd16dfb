import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from qotto import qdyn, thermo
from qotto.errors import SupportViolation
from qotto.qdyn import HamiltonianSpec, PauliVector, RampProtocol
from qotto.thermo import ThermalContext

P0_BETA1 = 1 / (1 + math.exp(-1))  # 0.731059


def test_gibbs_zero_temperature():
    h = qdyn.hamiltonian_at(HamiltonianSpec(math.pi / 5), 0.3)
    _, vecs = np.linalg.eigh(h.matrix())
    ground = np.outer(vecs[:, 0], vecs[:, 0].conj())
    assert np.max(np.abs(thermo.gibbs_state(h, ThermalContext(700.0)) - ground)) < 1e-12


def test_gibbs_infinite_temperature():
    h = qdyn.hamiltonian_at(HamiltonianSpec(1.1), 2.0)
    assert np.max(np.abs(thermo.gibbs_state(h, ThermalContext(1e-12)) - np.eye(2) / 2)) < 1e-10


def test_gibbs_weight():
    h = PauliVector(cz=0.5)
    rho = thermo.gibbs_state(h, ThermalContext(1.0))
    # the ground level of +sz/2 is basis state 1
    assert rho[1, 1].real == pytest.approx(P0_BETA1, abs=1e-12)
    assert thermo.ground_population(rho, h) == pytest.approx(0.731059, abs=1e-6)
    assert thermo.thermal_ground_population(1.0, 1.0) == pytest.approx(P0_BETA1, abs=1e-15)


@given(st.floats(0, math.pi), st.floats(-3, 3), st.floats(0.01, 20))
def test_gibbs_matches_matrix_exponential(theta, lam, beta):
    spec = HamiltonianSpec(theta)
    h = qdyn.hamiltonian_at(spec, lam)
    if h.gap < 1e-6:
        return
    rho = thermo.gibbs_state(h, ThermalContext(beta))
    assert np.max(np.abs(rho - oracles.gibbs(theta, lam, beta))) < 1e-12
    assert thermo.ground_population(rho, h) >= 0.5


def test_entropy_examples():
    assert thermo.von_neumann_entropy(np.diag([1.0, 0.0])) == 0.0
    assert thermo.von_neumann_entropy(np.eye(2) / 2) == pytest.approx(math.log(2), abs=1e-15)
    assert thermo.von_neumann_entropy(np.diag([0.731059, 0.268941])) == pytest.approx(0.582203, abs=1e-6)


def test_relative_entropy_examples():
    rho = np.diag([0.75, 0.25])
    assert thermo.relative_entropy(rho, rho) == pytest.approx(0.0, abs=1e-12)
    expected = 0.75 * math.log(1.5) + 0.25 * math.log(0.5)
    assert thermo.relative_entropy(rho, np.eye(2) / 2) == pytest.approx(expected, abs=1e-12)
    assert expected == pytest.approx(0.130812, abs=1e-6)


def test_relative_entropy_support_violation():
    with pytest.raises(SupportViolation):
        thermo.relative_entropy(np.eye(2) / 2, np.diag([1.0, 0.0]))


@given(st.floats(0, 1), st.floats(0, 2 * math.pi), st.floats(0.05, 0.95), st.floats(0.01, 0.99))
def test_relative_entropy_matches_logm(mix, phase, weight, q):
    psi = np.array([math.cos(mix), math.sin(mix) * np.exp(1j * phase)])
    rho = weight * np.outer(psi, psi.conj()) + (1 - weight) * np.eye(2) / 2
    sigma = np.diag([q, 1 - q]).astype(complex)
    d = thermo.relative_entropy(rho, sigma)
    assert d >= -1e-12
    assert d == pytest.approx(oracles.relative_entropy(rho, sigma), abs=1e-9)


def test_stroke_work_commuting_stroke():
    h = qdyn.hamiltonian_at(HamiltonianSpec(0.7), 0.4)
    rho = thermo.gibbs_state(h, ThermalContext(1.3))
    u = qdyn.expm_unitary(h, 2.0)
    assert thermo.stroke_work(h, rho, h, qdyn.evolve_state(rho, u)) == pytest.approx(0.0, abs=1e-15)


def test_stroke_work_collinear_closed_form():
    spec = HamiltonianSpec(0.0)
    h_i, h_f = qdyn.hamiltonian_at(spec, 0.0), qdyn.hamiltonian_at(spec, 0.5)
    rho = thermo.gibbs_state(h_i, ThermalContext(1.0))
    # populations are unchanged at theta = 0, so W = (w_f - w_i)(p1 - p0)/2
    w = thermo.stroke_work(h_i, rho, h_f, rho)
    assert w == pytest.approx((2 - 1) * (1 - 2 * P0_BETA1) / 2, abs=1e-12)
    assert w == pytest.approx(-0.231059, abs=1e-6)


def test_stroke_work_sudden():
    spec = HamiltonianSpec(1.2)
    h_i, h_f = qdyn.hamiltonian_at(spec, 0.0), qdyn.hamiltonian_at(spec, 0.8)
    rho = thermo.gibbs_state(h_i, ThermalContext(0.6))
    expected = np.trace((h_f.matrix() - h_i.matrix()) @ rho).real
    assert thermo.stroke_work(h_i, rho, h_f, rho) == pytest.approx(expected, abs=1e-15)


def test_isochore_heat_examples():
    assert thermo.isochore_heat(1.0, 0.7, 0.7) == 0.0
    assert thermo.isochore_heat(2.0, 0.731059, 0.622459) == pytest.approx(0.2172, abs=1e-12)
    assert thermo.isochore_heat(1.0, 0.5, 0.731059) == pytest.approx(-0.231059, abs=1e-12)


def _loop(alpha, alpha_t):
    fwd = RampProtocol.forward(alpha, alpha_t / alpha)
    return fwd, RampProtocol.backward_to_zero(alpha, fwd.lambda_end())


def test_loop_friction_collinear_vanishes():
    fwd, bwd = _loop(0.8, 5.0)
    r = thermo.loop_friction(HamiltonianSpec(0.0), fwd, bwd, ThermalContext(1.0))
    assert abs(r.relative_entropy) < 1e-10
    assert abs(r.w_fric) < 1e-10


def test_loop_friction_adiabatic_limit():
    fwd, bwd = _loop(1e-4, 15.0)
    r = thermo.loop_friction(HamiltonianSpec(math.pi / 5), fwd, bwd, ThermalContext(1.0), tol=1e-6)
    assert 0 <= r.relative_entropy < 1e-4


def test_loop_friction_identity_and_oracle():
    theta, beta = math.pi / 5, 1.0
    fwd, bwd = _loop(1.0, 15.0)
    r = thermo.loop_friction(HamiltonianSpec(theta), fwd, bwd, ThermalContext(beta))
    assert r.relative_entropy > 0
    assert r.relative_entropy == pytest.approx(beta * r.w_fric, abs=1e-8)
    assert r.q_rethermalize == -r.w_fric

    u = oracles.fixed_step_propagator(theta, 1.0, 15.0, 7.5, -1) @ oracles.fixed_step_propagator(theta, 1.0, 15.0)
    rho0 = oracles.gibbs(theta, 0.0, beta)
    rho2 = u @ rho0 @ u.conj().T
    assert r.relative_entropy == pytest.approx(oracles.relative_entropy(rho2, rho0), abs=1e-9)


def test_loop_friction_rejects_open_loop():
    fwd = RampProtocol.forward(1.0, 2.0)
    bwd = RampProtocol(1.0, 1.0, qdyn.Direction.BACKWARD, fwd.lambda_end())
    with pytest.raises(ValueError):
        thermo.loop_friction(HamiltonianSpec(0.5), fwd, bwd, ThermalContext(1.0))


@given(st.floats(0, math.pi), st.floats(0.05, 5), st.floats(0, 4), st.floats(0.05, 5))
def test_friction_identity_and_entropy_invariance(theta, alpha, alpha_t, beta):
    spec = HamiltonianSpec(theta)
    fwd, bwd = _loop(alpha, alpha_t)
    ctx = ThermalContext(beta)
    r = thermo.loop_friction(spec, fwd, bwd, ctx, tol=1e-10)
    assert r.relative_entropy >= -1e-12
    assert abs(r.relative_entropy - beta * r.w_fric) < 1e-8
    assert abs(r.relative_entropy + beta * r.q_rethermalize) < 1e-8

    rho0 = thermo.gibbs_state(qdyn.hamiltonian_at(spec, 0.0), ctx)
    rho1 = qdyn.evolve_state(rho0, qdyn.propagate(spec, fwd))
    assert abs(thermo.von_neumann_entropy(rho1) - thermo.von_neumann_entropy(rho0)) < 1e-10


def test_zero_duration_loop_has_no_friction():
    fwd = RampProtocol.forward(1.0, 0.0)
    bwd = RampProtocol(1.0, 0.0, qdyn.Direction.BACKWARD, 0.0)
    r = thermo.loop_friction(HamiltonianSpec(1.0), fwd, bwd, ThermalContext(2.0))
    assert abs(r.relative_entropy) < 1e-10


def test_stroke_friction_collinear():
    for ramp in (RampProtocol.forward(1.0, 0.7), RampProtocol.forward(0.2, 9.0)):
        assert abs(thermo.stroke_friction(HamiltonianSpec(0.0), ramp, ThermalContext(1.0))) < 1e-10


def test_stroke_friction_sudden_limit():
    theta, beta = math.pi / 2, 1.0
    spec = HamiltonianSpec(theta)
    # lam* = 1/2 reached in a vanishing time
    ramp = RampProtocol.forward(1e7, 1e-7)
    h_i, h_f = qdyn.hamiltonian_at(spec, 0.0), qdyn.hamiltonian_at(spec, 0.5)
    rho = thermo.gibbs_state(h_i, ThermalContext(beta))
    w_sudden = np.trace((h_f.matrix() - h_i.matrix()) @ rho).real
    # adiabatic reference: ground population carried onto the new ground level
    w_ideal = -(h_f.gap - h_i.gap) * math.tanh(beta * h_i.gap / 2) / 2
    expected = w_sudden - w_ideal
    assert thermo.stroke_friction(spec, ramp, ThermalContext(beta)) == pytest.approx(expected, abs=1e-6)
    assert expected > 0


def test_stroke_friction_positive_and_matches_oracle():
    theta, tau = math.pi / 5, 0.5513 / 2
    spec = HamiltonianSpec(theta)
    ramp = RampProtocol.forward(1.0, tau)
    w = thermo.stroke_friction(spec, ramp, ThermalContext(1.0))
    assert w > 0
    u = oracles.fixed_step_propagator(theta, 1.0, tau, n_steps=20_000)
    rho0 = oracles.gibbs(theta, 0.0, 1.0)
    h0, h1 = oracles.hamiltonian(theta, 0.0), oracles.hamiltonian(theta, tau / 2)
    w_actual = np.trace(h1 @ u @ rho0 @ u.conj().T).real - np.trace(h0 @ rho0).real
    g0, g1 = np.ptp(np.linalg.eigvalsh(h0)), np.ptp(np.linalg.eigvalsh(h1))
    w_ideal = -(g1 - g0) * math.tanh(0.5 * g0) / 2
    assert w == pytest.approx(w_actual - w_ideal, abs=1e-9)


@given(st.floats(0, math.pi), st.floats(0.05, 5), st.floats(0, 3), st.floats(-1, 1), st.floats(0.05, 10))
def test_stroke_friction_never_negative(theta, alpha, duration, lam0, beta):
    spec = HamiltonianSpec(theta)
    if qdyn.gap(spec, lam0) < 1e-3:
        return
    for direction in qdyn.Direction:
        ramp = RampProtocol(alpha, duration, direction, lam0)
        assert thermo.stroke_friction(spec, ramp, ThermalContext(beta), tol=1e-10) >= -1e-10


def test_band_sign_tracks_collinear_crossing():
    spec = HamiltonianSpec(math.pi)
    assert thermo.ideal_band_sign(spec, 0.0, 0.2) == 1
    assert thermo.ideal_band_sign(spec, 0.0, 1.0) == -1
    assert thermo.ideal_band_sign(HamiltonianSpec(3.0), 0.0, 1.0) == 1


@pytest.mark.parametrize("beta", [0.0, -1.0, math.inf, math.nan])
def test_thermal_context_validation(beta):
    with pytest.raises(ValueError):
        ThermalContext(beta)
