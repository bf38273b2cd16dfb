"""Thermal states, entropies, and work/heat bookkeeping for the qubit.

Entropies are in nats so that relative entropies compare directly with
beta times an energy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import entr, expit

from . import qdyn
from .errors import SupportViolation
from .qdyn import HamiltonianSpec, PauliVector, RampProtocol


@dataclass(frozen=True)
class ThermalContext:
    beta: float

    def __post_init__(self):
        if not (math.isfinite(self.beta) and self.beta > 0):
            raise ValueError(f"beta must be finite and positive, got {self.beta}")


@dataclass(frozen=True)
class FrictionReport:
    relative_entropy: float
    w_fric: float
    q_rethermalize: float


def bloch_vector(rho: np.ndarray) -> np.ndarray:
    """(x, y, z) with rho = (I + r.sigma)/2; works on stacks of matrices."""
    rho = np.asarray(rho)
    return np.stack(
        [
            2 * rho[..., 1, 0].real,
            2 * rho[..., 1, 0].imag,
            (rho[..., 0, 0] - rho[..., 1, 1]).real,
        ],
        axis=-1,
    )


def state_from_bloch(r) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    rho = np.empty(r.shape[:-1] + (2, 2), dtype=complex)
    rho[..., 0, 0] = (1 + r[..., 2]) / 2
    rho[..., 1, 1] = (1 - r[..., 2]) / 2
    rho[..., 0, 1] = (r[..., 0] - 1j * r[..., 1]) / 2
    rho[..., 1, 0] = (r[..., 0] + 1j * r[..., 1]) / 2
    return rho


def _unit_axis(h: PauliVector) -> np.ndarray:
    r = h.norm
    if r == 0:
        return np.zeros(3)
    return np.array([h.cx, h.cy, h.cz]) / r


def gibbs_state(h: PauliVector, ctx: ThermalContext) -> np.ndarray:
    """exp(-beta H)/Z, built as (I - tanh(beta*omega/2) n.sigma)/2."""
    polar = math.tanh(ctx.beta * h.gap / 2)
    return state_from_bloch(-polar * _unit_axis(h))


def thermal_ground_population(beta: float, omega: float) -> float:
    return float(expit(beta * omega))


def ground_population(rho: np.ndarray, h: PauliVector) -> float:
    """Population of the instantaneous ground state of ``h``."""
    n = _unit_axis(h)
    return float((1 - n @ bloch_vector(rho)) / 2)


def von_neumann_entropy(rho: np.ndarray) -> float:
    lam = np.clip(np.linalg.eigvalsh(rho), 0.0, 1.0)
    return float(np.sum(entr(lam)))


def relative_entropy(rho: np.ndarray, sigma: np.ndarray) -> float:
    """Tr[rho (ln rho - ln sigma)] in nats."""
    s_val, s_vec = np.linalg.eigh(sigma)
    if np.min(s_val) < 1e-300:
        raise SupportViolation(f"reference state has eigenvalue {np.min(s_val):.3e}")
    weights = np.real(np.einsum("ij,ik,kj->j", np.conj(s_vec), rho, s_vec))
    cross = float(weights @ np.log(s_val))
    return -von_neumann_entropy(rho) - cross


def energy(h: PauliVector, rho: np.ndarray) -> float:
    return float(np.real(np.trace(h.matrix() @ rho)))


def stroke_work(h_i: PauliVector, rho_i: np.ndarray, h_f: PauliVector, rho_f: np.ndarray) -> float:
    """Work done on the system, Tr[H_f rho_f] - Tr[H_i rho_i]."""
    return energy(h_f, rho_f) - energy(h_i, rho_i)


def isochore_heat(omega: float, p0_initial: float, p0_final: float) -> float:
    """Heat absorbed at fixed spacing omega; positive when the system takes energy in."""
    return omega * (p0_initial - p0_final)


def loop_friction(
    spec: HamiltonianSpec,
    forward: RampProtocol,
    backward: RampProtocol,
    ctx: ThermalContext,
    tol: float = qdyn.DEFAULT_TOL,
    max_steps: int = qdyn.DEFAULT_MAX_STEPS,
) -> FrictionReport:
    """Irreversibility of a ramp-up / ramp-down loop started from equilibrium."""
    end = backward.lambda_end(spec.omega0)
    if abs(end - forward.lambda_start) > 1e-12 * max(1.0, abs(backward.lambda_start)):
        raise ValueError(f"backward ramp ends at lam={end}, not at {forward.lambda_start}")
    h0 = qdyn.hamiltonian_at(spec, forward.lambda_start)
    rho0 = gibbs_state(h0, ctx)
    u = qdyn.propagate(spec, backward, tol, max_steps) @ qdyn.propagate(spec, forward, tol, max_steps)
    rho2 = qdyn.evolve_state(rho0, u)
    d = relative_entropy(rho2, rho0)
    w = energy(h0, rho2) - energy(h0, rho0)
    return FrictionReport(relative_entropy=d, w_fric=w, q_rethermalize=-w)


def ideal_band_sign(spec: HamiltonianSpec, lam_i: float, lam_f: float) -> int:
    """+1 if the ground band at lam_i continues into the ground band at lam_f.

    Only collinear fields (sin(theta) = 0) can close the gap; there the
    eigenvectors are fixed and a sign change of the z coefficient swaps
    the bands.
    """
    if abs(math.sin(spec.theta)) > 1e-12:
        return 1
    cz_i = spec.omega0 / 2 + lam_i * math.cos(spec.theta)
    cz_f = spec.omega0 / 2 + lam_f * math.cos(spec.theta)
    return 1 if cz_i * cz_f >= 0 else -1


def ideal_stroke_work(omega_i: float, omega_f: float, beta: float, band_sign: int = 1) -> float:
    """Work of the quantum-adiabatic stroke from a Gibbs state (traceless H)."""
    polar = math.tanh(beta * omega_i / 2)
    return -(band_sign * omega_f - omega_i) * polar / 2


def stroke_friction(
    spec: HamiltonianSpec,
    ramp: RampProtocol,
    ctx_start: ThermalContext,
    tol: float = qdyn.DEFAULT_TOL,
    max_steps: int = qdyn.DEFAULT_MAX_STEPS,
) -> float:
    """Excess work of a finite-time stroke over its quantum-adiabatic reference."""
    lam_i = ramp.lambda_start
    lam_f = ramp.lambda_end(spec.omega0)
    h_i = qdyn.hamiltonian_at(spec, lam_i)
    h_f = qdyn.hamiltonian_at(spec, lam_f)
    rho_i = gibbs_state(h_i, ctx_start)
    rho_f = qdyn.evolve_state(rho_i, qdyn.propagate(spec, ramp, tol, max_steps))
    w_actual = stroke_work(h_i, rho_i, h_f, rho_f)
    w_ideal = ideal_stroke_work(h_i.gap, h_f.gap, ctx_start.beta, ideal_band_sign(spec, lam_i, lam_f))
    return w_actual - w_ideal
