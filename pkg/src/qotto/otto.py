"""Finite-time Otto cycle: two unitary ramps separated by perfect thermalizations.

Corner points are labelled 1..4.  Point 1 is the cold Gibbs state at
lam = 0, the forward ramp takes it to point 2 at lam* = alpha*omega0*tau_ad/2,
the hot bath resets it to point 3, and the backward ramp returns the
field to zero at point 4 before the cold bath closes the loop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import qdyn, thermo
from .qdyn import HamiltonianSpec, RampProtocol

# |Q_h| below this (relative to omega2) leaves the efficiency undefined
_HEAT_FLOOR = 1e-13


@dataclass(frozen=True)
class CycleSpec:
    hspec: HamiltonianSpec
    alpha: float
    tau_ad: float
    tau_iso: float = 0.01
    beta_c: float = 1.0
    beta_h: float = 0.5

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not self.tau_ad >= 0:
            raise ValueError("tau_ad must be non-negative")
        if not self.tau_iso >= 0:
            raise ValueError("tau_iso must be non-negative")
        if not (self.beta_h > 0 and self.beta_c > 0):
            raise ValueError("inverse temperatures must be positive")
        if not self.beta_h < self.beta_c:
            raise ValueError(f"hot bath must be hotter: beta_h={self.beta_h} >= beta_c={self.beta_c}")

    @property
    def lambda_star(self) -> float:
        return self.alpha * self.hspec.omega0 * self.tau_ad / 2

    @property
    def forward_ramp(self) -> RampProtocol:
        return RampProtocol.forward(self.alpha, self.tau_ad)

    @property
    def backward_ramp(self) -> RampProtocol:
        return RampProtocol(self.alpha, self.tau_ad, qdyn.Direction.BACKWARD, self.lambda_star)

    @property
    def cycle_time(self) -> float:
        return 2 * self.tau_ad + self.tau_iso


@dataclass(frozen=True)
class CyclePoint:
    label: int
    omega: float
    p0: float
    n: float
    rho: np.ndarray


@dataclass(frozen=True)
class CycleReport:
    w_ex: float
    q_h: float
    q_c: float
    power: float
    eta: float
    eta_ideal: float
    w_fric_total: float
    pwc: bool
    pwc_literal: bool
    points: tuple[CyclePoint, CyclePoint, CyclePoint, CyclePoint]

    @property
    def pwc_consistent(self) -> bool:
        """Whether the corner-point work condition agrees with sign(W_ex)."""
        return self.pwc == (self.w_ex > 0)


@dataclass(frozen=True)
class CycleBatch:
    """Cycle outputs for an array of misalignment angles (one entry per angle)."""

    thetas: np.ndarray
    omega1: float
    omega2: np.ndarray
    p0: np.ndarray  # (B, 4)
    n: np.ndarray  # (B, 4)
    rho: np.ndarray  # (B, 4, 2, 2)
    w_ex: np.ndarray
    q_h: np.ndarray
    q_c: np.ndarray
    power: np.ndarray
    eta: np.ndarray
    eta_ideal: np.ndarray
    w_fric: np.ndarray  # (B, 2) per stroke


def _gibbs_bloch(axis: np.ndarray, omega, beta: float) -> np.ndarray:
    return -np.tanh(beta * np.asarray(omega) / 2)[..., None] * axis


def _band_signs(thetas: np.ndarray, omega0: float, lam: float) -> np.ndarray:
    collinear = np.abs(np.sin(thetas)) <= 1e-12
    flipped = (omega0 / 2 + lam * np.cos(thetas)) < 0
    return np.where(collinear & flipped, -1.0, 1.0)


def cycle_batch(
    thetas,
    alpha: float,
    tau_ad: float,
    tau_iso: float,
    beta_c: float,
    beta_h: float,
    omega0: float = 1.0,
    tol: float = qdyn.DEFAULT_TOL,
    max_steps: int = qdyn.DEFAULT_MAX_STEPS,
) -> CycleBatch:
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    lam = alpha * omega0 * tau_ad / 2
    forward = RampProtocol.forward(alpha, tau_ad)
    backward = RampProtocol(alpha, tau_ad, qdyn.Direction.BACKWARD, lam)

    c1 = np.zeros((len(thetas), 3))
    c1[:, 2] = omega0 / 2
    c2 = np.stack([lam * np.sin(thetas), np.zeros_like(thetas), omega0 / 2 + lam * np.cos(thetas)], axis=-1)
    omega1 = omega0
    omega2 = 2 * np.linalg.norm(c2, axis=-1)
    n1 = c1 / (omega1 / 2)
    with np.errstate(invalid="ignore", divide="ignore"):
        n2 = np.where(omega2[:, None] > 0, c2 / (omega2[:, None] / 2), 0.0)

    u12 = qdyn.propagate_many(thetas, forward, tol, omega0, max_steps)
    u34 = qdyn.propagate_many(thetas, backward, tol, omega0, max_steps)

    rho1 = thermo.state_from_bloch(_gibbs_bloch(n1, np.full(len(thetas), omega1), beta_c))
    rho2 = qdyn.evolve_state(rho1, u12)
    rho3 = thermo.state_from_bloch(_gibbs_bloch(n2, omega2, beta_h))
    rho4 = qdyn.evolve_state(rho3, u34)
    rho = np.stack([rho1, rho2, rho3, rho4], axis=1)

    r = thermo.bloch_vector(rho)
    axes = np.stack([n1, n2, n2, n1], axis=1)
    proj = np.einsum("bki,bki->bk", axes, r)
    p0 = (1 - proj) / 2
    n = proj / 2

    q_h = omega2 * (p0[:, 1] - p0[:, 2])
    q_c = omega1 * (p0[:, 3] - p0[:, 0])
    w_ex = q_h + q_c
    cycle_time = 2 * tau_ad + tau_iso
    with np.errstate(invalid="ignore", divide="ignore"):
        power = w_ex / cycle_time
        eta = np.where(np.abs(q_h) > _HEAT_FLOOR * np.maximum(omega2, 1.0), w_ex / q_h, np.nan)
        eta_ideal = 1 - omega1 / omega2

    # friction: actual stroke work minus the population-transporting reference
    sign = _band_signs(thetas, omega0, lam)
    e = omega1 * n[:, 0], omega2 * n[:, 1], omega2 * n[:, 2], omega1 * n[:, 3]
    w12 = e[1] - e[0]
    w34 = e[3] - e[2]
    w12_ideal = -(sign * omega2 - omega1) * math.tanh(beta_c * omega1 / 2) / 2
    w34_ideal = -(sign * omega1 - omega2) * np.tanh(beta_h * omega2 / 2) / 2
    w_fric = np.stack([w12 - w12_ideal, w34 - w34_ideal], axis=-1)

    return CycleBatch(
        thetas=thetas,
        omega1=float(omega1),
        omega2=omega2,
        p0=p0,
        n=n,
        rho=rho,
        w_ex=w_ex,
        q_h=q_h,
        q_c=q_c,
        power=power,
        eta=eta,
        eta_ideal=eta_ideal,
        w_fric=w_fric,
    )


def positive_work_condition(points, convention: str = "plotted") -> bool:
    """Corner-point inequality w1 (m1 - m4) < w2 (m2 - m3).

    ``convention="plotted"`` uses m = -Tr[rho H]/omega (excess over half
    filling of the ground level, growing with friction), for which the
    inequality is equivalent to W_ex > 0.  ``"literal"`` uses
    m = Tr[rho H]/omega unchanged.
    """
    p1, p2, p3, p4 = points
    sgn = {"plotted": -1.0, "literal": 1.0}[convention]
    lhs = p1.omega * sgn * (p1.n - p4.n)
    rhs = p2.omega * sgn * (p2.n - p3.n)
    return bool(lhs < rhs)


def ideal_efficiency(omega1: float, omega2: float) -> float:
    if not omega2 > 0:
        raise ValueError("omega2 must be positive")
    return 1 - omega1 / omega2


def _report_from_batch(batch: CycleBatch, i: int = 0) -> CycleReport:
    omegas = (batch.omega1, float(batch.omega2[i]), float(batch.omega2[i]), batch.omega1)
    points = tuple(
        CyclePoint(k + 1, omegas[k], float(batch.p0[i, k]), float(batch.n[i, k]), batch.rho[i, k])
        for k in range(4)
    )
    return CycleReport(
        w_ex=float(batch.w_ex[i]),
        q_h=float(batch.q_h[i]),
        q_c=float(batch.q_c[i]),
        power=float(batch.power[i]),
        eta=float(batch.eta[i]),
        eta_ideal=float(batch.eta_ideal[i]),
        w_fric_total=float(batch.w_fric[i].sum()),
        pwc=positive_work_condition(points),
        pwc_literal=positive_work_condition(points, "literal"),
        points=points,
    )


def run_cycle(
    spec: CycleSpec, tol: float = qdyn.DEFAULT_TOL, max_steps: int = qdyn.DEFAULT_MAX_STEPS
) -> CycleReport:
    batch = cycle_batch(
        [spec.hspec.theta],
        spec.alpha,
        spec.tau_ad,
        spec.tau_iso,
        spec.beta_c,
        spec.beta_h,
        spec.hspec.omega0,
        tol,
        max_steps,
    )
    return _report_from_batch(batch)


@dataclass(frozen=True)
class TrajectorySample:
    stroke: str
    omega: float
    n: float


def cycle_trajectory(
    spec: CycleSpec,
    samples_per_stroke: int,
    tol: float = qdyn.DEFAULT_TOL,
    max_steps: int = qdyn.DEFAULT_MAX_STEPS,
) -> list[TrajectorySample]:
    """(omega, n) samples around the cycle; isochores are vertical segments."""
    if samples_per_stroke < 2:
        raise ValueError("samples_per_stroke must be at least 2")
    hs = spec.hspec
    out: list[TrajectorySample] = []

    def stroke(label, ramp, rho_start):
        rho = rho_start
        times = np.linspace(0.0, ramp.duration, samples_per_stroke)
        for j, t in enumerate(times):
            if j:
                seg = ramp.segment(times[j - 1], t, hs.omega0)
                rho = qdyn.evolve_state(rho, qdyn.propagate(hs, seg, tol, max_steps))
            h = qdyn.hamiltonian_at(hs, float(ramp.lambda_at(t, hs.omega0)))
            out.append(TrajectorySample(label, h.gap, qdyn.polarization(rho, h)))
        return rho

    h1 = qdyn.hamiltonian_at(hs, 0.0)
    h2 = qdyn.hamiltonian_at(hs, spec.lambda_star)
    rho1 = thermo.gibbs_state(h1, thermo.ThermalContext(spec.beta_c))
    rho2 = stroke("1-2", spec.forward_ramp, rho1)
    rho3 = thermo.gibbs_state(h2, thermo.ThermalContext(spec.beta_h))
    out.append(TrajectorySample("2-3", h2.gap, qdyn.polarization(rho2, h2)))
    out.append(TrajectorySample("2-3", h2.gap, qdyn.polarization(rho3, h2)))
    rho4 = stroke("3-4", spec.backward_ramp, rho3)
    out.append(TrajectorySample("4-1", h1.gap, qdyn.polarization(rho4, h1)))
    out.append(TrajectorySample("4-1", h1.gap, qdyn.polarization(rho1, h1)))
    return out

