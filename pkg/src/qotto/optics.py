"""Compile an Otto cycle into a polarization-qubit program.

Adiabatic strokes become Euler ZXZ rotations (waveplate sequences).  An
isochore is synthesized by rotating the state so that its z component
matches the target thermal populations and then fully dephasing it.

Rotations follow Rz(a) = exp(-i a sz/2) and Rx(a) = exp(-i a sx/2).  In the
optical frame the ground level of the instantaneous Hamiltonian is basis
state 0, so a thermal state there is diag(p0, 1 - p0) with p0 >= 1/2.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from . import qdyn, thermo
from .errors import DomainViolation, Infeasible, NotUnitary
from .otto import CycleSpec

_UNITARY_ATOL = 1e-10
_GIMBAL_EPS = 1e-12
_FEASIBILITY_SLACK = 1e-12


def rz(a: float) -> np.ndarray:
    return np.array([[cmath.exp(-0.5j * a), 0], [0, cmath.exp(0.5j * a)]], dtype=complex)


def rx(a: float) -> np.ndarray:
    c, s = math.cos(a / 2), math.sin(a / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)


@dataclass(frozen=True)
class EulerAngles:
    psi: float
    theta_x: float
    phi: float
    global_phase: float = 0.0

    def matrix(self) -> np.ndarray:
        return cmath.exp(1j * self.global_phase) * rz(self.psi) @ rx(self.theta_x) @ rz(self.phi)


@dataclass(frozen=True)
class DecoherenceSetting:
    z: float = -1.0

    def __post_init__(self):
        if not -1.0 <= self.z <= 1.0:
            raise ValueError(f"z must lie in [-1, 1], got {self.z}")


@dataclass(frozen=True)
class ThermalizationPlan:
    """Rotation that prepares an input state for full dephasing.

    ``rotation`` equals Rx(theta_x) Rz(azimuth_shift); the z shift brings
    the transverse Bloch component onto +y so that a single x rotation
    sets the z component.  ``radius_bound_ok`` records the stricter printed
    feasibility inequality for diagnostics; feasibility itself compares
    the target z magnitude with the Bloch length.
    """

    rotation: EulerAngles
    theta_x: float
    azimuth_shift: float
    target_p0: float
    feasible: bool
    deficit: float
    radius_bound_ok: bool


def _check_unitary(u: np.ndarray) -> None:
    err = np.max(np.abs(u.conj().T @ u - np.eye(2)))
    if err > _UNITARY_ATOL:
        raise NotUnitary(f"U^dagger U deviates from I by {err:.3e}")


def euler_zxz_decompose(u) -> EulerAngles:
    """Angles with U = e^{i g} Rz(psi) Rx(theta_x) Rz(phi).

    theta_x lies in [0, pi] and psi, phi in (-pi, pi].  When theta_x is
    numerically zero (or pi) only the sum (or difference) of psi and phi is
    defined; phi is then set to zero.
    """
    u = np.asarray(u, dtype=complex)
    if u.shape != (2, 2):
        raise ValueError("expected a 2x2 matrix")
    _check_unitary(u)
    # v = +/-Rz(psi) Rx(theta_x) Rz(phi); the sign ambiguity only shifts psi by
    # 2 pi and is absorbed into the global phase fitted below
    v = u * cmath.exp(-0.5j * cmath.phase(np.linalg.det(u)))
    theta_x = 2 * math.atan2(abs(v[1, 0]), abs(v[0, 0]))
    half_sum = cmath.phase(v[1, 1])
    half_diff = cmath.phase(1j * v[1, 0])
    if theta_x < _GIMBAL_EPS:
        psi, phi = _wrap(2 * half_sum), 0.0
    elif math.pi - theta_x < _GIMBAL_EPS:
        psi, phi = _wrap(2 * half_diff), 0.0
    else:
        psi, phi = _wrap(half_sum + half_diff), _wrap(half_sum - half_diff)
    r = EulerAngles(psi, theta_x, phi).matrix()
    # refit the global phase against the reconstruction itself
    g = cmath.phase(np.sum(np.conj(r) * u))
    return EulerAngles(psi, theta_x, phi, g)


def _wrap(a: float) -> float:
    """Map an angle into (-pi, pi]."""
    w = math.remainder(a, 2 * math.pi)
    return math.pi if w == -math.pi else w


def population_from_beta(beta: float, omega: float) -> float:
    return float(expit(beta * omega))


def beta_from_population(p0f: float, omega: float) -> float:
    """Inverse temperature whose Gibbs state has ground population ``p0f``."""
    if not 0.5 <= p0f < 1.0:
        raise DomainViolation(f"ground population {p0f} outside [1/2, 1)")
    if not omega > 0:
        raise DomainViolation(f"level spacing must be positive, got {omega}")
    return math.log(p0f / (1 - p0f)) / omega


def decoherence_map(rho, setting: DecoherenceSetting) -> np.ndarray:
    """Partial dephasing in the z basis: identity at z = 1, complete at z = -1.

    Populations are untouched and coherences scale by (1 + z)/2, i.e.
    rho -> ((1 + z) rho + (1 - z) D(rho)) / 2 with D(rho) = (rho + sz rho sz)/2.
    """
    rho = np.asarray(rho, dtype=complex)
    z = setting.z
    dephased = (rho + qdyn.SIGMA_Z @ rho @ qdyn.SIGMA_Z) / 2
    return ((1 + z) * rho + (1 - z) * dephased) / 2


def thermalization_rotation(rho_i, p0f: float, strict: bool = True) -> ThermalizationPlan:
    """Rotation after which full dephasing leaves diag(p0f, 1 - p0f).

    With ``strict=False`` an infeasible request returns a plan flagged
    ``feasible=False`` (no rotation) instead of raising ``Infeasible``.
    """
    if not 0.5 <= p0f < 1.0:
        raise DomainViolation(f"target ground population {p0f} outside [1/2, 1)")
    x, y, z = thermo.bloch_vector(rho_i)
    radius = math.sqrt(x * x + y * y + z * z)
    z_f = 2 * p0f - 1
    deficit = abs(z_f) - radius
    transverse = math.hypot(x, y)
    p0i = (1 + z) / 2
    radius_bound_ok = -0.5 <= 0.5 - p0f <= -math.hypot(0.5 - p0i, y / 2)

    if deficit > _FEASIBILITY_SLACK:
        if strict:
            raise Infeasible(deficit)
        return ThermalizationPlan(EulerAngles(0.0, 0.0, 0.0), 0.0, 0.0, p0f, False, deficit, radius_bound_ok)

    shift = math.pi / 2 - math.atan2(y, x) if transverse > 0 else 0.0
    shift = _wrap(shift)
    # after the shift the Bloch vector is (0, transverse, z); Rx(t) maps its
    # z component to radius * cos(chi - t) with chi the polar angle from +z
    chi = math.atan2(transverse, z)
    if abs(deficit) <= _FEASIBILITY_SLACK:
        # target on the sphere: acos is ill-conditioned there, snap to the pole
        opening = 0.0 if z_f >= 0 else math.pi
    else:
        opening = math.acos(min(1.0, max(-1.0, z_f / radius))) if radius > 0 else 0.0
    candidates = [_wrap(chi - opening), _wrap(chi + opening)]
    theta_x = min(candidates, key=lambda t: (abs(t), -t))
    rotation = euler_zxz_decompose(rx(theta_x) @ rz(shift))
    return ThermalizationPlan(rotation, theta_x, shift, p0f, True, deficit, radius_bound_ok)


@dataclass(frozen=True)
class ProgramRecord:
    """One program element.

    ``ROT`` applies ``angles``; ``THERM`` applies Rx(theta_x) and then the
    dephasing map with parameter ``z``.
    """

    kind: str
    angles: EulerAngles | None = None
    theta_x: float = 0.0
    target_p0: float = 0.0
    z: float = -1.0
    note: str = ""

    def operator(self) -> np.ndarray:
        if self.kind == "ROT":
            return self.angles.matrix()
        return rx(self.theta_x)

    def apply(self, rho: np.ndarray) -> np.ndarray:
        rho = qdyn.evolve_state(rho, self.operator())
        if self.kind == "THERM":
            rho = decoherence_map(rho, DecoherenceSetting(self.z))
        return rho


def _fmt(v: float) -> str:
    return f"{v:.12g}"


@dataclass(frozen=True)
class OpticalProgram:
    records: tuple[ProgramRecord, ...]
    # record indices after which the state equals cycle corners 2, 3, 4, 1
    corner_after: tuple[int, ...] = ()

    def serialize(self) -> str:
        lines = []
        for r in self.records:
            if r.note:
                lines.append(f"# {r.note}")
            if r.kind == "ROT":
                a = r.angles
                lines.append(" ".join(["ROT", _fmt(a.psi), _fmt(a.theta_x), _fmt(a.phi), _fmt(a.global_phase)]))
            else:
                lines.append(" ".join(["THERM", _fmt(r.theta_x), _fmt(r.target_p0), _fmt(r.z)]))
        return "\n".join(lines) + "\n"

    @classmethod
    def parse(cls, text: str) -> OpticalProgram:
        records = []
        note = ""
        for raw in text.splitlines():
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                note = line[1:].strip()
                continue
            head, *vals = line.split()
            nums = [float(v) for v in vals]
            if head == "ROT" and len(nums) == 4:
                records.append(ProgramRecord("ROT", EulerAngles(*nums), note=note))
            elif head == "THERM" and len(nums) == 3:
                records.append(ProgramRecord("THERM", theta_x=nums[0], target_p0=nums[1], z=nums[2], note=note))
            else:
                raise ValueError(f"bad program line: {raw!r}")
            note = ""
        return cls(tuple(records))

    def simulate(self, rho0) -> list[np.ndarray]:
        """State after each record, starting from ``rho0``."""
        out = []
        rho = np.asarray(rho0, dtype=complex)
        for r in self.records:
            rho = r.apply(rho)
            out.append(rho)
        return out


def _eigenframe(h: qdyn.PauliVector) -> np.ndarray:
    """Unitary whose rows are the ground and excited eigenvectors of ``h``."""
    _, vecs = np.linalg.eigh(h.matrix())
    return vecs.conj().T


def _isochore_records(rho: np.ndarray, h: qdyn.PauliVector, p0f: float, stroke: str):
    frame = _eigenframe(h)
    try:
        plan = thermalization_rotation(qdyn.evolve_state(rho, frame), p0f)
    except Infeasible as exc:
        raise Infeasible(exc.deficit, stroke) from None
    enter = euler_zxz_decompose(rz(plan.azimuth_shift) @ frame)
    leave = euler_zxz_decompose(frame.conj().T)
    return [
        ProgramRecord("ROT", enter, note=f"{stroke} enter eigenframe"),
        ProgramRecord("THERM", theta_x=plan.theta_x, target_p0=p0f, z=-1.0, note=f"{stroke} thermalize"),
        ProgramRecord("ROT", leave, note=f"{stroke} leave eigenframe"),
    ]


def compile_cycle(spec: CycleSpec, tol: float = qdyn.DEFAULT_TOL) -> OpticalProgram:
    """Optical program for one cycle, starting from the cold Gibbs state at point 1."""
    hs = spec.hspec
    h1 = qdyn.hamiltonian_at(hs, 0.0)
    h2 = qdyn.hamiltonian_at(hs, spec.lambda_star)
    u12 = qdyn.propagate(hs, spec.forward_ramp, tol)
    u34 = qdyn.propagate(hs, spec.backward_ramp, tol)

    rho1 = thermo.gibbs_state(h1, thermo.ThermalContext(spec.beta_c))
    rho2 = qdyn.evolve_state(rho1, u12)
    rho3 = thermo.gibbs_state(h2, thermo.ThermalContext(spec.beta_h))
    rho4 = qdyn.evolve_state(rho3, u34)

    records = [ProgramRecord("ROT", euler_zxz_decompose(u12), note="1-2 forward ramp")]
    records += _isochore_records(rho2, h2, population_from_beta(spec.beta_h, h2.gap), "2-3")
    records.append(ProgramRecord("ROT", euler_zxz_decompose(u34), note="3-4 backward ramp"))
    records += _isochore_records(rho4, h1, population_from_beta(spec.beta_c, h1.gap), "4-1")
    return OpticalProgram(tuple(records), corner_after=(0, 3, 4, 7))
