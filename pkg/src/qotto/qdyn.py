"""Driven two-level dynamics under a static field plus a tilted linear ramp.

The Hamiltonian is

    H(lam) = (omega0/2) sz + lam (cos(theta) sz + sin(theta) sx)

with omega0 = 1 setting the energy and time units.  Time evolution over a
ramp is the time-ordered product of midpoint step unitaries, each one
an exact 2x2 exponential, refined by step doubling until two successive
products agree to the requested tolerance.

Internally step unitaries are kept as SU(2) pairs ``(a, b)`` standing for
``[[a, b], [-conj(b), conj(a)]]``; products of many steps are reduced
pairwise so a whole batch of misalignment angles is evolved at once.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGap, NonConvergence

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
IDENTITY = np.eye(2, dtype=complex)

DEFAULT_TOL = 1e-10
DEFAULT_MAX_STEPS = 2**24
# Upper bound on (angles x steps) held in memory per reduction chunk.
_CHUNK_ELEMENTS = 2**21


@dataclass(frozen=True)
class PauliVector:
    """Real coefficients of the Hermitian operator c0*I + cx*sx + cy*sy + cz*sz."""

    c0: float = 0.0
    cx: float = 0.0
    cy: float = 0.0
    cz: float = 0.0

    @property
    def norm(self) -> float:
        return math.sqrt(self.cx**2 + self.cy**2 + self.cz**2)

    @property
    def gap(self) -> float:
        return 2.0 * self.norm

    def eigenvalues(self) -> tuple[float, float]:
        r = self.norm
        return self.c0 - r, self.c0 + r

    def matrix(self) -> np.ndarray:
        return np.array(
            [
                [self.c0 + self.cz, complex(self.cx, -self.cy)],
                [complex(self.cx, self.cy), self.c0 - self.cz],
            ],
            dtype=complex,
        )

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> PauliVector:
        m = np.asarray(m)
        return cls(
            c0=float((m[0, 0].real + m[1, 1].real) / 2),
            cx=float((m[1, 0].real + m[0, 1].real) / 2),
            cy=float((m[1, 0].imag - m[0, 1].imag) / 2),
            cz=float((m[0, 0].real - m[1, 1].real) / 2),
        )


@dataclass(frozen=True)
class HamiltonianSpec:
    theta: float
    omega0: float = 1.0

    def __post_init__(self):
        if not (0.0 <= self.theta <= math.pi):
            raise ValueError(f"theta must lie in [0, pi], got {self.theta}")
        if not self.omega0 > 0:
            raise ValueError(f"omega0 must be positive, got {self.omega0}")


class Direction(enum.Enum):
    FORWARD = 1
    BACKWARD = -1


@dataclass(frozen=True)
class RampProtocol:
    """Linear field ramp lam(t) = lambda_start +/- alpha*omega0*t/2 on [0, duration]."""

    alpha: float
    duration: float
    direction: Direction = Direction.FORWARD
    lambda_start: float = 0.0

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not self.duration >= 0:
            raise ValueError(f"duration must be non-negative, got {self.duration}")

    @property
    def sign(self) -> int:
        return self.direction.value

    def lambda_at(self, t, omega0: float = 1.0):
        return self.lambda_start + self.sign * self.alpha * omega0 * np.asarray(t) / 2

    def lambda_end(self, omega0: float = 1.0) -> float:
        return float(self.lambda_at(self.duration, omega0))

    @classmethod
    def forward(cls, alpha: float, duration: float, lambda_start: float = 0.0) -> RampProtocol:
        return cls(alpha, duration, Direction.FORWARD, lambda_start)

    @classmethod
    def backward_to_zero(cls, alpha: float, lambda_start: float, omega0: float = 1.0) -> RampProtocol:
        """Backward ramp from ``lambda_start`` that ends exactly at lam = 0."""
        return cls(alpha, 2 * lambda_start / (alpha * omega0), Direction.BACKWARD, lambda_start)

    def segment(self, t0: float, t1: float, omega0: float = 1.0) -> RampProtocol:
        """The same ramp restricted to [t0, t1], re-based to start at t = 0."""
        return RampProtocol(self.alpha, t1 - t0, self.direction, float(self.lambda_at(t0, omega0)))


def hamiltonian_at(spec: HamiltonianSpec, lam: float) -> PauliVector:
    return PauliVector(
        0.0,
        lam * math.sin(spec.theta),
        0.0,
        spec.omega0 / 2 + lam * math.cos(spec.theta),
    )


def gap(spec: HamiltonianSpec, lam: float) -> float:
    cz = spec.omega0 / 2 + lam * math.cos(spec.theta)
    cx = lam * math.sin(spec.theta)
    return 2.0 * math.hypot(cz, cx)


def expm_unitary(h: PauliVector, dt: float) -> np.ndarray:
    """exp(-i H dt) in closed form; smooth through |c| = 0."""
    r = h.norm
    phi = r * dt
    # sin(r dt)/r written through sinc so that r = 0 needs no special case
    s_over_r = dt * np.sinc(phi / math.pi)
    u = math.cos(phi) * IDENTITY - 1j * s_over_r * (h.cx * SIGMA_X + h.cy * SIGMA_Y + h.cz * SIGMA_Z)
    return np.exp(-1j * h.c0 * dt) * u


def evolve_state(rho: np.ndarray, u: np.ndarray) -> np.ndarray:
    """rho -> U rho U^dagger (works on stacked arrays too)."""
    return u @ rho @ np.conj(np.swapaxes(u, -1, -2))


def polarization(rho: np.ndarray, h: PauliVector) -> float:
    """Energy expectation over level spacing, Tr[rho H] / omega."""
    w = h.gap
    if w < 1e-14:
        raise DegenerateGap(f"gap {w:.3e} too small for a polarization")
    return float(np.real(np.trace(rho @ h.matrix()))) / w


# --- batched SU(2) machinery -------------------------------------------------


def su2_matrix(a, b) -> np.ndarray:
    """Assemble [[a, b], [-conj(b), conj(a)]] for arrays of pairs."""
    a = np.asarray(a)
    b = np.asarray(b)
    out = np.empty(a.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = a
    out[..., 0, 1] = b
    out[..., 1, 0] = -np.conj(b)
    out[..., 1, 1] = np.conj(a)
    return out


def _su2_mul(a1, b1, a2, b2):
    # (a1, b1) @ (a2, b2)
    return a1 * a2 - b1 * np.conj(b2), a1 * b2 + b1 * np.conj(a2)


def _reduce_ordered(a: np.ndarray, b: np.ndarray):
    """Time-ordered product along the last axis: later steps multiply from the left."""
    while a.shape[-1] > 1:
        n = a.shape[-1]
        if n % 2:
            tail_a, tail_b = a[..., -1:], b[..., -1:]
            a, b = a[..., :-1], b[..., :-1]
        else:
            tail_a = tail_b = None
        a, b = _su2_mul(a[..., 1::2], b[..., 1::2], a[..., 0::2], b[..., 0::2])
        if tail_a is not None:
            a = np.concatenate([a, tail_a], axis=-1)
            b = np.concatenate([b, tail_b], axis=-1)
    return a[..., 0], b[..., 0]


def _step_pairs(cos_t, sin_t, lam, h, omega0):
    cz = omega0 / 2 + lam * cos_t
    cx = lam * sin_t
    r = np.hypot(cz, cx)
    phi = r * h
    s_over_r = h * np.sinc(phi / np.pi)
    return np.cos(phi) - 1j * cz * s_over_r, -1j * cx * s_over_r


def _fixed_product(thetas: np.ndarray, ramp: RampProtocol, n_steps: int, omega0: float):
    """Midpoint-rule propagator with ``n_steps`` uniform steps for every angle."""
    cos_t = np.cos(thetas)[:, None]
    sin_t = np.sin(thetas)[:, None]
    h = ramp.duration / n_steps
    acc_a = np.ones(len(thetas), dtype=complex)
    acc_b = np.zeros(len(thetas), dtype=complex)
    chunk = max(1, _CHUNK_ELEMENTS // max(1, len(thetas)))
    for k0 in range(0, n_steps, chunk):
        k1 = min(n_steps, k0 + chunk)
        t_mid = (np.arange(k0, k1) + 0.5) * h
        lam = ramp.lambda_start + ramp.sign * ramp.alpha * omega0 * t_mid / 2
        a, b = _step_pairs(cos_t, sin_t, lam[None, :], h, omega0)
        ca, cb = _reduce_ordered(a, b)
        acc_a, acc_b = _su2_mul(ca, cb, acc_a, acc_b)
    return acc_a, acc_b


def _initial_steps(ramp: RampProtocol, omega0: float) -> int:
    # |c(lam)| is convex in lam, so its maximum over a linear ramp sits at an end
    lam_max = max(abs(ramp.lambda_start), abs(ramp.lambda_end(omega0)))
    rate = omega0 / 2 + lam_max
    n = max(4, math.ceil(2 * rate * ramp.duration))
    return 1 << (n - 1).bit_length()


def propagate_su2(
    thetas,
    ramp: RampProtocol,
    tol: float = DEFAULT_TOL,
    omega0: float = 1.0,
    max_steps: int = DEFAULT_MAX_STEPS,
):
    """Adaptive propagator for a batch of angles, returned as SU(2) pairs.

    Steps double until the max entrywise change over the whole batch drops
    below ``tol``.  Returns ``(a, b, n_steps)``.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    if ramp.duration == 0:
        return np.ones(len(thetas), complex), np.zeros(len(thetas), complex), 0
    n = min(_initial_steps(ramp, omega0), max_steps)
    a, b = _fixed_product(thetas, ramp, n, omega0)
    change = math.inf
    while 2 * n <= max_steps:
        n *= 2
        a2, b2 = _fixed_product(thetas, ramp, n, omega0)
        change = float(max(np.max(np.abs(a2 - a)), np.max(np.abs(b2 - b))))
        a, b = a2, b2
        if change < tol:
            return a, b, n
    raise NonConvergence(n, change, tol)


def propagate(
    spec: HamiltonianSpec,
    ramp: RampProtocol,
    tol: float = DEFAULT_TOL,
    max_steps: int = DEFAULT_MAX_STEPS,
) -> np.ndarray:
    """Time-ordered propagator of one ramp as a 2x2 unitary matrix."""
    a, b, _ = propagate_su2([spec.theta], ramp, tol, spec.omega0, max_steps)
    return su2_matrix(a[0], b[0])


def propagate_many(
    thetas,
    ramp: RampProtocol,
    tol: float = DEFAULT_TOL,
    omega0: float = 1.0,
    max_steps: int = DEFAULT_MAX_STEPS,
) -> np.ndarray:
    """Propagators for an array of misalignment angles, shape (B, 2, 2)."""
    a, b, _ = propagate_su2(thetas, ramp, tol, omega0, max_steps)
    return su2_matrix(a, b)


def propagate_fixed(spec: HamiltonianSpec, ramp: RampProtocol, n_steps: int) -> np.ndarray:
    """Midpoint-rule propagator with a fixed number of uniform steps."""
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")
    if ramp.duration == 0:
        return IDENTITY.copy()
    a, b = _fixed_product(np.array([spec.theta]), ramp, n_steps, spec.omega0)
    return su2_matrix(a[0], b[0])
