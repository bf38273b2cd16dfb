"""Disorder averages over the misalignment angle and power optimization.

The sweep axis is the stroke time parameter ``x = alpha * tau_ad``: each
adiabatic stroke lasts ``tau_ad = x / alpha``, the field peaks at
lam* = x * omega0 / 2, and at theta = 0 the hot-side spacing is
omega2 = omega0 (1 + x).  Power is reported as P / alpha**2.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import bisect

from . import qdyn
from .errors import MaxOnBoundary, NoSignChange, NonConvergence
from .otto import cycle_batch

GAUSSIAN = "gaussian"
FLAT = "flat"
DELTA = "delta"

# Gaussian tails beyond this many standard deviations are dropped from the
# quadrature interval (relative weight below 1e-31).
_GAUSS_CUTOFF_SIGMAS = 12.0

# Isochore bookkeeping time fitted once (golden section on [0, 0.05]) to the
# reference optimum of the narrowest Gaussian, then frozen for all runs.
FITTED_TAU_ISO = 0.0198


@dataclass(frozen=True)
class DisorderSpec:
    """Distribution of the misalignment angle on [0, pi] with its quadrature rule.

    The Gaussian has zero mean and is renormalized on [0, pi]; ``flat`` is
    uniform on [0, pi]; ``delta`` puts all weight on one angle.
    """

    kind: str
    sigma2: float | None = None
    theta: float | None = None
    nodes: int = 64

    def __post_init__(self):
        if self.kind == GAUSSIAN:
            if self.sigma2 is None or not self.sigma2 > 0:
                raise ValueError("gaussian disorder needs sigma2 > 0")
        elif self.kind == DELTA:
            if self.theta is None or not 0 <= self.theta <= math.pi:
                raise ValueError("delta disorder needs theta in [0, pi]")
        elif self.kind != FLAT:
            raise ValueError(f"unknown disorder kind {self.kind!r}")
        if self.kind != DELTA and self.nodes < 8:
            raise ValueError("quadrature needs at least 8 nodes")

    @classmethod
    def truncated_gaussian(cls, sigma2: float, nodes: int = 64) -> DisorderSpec:
        return cls(GAUSSIAN, sigma2=sigma2, nodes=nodes)

    @classmethod
    def flat(cls, nodes: int = 64) -> DisorderSpec:
        return cls(FLAT, nodes=nodes)

    @classmethod
    def delta(cls, theta: float) -> DisorderSpec:
        return cls(DELTA, theta=theta)

    @classmethod
    def parse(cls, text: str, nodes: int = 64) -> DisorderSpec:
        """``gaussian:0.01``, ``flat`` or ``delta:0.628``."""
        kind, _, arg = text.strip().partition(":")
        kind = kind.strip().lower()
        if kind == GAUSSIAN:
            return cls.truncated_gaussian(float(arg), nodes)
        if kind == FLAT:
            return cls.flat(nodes)
        if kind == DELTA:
            return cls.delta(float(arg))
        raise ValueError(f"cannot parse disorder {text!r}")

    def label(self) -> str:
        if self.kind == GAUSSIAN:
            return f"gaussian:{self.sigma2!r}"
        if self.kind == DELTA:
            return f"delta:{self.theta!r}"
        return FLAT

    def with_nodes(self, nodes: int) -> DisorderSpec:
        return replace(self, nodes=nodes)

    def density(self, theta):
        """Unnormalized density on [0, pi]."""
        theta = np.asarray(theta, dtype=float)
        if self.kind == GAUSSIAN:
            return np.exp(-(theta**2) / (2 * self.sigma2))
        return np.ones_like(theta)

    @property
    def support(self) -> tuple[float, float]:
        if self.kind == GAUSSIAN:
            return 0.0, min(math.pi, _GAUSS_CUTOFF_SIGMAS * math.sqrt(self.sigma2))
        return 0.0, math.pi

    @cached_property
    def _rule(self) -> tuple[np.ndarray, np.ndarray]:
        if self.kind == DELTA:
            return np.array([self.theta]), np.array([1.0])
        x, w = np.polynomial.legendre.leggauss(self.nodes)
        a, b = self.support
        thetas = a + (x + 1) * (b - a) / 2
        weights = w * (b - a) / 2 * self.density(thetas)
        return thetas, weights / math.fsum(weights)

    def quadrature(self) -> tuple[np.ndarray, np.ndarray]:
        """Nodes in [0, pi] and normalized weights (summing to one)."""
        thetas, weights = self._rule
        return thetas.copy(), weights.copy()


def weighted_sum(weights: np.ndarray, values: np.ndarray) -> float:
    # fixed summation order, independent of how the values were computed
    return math.fsum(float(w) * float(v) for w, v in zip(weights, values))


def disorder_average(f: Callable, spec: DisorderSpec, vectorized: bool = False) -> float:
    """Average of ``f(theta)`` over the disorder distribution."""
    thetas, weights = spec.quadrature()
    if vectorized:
        values = np.asarray(f(thetas), dtype=float)
    else:
        values = np.array([f(float(t)) for t in thetas])
    return weighted_sum(weights, values)


@dataclass(frozen=True)
class CycleParams:
    """Cycle settings shared by every point of a time sweep."""

    alpha: float = 1.0
    tau_iso: float = 0.01
    beta_c: float = 1.0
    beta_h: float = 0.5
    omega0: float = 1.0
    tol: float = qdyn.DEFAULT_TOL
    max_steps: int = qdyn.DEFAULT_MAX_STEPS

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not self.tau_iso >= 0:
            raise ValueError("tau_iso must be non-negative")
        if not 0 < self.beta_h < self.beta_c:
            raise ValueError("need 0 < beta_h < beta_c")


@dataclass(frozen=True)
class SweepSpec:
    grid: tuple[float, ...]
    params: CycleParams = field(default_factory=CycleParams)
    disorder: DisorderSpec = field(default_factory=lambda: DisorderSpec.delta(0.0))

    def __post_init__(self):
        g = tuple(float(x) for x in self.grid)
        object.__setattr__(self, "grid", g)
        if any(x <= 0 for x in g):
            raise ValueError("sweep grid must be positive")
        if any(b <= a for a, b in zip(g, g[1:])):
            raise ValueError("sweep grid must be strictly ascending")


@dataclass(frozen=True)
class Averages:
    alpha_t: float
    w_ex: float
    power: float
    eta: float
    w_fric: float

    @property
    def p_over_alpha2(self) -> float:
        return self.power


@dataclass(frozen=True)
class SweepRow:
    alpha_t_tot: float
    w_ex: float
    p_over_alpha2: float
    eta: float
    w_fric: float
    status: str = "ok"


@dataclass(frozen=True)
class MaxPowerResult:
    alpha_t_max: float
    p_max_over_alpha2: float
    eta_at_pmax: float


def averaged_cycle(x: float, params: CycleParams, disorder: DisorderSpec) -> Averages:
    """Disorder averages of W_ex, P/alpha^2, eta and total friction at ``x = alpha*tau_ad``.

    The efficiency is the average of per-angle efficiencies.
    """
    thetas, weights = disorder.quadrature()
    b = cycle_batch(
        thetas,
        params.alpha,
        x / params.alpha,
        params.tau_iso,
        params.beta_c,
        params.beta_h,
        params.omega0,
        params.tol,
        params.max_steps,
    )
    return Averages(
        alpha_t=x,
        w_ex=weighted_sum(weights, b.w_ex),
        power=weighted_sum(weights, b.power) / params.alpha**2,
        eta=weighted_sum(weights, b.eta),
        w_fric=weighted_sum(weights, b.w_fric.sum(axis=1)),
    )


def _sweep_point(args) -> SweepRow:
    x, params, disorder = args
    try:
        a = averaged_cycle(x, params, disorder)
    except NonConvergence:
        nan = math.nan
        return SweepRow(x, nan, nan, nan, nan, "nonconvergence")
    return SweepRow(x, a.w_ex, a.power, a.eta, a.w_fric)


def map_ordered(fn, items: Sequence, workers: int = 1) -> list:
    """Apply ``fn`` to ``items`` preserving order, optionally in worker processes."""
    items = list(items)
    if workers <= 1 or len(items) < 2:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def sweep_total_time(spec: SweepSpec, workers: int = 1) -> list[SweepRow]:
    """One row per grid point; non-converged points carry status ``nonconvergence``."""
    jobs = [(x, spec.params, spec.disorder) for x in spec.grid]
    return map_ordered(_sweep_point, jobs, workers)


def power_efficiency_curve(spec: SweepSpec, workers: int = 1) -> list[tuple[float, float]]:
    """Parametric (eta, P/alpha^2) pairs along the time grid."""
    return [(r.eta, r.p_over_alpha2) for r in sweep_total_time(spec, workers)]


INV_PHI = (math.sqrt(5) - 1) / 2


def golden_section_max(f: Callable[[float], float], a: float, b: float, tol: float):
    """Shrink [a, b] around a maximum of a unimodal ``f`` until b - a <= tol.

    Returns the final bracket ``(a, b)``.
    """
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    return a, b


def maximize_power(spec: SweepSpec, refine_tol: float = 1e-6, workers: int = 1) -> MaxPowerResult:
    """Grid scan of the averaged power, then golden-section refinement."""
    rows = sweep_total_time(spec, workers)
    failed = [r for r in rows if r.status != "ok"]
    if failed:
        raise NonConvergence(spec.params.max_steps, math.nan, spec.params.tol)
    powers = np.array([r.p_over_alpha2 for r in rows])
    i = int(np.argmax(powers))
    if i == 0:
        raise MaxOnBoundary(spec.grid[0], "lower")
    if i == len(rows) - 1:
        raise MaxOnBoundary(spec.grid[-1], "upper")

    cache: dict[float, Averages] = {}

    def avg(x: float) -> Averages:
        if x not in cache:
            cache[x] = averaged_cycle(x, spec.params, spec.disorder)
        return cache[x]

    a, b = golden_section_max(lambda x: avg(x).power, spec.grid[i - 1], spec.grid[i + 1], refine_tol)
    best = avg((a + b) / 2)
    if best.power < powers[i]:
        best = avg(spec.grid[i])
    return MaxPowerResult(best.alpha_t, best.power, best.eta)


def sign_changes(values: Sequence[float]) -> list[int]:
    """Indices i where values[i] and values[i + 1] have strictly opposite signs."""
    s = np.sign(np.asarray(values, dtype=float))
    return [i for i in range(len(s) - 1) if s[i] * s[i + 1] < 0]


def max_positive_work_time(spec: SweepSpec, rtol: float = 1e-8) -> float:
    """Time parameter where the averaged extractable work first changes sign."""
    rows = sweep_total_time(spec)
    w = [r.w_ex for r in rows]
    idx = sign_changes(w)
    if not idx:
        raise NoSignChange(int(np.sign(np.nanmean(w))))
    i = idx[0]

    def work(x: float) -> float:
        return averaged_cycle(x, spec.params, spec.disorder).w_ex

    return float(bisect(work, spec.grid[i], spec.grid[i + 1], xtol=1e-15, rtol=rtol))


def fit_tau_iso(
    target: MaxPowerResult,
    base: SweepSpec,
    bounds: tuple[float, float] = (0.0, 0.05),
    tol: float = 1e-4,
    refine_tol: float = 1e-6,
) -> float:
    """Isochore bookkeeping time minimizing the squared relative error against ``target``."""

    def loss(tau_iso: float) -> float:
        spec = replace(base, params=replace(base.params, tau_iso=tau_iso))
        try:
            r = maximize_power(spec, refine_tol)
        except MaxOnBoundary:
            return math.inf
        return (
            ((r.alpha_t_max - target.alpha_t_max) / target.alpha_t_max) ** 2
            + ((r.p_max_over_alpha2 - target.p_max_over_alpha2) / target.p_max_over_alpha2) ** 2
            + ((r.eta_at_pmax - target.eta_at_pmax) / target.eta_at_pmax) ** 2
        )

    a, b = golden_section_max(lambda t: -loss(t), bounds[0], bounds[1], tol)
    return (a + b) / 2
