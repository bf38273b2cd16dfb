"""Exception types raised by the simulator."""

from __future__ import annotations


class OttoError(Exception):
    """Base class for all simulator errors."""


class NonConvergence(OttoError):
    """Adaptive step doubling hit the step ceiling before reaching tolerance."""

    def __init__(self, steps: int, change: float, tol: float):
        self.steps = steps
        self.change = change
        self.tol = tol
        super().__init__(
            f"propagator did not converge: change {change:.3e} > tol {tol:.3e} "
            f"at {steps} steps"
        )


class DegenerateGap(OttoError):
    """The instantaneous level spacing vanishes, so the polarization is undefined."""


class SupportViolation(OttoError):
    """Reference state of a relative entropy is not full rank."""


class MaxOnBoundary(OttoError):
    """The coarse power scan peaked on an endpoint of the grid."""

    def __init__(self, x: float, where: str):
        self.x = x
        self.where = where
        super().__init__(f"power maximum at the {where} grid endpoint x={x:.6g}")


class NoSignChange(OttoError):
    """Extractable work keeps one sign over the whole scanned window."""

    def __init__(self, sign: int):
        self.sign = sign
        super().__init__(f"extractable work has constant sign {sign:+d} on the grid")


class NotUnitary(OttoError):
    pass


class DomainViolation(OttoError):
    pass


class Infeasible(OttoError):
    """A rotation cannot bring the Bloch vector to the requested z component."""

    def __init__(self, deficit: float, stroke: str | None = None):
        self.deficit = deficit
        self.stroke = stroke
        where = f" at stroke {stroke}" if stroke else ""
        super().__init__(
            f"thermalization infeasible{where}: target |z| exceeds Bloch radius by {deficit:.3e}"
        )
