#!/usr/bin/env python3
"""
Exception hierarchy for the hydrodynamic Bell simulator.

Configuration and validation problems derive from ValueError (CLI exit code 2),
numerical and model failures derive from RuntimeError (CLI exit code 1).
"""

from typing import Dict, Optional


class ConfigurationError(ValueError):
    """Invalid configuration value; ``field`` names the offending key."""

    def __init__(self, field: str, message: str):
        self.field = field
        self.detail = message
        super().__init__(f"{field}: {message}")


class DomainError(ValueError):
    """A coordinate lies outside the bath."""


class NormalizationError(ValueError):
    """A probability table has a conditional slice that does not sum to one."""


class CompositionError(ValueError):
    """Probability tables with incompatible alphabets were combined."""


class EmptySampleError(ValueError):
    """A statistic was requested over zero samples."""


class SettingLookupError(LookupError):
    """A measurement setting label is not part of a model's alphabet."""


class NumericalError(RuntimeError):
    """Base class for numerical failures of the solver."""


class DivergenceError(NumericalError):
    """The wave state became non-finite."""

    def __init__(self, step: int, max_eta: float):
        self.step = step
        self.max_eta = max_eta
        super().__init__(f"Wave field diverged at step {step} (max |eta| = {max_eta!r})")


class SingularOperatorError(NumericalError):
    """Factorization of the discrete Laplace problem failed."""

    def __init__(self, message: str, diagnostics: Optional[Dict] = None):
        self.diagnostics = diagnostics or {}
        details = ", ".join(f"{k}={v}" for k, v in sorted(self.diagnostics.items()))
        super().__init__(f"{message} ({details})" if details else message)


class StabilityError(NumericalError):
    """Time step lies outside the stability region of the integrator."""

    def __init__(self, report):
        self.report = report
        super().__init__(
            f"Time step {report.dt:.3e} s is unstable: "
            f"amplification index {report.index:.3f} exceeds {report.limit:.2f}\n"
            f"  - increase grid.steps_per_period or coarsen grid.points_per_wavelength"
        )


class BracketError(NumericalError):
    """Bisection bracket does not straddle the threshold."""

    def __init__(self, lo: float, hi: float, rate_lo: float, rate_hi: float):
        self.lo = lo
        self.hi = hi
        self.rate_lo = rate_lo
        self.rate_hi = rate_hi
        super().__init__(
            f"No sign change of growth rate in bracket [{lo}, {hi}]:\n"
            f"  - growth rate at {lo}: {rate_lo:+.4f}\n"
            f"  - growth rate at {hi}: {rate_hi:+.4f}"
        )


class ModelViolationError(RuntimeError):
    """A droplet left its subsystem (central region or outside the bath) or cannot be measured."""

    def __init__(self, side: str, x: float, region: str, t: Optional[float] = None, detail: Optional[str] = None):
        self.side = side
        self.x = x
        self.region = region
        self.t = t
        when = f" at t={t:.6f} s" if t is not None else ""
        what = detail or f"entered forbidden region '{region}'"
        super().__init__(f"Droplet {side} {what} (x={x:.6f} cm){when}")
