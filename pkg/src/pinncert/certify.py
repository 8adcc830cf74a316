"""A posteriori error certificates from residual data and semigroup growth bounds.

Given samples ``zeta(t_i) >= ||R(t_i)||`` of the residual norm of an
approximate solution, a bound ``zeta0`` on its initial defect and a growth
bound ``||S(t)|| <= M exp(omega t)`` of the solution semigroup, the error at
time ``t`` is bounded by

    M e^{wt} zeta0 + M e^{wt} I_n(e^{-ws} zeta(s)) + eps_int + eps_bc

with ``I_n`` the composite trapezoid sum over the samples in ``[0, t]``,
``eps_int`` the trapezoid remainder and ``eps_bc`` an input-to-state gain
applied to the boundary defect (zero for exactly imposed boundaries).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .fields import GridMismatchError

DEFAULT_ALPHA = 0.33
DEFAULT_SAFETY = 2.0
OMEGA_ZERO_TOL = 1e-12


class InsufficientDataError(ValueError):
    pass


class MissingBoundaryDataError(ValueError):
    pass


@dataclass(frozen=True)
class SemigroupBound:
    """Growth bound ``||S(t)|| <= M exp(omega t)``."""

    M: float
    omega: float
    label: str = ""

    def __post_init__(self):
        if not (self.M >= 1.0):
            raise ValueError(f"growth constant M must be >= 1, got {self.M}")
        if not math.isfinite(self.omega):
            raise ValueError("omega must be finite")

    def growth(self, t):
        return self.M * np.exp(self.omega * np.asarray(t, dtype=float))


@dataclass(frozen=True)
class ISSGain:
    """Input-to-state gain for boundary defects.

    ``gamma`` maps the running supremum of the reduced boundary residual to an
    error contribution; ``boundary_map`` reduces the boundary residual values
    sampled at one time to a scalar.
    """

    gamma: Callable[[float], float]
    boundary_map: Callable[[np.ndarray], float] = field(default=lambda r: float(np.max(np.abs(r))))
    label: str = ""

    def check_class_k(self, upper: float = 10.0, samples: int = 201) -> bool:
        s = np.linspace(0.0, upper, samples)
        g = np.array([self.gamma(v) for v in s])
        return bool(g[0] == 0.0 and np.all(np.diff(g) >= 0.0) and np.all(g >= 0.0))


def linear_gain(c: float, label: str = "") -> ISSGain:
    if c <= 0:
        raise ValueError("gain slope must be positive")
    return ISSGain(gamma=lambda s, c=c: c * s, label=label or f"{c:g}*s")


@dataclass
class ResidualSeries:
    """Residual norm samples on a uniform time grid starting at 0."""

    t: np.ndarray
    zeta: np.ndarray
    zeta0: float
    rb: Optional[np.ndarray] = None

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.zeta = np.asarray(self.zeta, dtype=float)
        if self.rb is not None:
            self.rb = np.asarray(self.rb, dtype=float)
            if self.rb.shape != self.t.shape:
                raise ValueError("boundary residual samples must match the time grid")
            if np.any(self.rb < 0):
                raise ValueError("boundary residual norms must be nonnegative")
        if self.t.ndim != 1 or self.t.shape != self.zeta.shape:
            raise ValueError("t and zeta must be 1-D arrays of equal length")
        if self.t.size < 1 or self.t[0] != 0.0:
            raise ValueError("time grid must start at t = 0")
        if self.t.size > 1:
            dt = np.diff(self.t)
            if np.any(dt <= 0):
                raise ValueError("time grid must be strictly increasing")
            # relative tolerance plus a few ulps of the horizon (linspace rounding)
            if np.max(np.abs(dt - dt[0])) > 1e-12 * dt[0] + 4 * np.finfo(float).eps * self.t[-1]:
                raise ValueError("time grid must be equally spaced")
        if np.any(self.zeta < 0) or self.zeta0 < 0:
            raise ValueError("residual bounds must be nonnegative")

    @property
    def step(self) -> float:
        return float(self.t[1] - self.t[0]) if self.t.size > 1 else 0.0

    def index_of(self, t: float) -> int:
        """Index of the sample time equal to ``t``; raises GridMismatchError otherwise."""
        return int(self.indices_of([t])[0])

    def indices_of(self, times) -> np.ndarray:
        """Vectorised :meth:`index_of`."""
        ts = np.atleast_1d(np.asarray(times, dtype=float))
        idx = np.abs(self.t[None, :] - ts[:, None]).argmin(axis=1)
        tol = 1e-9 * max(1.0, abs(float(self.t[-1])))
        bad = np.abs(self.t[idx] - ts) > tol
        if np.any(bad):
            raise GridMismatchError(f"t = {ts[bad][0]!r} is not on the residual sample grid")
        return idx


@dataclass
class Certificate:
    """Per-time error bound decomposition.

    ``eps_tot`` is ``eps_init + eps_eq + eps_int + eps_bc`` evaluated in that
    order. ``eps_ref`` is filled in only when a reference solution is known.
    """

    t: np.ndarray
    eps_init: np.ndarray
    eps_eq: np.ndarray
    eps_int: np.ndarray
    eps_bc: np.ndarray
    eps_tot: np.ndarray
    n_used: np.ndarray
    K: float
    K_estimated: bool = False
    bound: Optional[SemigroupBound] = None
    eps_ref: Optional[np.ndarray] = None

    def with_reference(self, eps_ref: Sequence[float]) -> "Certificate":
        ref = np.asarray(eps_ref, dtype=float)
        if ref.shape != self.t.shape:
            raise ValueError("reference errors must match the evaluation times")
        return replace(self, eps_ref=ref)

    @property
    def eps_pi(self) -> np.ndarray:
        """Physics-informed part ``eps_eq + eps_int``."""
        return self.eps_eq + self.eps_int


# quadrature kernels -----------------------------------------------------


def _trapezoid_rows(bound: SemigroupBound, series: ResidualSeries, idx: np.ndarray) -> np.ndarray:
    """Weighted trapezoid sums up to each sample index in ``idx``."""
    j = np.arange(series.t.size)[None, :]
    n = np.asarray(idx)[:, None]
    w = np.where((j == 0) | (j == n), 0.5, 1.0) * (j <= n) * (n > 0)
    # e^{w t} e^{-w s} folded into one exponent; masked entries get exponent 0
    expo = np.where(j <= n, bound.omega * (series.t[n[:, 0]][:, None] - series.t[None, :]), 0.0)
    return bound.M * series.step * np.sum(w * np.exp(expo) * series.zeta[None, :], axis=1)


def weighted_trapezoid(bound: SemigroupBound, series: ResidualSeries, t: float) -> float:
    """``M e^{wt}`` times the composite trapezoid sum of ``e^{-ws} zeta(s)`` on ``[0, t]``."""
    return float(_trapezoid_rows(bound, series, series.indices_of([t]))[0])


def integration_error_bound(bound: SemigroupBound, K: float, t: float, n: int) -> float:
    """Trapezoid remainder ``M e^{wt} K t^3 / (12 n^2)``."""
    if n < 1:
        raise ValueError("number of subintervals must be >= 1")
    if K < 0 or t < 0:
        raise ValueError("K and t must be nonnegative")
    return float(bound.growth(t) * K * t**3 / (12.0 * n * n))


def estimate_curvature_bound(series: ResidualSeries, bound: SemigroupBound, safety: float = DEFAULT_SAFETY) -> float:
    """Estimate of ``max |d^2/ds^2 (e^{-ws} zeta(s))|`` from second differences.

    This is a heuristic, not a proof-grade bound: it scales the largest
    central second difference over the interior nodes by ``safety``.
    """
    if series.t.size < 3:
        raise InsufficientDataError("curvature estimate needs at least 3 samples")
    if safety < 1:
        raise ValueError("safety factor must be >= 1")
    g = np.exp(-bound.omega * series.t) * series.zeta
    h = series.step
    d2 = (g[2:] - 2.0 * g[1:-1] + g[:-2]) / (h * h)
    return float(safety * np.max(np.abs(d2)))


def expected_equation_error(bound: SemigroupBound, zeta0: float, zeta_bar: float, vol_omega: float, t: float) -> float:
    """A priori size of the equation error from the training-average residual."""
    if t < 0 or vol_omega <= 0:
        raise ValueError("need t >= 0 and a positive domain volume")
    M, w = bound.M, bound.omega
    if abs(w) < OMEGA_ZERO_TOL:
        return float(M * zeta0 + M * t * zeta_bar * vol_omega)
    return float(M * math.exp(w * t) * zeta0 + M * math.expm1(w * t) * zeta_bar * vol_omega / w)


def required_subintervals(bound: SemigroupBound, K: float, alpha: float, t: float, eps_eq_exp: float) -> int:
    """Smallest n with ``integration_error_bound(bound, K, t, n) <= alpha * eps_eq_exp``."""
    if alpha <= 0 or eps_eq_exp <= 0:
        raise ValueError("alpha and the expected equation error must be positive")
    if K < 0 or t <= 0:
        raise ValueError("need K >= 0 and t > 0")
    target = alpha * eps_eq_exp
    n = max(1, math.ceil(math.sqrt(float(bound.growth(t)) * K * t**3 / (12.0 * target))))
    # guard against the square root landing a hair below the true threshold
    while integration_error_bound(bound, K, t, n) > target:
        n += 1
    return n


# certificates -----------------------------------------------------------


def _rows(bound, series, K, eval_times, eps_bc):
    if K < 0:
        raise ValueError("K must be nonnegative")
    idx = series.indices_of(eval_times)
    t_grid = series.t[idx]
    eps_init = bound.growth(t_grid) * series.zeta0
    eps_eq = _trapezoid_rows(bound, series, idx)
    safe_n = np.maximum(idx, 1)
    eps_int = np.where(idx > 0, bound.growth(t_grid) * K * t_grid**3 / (12.0 * safe_n * safe_n), 0.0)
    eps_bc = np.asarray(eps_bc(idx), dtype=float)
    eps_tot = eps_init + eps_eq + eps_int + eps_bc
    return Certificate(
        t=t_grid,
        eps_init=eps_init,
        eps_eq=eps_eq,
        eps_int=eps_int,
        eps_bc=eps_bc,
        eps_tot=eps_tot,
        n_used=idx,
        K=float(K),
        bound=bound,
    )


def certify_hard(bound: SemigroupBound, series: ResidualSeries, K: float, eval_times) -> Certificate:
    """Certificate for surrogates that satisfy the boundary condition exactly."""
    return _rows(bound, series, K, eval_times, lambda idx: np.zeros(len(idx)))


def certify_soft(bound: SemigroupBound, series: ResidualSeries, K: float, iss: ISSGain, eval_times) -> Certificate:
    """Certificate including the ISS gain of the running boundary-defect supremum."""
    if series.rb is None:
        raise MissingBoundaryDataError("soft-boundary certificate needs boundary residual samples")
    running = np.maximum.accumulate(series.rb)

    def eps_bc(idx):
        return [iss.gamma(float(running[i])) for i in idx]

    return _rows(bound, series, K, eval_times, eps_bc)
