"""Catalog of the four linear(ised) evolution problems and their residuals.

Each :class:`ProblemSpec` bundles the space-time box, closed-form solution
with analytic derivatives, the linear generator, the boundary handling and
the semigroup/ISS constants used for certification. Residuals are
``R = dt u_hat - A u_hat - f(u_hat)`` where ``f`` is nonzero only for the
Navier-Stokes problem, whose convection and pressure gradient are moved
into the residual.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .certify import ISSGain, ResidualSeries, SemigroupBound, linear_gain
from .fields import NormKind, SampledField, SpatialGrid, reference_error, state_norm
from .jets import Jet2, Taylor, array_namespace
from .surrogate import HardBC

KG_M_L2 = 164.43
TRANSPORT_VELOCITY = (0.2, 0.5)


@dataclass(frozen=True)
class ProblemSpec:
    """One boundary and initial value problem.

    ``n`` counts state components (the certified quantity); ``n_outputs``
    counts surrogate outputs and exceeds ``n`` only when auxiliary fields
    such as a pressure are carried along.
    """

    name: str
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    t_final: float
    n: int
    n_outputs: int
    boundary: str  # "dirichlet" | "periodic" | "neumann"
    exact_jet: Callable[[np.ndarray, np.ndarray], Jet2]
    generator: Callable[[Jet2], object]
    bounds: dict
    norms: dict = field(default_factory=dict)
    inhomogeneity: Optional[Callable[[Jet2], object]] = None
    iss: Optional[ISSGain] = None
    hard_bc: Optional[HardBC] = None
    periodic_widths: Optional[tuple[float, ...]] = None
    modes: dict = field(default_factory=dict)
    needs: tuple[str, ...] = ("grad",)

    @property
    def d(self) -> int:
        return len(self.lower)

    @property
    def volume(self) -> float:
        return float(np.prod(np.subtract(self.upper, self.lower)))

    def norm_for(self, label: str) -> NormKind:
        return self.norms.get(label, NormKind.L2)

    def bound(self, label: str) -> SemigroupBound:
        try:
            return self.bounds[label]
        except KeyError:
            raise KeyError(f"problem {self.name!r} has no bound {label!r}; choose from {sorted(self.bounds)}") from None

    def grid(self, count) -> SpatialGrid:
        return SpatialGrid.uniform(self.lower, self.upper, count)

    def initial_value(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return self.exact_jet(np.zeros(len(x)), x).value


# helpers ------------------------------------------------------------------


def _separable(value, grad, hess, rate) -> Jet2:
    """Jet of ``g(x) * exp(rate * t)`` given the already time-scaled spatial data."""
    return Jet2(value, rate * value, grad, hess, rate * grad)


def _stack(*jets: Jet2) -> Jet2:
    cat = lambda name: np.concatenate([getattr(j, name) for j in jets], axis=1)
    return Jet2(cat("value"), cat("dt"), cat("grad"), cat("hess"), cat("dt_grad"))


def _scalar_jet(value, dt, grad, hess, dt_grad) -> Jet2:
    """Pack (B,) / (B, d) arrays of one component into a Jet2."""
    return Jet2(value[:, None], dt[:, None], grad[:, None, :], hess[:, None, :], dt_grad[:, None, :])


# heat ---------------------------------------------------------------------

HEAT_DIFFUSIVITY = 0.2


def _heat_exact(t, x):
    k = 2.0 * math.pi
    r = -HEAT_DIFFUSIVITY * k * k
    E = np.exp(r * t)
    xx = x[:, 0]
    val = np.sin(k * xx) * E
    grad = (k * np.cos(k * xx) * E)[:, None]
    hess = (-k * k * np.sin(k * xx) * E)[:, None]
    return _scalar_jet(val, r * val, grad, hess, r * grad)


def _heat_mode_sine_decay(t, x):
    E = np.exp(-t)
    xx = x[:, 0]
    val = np.sin(math.pi * xx) * E
    grad = (math.pi * np.cos(math.pi * xx) * E)[:, None]
    hess = (-math.pi**2 * val)[:, None]
    return _scalar_jet(val, -val, grad, hess, -grad)


def _heat_mode_linear(t, x):
    B = len(t)
    z = np.zeros(B)
    return _scalar_jet(x[:, 0].copy(), z, np.ones((B, 1)), np.zeros((B, 1)), np.zeros((B, 1)))


def _heat_generator(jet: Jet2):
    jet.require("hess")
    return HEAT_DIFFUSIVITY * jet.hess[:, :1, 0]


# transport ------------------------------------------------------------------


def wrap_periodic(y, lower=-2.0, period=4.0):
    """Map coordinates into ``[lower, lower + period)``."""
    return np.mod(y - lower, period) + lower


def _hat(y):
    r = np.abs(y).sum(axis=1)
    inside = r <= 0.5
    val = np.where(inside, 0.5 - r, 0.0)
    grad = np.where(inside[:, None], -np.sign(y), 0.0)
    return val, grad


def _transport_exact(t, x):
    C = np.asarray(TRANSPORT_VELOCITY)
    y = wrap_periodic(x + t[:, None] * C)
    val, grad = _hat(y)
    z = np.zeros_like(grad)
    return _scalar_jet(val, grad @ C, grad, z, z)


def _transport_mode_sine_x1(t, x):
    a = 0.5 * math.pi
    x1 = x[:, 0]
    B = len(t)
    grad = np.zeros((B, 2))
    hess = np.zeros((B, 2))
    grad[:, 0] = a * np.cos(a * x1)
    hess[:, 0] = -a * a * np.sin(a * x1)
    return _scalar_jet(np.sin(a * x1), np.zeros(B), grad, hess, np.zeros((B, 2)))


def _transport_generator(jet: Jet2):
    C = TRANSPORT_VELOCITY
    return C[0] * jet.grad[:, :1, 0] + C[1] * jet.grad[:, :1, 1]


# Navier-Stokes (Taylor flow) ---------------------------------------------------

NSE_RE = 1.0
NSE_RHO = 1.0


def _nse_exact(t, x):
    x1, x2 = x[:, 0], x[:, 1]
    E, F = np.exp(-2.0 * t), np.exp(-4.0 * t)
    c1, s1, c2, s2 = np.cos(x1), np.sin(x1), np.cos(x2), np.sin(x2)
    u = -c1 * s2 * E
    u_g = np.stack([s1 * s2 * E, -c1 * c2 * E], axis=1)
    u_h = np.stack([c1 * s2 * E, c1 * s2 * E], axis=1)
    v = s1 * c2 * E
    v_g = np.stack([c1 * c2 * E, -s1 * s2 * E], axis=1)
    v_h = np.stack([-s1 * c2 * E, -s1 * c2 * E], axis=1)
    p = -0.25 * (np.cos(2 * x1) + np.cos(2 * x2)) * F
    p_g = np.stack([0.5 * np.sin(2 * x1) * F, 0.5 * np.sin(2 * x2) * F], axis=1)
    p_h = np.stack([np.cos(2 * x1) * F, np.cos(2 * x2) * F], axis=1)
    return _stack(
        _scalar_jet(u, -2.0 * u, u_g, u_h, -2.0 * u_g),
        _scalar_jet(v, -2.0 * v, v_g, v_h, -2.0 * v_g),
        _scalar_jet(p, -4.0 * p, p_g, p_h, -4.0 * p_g),
    )


def _nse_mode_stream(t, x):
    """Divergence-free velocity mode from the stream function sin^2 x1 sin^2 x2, zero on the walls."""
    x1, x2 = x[:, 0], x[:, 1]
    E = np.exp(-t)
    s1, s2 = np.sin(x1), np.sin(x2)
    S1, S2, C1, C2 = np.sin(2 * x1), np.sin(2 * x2), np.cos(2 * x1), np.cos(2 * x2)
    mu = s1**2 * S2 * E
    mu_g = np.stack([S1 * S2 * E, 2 * s1**2 * C2 * E], axis=1)
    mu_h = np.stack([2 * C1 * S2 * E, -4 * s1**2 * S2 * E], axis=1)
    mv = -S1 * s2**2 * E
    mv_g = np.stack([-2 * C1 * s2**2 * E, -S1 * S2 * E], axis=1)
    mv_h = np.stack([4 * S1 * s2**2 * E, -2 * S1 * C2 * E], axis=1)
    z, z2 = np.zeros_like(mu), np.zeros_like(mu_g)
    return _stack(
        _scalar_jet(mu, -mu, mu_g, mu_h, -mu_g),
        _scalar_jet(mv, -mv, mv_g, mv_h, -mv_g),
        _scalar_jet(z, z, z2, z2, z2),
    )


def _nse_generator(jet: Jet2):
    jet.require("hess")
    return (1.0 / NSE_RE) * (jet.hess[:, :2, 0] + jet.hess[:, :2, 1])


def _nse_inhomogeneity(jet: Jet2):
    """``-rho (u . grad) u - grad p`` evaluated on the surrogate itself."""
    u, v = jet.value[:, 0:1], jet.value[:, 1:2]
    conv = u * jet.grad[:, :2, 0] + v * jet.grad[:, :2, 1]
    grad_p = jet.grad[:, 2, :]
    return -NSE_RHO * conv - grad_p


def nse_offset(tv: Taylor, xs: list) -> Taylor:
    """Boundary lift for the Taylor flow velocity (two columns)."""
    pi = math.pi
    E = (tv * -2.0).exp()
    x1, x2 = xs
    sx1, sx2 = x1.sin(), x2.sin()

    def bump(y):
        return (-1.0 / pi**2) * (y * y) + 1.0

    def bump_shift(y):
        ys = y - pi
        return (-1.0 / pi**2) * (ys * ys) + 1.0

    chi1 = bump(x1) * (-1.0 * sx2 * E) + bump_shift(x1) * (sx2 * E)
    chi2 = bump(x2) * (sx1 * E) + bump_shift(x2) * (-1.0 * sx1 * E)
    return Taylor.concat([chi1, chi2])


def divergence(jet: Jet2):
    """``d u / d x1 + d v / d x2`` of a velocity jet."""
    return jet.grad[:, 0, 0] + jet.grad[:, 1, 1]


# Klein-Gordon ---------------------------------------------------------------

KG_MASS = 0.25


def kg_frequency(k: int) -> float:
    return math.sqrt((k * math.pi) ** 2 + KG_MASS)


def _kg_modal(t, x, k, alpha, beta, a):
    """State jet for ``u = cos(k pi x) (alpha cos(a t) + beta sin(a t))``, ``v = u_t``."""
    kp = k * math.pi
    xx = x[:, 0]
    X, Xp, Xpp = np.cos(kp * xx), -kp * np.sin(kp * xx), -kp * kp * np.cos(kp * xx)
    T = alpha * np.cos(a * t) + beta * np.sin(a * t)
    Tp = a * (-alpha * np.sin(a * t) + beta * np.cos(a * t))
    Tpp = -a * a * T
    u = _scalar_jet(X * T, X * Tp, (Xp * T)[:, None], (Xpp * T)[:, None], (Xp * Tp)[:, None])
    v = _scalar_jet(X * Tp, X * Tpp, (Xp * Tp)[:, None], (Xpp * Tp)[:, None], (Xp * Tpp)[:, None])
    return _stack(u, v)


def _kg_exact(t, x):
    a2, a4 = kg_frequency(2), kg_frequency(4)
    return _kg_modal(t, x, 2, 1.0, 0.0, a2) + _kg_modal(t, x, 4, 0.0, 0.5 / a4, a4)


def _kg_mode_cosine_decay(t, x):
    """``(cos(pi x) e^{-t}, -cos(pi x) e^{-t})``: Neumann-compatible, consistent ``v = u_t``."""
    xx = x[:, 0]
    E = np.exp(-t)
    val = np.cos(math.pi * xx) * E
    grad = (-math.pi * np.sin(math.pi * xx) * E)[:, None]
    hess = (-math.pi**2 * val)[:, None]
    u = _separable(val[:, None], grad[:, None, :], hess[:, None, :], -1.0)
    return _stack(u, u.scaled(-1.0))


def _kg_mode_eigen(t, x):
    """First Neumann eigenmode ``u = cos(pi x) cos(a_1 t)``; an exact homogeneous solution."""
    return _kg_modal(t, x, 1, 1.0, 0.0, kg_frequency(1))


def _kg_generator(jet: Jet2):
    jet.require("hess")
    xp = array_namespace(jet.value)
    u, v = jet.value[:, 0:1], jet.value[:, 1:2]
    return xp.concatenate([v, jet.hess[:, 0:1, 0] - KG_MASS * u], axis=1)


# catalog --------------------------------------------------------------------

PROBLEMS: dict[str, ProblemSpec] = {
    "heat": ProblemSpec(
        name="heat",
        lower=(0.0,),
        upper=(1.0,),
        t_final=0.5,
        n=1,
        n_outputs=1,
        boundary="dirichlet",
        exact_jet=_heat_exact,
        generator=_heat_generator,
        bounds={
            "contraction": SemigroupBound(1.0, 0.0, "contraction"),
            "exp-decay": SemigroupBound(1.0, -(math.pi**2) / 5.0, "exp-decay"),
        },
        iss=linear_gain(1.0 / 3.0, label="s/3"),
        hard_bc=HardBC(widths=(1.0,), centers=(0.5,), n_masked=1),
        modes={"sine_decay": _heat_mode_sine_decay, "linear": _heat_mode_linear},
        needs=("hess",),
    ),
    "transport2d": ProblemSpec(
        name="transport2d",
        lower=(-2.0, -2.0),
        upper=(2.0, 2.0),
        t_final=8.0,
        n=1,
        n_outputs=1,
        boundary="periodic",
        exact_jet=_transport_exact,
        generator=_transport_generator,
        bounds={"contraction": SemigroupBound(1.0, 0.0, "contraction")},
        periodic_widths=(4.0, 4.0),
        modes={"sine_x1": _transport_mode_sine_x1},
    ),
    "taylor_nse": ProblemSpec(
        name="taylor_nse",
        lower=(0.0, 0.0),
        upper=(math.pi, math.pi),
        t_final=1.0,
        n=2,
        n_outputs=3,
        boundary="dirichlet",
        exact_jet=_nse_exact,
        generator=_nse_generator,
        inhomogeneity=_nse_inhomogeneity,
        bounds={"contraction": SemigroupBound(1.0, 0.0, "contraction")},
        hard_bc=HardBC(widths=(math.pi, math.pi), centers=(0.5 * math.pi, 0.5 * math.pi), n_masked=2, offset=nse_offset),
        modes={"stream": _nse_mode_stream},
        needs=("grad", "hess"),
    ),
    "klein_gordon": ProblemSpec(
        name="klein_gordon",
        lower=(0.0,),
        upper=(1.0,),
        t_final=0.2,
        n=2,
        n_outputs=2,
        boundary="neumann",
        exact_jet=_kg_exact,
        generator=_kg_generator,
        bounds={
            "l2": SemigroupBound(KG_M_L2, 0.0, "l2"),
            "energy": SemigroupBound(1.0, 0.0, "energy"),
        },
        norms={"l2": NormKind.L2, "energy": NormKind.KG_ENERGY},
        modes={"cosine_decay": _kg_mode_cosine_decay, "eigenmode": _kg_mode_eigen},
        needs=("hess",),
    ),
}


def get_problem(name: str) -> ProblemSpec:
    try:
        return PROBLEMS[name]
    except KeyError:
        raise KeyError(f"unknown problem {name!r}; choose from {sorted(PROBLEMS)}") from None


# operations -------------------------------------------------------------


def _in_domain(problem: ProblemSpec, t, x, tol: float = 1e-12) -> bool:
    t = np.asarray(t)
    x = np.atleast_2d(x)
    ok_t = np.all((t >= -tol) & (t <= problem.t_final + tol))
    ok_x = np.all((x >= np.asarray(problem.lower) - tol) & (x <= np.asarray(problem.upper) + tol))
    return bool(ok_t and ok_x)


def exact_solution(problem: ProblemSpec, t: float, x) -> np.ndarray:
    """Closed-form solution (all outputs) at one space-time point."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if not _in_domain(problem, t, x):
        raise ValueError(f"({t}, {x}) lies outside the domain of {problem.name!r}")
    return problem.exact_jet(np.array([float(t)]), x[None, :]).value[0]


def apply_generator(problem: ProblemSpec, jet: Jet2):
    """Linear part ``A u`` of the evolution equation, shape (B, n)."""
    for name in problem.needs:
        jet.require(name)
    return problem.generator(jet)


def residual_from_jet(problem: ProblemSpec, jet: Jet2):
    """``dt u - A u - f`` for the state components, shape (B, n)."""
    r = jet.dt[:, : problem.n] - apply_generator(problem, jet)
    if problem.inhomogeneity is not None:
        r = r - problem.inhomogeneity(jet)
    return r


def residual(problem: ProblemSpec, surrogate, t, x) -> np.ndarray:
    t = np.atleast_1d(np.asarray(t, dtype=float))
    x = np.asarray(x, dtype=float).reshape(t.size, problem.d)
    return residual_from_jet(problem, surrogate.jet(t, x))


def _residual_gradient(problem: ProblemSpec, jet: Jet2):
    """Spatial gradient of the first residual component of the Klein-Gordon system."""
    g = np.zeros((jet.value.shape[0], problem.n, problem.d))
    g[:, 0, :] = jet.dt_grad[:, 0, :] - jet.grad[:, 1, :]
    return g


def state_field(problem: ProblemSpec, jet: Jet2, grid: SpatialGrid, norm: NormKind) -> SampledField:
    g = jet.grad[:, : problem.n, :] if norm is NormKind.KG_ENERGY else None
    return SampledField(grid, jet.value[:, : problem.n], g)


def residual_field(problem: ProblemSpec, surrogate, t: float, grid: SpatialGrid, norm: NormKind = NormKind.L2) -> SampledField:
    x = grid.nodes()
    jet = surrogate.jet(np.full(len(x), t), x)
    r = residual_from_jet(problem, jet)
    g = _residual_gradient(problem, jet) if norm is NormKind.KG_ENERGY else None
    return SampledField(grid, r, g)


def initial_defect(problem: ProblemSpec, surrogate, grid: SpatialGrid, norm: NormKind = NormKind.L2) -> float:
    x = grid.nodes()
    t0 = np.zeros(len(x))
    approx = state_field(problem, surrogate.jet(t0, x), grid, norm)
    exact = state_field(problem, problem.exact_jet(t0, x), grid, norm)
    return reference_error(approx, exact, norm)


def boundary_points(problem: ProblemSpec, count: int = 101) -> np.ndarray:
    """Sample points on the faces of the spatial box."""
    lo, hi = problem.lower, problem.upper
    if problem.d == 1:
        return np.array([[lo[0]], [hi[0]]])
    s1 = np.linspace(lo[0], hi[0], count)
    s2 = np.linspace(lo[1], hi[1], count)
    faces = [
        np.stack([np.full(count, lo[0]), s2], 1),
        np.stack([np.full(count, hi[0]), s2], 1),
        np.stack([s1, np.full(count, lo[1])], 1),
        np.stack([s1, np.full(count, hi[1])], 1),
    ]
    return np.concatenate(faces)


def boundary_residual(problem: ProblemSpec, surrogate, t: float, count: int = 101) -> np.ndarray:
    """Pointwise boundary defect ``B u_hat - u_b`` at sampled boundary points.

    Dirichlet: state value minus the exact boundary data. Neumann: normal
    derivative of ``u``. Periodic: mismatch between opposite faces.
    """
    if problem.boundary == "periodic":
        lo, hi = problem.lower, problem.upper
        s = np.linspace(lo[1], hi[1], count)
        out = []
        for axis in range(problem.d):
            a = np.zeros((count, problem.d))
            b = np.zeros((count, problem.d))
            other = 1 - axis
            a[:, other] = b[:, other] = s
            a[:, axis], b[:, axis] = lo[axis], hi[axis]
            tt = np.full(count, t)
            out.append(surrogate.value(tt, a)[:, : problem.n] - surrogate.value(tt, b)[:, : problem.n])
        return np.concatenate(out).ravel()
    xb = boundary_points(problem, count)
    tt = np.full(len(xb), t)
    jet = surrogate.jet(tt, xb)
    if problem.boundary == "neumann":
        return jet.grad[:, 0, 0].copy()
    exact = problem.exact_jet(tt, xb)
    return (jet.value[:, : problem.n] - exact.value[:, : problem.n]).ravel()


def boundary_reduce(problem: ProblemSpec, values: np.ndarray) -> float:
    if problem.iss is not None:
        return float(problem.iss.boundary_map(values))
    return float(np.max(np.abs(values)))


def residual_series(
    problem: ProblemSpec,
    surrogate,
    n_time: int,
    grid: SpatialGrid,
    norm: NormKind = NormKind.L2,
    with_boundary: Optional[bool] = None,
) -> ResidualSeries:
    """Sample ``||R(t_i)||`` on ``n_time`` uniform times over the horizon.

    Boundary residual norms are attached for Dirichlet and Neumann problems
    (or when ``with_boundary`` forces it).
    """
    if n_time < 2:
        raise ValueError("need at least two time samples")
    ts = np.linspace(0.0, problem.t_final, n_time)
    zeta = np.array([state_norm(residual_field(problem, surrogate, t, grid, norm), norm) for t in ts])
    zeta0 = initial_defect(problem, surrogate, grid, norm)
    if with_boundary is None:
        with_boundary = problem.boundary in ("dirichlet", "neumann")
    rb = None
    if with_boundary:
        rb = np.array([boundary_reduce(problem, boundary_residual(problem, surrogate, t)) for t in ts])
    return ResidualSeries(ts, zeta, zeta0, rb)


def reference_errors(problem: ProblemSpec, surrogate, times, grid: SpatialGrid, norm: NormKind = NormKind.L2) -> np.ndarray:
    """True errors ``||u_hat(t) - u(t)||`` on the grid at each time."""
    x = grid.nodes()
    out = []
    for t in np.atleast_1d(times):
        tt = np.full(len(x), float(t))
        approx = state_field(problem, surrogate.jet(tt, x), grid, norm)
        exact = state_field(problem, problem.exact_jet(tt, x), grid, norm)
        out.append(reference_error(approx, exact, norm))
    return np.array(out)


def average_residual(problem: ProblemSpec, surrogate, points) -> float:
    """Mean Euclidean norm of the pointwise residual over ``points`` (N, 1 + d)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[0] == 0:
        raise ValueError("need at least one collocation point")
    r = residual(problem, surrogate, pts[:, 0], pts[:, 1:])
    return float(np.mean(np.linalg.norm(r, axis=1)))
