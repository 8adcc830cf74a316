"""Composite PINN loss, collocation sampling and Adam training.

Parameter gradients come from JAX differentiating the same forward-mode
jet code used for evaluation (double precision is switched on at import).
Point sets are sampled once per run and kept fixed.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .jets import array_namespace
from .problems import ProblemSpec, average_residual, divergence, get_problem, initial_defect, residual_from_jet
from .surrogate import Architecture, NetworkSurrogate, PeriodicEmbedding, init_params, network_taylor

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class LossWeights:
    """``L = L_eq / (1 + kappa) + kappa L_data / (1 + kappa) + rho L_space``."""

    kappa: float = 1.0
    rho: float = 0.0

    def __post_init__(self):
        if self.kappa < 0 or self.rho < 0:
            raise ValueError("loss weights must be nonnegative")

    @property
    def eq(self) -> float:
        return 1.0 / (1.0 + self.kappa)

    @property
    def data(self) -> float:
        return self.kappa / (1.0 + self.kappa)


@dataclass
class TrainConfig:
    problem: str
    hidden_layers: int
    hidden_units: int
    n_data: int
    n_eq: int
    n_space: int = 0
    epochs: int = 1000
    learning_rate: float = 1e-3
    seed: int = 0
    weights: LossWeights = field(default_factory=LossWeights)
    boundary: str = "hard"
    # collocation horizon; defaults to the problem horizon
    t_train: Optional[float] = None
    # "random": n_data points; "grid": n_data nodes per axis
    data_kind: str = "random"
    n_periodic: int = 8
    pre_hidden: int = 8

    def __post_init__(self):
        if isinstance(self.weights, dict):
            self.weights = LossWeights(**self.weights)
        for name in ("hidden_layers", "hidden_units", "n_data", "n_eq", "epochs"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.boundary not in ("hard", "soft"):
            raise ValueError("boundary must be 'hard' or 'soft'")
        if self.data_kind not in ("random", "grid"):
            raise ValueError("data_kind must be 'random' or 'grid'")
        if self.learning_rate < 0:
            raise ValueError("learning rate must be nonnegative")

    def to_dict(self) -> dict:
        return asdict(self)


def default_config(problem: str, **overrides) -> TrainConfig:
    """Per-problem network sizes, point counts and weights from the reference setups.

    Learning rates are for Adam and were chosen for this optimizer.
    """
    base = {
        "heat": dict(hidden_layers=4, hidden_units=10, n_data=200, n_eq=1000, n_space=200, epochs=3000, learning_rate=1e-2, weights=LossWeights(1.0, 10.0)),
        "transport2d": dict(hidden_layers=8, hidden_units=40, n_data=201, n_eq=10000, epochs=10000, learning_rate=1e-3, weights=LossWeights(0.3, 0.0), t_train=4.0, data_kind="grid"),
        "taylor_nse": dict(hidden_layers=10, hidden_units=80, n_data=31, n_eq=2000, epochs=20000, learning_rate=1e-3, weights=LossWeights(0.7, 100.0), data_kind="grid"),
        "klein_gordon": dict(hidden_layers=6, hidden_units=10, n_data=201, n_eq=2500, epochs=30000, learning_rate=1e-3, weights=LossWeights(2.5, 50.0), boundary="soft", data_kind="grid"),
    }[problem]
    base.update(overrides)
    return TrainConfig(problem=problem, **base)


def build_architecture(problem: ProblemSpec, hidden: Sequence[int], boundary: str = "hard", n_periodic: int = 8, pre_hidden: int = 8) -> Architecture:
    hard_bc = problem.hard_bc if boundary == "hard" else None
    periodic = None
    if boundary == "hard" and problem.periodic_widths is not None:
        periodic = PeriodicEmbedding(tuple(range(problem.d)), tuple(problem.periodic_widths), n_p=n_periodic, pre_hidden=pre_hidden)
    return Architecture(d=problem.d, n_outputs=problem.n_outputs, hidden=tuple(hidden), hard_bc=hard_bc, periodic=periodic)


def config_architecture(config: TrainConfig) -> Architecture:
    problem = get_problem(config.problem)
    hidden = (config.hidden_units,) * config.hidden_layers
    return build_architecture(problem, hidden, config.boundary, config.n_periodic, config.pre_hidden)


# sampling -----------------------------------------------------------------


def sample_points(lower: Sequence[float], upper: Sequence[float], count, seed: int = 0, kind: str = "random") -> np.ndarray:
    """Points in the closed box ``[lower, upper]``, shape (N, D).

    ``random``: ``count`` uniform draws from a seeded generator.
    ``grid``: ``count`` equally spaced nodes per axis including both ends;
    a single node per axis is placed at the midpoint.
    """
    lo = np.asarray(lower, dtype=float)
    hi = np.asarray(upper, dtype=float)
    if kind == "random":
        if int(count) < 1:
            raise ValueError("count must be >= 1")
        rng = np.random.default_rng(seed)
        return rng.uniform(lo, hi, size=(int(count), lo.size))
    if kind != "grid":
        raise ValueError(f"unknown sampling kind {kind!r}")
    counts = (int(count),) * lo.size if np.isscalar(count) else tuple(int(c) for c in count)
    if any(c < 1 for c in counts):
        raise ValueError("count must be >= 1")
    axes = [np.array([0.5 * (a + b)]) if n == 1 else np.linspace(a, b, n) for a, b, n in zip(lo, hi, counts)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


# losses -----------------------------------------------------------------


def _split(points) -> tuple[np.ndarray, np.ndarray]:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[0] == 0:
        raise ValueError("need at least one point")
    return pts[:, 0], pts[:, 1:]


def equation_loss(problem: ProblemSpec, surrogate, points) -> float:
    """Mean squared Euclidean norm of the residual over space-time points (N, 1 + d)."""
    t, x = _split(points)
    r = residual_from_jet(problem, surrogate.jet(t, x))
    xp = array_namespace(r)
    return xp.mean(xp.sum(r * r, axis=1))


def data_loss(problem: ProblemSpec, surrogate, x_points) -> float:
    """Mean squared deviation from the initial condition (all outputs) at ``x_points`` (N, d)."""
    x = np.atleast_2d(np.asarray(x_points, dtype=float)).reshape(-1, problem.d)
    if x.shape[0] == 0:
        raise ValueError("need at least one point")
    t0 = np.zeros(len(x))
    diff = surrogate.jet(t0, x).value - problem.initial_value(x)
    xp = array_namespace(diff)
    return xp.mean(xp.sum(diff * diff, axis=1))


def space_loss(problem: ProblemSpec, surrogate, points) -> float:
    """Problem-specific spatial constraint penalty.

    heat: mean over the point times of ``u(t,0)^2 + u(t,1)^2``;
    taylor_nse: sum over the points of the squared velocity divergence;
    klein_gordon: mean over the point times of ``u_x(t,0)^2 + u_x(t,1)^2``;
    transport2d: no spatial penalty (0).
    """
    t, x = _split(points)
    name = problem.name
    if name in ("heat", "klein_gordon"):
        tt = np.concatenate([t, t])
        xb = np.concatenate([np.full(t.size, problem.lower[0]), np.full(t.size, problem.upper[0])])[:, None]
        jet = surrogate.jet(tt, xb)
        q = jet.value[:, 0] if name == "heat" else jet.grad[:, 0, 0]
        xp = array_namespace(q)
        return xp.mean(q[: t.size] ** 2 + q[t.size :] ** 2)
    if name == "taylor_nse":
        div = divergence(surrogate.jet(t, x))
        xp = array_namespace(div)
        return xp.sum(div * div)
    return 0.0


def total_loss(weights: LossWeights, l_eq, l_data, l_space):
    return weights.eq * l_eq + weights.data * l_data + weights.rho * l_space


# training -----------------------------------------------------------------


@dataclass
class PointSets:
    eq: np.ndarray
    data: np.ndarray
    space: Optional[np.ndarray]


def make_point_sets(config: TrainConfig, problem: ProblemSpec) -> PointSets:
    t_hi = problem.t_final if config.t_train is None else config.t_train
    lo = (0.0, *problem.lower)
    hi = (t_hi, *problem.upper)
    eq = sample_points(lo, hi, config.n_eq, seed=config.seed + 1)
    data = sample_points(problem.lower, problem.upper, config.n_data, seed=config.seed + 2, kind=config.data_kind)
    space = None
    if problem.name == "heat" and config.boundary == "soft":
        space = sample_points(lo, hi, max(config.n_space, 1), seed=config.seed + 3)
    elif problem.name in ("klein_gordon", "taylor_nse"):
        space = eq
    return PointSets(eq, data, space)


class _Traced:
    """Network surrogate view that keeps arrays in JAX (no NumPy conversion)."""

    def __init__(self, arch, params):
        self.arch, self.params = arch, params

    def jet(self, t, x):
        return network_taylor(self.arch, self.params, t, x).to_jet2()


def loss_terms(problem: ProblemSpec, surrogate, points: PointSets) -> tuple:
    l_eq = equation_loss(problem, surrogate, points.eq)
    l_data = data_loss(problem, surrogate, points.data)
    l_space = space_loss(problem, surrogate, points.space) if points.space is not None else 0.0
    return l_eq, l_data, l_space


def _jax():
    import jax

    jax.config.update("jax_enable_x64", True)
    return jax


def loss_value_and_grad(problem: ProblemSpec, arch: Architecture, params, points: PointSets, weights: LossWeights):
    """Total loss and its parameter gradient (NumPy pytree)."""
    jax = _jax()

    def f(p):
        return total_loss(weights, *loss_terms(problem, _Traced(arch, p), points))

    val, grad = jax.value_and_grad(f)(jax.tree_util.tree_map(jax.numpy.asarray, params))
    return float(val), jax.tree_util.tree_map(np.asarray, grad)


@dataclass
class TrainResult:
    surrogate: NetworkSurrogate
    history: np.ndarray
    report: dict
    points: PointSets


def train(config: TrainConfig) -> TrainResult:
    """Adam on the composite loss over fixed point sets; deterministic given the seed."""
    jax = _jax()
    jnp = jax.numpy
    problem = get_problem(config.problem)
    arch = config_architecture(config)
    params0 = init_params(arch, np.random.default_rng(config.seed))
    points = make_point_sets(config, problem)
    weights = config.weights
    lr, b1, b2, eps = config.learning_rate, 0.9, 0.999, 1e-8
    tmap = jax.tree_util.tree_map

    def loss_fn(p):
        return total_loss(weights, *loss_terms(problem, _Traced(arch, p), points))

    @jax.jit
    def step(p, m, v, k):
        loss, g = jax.value_and_grad(loss_fn)(p)
        m = tmap(lambda a, b: b1 * a + (1 - b1) * b, m, g)
        v = tmap(lambda a, b: b2 * a + (1 - b2) * b * b, v, g)
        c1 = 1 - b1**k
        c2 = 1 - b2**k
        p = tmap(lambda a, mm, vv: a - lr * (mm / c1) / (jnp.sqrt(vv / c2) + eps), p, m, v)
        return p, m, v, loss

    p = tmap(jnp.asarray, params0)
    m = tmap(jnp.zeros_like, p)
    v = tmap(jnp.zeros_like, p)
    history = np.empty(config.epochs)
    t_start = time.perf_counter()
    for k in range(1, config.epochs + 1):
        p, m, v, loss = step(p, m, v, float(k))
        loss = float(loss)
        if not math.isfinite(loss):
            raise TrainingError(f"non-finite loss {loss} at epoch {k} ({config.problem})")
        history[k - 1] = loss
        if k % max(1, config.epochs // 10) == 0:
            log.info("epoch %d/%d loss %.6e", k, config.epochs, loss)
    params = tmap(lambda a: np.asarray(a, dtype=float), p)
    surrogate = NetworkSurrogate(arch, params)
    l_eq, l_data, l_space = (float(v) for v in loss_terms(problem, surrogate, points))
    final = float(total_loss(weights, l_eq, l_data, l_space))
    if not math.isfinite(final):
        raise TrainingError("non-finite final loss")
    grid = problem.grid(201 if problem.d == 1 else 101)
    report = {
        "problem": config.problem,
        "boundary": config.boundary,
        "epochs": config.epochs,
        "learning_rate": config.learning_rate,
        "seed": config.seed,
        "kappa": weights.kappa,
        "rho": weights.rho,
        "n_eq": config.n_eq,
        "n_data": len(points.data),
        "data_kind": config.data_kind,
        "initial_loss": float(history[0]),
        "final_loss": final,
        "final_loss_eq": l_eq,
        "final_loss_data": l_data,
        "final_loss_space": l_space,
        "zeta_bar": average_residual(problem, surrogate, points.eq),
        "zeta0": initial_defect(problem, surrogate, grid),
    }
    log.info("trained %s in %.1f s", config.problem, time.perf_counter() - t_start)
    return TrainResult(surrogate, history, report, points)
