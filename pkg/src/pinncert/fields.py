"""Uniform grids, sampled fields and trapezoidal spatial norms."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np


class NormKind(enum.Enum):
    """Norm used for residuals and errors.

    ``L2`` is the componentwise Euclidean norm integrated in L2 over space.
    ``KG_ENERGY`` is the energy norm of Klein-Gordon state pairs ``(u, v)``:
    ``(||u_x||^2 + 0.25 ||u||^2 + ||v||^2)^(1/2)``.
    """

    L2 = "l2"
    KG_ENERGY = "kg_energy"


class GridMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class SpatialGrid:
    """Tensor-product grid of equally spaced nodes on a box (1-D or 2-D)."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    counts: tuple[int, ...]

    def __post_init__(self):
        lo, hi, n = tuple(map(float, self.lower)), tuple(map(float, self.upper)), tuple(map(int, self.counts))
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "counts", n)
        if not (len(lo) == len(hi) == len(n)) or len(n) not in (1, 2):
            raise ValueError("grid must be 1-D or 2-D with matching bounds and counts")
        if any(c < 2 for c in n):
            raise ValueError("each dimension needs at least 2 nodes")
        if any(b <= a for a, b in zip(lo, hi)):
            raise ValueError("upper bounds must exceed lower bounds")

    @classmethod
    def uniform(cls, lower: Sequence[float], upper: Sequence[float], count) -> "SpatialGrid":
        d = len(lower)
        counts = (count,) * d if np.isscalar(count) else tuple(count)
        return cls(tuple(lower), tuple(upper), counts)

    @property
    def dim(self) -> int:
        return len(self.counts)

    @property
    def size(self) -> int:
        return int(np.prod(self.counts))

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple((b - a) / (n - 1) for a, b, n in zip(self.lower, self.upper, self.counts))

    @property
    def volume(self) -> float:
        return float(np.prod([b - a for a, b in zip(self.lower, self.upper)]))

    def axes(self) -> list[np.ndarray]:
        return [np.linspace(a, b, n) for a, b, n in zip(self.lower, self.upper, self.counts)]

    def nodes(self) -> np.ndarray:
        """Node coordinates, shape (size, dim), first axis varying slowest."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def weights(self) -> np.ndarray:
        """Composite trapezoid weights matching :meth:`nodes`."""
        ws = []
        for h, n in zip(self.spacing, self.counts):
            w = np.full(n, h)
            w[0] = w[-1] = 0.5 * h
            ws.append(w)
        if len(ws) == 1:
            return ws[0]
        return np.outer(ws[0], ws[1]).ravel()

    def boundary_mask(self) -> np.ndarray:
        """Boolean mask of nodes lying on a face of the box."""
        idx = np.meshgrid(*[np.arange(n) for n in self.counts], indexing="ij")
        on = np.zeros(self.counts, dtype=bool)
        for i, n in zip(idx, self.counts):
            on |= (i == 0) | (i == n - 1)
        return on.ravel()


@dataclass
class SampledField:
    """Vector field sampled on the nodes of a grid.

    ``values`` has shape (size, n). ``grad`` optionally carries the spatial
    gradient samples, shape (size, n, dim).
    """

    grid: SpatialGrid
    values: np.ndarray
    grad: Optional[np.ndarray] = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.shape[0] != self.grid.size:
            raise GridMismatchError(f"{v.shape[0]} samples for a grid of {self.grid.size} nodes")
        self.values = v
        if self.grad is not None:
            g = np.asarray(self.grad, dtype=float)
            if g.ndim == 2:
                g = g[:, None, :]
            if g.shape != (self.grid.size, v.shape[1], self.grid.dim):
                raise GridMismatchError(f"gradient samples have shape {g.shape}")
            self.grad = g

    @property
    def n(self) -> int:
        return self.values.shape[1]

    def component(self, i: int) -> "SampledField":
        g = None if self.grad is None else self.grad[:, i : i + 1]
        return SampledField(self.grid, self.values[:, i : i + 1], g)

    def __sub__(self, other: "SampledField") -> "SampledField":
        _check_same(self, other)
        g = None
        if self.grad is not None and other.grad is not None:
            g = self.grad - other.grad
        return SampledField(self.grid, self.values - other.values, g)


def _check_same(a: SampledField, b: SampledField) -> None:
    if a.grid != b.grid:
        raise GridMismatchError("fields live on different grids")
    if a.values.shape != b.values.shape:
        raise GridMismatchError(f"component mismatch: {a.values.shape} vs {b.values.shape}")


def l2_norm(field: SampledField) -> float:
    """sqrt of the trapezoid approximation of the integral of ``|f(x)|^2``."""
    # scale first so tiny or huge fields neither underflow nor overflow
    m = float(np.max(np.abs(field.values), initial=0.0))
    if m == 0.0 or not math.isfinite(m):
        return m
    sq = np.sum((field.values / m) ** 2, axis=1)
    return float(m * np.sqrt(field.grid.weights() @ sq))


def kg_energy_norm(u: SampledField, grad_u: SampledField, v: SampledField) -> float:
    if not (u.grid == grad_u.grid == v.grid):
        raise GridMismatchError("energy norm pieces live on different grids")
    gu, uu, vv = l2_norm(grad_u), l2_norm(u), l2_norm(v)
    return float(np.sqrt(gu**2 + 0.25 * uu**2 + vv**2))


def state_norm(field: SampledField, norm: NormKind) -> float:
    """Norm of a state field; ``KG_ENERGY`` needs a 2-component field with gradients."""
    if norm is NormKind.L2:
        return l2_norm(field)
    if field.n != 2 or field.grad is None:
        raise ValueError("energy norm applies to 2-component (u, v) fields with gradient samples")
    u = field.component(0)
    grad_u = SampledField(field.grid, field.grad[:, 0, :])
    return kg_energy_norm(SampledField(field.grid, u.values), grad_u, field.component(1))


def reference_error(surrogate_values: SampledField, exact_values: SampledField, norm: NormKind = NormKind.L2) -> float:
    _check_same(surrogate_values, exact_values)
    return state_norm(surrogate_values - exact_values, norm)
