"""Second-order forward-mode derivative numbers.

A :class:`Taylor` carries, for a batch of points, the value of a quantity
together with its first derivatives with respect to every input variable
and a fixed set of second derivatives. Inputs are ordered ``(t, x_1, ..,
x_d)``; input 0 is always time. Second derivatives are tracked for the
pure spatial pairs ``(i, i)`` and the mixed time/space pairs ``(0, i)``.

The arithmetic only uses ``+``, ``*``, ``@`` and elementwise functions from
the array namespace of the operands, so the same code runs on NumPy arrays
(evaluation, certification) and on traced JAX arrays (training).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np


def array_namespace(*arrays):
    """Return ``jax.numpy`` if any operand is a JAX array, else ``numpy``."""
    for a in arrays:
        if type(a).__module__.startswith("jax"):
            import jax.numpy as jnp

            return jnp
    return np


def second_order_pairs(d: int) -> list[tuple[int, int]]:
    """Input-index pairs tracked to second order for ``d`` space dimensions."""
    return [(i, i) for i in range(1, d + 1)] + [(0, i) for i in range(1, d + 1)]


def _pair_index(pairs) -> tuple[np.ndarray, np.ndarray]:
    return np.array([a for a, _ in pairs], dtype=int), np.array([b for _, b in pairs], dtype=int)


class EvaluationError(ArithmeticError):
    """A jet evaluation produced non-finite numbers."""


class Taylor:
    """Truncated second-order Taylor number over a batch.

    Attributes
    ----------
    val : array, shape (B, m)
    d1 : array, shape (K, B, m)
        First derivatives with respect to the K inputs.
    d2 : array, shape (P, B, m)
        Second derivatives for ``pairs``.
    pairs : tuple of (int, int)
    """

    __slots__ = ("val", "d1", "d2", "pairs")
    # make NumPy defer to the reflected operators for ``array * Taylor``
    __array_ufunc__ = None

    def __init__(self, val, d1, d2, pairs):
        self.val = val
        self.d1 = d1
        self.d2 = d2
        self.pairs = tuple(pairs)

    # construction -------------------------------------------------------

    @classmethod
    def variables(cls, t, x) -> list["Taylor"]:
        """Independent variables ``t`` (B,) and ``x`` (B, d) as Taylor numbers."""
        xp = array_namespace(t, x)
        B, d = x.shape
        K = d + 1
        pairs = second_order_pairs(d)
        cols = [t] + [x[:, i] for i in range(d)]
        out = []
        for k, c in enumerate(cols):
            val = c[:, None]
            d1 = xp.zeros((K, B, 1), dtype=val.dtype)
            if xp is np:
                d1[k] = 1.0
            else:
                d1 = d1.at[k].set(1.0)
            d2 = xp.zeros((len(pairs), B, 1), dtype=val.dtype)
            out.append(cls(val, d1, d2, pairs))
        return out

    def constant_like(self, c) -> "Taylor":
        xp = array_namespace(self.val, c)
        val = xp.broadcast_to(xp.asarray(c, dtype=self.val.dtype), self.val.shape)
        return Taylor(val, xp.zeros_like(self.d1), xp.zeros_like(self.d2), self.pairs)

    # arithmetic ---------------------------------------------------------

    def __add__(self, other):
        if isinstance(other, Taylor):
            return Taylor(self.val + other.val, self.d1 + other.d1, self.d2 + other.d2, self.pairs)
        return Taylor(self.val + other, self.d1, self.d2, self.pairs)

    __radd__ = __add__

    def __neg__(self):
        return Taylor(-self.val, -self.d1, -self.d2, self.pairs)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Taylor):
            return Taylor(self.val * other, self.d1 * other, self.d2 * other, self.pairs)
        f, g = self, other
        d1 = f.d1 * g.val + f.val * g.d1
        d2 = f.d2 * g.val + f.val * g.d2
        p, q = _pair_index(self.pairs)
        d2 = d2 + f.d1[p] * g.d1[q] + f.d1[q] * g.d1[p]
        return Taylor(f.val * g.val, d1, d2, self.pairs)

    __rmul__ = __mul__

    def _chain(self, f0, f1, f2) -> "Taylor":
        """Compose with a scalar function given its value and two derivatives."""
        p, q = _pair_index(self.pairs)
        d1 = f1 * self.d1
        d2 = f1 * self.d2 + f2 * self.d1[p] * self.d1[q]
        return Taylor(f0, d1, d2, self.pairs)

    def tanh(self) -> "Taylor":
        xp = array_namespace(self.val)
        a = xp.tanh(self.val)
        s = 1.0 - a * a
        return self._chain(a, s, -2.0 * a * s)

    def sin(self) -> "Taylor":
        xp = array_namespace(self.val)
        s, c = xp.sin(self.val), xp.cos(self.val)
        return self._chain(s, c, -s)

    def cos(self) -> "Taylor":
        xp = array_namespace(self.val)
        s, c = xp.sin(self.val), xp.cos(self.val)
        return self._chain(c, -s, -c)

    def exp(self) -> "Taylor":
        xp = array_namespace(self.val)
        e = xp.exp(self.val)
        return self._chain(e, e, e)

    def affine(self, W, b) -> "Taylor":
        """``self @ W + b`` acting on the last (feature) axis."""
        return Taylor(self.val @ W + b, self.d1 @ W, self.d2 @ W, self.pairs)

    # structure ----------------------------------------------------------

    def __getitem__(self, cols) -> "Taylor":
        """Select feature columns (keeps the feature axis)."""
        if isinstance(cols, int):
            cols = slice(cols, cols + 1)
        return Taylor(self.val[:, cols], self.d1[..., cols], self.d2[..., cols], self.pairs)

    @staticmethod
    def concat(parts: list["Taylor"]) -> "Taylor":
        xp = array_namespace(*(p.val for p in parts))
        return Taylor(
            xp.concatenate([p.val for p in parts], axis=-1),
            xp.concatenate([p.d1 for p in parts], axis=-1),
            xp.concatenate([p.d2 for p in parts], axis=-1),
            parts[0].pairs,
        )

    def to_jet2(self) -> "Jet2":
        xp = array_namespace(self.val)
        d = self.d1.shape[0] - 1
        grad = xp.moveaxis(self.d1[1:], 0, -1)
        hess = xp.moveaxis(self.d2[:d], 0, -1)
        dt_grad = xp.moveaxis(self.d2[d:], 0, -1)
        return Jet2(self.val, self.d1[0], grad, hess, dt_grad)


@dataclass
class Jet2:
    """Pointwise derivatives of a vector field over a batch of points.

    Shapes: ``value`` and ``dt`` are (B, n); ``grad``, ``hess`` (diagonal
    second spatial derivatives) and ``dt_grad`` (mixed time/space second
    derivatives) are (B, n, d).
    """

    value: object
    dt: object
    grad: object
    hess: Optional[object] = None
    dt_grad: Optional[object] = None

    @property
    def n(self) -> int:
        return self.value.shape[-1]

    @property
    def d(self) -> int:
        return self.grad.shape[-1]

    def __add__(self, other: "Jet2") -> "Jet2":
        return Jet2(
            self.value + other.value,
            self.dt + other.dt,
            self.grad + other.grad,
            _opt_add(self.hess, other.hess),
            _opt_add(self.dt_grad, other.dt_grad),
        )

    def scaled(self, c: float) -> "Jet2":
        return Jet2(
            c * self.value,
            c * self.dt,
            c * self.grad,
            None if self.hess is None else c * self.hess,
            None if self.dt_grad is None else c * self.dt_grad,
        )

    def components(self, cols) -> "Jet2":
        """Restrict to a subset of output components."""
        return Jet2(
            self.value[:, cols],
            self.dt[:, cols],
            self.grad[:, cols],
            None if self.hess is None else self.hess[:, cols],
            None if self.dt_grad is None else self.dt_grad[:, cols],
        )

    def check_finite(self) -> "Jet2":
        for name in ("value", "dt", "grad", "hess", "dt_grad"):
            a = getattr(self, name)
            if a is not None and isinstance(a, np.ndarray) and not np.all(np.isfinite(a)):
                raise EvaluationError(f"non-finite entries in jet field {name!r}")
        return self

    def require(self, *names: str) -> None:
        for name in names:
            if getattr(self, name) is None:
                raise ValueError(f"jet is missing derivative data {name!r}")


def _opt_add(a, b):
    if a is None or b is None:
        return None
    return a + b
