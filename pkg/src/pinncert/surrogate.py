"""Jet-evaluable surrogate solutions.

Two families live here:

* analytic surrogates (exact solutions and manufactured perturbations of
  them) whose jets come from closed-form derivatives, and
* small tanh networks whose jets are propagated with the forward-mode
  :class:`~pinncert.jets.Taylor` numbers, optionally wrapped with a
  Dirichlet mask/offset or preceded by periodic embedding layers.

Network parameters are nested dicts/lists of arrays so the same forward
code can be differentiated by JAX during training.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .jets import EvaluationError, Jet2, Taylor, array_namespace

JetFn = Callable[[np.ndarray, np.ndarray], Jet2]


# masks and compositions ---------------------------------------------------


def dirichlet_mask(x, widths, centers):
    """Length factor ``prod_i ((w_i/2)^2 - (x_i - c_i)^2)``; vanishes on the box faces.

    ``x`` is a point (d,) or a batch (B, d), or a list of per-dimension
    :class:`Taylor` numbers.
    """
    if isinstance(x, (list, tuple)) and x and isinstance(x[0], Taylor):
        out = None
        for xi, w, c in zip(x, widths, centers):
            dx = xi - c
            f = (-1.0) * (dx * dx) + (0.5 * w) ** 2
            out = f if out is None else out * f
        return out
    x = np.asarray(x, dtype=float)
    w = np.asarray(widths, dtype=float)
    c = np.asarray(centers, dtype=float)
    return np.prod((0.5 * w) ** 2 - (x - c) ** 2, axis=-1)


def hard_bc_compose(inner_value, mask_value, offset_value):
    """``mask * inner + offset``; works on plain arrays and on Taylor numbers."""
    return mask_value * inner_value + offset_value


@dataclass(frozen=True)
class HardBC:
    """Mask/offset wrapper enforcing Dirichlet data exactly.

    The first ``n_masked`` network outputs are multiplied by the mask and
    shifted by ``offset``; remaining outputs (e.g. a pressure) pass through.
    ``offset`` maps the Taylor variables ``(t, [x_1, .., x_d])`` to a Taylor
    number with ``n_masked`` columns, or is ``None`` for homogeneous data.
    """

    widths: tuple[float, ...]
    centers: tuple[float, ...]
    n_masked: int
    offset: Optional[Callable[[Taylor, list], Taylor]] = None


# periodic embedding -------------------------------------------------------


@dataclass(frozen=True)
class PeriodicEmbedding:
    """Periodic base layers ``tanh(A cos(nu x_i + phi) + B)`` for selected dimensions.

    ``dims`` are spatial indices (0-based) to embed, each with period from
    ``widths``; the frequency ``2 pi / w`` is fixed. With ``pre_hidden > 0``
    the amplitudes, shifts and phases come from a small tanh network of t.
    """

    dims: tuple[int, ...]
    widths: tuple[float, ...]
    n_p: int = 8
    pre_hidden: int = 8

    def nu(self, k: int) -> float:
        return 2.0 * math.pi / self.widths[k]


def init_periodic(emb: PeriodicEmbedding, rng: np.random.Generator) -> list:
    params = []
    for _ in emb.dims:
        if emb.pre_hidden > 0:
            params.append({"pre": init_mlp([1, emb.pre_hidden, 3 * emb.n_p], rng)})
        else:
            params.append(
                {
                    "A": rng.uniform(-1.0, 1.0, emb.n_p),
                    "B": np.zeros(emb.n_p),
                    "phi": rng.uniform(0.0, 2.0 * math.pi, emb.n_p),
                }
            )
    return params


def _periodic_taylor(emb: PeriodicEmbedding, k: int, p: dict, t: Taylor, xi: Taylor) -> Taylor:
    n_p = emb.n_p
    if "pre" in p:
        abp = mlp_taylor(p["pre"], t)
        A, B, phi = abp[slice(0, n_p)], abp[slice(n_p, 2 * n_p)], abp[slice(2 * n_p, 3 * n_p)]
    else:
        A, B, phi = p["A"], p["B"], p["phi"]
    arg = (xi * emb.nu(k) + phi).cos()
    return (arg * A + B).tanh()


def periodic_features(x_i, t, emb: PeriodicEmbedding, params: dict, k: int = 0) -> np.ndarray:
    """Feature values of the ``k``-th periodic layer at scalar or batched ``x_i``, ``t``."""
    x_i = np.atleast_1d(np.asarray(x_i, dtype=float))
    t = np.broadcast_to(np.asarray(t, dtype=float), x_i.shape)
    tv, xv = Taylor.variables(t, x_i[:, None])
    return _periodic_taylor(emb, k, params, tv, xv).val


# dense core -------------------------------------------------------------


def glorot_uniform(fan_in: int, fan_out: int, rng: np.random.Generator) -> np.ndarray:
    lim = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-lim, lim, size=(fan_in, fan_out))


def init_mlp(sizes: Sequence[int], rng: np.random.Generator) -> dict:
    """Glorot-uniform weights and zero biases for a layer-size chain."""
    W = [glorot_uniform(a, b, rng) for a, b in zip(sizes[:-1], sizes[1:])]
    b = [np.zeros(n) for n in sizes[1:]]
    return {"W": W, "b": b}


def mlp_taylor(params: dict, z: Taylor) -> Taylor:
    """tanh hidden layers, linear output layer."""
    n = len(params["W"])
    for i, (W, b) in enumerate(zip(params["W"], params["b"])):
        z = z.affine(W, b)
        if i < n - 1:
            z = z.tanh()
    return z


def mlp_value(params: dict, z: np.ndarray) -> np.ndarray:
    n = len(params["W"])
    for i, (W, b) in enumerate(zip(params["W"], params["b"])):
        z = z @ W + b
        if i < n - 1:
            z = np.tanh(z)
    return z


@dataclass(frozen=True)
class Architecture:
    """Static description of a network surrogate."""

    d: int
    n_outputs: int
    hidden: tuple[int, ...]
    hard_bc: Optional[HardBC] = None
    periodic: Optional[PeriodicEmbedding] = None

    def input_width(self) -> int:
        if self.periodic is None:
            return 1 + self.d
        return 1 + self.d + len(self.periodic.dims) * (self.periodic.n_p - 1)

    def layer_sizes(self) -> list[int]:
        return [self.input_width(), *self.hidden, self.n_outputs]


def init_params(arch: Architecture, rng: np.random.Generator) -> dict:
    params = {"core": init_mlp(arch.layer_sizes(), rng)}
    if arch.periodic is not None:
        params["periodic"] = init_periodic(arch.periodic, rng)
    return params


def network_taylor(arch: Architecture, params: dict, t, x) -> Taylor:
    """Forward pass carrying first and second derivatives."""
    tv, *xs = Taylor.variables(t, x)
    if arch.periodic is None:
        feats = [tv, *xs]
    else:
        emb = arch.periodic
        feats = [tv]
        for i, xi in enumerate(xs):
            if i in emb.dims:
                k = emb.dims.index(i)
                feats.append(_periodic_taylor(emb, k, params["periodic"][k], tv, xi))
            else:
                feats.append(xi)
    out = mlp_taylor(params["core"], Taylor.concat(feats))
    bc = arch.hard_bc
    if bc is None:
        return out
    lam = dirichlet_mask(xs, bc.widths, bc.centers)
    masked = out[slice(0, bc.n_masked)]
    offset = bc.offset(tv, xs) if bc.offset is not None else 0.0
    composed = hard_bc_compose(masked, lam, offset)
    if bc.n_masked == arch.n_outputs:
        return composed
    return Taylor.concat([composed, out[slice(bc.n_masked, arch.n_outputs)]])


class NetworkSurrogate:
    """Tanh network surrogate with optional hard-boundary wrappers."""

    def __init__(self, arch: Architecture, params: dict):
        self.arch = arch
        self.params = params

    @property
    def n_outputs(self) -> int:
        return self.arch.n_outputs

    def jet(self, t, x) -> Jet2:
        t = np.asarray(t, dtype=float).reshape(-1)
        x = np.asarray(x, dtype=float).reshape(t.size, -1)
        with np.errstate(over="raise", invalid="raise"):
            try:
                jet = network_taylor(self.arch, self.params, t, x).to_jet2()
            except FloatingPointError as exc:
                raise EvaluationError(str(exc)) from exc
        return jet.check_finite()

    def value(self, t, x) -> np.ndarray:
        return self.jet(t, x).value

    def with_params(self, params: dict) -> "NetworkSurrogate":
        return NetworkSurrogate(self.arch, params)


# analytic surrogates ----------------------------------------------------


class AnalyticSurrogate:
    """Surrogate whose jets come from a closed-form function."""

    def __init__(self, jet_fn: JetFn, n_outputs: int, name: str = ""):
        self._jet_fn = jet_fn
        self.n_outputs = n_outputs
        self.name = name

    def jet(self, t, x) -> Jet2:
        t = np.asarray(t, dtype=float).reshape(-1)
        x = np.asarray(x, dtype=float).reshape(t.size, -1)
        return self._jet_fn(t, x).check_finite()

    def value(self, t, x) -> np.ndarray:
        return self.jet(t, x).value


def exact_surrogate(problem) -> AnalyticSurrogate:
    return AnalyticSurrogate(problem.exact_jet, problem.n_outputs, name=f"{problem.name}:exact")


def analytic_perturbed(problem, mode: JetFn, delta: float) -> AnalyticSurrogate:
    """Manufactured oracle ``u + delta * mode`` with exact jets.

    ``mode`` may be a callable ``(t, x) -> Jet2`` or the name of one of the
    problem's cataloged perturbation modes.
    """
    name = mode if isinstance(mode, str) else getattr(mode, "__name__", "mode")
    mode_fn = problem.modes[mode] if isinstance(mode, str) else mode

    def jet_fn(t, x):
        return problem.exact_jet(t, x) + mode_fn(t, x).scaled(delta)

    return AnalyticSurrogate(jet_fn, problem.n_outputs, name=f"{problem.name}:{name}:{delta:g}")


# parameter files ----------------------------------------------------------

PARAM_FORMAT = "pinncert-params"


def flatten_params(params, prefix: str = "") -> list[tuple[str, np.ndarray]]:
    """Depth-first (name, array) records; dict keys sorted, list order kept."""
    out = []
    if isinstance(params, dict):
        for k in sorted(params):
            out += flatten_params(params[k], f"{prefix}{k}.")
    elif isinstance(params, (list, tuple)):
        for i, v in enumerate(params):
            out += flatten_params(v, f"{prefix}{i}.")
    else:
        out.append((prefix[:-1], np.asarray(params, dtype=float)))
    return out


def unflatten_params(template, arrays: list[np.ndarray]):
    it = iter(arrays)

    def build(node):
        if isinstance(node, dict):
            return {k: build(node[k]) for k in sorted(node)}
        if isinstance(node, (list, tuple)):
            return [build(v) for v in node]
        a = next(it)
        if a.shape != np.shape(node):
            raise ValueError(f"parameter shape {a.shape} does not match expected {np.shape(node)}")
        return a

    return build(template)


def params_vector(params) -> np.ndarray:
    return np.concatenate([a.ravel() for _, a in flatten_params(params)])


def save_params(path, params, meta: dict) -> None:
    """Write parameters as JSON: metadata plus named, shaped, row-major tensors."""
    records = [{"name": n, "shape": list(a.shape), "data": [float(v) for v in a.ravel(order="C")]} for n, a in flatten_params(params)]
    doc = {"format": PARAM_FORMAT, "version": 1, "meta": meta, "tensors": records}
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def load_params(path, template) -> tuple[dict, dict]:
    """Read a parameter file written by :func:`save_params` into ``template``'s structure."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format") != PARAM_FORMAT:
        raise ValueError(f"{path}: not a {PARAM_FORMAT} file")
    arrays = [np.asarray(r["data"], dtype=float).reshape(r["shape"]) for r in doc["tensors"]]
    names = [n for n, _ in flatten_params(template)]
    if names != [r["name"] for r in doc["tensors"]]:
        raise ValueError(f"{path}: tensor layout does not match the architecture")
    return unflatten_params(template, arrays), doc.get("meta", {})


def read_param_meta(path) -> dict:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format") != PARAM_FORMAT:
        raise ValueError(f"{path}: not a {PARAM_FORMAT} file")
    return doc.get("meta", {})
