"""Equivariant perceptron stacks with shared coefficients.

Layers never store a free m x n weight matrix: the trainable state is one
coefficient per signed orbit of the equivariant basis, and the matrix is
scattered from those coefficients on demand.  Gradients flow through the
same scatter, so training loops outside this module only ever see the
coefficient vectors.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .basis import EquivBasis, basis_fingerprint, bias_basis, orbit_basis
from .errors import DegenerateBasis, DimMismatch, ParseError
from .groups import FiniteGroup, Representation, tiled_regular_representation

_SELU_ALPHA = 1.6732632423543772848170429916717
_SELU_SCALE = 1.0507009873554804934193349852946


@dataclass(frozen=True)
class Nonlinearity:
    name: str
    fn: Callable[[np.ndarray], np.ndarray]
    deriv: Callable[[np.ndarray], np.ndarray]
    gain: float  # E[sigma(z)^2] for z ~ N(0, 1)
    odd: bool


@lru_cache(maxsize=1)
def _tanh_gain() -> float:
    # E[tanh(z)^2], z ~ N(0,1), by Gauss-Hermite quadrature; regenerated at
    # runtime rather than hardcoded.
    nodes, weights = np.polynomial.hermite.hermgauss(80)
    return float(np.sum(weights * np.tanh(math.sqrt(2.0) * nodes) ** 2) / math.sqrt(math.pi))


def _selu(z: np.ndarray) -> np.ndarray:
    return _SELU_SCALE * np.where(z > 0, z, _SELU_ALPHA * np.expm1(z))


def _selu_deriv(z: np.ndarray) -> np.ndarray:
    return _SELU_SCALE * np.where(z > 0, 1.0, _SELU_ALPHA * np.exp(z))


def get_nonlinearity(name: str) -> Nonlinearity:
    key = name.lower()
    if key == "relu":
        return Nonlinearity("relu", lambda z: np.maximum(z, 0.0), lambda z: (z > 0).astype(float), 0.5, False)
    if key == "selu":
        return Nonlinearity("selu", _selu, _selu_deriv, 1.0, False)
    if key == "tanh":
        return Nonlinearity("tanh", np.tanh, lambda z: 1.0 - np.tanh(z) ** 2, _tanh_gain(), True)
    if key == "identity":
        return Nonlinearity("identity", lambda z: z, lambda z: np.ones_like(z), 1.0, True)
    raise ValueError(f"unknown nonlinearity {name!r}")


def init_variance(basis: EquivBasis, nonlinearity: Nonlinearity, mode: str) -> float:
    """Coefficient variance that keeps activations (fan_in) or gradients
    (fan_out) at constant variance across layers."""
    lam = basis.total_entries
    if lam == 0:
        raise DegenerateBasis("basis has no free orbits; all weights are pinned to zero")
    if mode == "fan_in":
        return basis.m / (lam * nonlinearity.gain)
    if mode == "fan_out":
        return basis.n / (lam * nonlinearity.gain)
    raise ValueError(f"mode must be fan_in or fan_out, got {mode!r}")


def _as_rng(rng_seed) -> np.random.Generator:
    if isinstance(rng_seed, np.random.Generator):
        return rng_seed
    return np.random.default_rng(rng_seed)


def init_coeffs(
    basis: EquivBasis,
    nonlinearity: Nonlinearity,
    mode: str = "fan_in",
    rng_seed=0,
) -> np.ndarray:
    """Sample coefficients i.i.d. from N(0, var) with the mode's variance."""
    rng = _as_rng(rng_seed)
    var = init_variance(basis, nonlinearity, mode)
    return rng.normal(0.0, math.sqrt(var), size=basis.rank)


@lru_cache(maxsize=128)
def _cached_bases(rep_in: Representation, rep_out: Representation) -> tuple[EquivBasis, EquivBasis]:
    return orbit_basis(rep_in, rep_out), bias_basis(rep_out)


def _scatter_arrays(basis: EquivBasis) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    idx, sgn, cid = [], [], []
    for k, orbit in enumerate(basis.orbits):
        for i, s in orbit.entries:
            idx.append(i)
            sgn.append(s)
            cid.append(k)
    return (
        np.asarray(idx, dtype=np.intp),
        np.asarray(sgn, dtype=float),
        np.asarray(cid, dtype=np.intp),
    )


class EquivLayer:
    """One perceptron layer y = sigma(W x + b) with orbit-shared parameters."""

    def __init__(
        self,
        rep_in: Representation,
        rep_out: Representation,
        nonlinearity: Nonlinearity,
        coeffs: np.ndarray | None = None,
        bias_coeffs: np.ndarray | None = None,
        basis: EquivBasis | None = None,
        bias_basis_: EquivBasis | None = None,
    ):
        if basis is None:
            basis, default_bias = _cached_bases(rep_in, rep_out)
            if bias_basis_ is None:
                bias_basis_ = default_bias
        elif bias_basis_ is None:
            bias_basis_ = bias_basis(rep_out)
        if not nonlinearity.odd and not rep_out.is_unsigned:
            raise ValueError(
                f"nonlinearity {nonlinearity.name!r} is not odd and does not commute "
                "with a signed output representation"
            )
        self.rep_in = rep_in
        self.rep_out = rep_out
        self.nonlinearity = nonlinearity
        self.basis = basis
        self.bias_basis = bias_basis_
        self.coeffs = np.zeros(basis.rank) if coeffs is None else np.asarray(coeffs, dtype=float)
        self.bias_coeffs = (
            np.zeros(bias_basis_.rank) if bias_coeffs is None else np.asarray(bias_coeffs, dtype=float)
        )
        if self.coeffs.shape != (basis.rank,):
            raise DimMismatch(f"expected {basis.rank} coefficients, got {self.coeffs.shape}")
        if self.bias_coeffs.shape != (bias_basis_.rank,):
            raise DimMismatch(
                f"expected {bias_basis_.rank} bias coefficients, got {self.bias_coeffs.shape}"
            )
        self._w_idx, self._w_sgn, self._w_cid = _scatter_arrays(basis)
        self._b_idx, self._b_sgn, self._b_cid = _scatter_arrays(bias_basis_)

    @property
    def m(self) -> int:
        return self.rep_out.dim

    @property
    def n(self) -> int:
        return self.rep_in.dim

    @property
    def num_parameters(self) -> int:
        return self.basis.rank + self.bias_basis.rank

    def weight(self) -> np.ndarray:
        flat = np.zeros(self.m * self.n)
        flat[self._w_idx] = self._w_sgn * self.coeffs[self._w_cid]
        return flat.reshape(self.m, self.n)

    def bias(self) -> np.ndarray:
        b = np.zeros(self.m)
        b[self._b_idx] = self._b_sgn * self.bias_coeffs[self._b_cid]
        return b

    def coeff_grads(self, dw: np.ndarray, db: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Contract dense weight/bias gradients onto the shared coefficients."""
        dbeta = np.bincount(
            self._w_cid, weights=self._w_sgn * dw.ravel()[self._w_idx], minlength=self.basis.rank
        )
        dbias = np.bincount(
            self._b_cid, weights=self._b_sgn * db[self._b_idx], minlength=self.bias_basis.rank
        )
        return dbeta, dbias


class EquivNet:
    """Stack of EquivLayers with matching interface representations."""

    def __init__(self, layers: Sequence[EquivLayer]):
        if not layers:
            raise ValueError("network needs at least one layer")
        for a, b in zip(layers, layers[1:]):
            if a.rep_out != b.rep_in:
                raise DimMismatch(
                    f"layer boundary mismatch: {a.rep_out.dim} -> {b.rep_in.dim} "
                    "(adjacent layers must share the intermediate representation)"
                )
        self.layers = list(layers)

    @property
    def rep_in(self) -> Representation:
        return self.layers[0].rep_in

    @property
    def rep_out(self) -> Representation:
        return self.layers[-1].rep_out

    @property
    def input_dim(self) -> int:
        return self.rep_in.dim

    @property
    def output_dim(self) -> int:
        return self.rep_out.dim

    @property
    def num_parameters(self) -> int:
        return sum(layer.num_parameters for layer in self.layers)


@dataclass
class LayerActivation:
    x_in: np.ndarray  # (batch, n)
    z: np.ndarray  # (batch, m), pre-nonlinearity


def forward(net: EquivNet, x: np.ndarray) -> tuple[np.ndarray, list[LayerActivation]]:
    """Evaluate the net; keeps per-layer activations for the backward pass.

    ``x`` may be a single vector or a (batch, dim) array; the output matches.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    h = x[None, :] if single else x
    if h.shape[1] != net.input_dim:
        raise DimMismatch(f"input width {h.shape[1]}, network expects {net.input_dim}")
    acts: list[LayerActivation] = []
    for layer in net.layers:
        z = h @ layer.weight().T + layer.bias()
        acts.append(LayerActivation(h, z))
        h = layer.nonlinearity.fn(z)
    return (h[0] if single else h), acts


@dataclass
class LayerGrads:
    coeffs: np.ndarray
    bias_coeffs: np.ndarray


def grad_coeffs(net: EquivNet, x: np.ndarray, loss_grad_y: np.ndarray) -> list[LayerGrads]:
    """Backpropagate dL/dy onto every layer's shared coefficients.

    The gradient of a coefficient aggregates the per-entry weight gradients
    over its orbit with the orbit's signs.  Batched inputs sum over the
    batch.
    """
    y, acts = forward(net, x)
    g = np.asarray(loss_grad_y, dtype=float)
    if g.shape != y.shape:
        raise DimMismatch(f"loss gradient shape {g.shape} does not match output {y.shape}")
    g = g[None, :] if g.ndim == 1 else g
    reversed_grads: list[LayerGrads] = []
    for li in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[li]
        a = acts[li]
        delta = g * layer.nonlinearity.deriv(a.z)
        dw = delta.T @ a.x_in
        db = delta.sum(axis=0)
        dbeta, dbias = layer.coeff_grads(dw, db)
        reversed_grads.append(LayerGrads(dbeta, dbias))
        if li > 0:
            g = delta @ layer.weight()
    return reversed_grads[::-1]


@dataclass
class EquivarianceReport:
    passed: bool
    max_violation: float
    worst_element: int
    worst_sample: int
    tol: float

    def __str__(self) -> str:
        status = "pass" if self.passed else "FAIL"
        return (
            f"{status}: max violation {self.max_violation:.3e} (tol {self.tol:.1e}) "
            f"at element {self.worst_element}, sample {self.worst_sample}"
        )


def check_equivariance(
    net: EquivNet, samples: int = 32, tol: float = 1e-10, rng_seed=0
) -> EquivarianceReport:
    """Compare rho_out(g) f(x) against f(rho_in(g) x) on random inputs."""
    rng = _as_rng(rng_seed)
    group = net.rep_in.group
    x = rng.standard_normal((samples, net.input_dim))
    y, _ = forward(net, x)
    worst, wg, ws = 0.0, 0, 0
    for g in group.elements():
        gx = net.rep_in.matrices[g].apply(x)
        y_gx, _ = forward(net, gx)
        gy = net.rep_out.matrices[g].apply(y)
        viol = np.abs(y_gx - gy).max(axis=1)
        s = int(viol.argmax())
        if viol[s] > worst:
            worst, wg, ws = float(viol[s]), g, s
    return EquivarianceReport(worst <= tol, worst, wg, ws, tol)


def build_mlp(
    rep_in: Representation,
    rep_out: Representation,
    hidden_widths: Sequence[int],
    nonlinearity: Nonlinearity,
    init_mode: str = "fan_in",
    rng_seed=0,
) -> EquivNet:
    """Equivariant MLP with regular-representation hidden layers.

    Hidden widths must be multiples of the group order; the final layer is
    linear (identity nonlinearity) so signed output representations are
    always safe.
    """
    rng = _as_rng(rng_seed)
    group = rep_in.group
    reps = [rep_in] + [tiled_regular_representation(group, w) for w in hidden_widths] + [rep_out]
    sigmas = [nonlinearity] * len(hidden_widths) + [get_nonlinearity("identity")]
    layers = []
    for r_in, r_out, sigma in zip(reps, reps[1:], sigmas):
        layer = EquivLayer(r_in, r_out, sigma)
        layer.coeffs = init_coeffs(layer.basis, sigma, init_mode, rng)
        layers.append(layer)
    return EquivNet(layers)


def activation_variance_profile(
    depth: int,
    width: int,
    group: FiniteGroup,
    nonlinearity: Nonlinearity,
    init_mode="fan_in",
    batch: int = 256,
    rng_seed=0,
) -> np.ndarray:
    """Std of pre-nonlinearity activations per layer on a standard-normal batch.

    All layers act on the group's regular representation tiled to ``width``.
    ``init_mode`` is ``"fan_in"``, ``"fan_out"``, or a float interpreted as a
    constant coefficient variance (the control case).
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    rng = _as_rng(rng_seed)
    rep = tiled_regular_representation(group, width)
    layers = []
    for _ in range(depth):
        layer = EquivLayer(rep, rep, nonlinearity)
        if isinstance(init_mode, str):
            layer.coeffs = init_coeffs(layer.basis, nonlinearity, init_mode, rng)
        else:
            layer.coeffs = rng.normal(0.0, math.sqrt(float(init_mode)), size=layer.basis.rank)
        layers.append(layer)
    net = EquivNet(layers)
    x = rng.standard_normal((batch, width))
    _, acts = forward(net, x)
    return np.array([float(a.z.std()) for a in acts])


def save_weights(net: EquivNet, path: str) -> None:
    data = {
        "layers": [
            {
                "coeffs": layer.coeffs.tolist(),
                "bias_coeffs": layer.bias_coeffs.tolist(),
                "basis_hash": basis_fingerprint(layer.basis),
                "bias_basis_hash": basis_fingerprint(layer.bias_basis),
            }
            for layer in net.layers
        ]
    }
    with open(path, "w") as f:
        json.dump(data, f)
        f.write("\n")


def load_weights(net: EquivNet, path: str) -> None:
    """Load coefficients into an existing net, checking basis integrity."""
    with open(path) as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: invalid JSON: {exc}") from exc
    entries = data.get("layers")
    if not isinstance(entries, list) or len(entries) != len(net.layers):
        raise ParseError(f"{path}: expected {len(net.layers)} layers")
    for li, (layer, entry) in enumerate(zip(net.layers, entries)):
        if entry.get("basis_hash") != basis_fingerprint(layer.basis):
            raise ParseError(f"{path}: layer {li} basis hash mismatch")
        if entry.get("bias_basis_hash") != basis_fingerprint(layer.bias_basis):
            raise ParseError(f"{path}: layer {li} bias basis hash mismatch")
        coeffs = np.asarray(entry["coeffs"], dtype=float)
        bias_coeffs = np.asarray(entry["bias_coeffs"], dtype=float)
        if coeffs.shape != layer.coeffs.shape or bias_coeffs.shape != layer.bias_coeffs.shape:
            raise ParseError(f"{path}: layer {li} coefficient count mismatch")
        layer.coeffs = coeffs
        layer.bias_coeffs = bias_coeffs
