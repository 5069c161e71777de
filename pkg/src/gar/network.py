"""Feed-forward ELU network over a flat parameter vector."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import Node

CHECKPOINT_MAGIC = b"GARM"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class NetworkSpec:
    input_dim: int
    hidden_dims: tuple[int, ...] = ()
    output_dim: int = 1

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        if self.input_dim < 1 or self.output_dim < 1 or any(h < 1 for h in self.hidden_dims):
            raise ValueError(f"layer widths must be positive: {self}")

    @property
    def widths(self) -> tuple[int, ...]:
        return (self.input_dim, *self.hidden_dims, self.output_dim)

    @property
    def layer_shapes(self) -> list[tuple[int, int]]:
        w = self.widths
        return [(w[i], w[i + 1]) for i in range(len(w) - 1)]

    @property
    def n_params(self) -> int:
        return sum((fan_in + 1) * fan_out for fan_in, fan_out in self.layer_shapes)


@dataclass
class ParameterStore:
    """All weights and biases in one fp64 vector, with a matching gradient vector.

    Layer ``k`` occupies ``flat[offsets[k]:offsets[k+1]]``: first the
    ``fan_in x fan_out`` weight matrix (row-major), then the bias.
    """

    spec: NetworkSpec
    flat: np.ndarray
    seed: int = 0
    grad: np.ndarray = field(init=False)
    offsets: list[int] = field(init=False)

    def __post_init__(self):
        self.flat = np.ascontiguousarray(self.flat, dtype=np.float64)
        if self.flat.shape != (self.spec.n_params,):
            raise ValueError(f"expected {self.spec.n_params} parameters, got {self.flat.shape}")
        self.grad = np.zeros_like(self.flat)
        offs = [0]
        for fan_in, fan_out in self.spec.layer_shapes:
            offs.append(offs[-1] + (fan_in + 1) * fan_out)
        self.offsets = offs

    def layer(self, k: int, buf: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Views ``(W, b)`` of layer ``k`` into ``buf`` (default: the parameters)."""
        buf = self.flat if buf is None else buf
        fan_in, fan_out = self.spec.layer_shapes[k]
        start = self.offsets[k]
        mid = start + fan_in * fan_out
        return buf[start:mid].reshape(fan_in, fan_out), buf[mid : self.offsets[k + 1]]

    def zero_grad(self) -> None:
        self.grad[...] = 0.0

    def copy(self) -> "ParameterStore":
        return ParameterStore(self.spec, self.flat.copy(), self.seed)

    def save(self, path) -> None:
        Path(path).write_bytes(to_bytes(self))

    @classmethod
    def load(cls, path) -> "ParameterStore":
        return from_bytes(Path(path).read_bytes())


def init(spec: NetworkSpec, seed: int) -> ParameterStore:
    """Glorot-uniform weights, zero biases, deterministic in ``seed``."""
    rng = np.random.default_rng(seed)
    store = ParameterStore(spec, np.zeros(spec.n_params), seed)
    for k, (fan_in, fan_out) in enumerate(spec.layer_shapes):
        w, _ = store.layer(k)
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        w[...] = rng.uniform(-limit, limit, size=(fan_in, fan_out))
    return store


def forward(params: ParameterStore, x, track_grad: bool = True) -> Node:
    """ELU after each hidden layer, linear output.  Returns an ``N x T`` node.

    With ``track_grad`` the weight leaves accumulate straight into
    ``params.grad`` when the loss is backpropagated.
    """
    spec = params.spec
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    if x.ndim != 2 or x.shape[1] != spec.input_dim:
        raise ValueError(f"input has shape {x.shape}, network expects (N, {spec.input_dim})")
    h: Node = ad.constant(x)
    n_layers = len(spec.layer_shapes)
    for k in range(n_layers):
        w, b = params.layer(k)
        if track_grad:
            gw, gb = params.layer(k, params.grad)
            w_node, b_node = ad.variable(w, grad=gw), ad.variable(b, grad=gb)
        else:
            w_node, b_node = ad.constant(w), ad.constant(b)
        h = ad.affine(h, w_node, b_node)
        if k < n_layers - 1:
            h = ad.elu(h)
    return h


def predict(params: ParameterStore, x) -> np.ndarray:
    return forward(params, x, track_grad=False).value


def gradient_alignment_probe(params: ParameterStore, x0: float, h: float) -> float:
    """Central finite-difference slope of a scalar-in, scalar-out model at ``x0``."""
    if params.spec.input_dim != 1 or params.spec.output_dim != 1:
        raise ValueError("the slope probe needs a 1-input, 1-output network")
    if not h > 0:
        raise ValueError("step h must be positive")
    out = predict(params, np.array([[x0 + h], [x0 - h]]))
    return float((out[0, 0] - out[1, 0]) / (2.0 * h))


# checkpoint layout (little-endian):
#   magic[4] version:u8 input_dim:u32 output_dim:u32 n_hidden:u32 hidden:u32*n
#   seed:u64 n_params:u64 params:f64*n_params


def to_bytes(params: ParameterStore) -> bytes:
    spec = params.spec
    head = CHECKPOINT_MAGIC + struct.pack("<BIII", CHECKPOINT_VERSION, spec.input_dim, spec.output_dim, len(spec.hidden_dims))
    head += struct.pack(f"<{len(spec.hidden_dims)}I", *spec.hidden_dims)
    head += struct.pack("<QQ", params.seed, spec.n_params)
    return head + params.flat.astype("<f8").tobytes()


def from_bytes(blob: bytes) -> ParameterStore:
    if blob[:4] != CHECKPOINT_MAGIC:
        raise ValueError("not a model checkpoint (bad magic)")
    pos = 4
    version, d_in, d_out, n_hidden = struct.unpack_from("<BIII", blob, pos)
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    pos += struct.calcsize("<BIII")
    hidden = struct.unpack_from(f"<{n_hidden}I", blob, pos)
    pos += 4 * n_hidden
    seed, n = struct.unpack_from("<QQ", blob, pos)
    pos += 16
    spec = NetworkSpec(d_in, hidden, d_out)
    if n != spec.n_params or len(blob) - pos != 8 * n:
        raise ValueError("checkpoint is truncated or inconsistent with its header")
    flat = np.frombuffer(blob, dtype="<f8", count=n, offset=pos).astype(np.float64)
    return ParameterStore(spec, flat, seed)
