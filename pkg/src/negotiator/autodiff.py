"""Reverse-mode automatic differentiation over dense float64 arrays.

A ``Tensor`` wraps a numpy array and remembers how it was produced; calling
``backward`` on a scalar walks the tape in reverse topological order and
accumulates gradients into leaf tensors.  ``ParamStore`` holds named trainable
leaves plus their gradient accumulators and handles text checkpoints.
"""

from __future__ import annotations

import math
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

CKPT_MAGIC = "NEGOTIATOR-CKPT v1"


class Tensor:
    __slots__ = ("value", "grad", "_parents", "_backward_fn")

    def __init__(
        self,
        value,
        parents: tuple = (),
        backward_fn: Optional[Callable[[np.ndarray], None]] = None,
    ):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad: Optional[np.ndarray] = None
        self._parents = parents
        self._backward_fn = backward_fn

    @property
    def shape(self) -> tuple:
        return self.value.shape

    def __repr__(self) -> str:
        return f"Tensor(shape={self.value.shape})"

    # Operator sugar for the common cases.
    def __add__(self, other):
        return add(self, other if isinstance(other, Tensor) else Tensor(other))

    def __mul__(self, other):
        return mul(self, other if isinstance(other, Tensor) else Tensor(other))

    def __neg__(self):
        return scale(self, -1.0)

    def __sub__(self, other):
        return add(self, -(other if isinstance(other, Tensor) else Tensor(other)))


def _accum(t: Tensor, g: np.ndarray) -> None:
    if t.grad is None:
        t.grad = np.array(g, dtype=np.float64, copy=True)
    else:
        t.grad += g


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce a broadcast gradient back to the original operand shape."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def add(a: Tensor, b: Tensor) -> Tensor:
    out_val = a.value + b.value

    def bw(g):
        _accum(a, _unbroadcast(g, a.value.shape))
        _accum(b, _unbroadcast(g, b.value.shape))

    return Tensor(out_val, (a, b), bw)


def mul(a: Tensor, b: Tensor) -> Tensor:
    out_val = a.value * b.value

    def bw(g):
        _accum(a, _unbroadcast(g * b.value, a.value.shape))
        _accum(b, _unbroadcast(g * a.value, b.value.shape))

    return Tensor(out_val, (a, b), bw)


def scale(a: Tensor, c: float) -> Tensor:
    def bw(g):
        _accum(a, g * c)

    return Tensor(a.value * c, (a,), bw)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product for 1-D/2-D operands with standard numpy semantics."""
    av, bv = a.value, b.value
    if av.ndim not in (1, 2) or bv.ndim not in (1, 2):
        raise ValueError(f"matmul supports 1-D/2-D operands, got {av.ndim}-D and {bv.ndim}-D")
    a2 = av if av.ndim == 2 else av[None, :]
    b2 = bv if bv.ndim == 2 else bv[:, None]
    if a2.shape[1] != b2.shape[0]:
        raise ValueError(f"matmul shape mismatch: {av.shape} @ {bv.shape}")
    out2 = a2 @ b2
    out_val = out2
    if av.ndim == 1:
        out_val = out_val[0]
    if bv.ndim == 1:
        out_val = out_val[..., 0] if av.ndim == 1 else out_val[:, 0]

    def bw(g):
        g2 = np.asarray(g, dtype=np.float64).reshape(a2.shape[0], b2.shape[1])
        ga = g2 @ b2.T
        gb = a2.T @ g2
        _accum(a, ga if av.ndim == 2 else ga[0])
        _accum(b, gb if bv.ndim == 2 else gb[:, 0])

    return Tensor(out_val, (a, b), bw)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    vals = [t.value for t in tensors]
    out_val = np.concatenate(vals, axis=axis)
    sizes = [v.shape[axis] for v in vals]

    def bw(g):
        start = 0
        for t, size in zip(tensors, sizes):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(start, start + size)
            _accum(t, g[tuple(idx)])
            start += size

    return Tensor(out_val, tuple(tensors), bw)


def stack_rows(tensors: Sequence[Tensor]) -> Tensor:
    """Stack equal-length vectors into a matrix, one per row."""
    out_val = np.stack([t.value for t in tensors], axis=0)

    def bw(g):
        for i, t in enumerate(tensors):
            _accum(t, g[i])

    return Tensor(out_val, tuple(tensors), bw)


def slice_axis(a: Tensor, start: int, stop: int, axis: int = 0) -> Tensor:
    idx = [slice(None)] * a.value.ndim
    idx[axis] = slice(start, stop)
    idx = tuple(idx)
    out_val = a.value[idx]

    def bw(g):
        full = np.zeros_like(a.value)
        full[idx] = g
        _accum(a, full)

    return Tensor(out_val, (a,), bw)


def gather_rows(a: Tensor, ids: Sequence[int]) -> Tensor:
    """Rows of a matrix by index (embedding lookup); scatter-add on backward."""
    ids_arr = np.asarray(ids, dtype=np.intp)
    out_val = a.value[ids_arr]

    def bw(g):
        full = np.zeros_like(a.value)
        np.add.at(full, ids_arr, g)
        _accum(a, full)

    return Tensor(out_val, (a,), bw)


def row(a: Tensor, i: int) -> Tensor:
    out_val = a.value[i]

    def bw(g):
        full = np.zeros_like(a.value)
        full[i] = g
        _accum(a, full)

    return Tensor(out_val, (a,), bw)


def transpose(a: Tensor) -> Tensor:
    if a.value.ndim != 2:
        raise ValueError("transpose expects a 2-D tensor")
    out_val = a.value.T

    def bw(g):
        _accum(a, g.T)

    return Tensor(out_val, (a,), bw)


def sigmoid(a: Tensor) -> Tensor:
    out_val = 1.0 / (1.0 + np.exp(-a.value))

    def bw(g):
        _accum(a, g * out_val * (1.0 - out_val))

    return Tensor(out_val, (a,), bw)


def tanh(a: Tensor) -> Tensor:
    out_val = np.tanh(a.value)

    def bw(g):
        _accum(a, g * (1.0 - out_val * out_val))

    return Tensor(out_val, (a,), bw)


def log(a: Tensor) -> Tensor:
    out_val = np.log(a.value)

    def bw(g):
        _accum(a, g / a.value)

    return Tensor(out_val, (a,), bw)


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    if a.value.shape == () or a.value.shape[axis] == 0:
        raise ValueError("softmax over an empty axis")
    shifted = a.value - a.value.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out_val = e / e.sum(axis=axis, keepdims=True)

    def bw(g):
        dot = (g * out_val).sum(axis=axis, keepdims=True)
        _accum(a, out_val * (g - dot))

    return Tensor(out_val, (a,), bw)


def tsum(a: Tensor) -> Tensor:
    out_val = np.asarray(a.value.sum())

    def bw(g):
        _accum(a, np.broadcast_to(g, a.value.shape))

    return Tensor(out_val, (a,), bw)


def pick(a: Tensor, i: int) -> Tensor:
    """Scalar element of a vector."""
    out_val = np.asarray(a.value[i])

    def bw(g):
        full = np.zeros_like(a.value)
        full[i] = g
        _accum(a, full)

    return Tensor(out_val, (a,), bw)


def nll_rows(logits: Tensor, ids: Sequence[int], weights: Optional[Sequence[float]] = None) -> Tensor:
    """Weighted sum of per-row negative log softmax probabilities.

    Row t contributes ``w_t * (-log softmax(logits[t])[ids[t]])``.  This is the
    workhorse for both the token-prediction loss and the policy-gradient
    surrogate (where the weights are per-token returns).
    """
    ids_arr = np.asarray(ids, dtype=np.intp)
    if logits.value.ndim != 2 or len(ids_arr) != logits.value.shape[0]:
        raise ValueError("nll_rows expects (T, V) logits and T target ids")
    w = np.ones(len(ids_arr)) if weights is None else np.asarray(weights, dtype=np.float64)
    shifted = logits.value - logits.value.max(axis=1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=1))
    logp = shifted[np.arange(len(ids_arr)), ids_arr] - logz
    out_val = np.asarray(-(w * logp).sum())

    def bw(g):
        probs = np.exp(shifted - logz[:, None])
        grad = probs * w[:, None]
        grad[np.arange(len(ids_arr)), ids_arr] -= w
        _accum(logits, g * grad)

    return Tensor(out_val, (logits,), bw)


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(leaf) into every reachable leaf tensor's .grad."""
    if loss.value.shape != ():
        raise ValueError(f"backward requires a scalar loss, got shape {loss.value.shape}")
    topo: list[Tensor] = []
    seen: set[int] = set()
    stack = [(loss, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))
    # Non-leaf grads are transient per call; leaf grads accumulate across calls.
    for node in topo:
        if node._backward_fn is not None:
            node.grad = None
    loss.grad = np.ones(())
    for node in reversed(topo):
        if node._backward_fn is not None and node.grad is not None:
            node._backward_fn(node.grad)


# ---------------------------------------------------------------------------
# Parameter storage
# ---------------------------------------------------------------------------

class ParamStore:
    """Ordered name -> trainable Tensor map with gradient accumulators."""

    def __init__(self):
        self._params: dict[str, Tensor] = {}

    def add(self, name: str, shape: tuple) -> Tensor:
        if name in self._params:
            raise KeyError(f"parameter {name!r} already exists")
        t = Tensor(np.zeros(shape))
        self._params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def items(self) -> Iterable[tuple[str, Tensor]]:
        return self._params.items()

    def names(self) -> list[str]:
        return list(self._params)

    def zero_grad(self) -> None:
        for t in self._params.values():
            t.grad = None

    def grad_of(self, name: str) -> np.ndarray:
        t = self._params[name]
        return np.zeros_like(t.value) if t.grad is None else t.grad

    def global_grad_norm(self) -> float:
        sq = 0.0
        for t in self._params.values():
            if t.grad is not None:
                sq += float((t.grad * t.grad).sum())
        return math.sqrt(sq)

    def checksum(self) -> float:
        """Order-sensitive digest of all parameter values (frozen-model checks)."""
        total = 0.0
        for i, t in enumerate(self._params.values()):
            total += float(np.abs(t.value).sum()) * (1.0 + 1e-3 * i)
        return total


def init_uniform(store: ParamStore, rng: np.random.Generator, half_range: float = 0.1) -> None:
    for _, t in store.items():
        t.value[...] = rng.uniform(-half_range, half_range, size=t.value.shape)


def clip_global_norm(store: ParamStore, c: float) -> float:
    """Scale all gradients jointly so the global L2 norm is at most ``c``."""
    if c <= 0:
        raise ValueError("clip threshold must be positive")
    norm = store.global_grad_norm()
    if norm > c:
        factor = c / norm
        for _, t in store.items():
            if t.grad is not None:
                t.grad *= factor
    return norm


def grad_check(f: Callable[[ParamStore], Tensor], store: ParamStore, eps: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients."""
    store.zero_grad()
    loss = f(store)
    if not np.isfinite(loss.value):
        raise ValueError("non-finite loss in grad_check")
    backward(loss)
    analytic = {name: store.grad_of(name).copy() for name, _ in store.items()}
    max_err = 0.0
    for name, t in store.items():
        flat = t.value.reshape(-1)
        a_flat = analytic[name].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            lo_hi = float(f(store).value)
            flat[i] = orig - eps
            lo_lo = float(f(store).value)
            flat[i] = orig
            numeric = (lo_hi - lo_lo) / (2.0 * eps)
            denom = max(1e-8, abs(a_flat[i]) + abs(numeric))
            max_err = max(max_err, abs(a_flat[i] - numeric) / denom)
    return max_err


# ---------------------------------------------------------------------------
# GRU cell
# ---------------------------------------------------------------------------

GRU_PARAM_NAMES = ("W_z", "U_z", "b_z", "W_r", "U_r", "b_r", "W_h", "U_h", "b_h")


def add_gru_params(store: ParamStore, prefix: str, input_dim: int, hidden_dim: int) -> None:
    for gate in ("z", "r", "h"):
        store.add(f"{prefix}.W_{gate}", (hidden_dim, input_dim))
        store.add(f"{prefix}.U_{gate}", (hidden_dim, hidden_dim))
        store.add(f"{prefix}.b_{gate}", (hidden_dim,))


def gru_cell(params: dict[str, Tensor], h_prev: Tensor, x: Tensor) -> Tensor:
    """Standard GRU update: z and r gates, candidate state, convex blend.

    Fused into a single tape node with a hand-derived backward pass — GRU
    steps dominate every training graph, and building them from ~20 primitive
    nodes each made the tape walk the bottleneck.
    """
    Wz, Uz, bz = params["W_z"], params["U_z"], params["b_z"]
    Wr, Ur, br = params["W_r"], params["U_r"], params["b_r"]
    Wh, Uh, bh = params["W_h"], params["U_h"], params["b_h"]
    hv, xv = h_prev.value, x.value

    def _sig(a):
        return 1.0 / (1.0 + np.exp(-a))

    z = _sig(Wz.value @ xv + Uz.value @ hv + bz.value)
    r = _sig(Wr.value @ xv + Ur.value @ hv + br.value)
    rh = r * hv
    c = np.tanh(Wh.value @ xv + Uh.value @ rh + bh.value)
    out_val = (1.0 - z) * hv + z * c

    def bw(g):
        dh = g * (1.0 - z)
        dc_pre = (g * z) * (1.0 - c * c)
        _accum(Wh, np.outer(dc_pre, xv))
        _accum(Uh, np.outer(dc_pre, rh))
        _accum(bh, dc_pre)
        dx = Wh.value.T @ dc_pre
        drh = Uh.value.T @ dc_pre
        dh += drh * r
        dz_pre = (g * (c - hv)) * z * (1.0 - z)
        _accum(Wz, np.outer(dz_pre, xv))
        _accum(Uz, np.outer(dz_pre, hv))
        _accum(bz, dz_pre)
        dx += Wz.value.T @ dz_pre
        dh += Uz.value.T @ dz_pre
        dr_pre = (drh * hv) * r * (1.0 - r)
        _accum(Wr, np.outer(dr_pre, xv))
        _accum(Ur, np.outer(dr_pre, hv))
        _accum(br, dr_pre)
        dx += Wr.value.T @ dr_pre
        dh += Ur.value.T @ dr_pre
        _accum(x, dx)
        _accum(h_prev, dh)

    parents = (Wz, Uz, bz, Wr, Ur, br, Wh, Uh, bh, h_prev, x)
    return Tensor(out_val, parents, bw)


def gru_params(store: ParamStore, prefix: str) -> dict[str, Tensor]:
    return {name: store[f"{prefix}.{name}"] for name in GRU_PARAM_NAMES}


# ---------------------------------------------------------------------------
# Checkpoint I/O
# ---------------------------------------------------------------------------

def save_checkpoint(
    store: ParamStore, path, vocab_size: int, config_line: Optional[str] = None
) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"{CKPT_MAGIC} vocab={vocab_size}\n")
        if config_line is not None:
            f.write(f"config {config_line}\n")
        for name, t in store.items():
            dims = " ".join(str(d) for d in t.value.shape)
            f.write(f"{name} {t.value.ndim}{' ' + dims if dims else ''}\n")
            f.write(" ".join(f"{v:.17g}" for v in t.value.reshape(-1)) + "\n")


def load_checkpoint(path) -> tuple[ParamStore, int, Optional[str]]:
    """Read a checkpoint; returns (store, vocab size, optional config line)."""
    with open(path, encoding="utf-8") as f:
        header = f.readline().rstrip("\n")
        if not header.startswith(CKPT_MAGIC):
            raise ValueError(f"{path} is not a recognized checkpoint (bad header)")
        vocab_size = int(header.split("vocab=")[1])
        store = ParamStore()
        config_line = None
        line = f.readline()
        if line.startswith("config "):
            config_line = line[len("config "):].rstrip("\n")
            line = f.readline()
        while line:
            parts = line.split()
            name, ndims = parts[0], int(parts[1])
            shape = tuple(int(d) for d in parts[2 : 2 + ndims])
            values = np.array([float(v) for v in f.readline().split()])
            t = store.add(name, shape)
            t.value[...] = values.reshape(shape)
            line = f.readline()
    return store, vocab_size, config_line
