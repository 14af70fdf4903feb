"""Small numpy network stack for the Q-function.

Convolutions run channels-last via im2col. The first convolution pads each
input channel with its own constant (the no-fly channel with 1.0 so the grid
exterior looks like a no-fly wall); deeper convolutions zero-pad. All
convolutions keep the spatial shape. The flattened feature map is joined with
the scalar budget input and fed through ReLU dense layers to a linear output
layer with one unit per action.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

CKPT_MAGIC = "GRIDCOVER-CKPT v1"


class NonFiniteError(FloatingPointError):
    pass


class CheckpointError(ValueError):
    pass


class ArchMismatchError(CheckpointError):
    pass


@dataclass(frozen=True)
class NetworkArch:
    size: int
    conv_layers: tuple = ((16, 5), (16, 3), (16, 3))
    dense_layers: tuple = (256, 256)
    in_channels: int = 5
    n_actions: int = 5
    # start/land, target, no-fly, coverage, position
    pad_values: tuple = (0.0, 0.0, 1.0, 0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "conv_layers", tuple(tuple(int(v) for v in l) for l in self.conv_layers))
        object.__setattr__(self, "dense_layers", tuple(int(w) for w in self.dense_layers))
        object.__setattr__(self, "pad_values", tuple(float(p) for p in self.pad_values))
        if len(self.pad_values) != self.in_channels:
            raise ValueError("pad_values needs one entry per input channel")
        for filters, k in self.conv_layers:
            if k % 2 == 0 or k < 1 or filters < 1:
                raise ValueError(f"conv layer ({filters}, {k}): kernel must be odd and positive")

    def param_shapes(self) -> dict[str, tuple]:
        shapes = {}
        c_in = self.in_channels
        for i, (filters, k) in enumerate(self.conv_layers):
            shapes[f"conv{i}.w"] = (k, k, c_in, filters)
            shapes[f"conv{i}.b"] = (filters,)
            c_in = filters
        width = self.size * self.size * c_in + 1
        for i, w in enumerate(self.dense_layers + (self.n_actions,)):
            shapes[f"dense{i}.w"] = (width, w)
            shapes[f"dense{i}.b"] = (w,)
            width = w
        return shapes

    def n_params(self) -> int:
        return sum(int(np.prod(s)) for s in self.param_shapes().values())

    def to_dict(self) -> dict:
        d = asdict(self)
        d["conv_layers"] = [list(l) for l in self.conv_layers]
        d["dense_layers"] = list(self.dense_layers)
        d["pad_values"] = list(self.pad_values)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkArch":
        return cls(**d)


def _check_finite(arr, what):
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"non-finite values in {what}")


def _pad(x, p, values):
    """Pad the two leading (spatial) axes of (H, W, B, C) by ``p``, one constant per channel."""
    h, w, b, c = x.shape
    out = np.empty((h + 2 * p, w + 2 * p, b, c), dtype=x.dtype)
    if p:
        out[...] = np.asarray(values, dtype=x.dtype)
    out[p:p + h, p:p + w] = x
    return out


# Convolutions work on (H, W, B, C) arrays: a shifted window xp[di:di+n, dj:dj+n]
# is then a zero-copy (n, n*B, C) view and each kernel offset is one batched matmul.

def _conv_forward(xp, w, bias, n):
    k, _, c, f = w.shape
    b = xp.shape[2]
    z = np.empty((n, n * b, f), dtype=xp.dtype)
    z[...] = bias
    for di in range(k):
        for dj in range(k):
            z += xp[di:di + n, dj:dj + n].reshape(n, n * b, c) @ w[di, dj]
    return z.reshape(n, n, b, f)


def _conv_backward(xp, w, dz, need_input_grad):
    """Gradients of a same-padded convolution given dL/dz with shape (n, n, B, F)."""
    k, _, c, f = w.shape
    n, _, b, _ = dz.shape
    dz3 = dz.reshape(n, n * b, f)
    dw = np.empty_like(w)
    dxp = np.zeros_like(xp) if need_input_grad else None
    for di in range(k):
        for dj in range(k):
            view = xp[di:di + n, dj:dj + n].reshape(n, n * b, c)
            dw[di, dj] = (view.transpose(0, 2, 1) @ dz3).sum(axis=0)
            if need_input_grad:
                dxp[di:di + n, dj:dj + n] += (dz3 @ w[di, dj].T).reshape(n, n, b, c)
    db = dz3.sum(axis=(0, 1))
    return dw, db, dxp


@dataclass
class _Cache:
    conv_in: list = field(default_factory=list)
    conv_out: list = field(default_factory=list)
    dense_in: list = field(default_factory=list)
    dense_out: list = field(default_factory=list)
    shape: tuple = ()


class QNetwork:
    """Q-value network; parameters live in ``self.params`` keyed by layer name."""

    def __init__(self, arch: NetworkArch, params: dict | None = None, dtype=np.float32,
                 meta: dict | None = None):
        self.arch = arch
        self.dtype = np.dtype(dtype)
        # free-form JSON-serialisable metadata stored in checkpoints (e.g. budget_norm)
        self.meta = dict(meta or {})
        shapes = arch.param_shapes()
        if params is None:
            params = {name: np.zeros(shape, dtype=self.dtype) for name, shape in shapes.items()}
        else:
            params = {name: np.array(v, dtype=self.dtype) for name, v in params.items()}
        if set(params) != set(shapes):
            raise ValueError("parameter names do not match architecture")
        for name, shape in shapes.items():
            if params[name].shape != tuple(shape):
                raise ValueError(f"{name}: shape {params[name].shape} != {tuple(shape)}")
        self.params = params

    @classmethod
    def initialize(cls, arch: NetworkArch, rng: np.random.Generator, dtype=np.float32) -> "QNetwork":
        """Uniform fan-in initialisation, bound 1/sqrt(fan_in) for weights and biases."""
        params = {}
        shapes = arch.param_shapes()
        for name, shape in shapes.items():
            layer = name.split(".")[0]
            wshape = shapes[layer + ".w"]
            fan_in = int(np.prod(wshape[:-1]))
            bound = 1.0 / np.sqrt(fan_in)
            params[name] = rng.uniform(-bound, bound, size=shape).astype(dtype)
        return cls(arch, params, dtype=dtype)

    def copy(self) -> "QNetwork":
        return QNetwork(self.arch, {k: v.copy() for k, v in self.params.items()}, dtype=self.dtype,
                        meta=self.meta)

    # ------------------------------------------------------------------ forward

    def _prepare(self, spatial, budget):
        spatial = np.asarray(spatial, dtype=self.dtype)
        if spatial.ndim == 3:
            spatial = spatial[None]
        budget = np.asarray(budget, dtype=self.dtype).reshape(-1)
        n = self.arch.size
        if spatial.shape[1:] != (n, n, self.arch.in_channels):
            raise ValueError(
                f"observation shape {spatial.shape[1:]} does not match network input "
                f"{(n, n, self.arch.in_channels)}")
        if budget.shape[0] != spatial.shape[0]:
            raise ValueError("budget batch size differs from spatial batch size")
        return spatial, budget

    def forward(self, spatial, budget, cache: _Cache | None = None) -> np.ndarray:
        """Q-values for a batch: spatial (B, N, N, C), budget (B,) -> (B, n_actions)."""
        x, budget = self._prepare(spatial, budget)
        p = self.params
        bsz, n = x.shape[0], self.arch.size
        x = x.transpose(1, 2, 0, 3)
        for i, (filters, k) in enumerate(self.arch.conv_layers):
            values = self.arch.pad_values if i == 0 else 0.0
            xp = _pad(x, k // 2, values)
            x = np.maximum(_conv_forward(xp, p[f"conv{i}.w"], p[f"conv{i}.b"], n), 0)
            if cache is not None:
                cache.conv_in.append(xp)
                cache.conv_out.append(x)
        flat = x.transpose(2, 0, 1, 3).reshape(bsz, -1)
        h = np.concatenate([flat, budget[:, None]], axis=1)
        n_dense = len(self.arch.dense_layers) + 1
        for i in range(n_dense):
            if cache is not None:
                cache.dense_in.append(h)
            h = h @ p[f"dense{i}.w"] + p[f"dense{i}.b"]
            if i < n_dense - 1:
                h = np.maximum(h, 0)
            if cache is not None:
                cache.dense_out.append(h)
        _check_finite(h, "network output")
        return h

    def q_values(self, obs) -> np.ndarray:
        """Q-values of a single observation as a length-``n_actions`` vector."""
        return self.forward(obs.spatial, obs.budget_scalar)[0]

    # ----------------------------------------------------------------- backward

    def loss_and_grads(self, spatial, budget, actions, targets):
        """Batch-mean squared TD error on the taken actions and its gradient.

        ``targets`` are treated as constants.
        """
        targets = np.asarray(targets, dtype=self.dtype).reshape(-1)
        actions = np.asarray(actions, dtype=np.int64).reshape(-1)
        _check_finite(targets, "targets")
        cache = _Cache()
        q = self.forward(spatial, budget, cache)
        bsz = q.shape[0]
        if bsz == 0:
            raise ValueError("empty batch")
        rows = np.arange(bsz)
        diff = q[rows, actions] - targets
        loss = float(np.mean(diff.astype(np.float64) ** 2))
        dq = np.zeros_like(q)
        dq[rows, actions] = (2.0 / bsz) * diff
        grads = self._backward(dq, cache)
        for name, g in grads.items():
            _check_finite(g, f"gradient {name}")
        return loss, grads

    def _backward(self, dout, cache: _Cache) -> dict:
        p = self.params
        grads = {}
        n_dense = len(self.arch.dense_layers) + 1
        g = dout
        for i in reversed(range(n_dense)):
            if i < n_dense - 1:
                g = g * (cache.dense_out[i] > 0)
            grads[f"dense{i}.w"] = cache.dense_in[i].T @ g
            grads[f"dense{i}.b"] = g.sum(axis=0)
            g = g @ p[f"dense{i}.w"].T
        n = self.arch.size
        bsz = g.shape[0]
        last_filters = self.arch.conv_layers[-1][0]
        # drop the budget column, back to (H, W, B, F)
        g = g[:, :-1].reshape(bsz, n, n, last_filters).transpose(1, 2, 0, 3)
        for i in reversed(range(len(self.arch.conv_layers))):
            k = self.arch.conv_layers[i][1]
            g = g * (cache.conv_out[i] > 0)
            dw, db, dxp = _conv_backward(cache.conv_in[i], p[f"conv{i}.w"], g, need_input_grad=i > 0)
            grads[f"conv{i}.w"] = dw
            grads[f"conv{i}.b"] = db
            if i > 0:
                pad = k // 2
                g = dxp[pad:pad + n, pad:pad + n]
        return grads


def forward(net: QNetwork, obs) -> np.ndarray:
    return net.q_values(obs)


def mse_loss(pred, target) -> float:
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError("pred and target lengths differ")
    return float(np.mean((pred - target) ** 2))


def backward(net: QNetwork, spatial, budget, actions, targets) -> dict:
    return net.loss_and_grads(spatial, budget, actions, targets)[1]


class Adam:
    def __init__(self, lr=1e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m: dict = {}
        self.v: dict = {}

    def step(self, params: dict, grads: dict) -> None:
        """Apply one bias-corrected Adam update to ``params`` in place."""
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        corr1 = 1.0 - b1 ** self.t
        corr2 = 1.0 - b2 ** self.t
        for name, g in grads.items():
            theta = params[name]
            if name not in self.m:
                self.m[name] = np.zeros_like(theta)
                self.v[name] = np.zeros_like(theta)
            m, v = self.m[name], self.v[name]
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            theta -= (self.lr * (m / corr1) / (np.sqrt(v / corr2) + self.eps)).astype(theta.dtype)


def adam_step(params: dict, grads: dict, state: Adam) -> None:
    state.step(params, grads)


def soft_update(target: QNetwork, online: QNetwork, tau: float) -> None:
    """target <- (1 - tau) * target + tau * online, in place."""
    if not 0.0 <= tau <= 1.0:
        raise ValueError("tau must lie in [0, 1]")
    for name, theta in online.params.items():
        tbar = target.params[name]
        if tbar.shape != theta.shape:
            raise ValueError(f"shape mismatch for {name}")
        if tau == 1.0:
            tbar[...] = theta
        elif tau != 0.0:
            tbar *= (1.0 - tau)
            tbar += tau * theta


# ---------------------------------------------------------------- checkpoints

def save_checkpoint(net: QNetwork, path) -> None:
    dtype = np.dtype(net.dtype).newbyteorder("<")
    entries, chunks, offset = [], [], 0
    for name, shape in net.arch.param_shapes().items():
        data = np.ascontiguousarray(net.params[name], dtype=dtype).tobytes()
        entries.append({"name": name, "shape": list(shape), "offset": offset, "nbytes": len(data)})
        chunks.append(data)
        offset += len(data)
    manifest = {
        "arch": net.arch.to_dict(),
        "size": net.arch.size,
        "dtype": dtype.str,
        "params": entries,
        "data_bytes": offset,
        "meta": net.meta,
    }
    blob = (CKPT_MAGIC + "\n" + json.dumps(manifest, sort_keys=True) + "\n").encode("utf-8")
    Path(path).write_bytes(blob + b"".join(chunks))


def load_checkpoint(path, expected_arch: NetworkArch | None = None,
                    expected_size: int | None = None) -> QNetwork:
    raw = Path(path).read_bytes()
    first = raw.find(b"\n")
    if first < 0 or raw[:first].decode("utf-8", "replace") != CKPT_MAGIC:
        raise CheckpointError(f"{path}: not a gridcover checkpoint")
    second = raw.find(b"\n", first + 1)
    if second < 0:
        raise CheckpointError(f"{path}: truncated manifest")
    try:
        manifest = json.loads(raw[first + 1:second].decode("utf-8"))
        arch = NetworkArch.from_dict(manifest["arch"])
        dtype = np.dtype(manifest["dtype"])
        entries = manifest["params"]
        data_bytes = int(manifest["data_bytes"])
        meta = dict(manifest.get("meta", {}))
    except (ValueError, KeyError, TypeError) as exc:
        raise CheckpointError(f"{path}: corrupt manifest ({exc})") from None
    data = raw[second + 1:]
    if len(data) != data_bytes:
        raise CheckpointError(f"{path}: expected {data_bytes} data bytes, found {len(data)}")
    shapes = arch.param_shapes()
    params = {}
    for e in entries:
        name = e["name"]
        if name not in shapes or tuple(e["shape"]) != tuple(shapes[name]):
            raise CheckpointError(f"{path}: parameter {name} inconsistent with stored arch")
        if e["offset"] + e["nbytes"] > len(data):
            raise CheckpointError(f"{path}: parameter {name} runs past end of file")
        chunk = data[e["offset"]:e["offset"] + e["nbytes"]]
        params[name] = np.frombuffer(chunk, dtype=dtype).reshape(e["shape"]).astype(dtype.newbyteorder("="))
    if set(params) != set(shapes):
        raise CheckpointError(f"{path}: parameter list incomplete")
    if expected_size is not None and arch.size != expected_size:
        raise ArchMismatchError(
            f"checkpoint was trained on a {arch.size}x{arch.size} grid, map is {expected_size}x{expected_size}")
    if expected_arch is not None and arch != expected_arch:
        raise ArchMismatchError(f"checkpoint architecture {arch} differs from expected {expected_arch}")
    return QNetwork(arch, params, dtype=dtype.newbyteorder("="), meta=meta)
