"""Minimal dense feedforward networks with exact reverse-mode gradients.

Everything downstream (thermal model, classifier, control policy) is built
from one network type: fully connected layers, rectified-linear hidden
activations, and an optional logistic squash on the output so values stay
strictly inside (0, 1).  Weights are plain float64 numpy arrays, gradients
are computed by hand, and training uses Adam.  Networks are treated as
immutable values: an update step returns a new network.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InputShapeError, NumericError

ADAM_LR = 1e-3
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

# Largest double below 1.0; used to keep bounded outputs strictly inside (0,1).
_ONE_BELOW = np.nextafter(1.0, 0.0)
_TINY = np.finfo(np.float64).tiny


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    if a.flags.writeable:  # never freeze a caller's array in place
        a = a.copy()
        a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Mlp:
    """Dense network: weights[k] has shape (dims[k+1], dims[k])."""

    layer_dims: tuple
    weights: tuple
    biases: tuple
    output_bounding: bool = False

    def __post_init__(self):
        dims = tuple(int(d) for d in self.layer_dims)
        if len(dims) < 2 or any(d <= 0 for d in dims):
            raise ConfigError(f"layer_dims must list >=2 positive sizes, got {dims}")
        ws = tuple(_freeze(w) for w in self.weights)
        bs = tuple(_freeze(b) for b in self.biases)
        if len(ws) != len(dims) - 1 or len(bs) != len(dims) - 1:
            raise InputShapeError("one weight matrix and bias vector per layer required")
        for k, (w, b) in enumerate(zip(ws, bs)):
            if w.shape != (dims[k + 1], dims[k]) or b.shape != (dims[k + 1],):
                raise InputShapeError(
                    f"layer {k}: expected W{(dims[k + 1], dims[k])} b({dims[k + 1]},), "
                    f"got W{w.shape} b{b.shape}"
                )
        object.__setattr__(self, "layer_dims", dims)
        object.__setattr__(self, "weights", ws)
        object.__setattr__(self, "biases", bs)

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    @property
    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))


@dataclass
class GradientSet:
    """Per-layer parameter gradients, shape-congruent with an Mlp."""

    weights: tuple
    biases: tuple

    def check_congruent(self, net: Mlp) -> None:
        ok = len(self.weights) == net.n_layers and all(
            gw.shape == w.shape and gb.shape == b.shape
            for gw, gb, w, b in zip(self.weights, self.biases, net.weights, net.biases)
        )
        if not ok:
            raise InputShapeError("gradient shapes do not match network")

    @staticmethod
    def zeros_like(net: Mlp) -> "GradientSet":
        return GradientSet(
            weights=tuple(np.zeros_like(w) for w in net.weights),
            biases=tuple(np.zeros_like(b) for b in net.biases),
        )

    def add_(self, other: "GradientSet") -> "GradientSet":
        for gw, ow in zip(self.weights, other.weights):
            gw += ow
        for gb, ob in zip(self.biases, other.biases):
            gb += ob
        return self


def init_mlp(dims, seed) -> Mlp:
    """Glorot-uniform initialized network, deterministic in ``seed``.

    Weight entries are uniform in +-sqrt(6 / (fan_in + fan_out)); biases
    start at zero.
    """
    dims = tuple(int(d) for d in dims)
    if len(dims) < 2 or any(d <= 0 for d in dims):
        raise ConfigError(f"need >=2 positive layer sizes, got {dims}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return Mlp(dims, tuple(weights), tuple(biases))


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return np.clip(out, _TINY, _ONE_BELOW)


def forward_batch(net: Mlp, x: np.ndarray, want_cache: bool = False):
    """Evaluate the network on a batch of rows.

    x has shape (B, dims[0]); the result has shape (B, dims[-1]).  With
    ``want_cache`` the per-layer activations needed by ``backward_batch``
    are returned as well.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != net.layer_dims[0]:
        raise InputShapeError(
            f"expected input shape (B, {net.layer_dims[0]}), got {x.shape}"
        )
    acts = [x]
    a = x
    last = net.n_layers - 1
    for k, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = a @ w.T + b
        if k < last:
            a = np.maximum(z, 0.0)
        elif net.output_bounding:
            a = _sigmoid(z)
        else:
            a = z
        acts.append(a)
    if want_cache:
        return a, acts
    return a


def backward_batch(net: Mlp, acts, upstream: np.ndarray):
    """Reverse pass from cached activations.

    ``upstream`` is d(loss)/d(output), shape (B, dims[-1]).  Returns the
    parameter gradients summed over the batch and d(loss)/d(input) with
    shape (B, dims[0]).
    """
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.shape != acts[-1].shape:
        raise InputShapeError(
            f"upstream shape {upstream.shape} does not match output {acts[-1].shape}"
        )
    if net.output_bounding:
        s = acts[-1]
        dz = upstream * s * (1.0 - s)
    else:
        dz = upstream
    gws, gbs = [], []
    for k in range(net.n_layers - 1, -1, -1):
        gws.append(dz.T @ acts[k])
        gbs.append(dz.sum(axis=0))
        da = dz @ net.weights[k]
        if k > 0:
            dz = da * (acts[k] > 0.0)
    gws.reverse()
    gbs.reverse()
    return GradientSet(tuple(gws), tuple(gbs)), da


def mlp_forward(net: Mlp, x) -> np.ndarray:
    """Single-sample forward pass; x is a vector of length dims[0]."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise InputShapeError(f"expected a 1-d input vector, got shape {x.shape}")
    return forward_batch(net, x[None, :])[0]


def mlp_backward(net: Mlp, x, upstream):
    """Gradients of (output . upstream) w.r.t. parameters and input.

    Returns (GradientSet, dx).
    """
    x = np.asarray(x, dtype=np.float64)
    upstream = np.asarray(upstream, dtype=np.float64)
    if x.ndim != 1 or upstream.ndim != 1:
        raise InputShapeError("x and upstream must be 1-d vectors")
    _, acts = forward_batch(net, x[None, :], want_cache=True)
    grads, dx = backward_batch(net, acts, upstream[None, :])
    return grads, dx[0]


@dataclass
class OptimizerState:
    """Adam accumulators for one network."""

    lr: float = ADAM_LR
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    eps: float = ADAM_EPS
    step: int = 0
    m_w: tuple = field(default_factory=tuple)
    v_w: tuple = field(default_factory=tuple)
    m_b: tuple = field(default_factory=tuple)
    v_b: tuple = field(default_factory=tuple)
    method: str = "adam"

    @staticmethod
    def for_net(net: Mlp, lr: float = ADAM_LR) -> "OptimizerState":
        return OptimizerState(
            lr=lr,
            m_w=tuple(np.zeros_like(w) for w in net.weights),
            v_w=tuple(np.zeros_like(w) for w in net.weights),
            m_b=tuple(np.zeros_like(b) for b in net.biases),
            v_b=tuple(np.zeros_like(b) for b in net.biases),
        )


def optimizer_step(state: OptimizerState, net: Mlp, grads: GradientSet):
    """One Adam update; returns (new_net, new_state)."""
    grads.check_congruent(net)
    for k, (gw, gb) in enumerate(zip(grads.weights, grads.biases)):
        if not (np.isfinite(gw).all() and np.isfinite(gb).all()):
            raise NumericError(f"non-finite gradient in layer {k}")
    t = state.step + 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1**t
    bc2 = 1.0 - b2**t
    new_w, new_b = [], []
    m_w, v_w, m_b, v_b = [], [], [], []

    def upd(p, g, m, v):
        m2 = b1 * m + (1.0 - b1) * g
        v2 = b2 * v + (1.0 - b2) * g * g
        p2 = p - state.lr * (m2 / bc1) / (np.sqrt(v2 / bc2) + state.eps)
        return p2, m2, v2

    for k in range(net.n_layers):
        w2, mw2, vw2 = upd(net.weights[k], grads.weights[k], state.m_w[k], state.v_w[k])
        b2_, mb2, vb2 = upd(net.biases[k], grads.biases[k], state.m_b[k], state.v_b[k])
        new_w.append(w2)
        new_b.append(b2_)
        m_w.append(mw2)
        v_w.append(vw2)
        m_b.append(mb2)
        v_b.append(vb2)
    net2 = Mlp(net.layer_dims, tuple(new_w), tuple(new_b), net.output_bounding)
    state2 = OptimizerState(
        lr=state.lr,
        beta1=b1,
        beta2=b2,
        eps=state.eps,
        step=t,
        m_w=tuple(m_w),
        v_w=tuple(v_w),
        m_b=tuple(m_b),
        v_b=tuple(v_b),
    )
    return net2, state2


# --- flat text serialization ------------------------------------------------
#
# Header line with the layer sizes, then one block per layer: the weight rows
# in row-major order followed by the bias row.  Values use 17 significant
# digits, which round-trips float64 exactly.

FMT = "%.17g"


def _fmt_row(row) -> str:
    return " ".join(FMT % v for v in row)


def dump_mlp_lines(net: Mlp) -> list:
    lines = ["hvacgrid-mlp 1"]
    lines.append("dims " + " ".join(str(d) for d in net.layer_dims))
    lines.append("bounded %d" % int(net.output_bounding))
    for k in range(net.n_layers):
        lines.append("layer %d" % k)
        for row in net.weights[k]:
            lines.append(_fmt_row(row))
        lines.append(_fmt_row(net.biases[k]))
    return lines


def parse_mlp_lines(lines, pos: int = 0):
    """Parse a network from ``lines`` starting at index ``pos``.

    Returns (net, next_pos) so containers can embed several model blocks.
    """
    if pos >= len(lines) or not lines[pos].startswith("hvacgrid-mlp"):
        raise ConfigError("missing mlp header line")
    pos += 1
    if not lines[pos].startswith("dims "):
        raise ConfigError("missing dims line")
    dims = tuple(int(tok) for tok in lines[pos].split()[1:])
    pos += 1
    if not lines[pos].startswith("bounded "):
        raise ConfigError("missing bounded line")
    bounded = bool(int(lines[pos].split()[1]))
    pos += 1
    weights, biases = [], []
    for k in range(len(dims) - 1):
        if lines[pos].strip() != "layer %d" % k:
            raise ConfigError(f"expected 'layer {k}' at line {pos}")
        pos += 1
        n_out, n_in = dims[k + 1], dims[k]
        w = np.empty((n_out, n_in))
        for r in range(n_out):
            w[r] = np.fromstring(lines[pos], sep=" ")
            pos += 1
        b = np.fromstring(lines[pos], sep=" ")
        pos += 1
        weights.append(w)
        biases.append(b)
    return Mlp(dims, tuple(weights), tuple(biases), bounded), pos


def save_mlp(net: Mlp, path) -> None:
    with open(path, "w", encoding="ascii") as f:
        f.write("\n".join(dump_mlp_lines(net)) + "\n")


def load_mlp(path) -> Mlp:
    with open(path, "r", encoding="ascii") as f:
        lines = f.read().splitlines()
    net, _ = parse_mlp_lines(lines)
    return net
