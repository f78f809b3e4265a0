"""Neural-ODE thermal model: a learned indoor-temperature derivative.

The network maps (indoor temp, HVAC mode, outdoor temp), all normalized to
[0, 1], to d(indoor temp)/dt expressed per 10-minute unit of normalized
time.  Predictions integrate the derivative with explicit Euler steps at the
1-minute simulation resolution, so one step adds 0.1 * f(y, u, g).  Training
minimizes mean squared error of full 30-minute rollouts against the plant,
which matches how the controller later uses the model.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import nn
from .errors import ConfigError, InputShapeError, NumericError
from .rngs import substream

NODE_DIMS = (3, 100, 100, 1)


@dataclass(frozen=True)
class NormRanges:
    """Linear [0,1] scalings for the signals entering the networks."""

    tin_lo: float = 15.0
    tin_hi: float = 40.0
    tout_lo: float = 10.0
    tout_hi: float = 45.0

    def __post_init__(self):
        if not (self.tin_lo < self.tin_hi and self.tout_lo < self.tout_hi):
            raise ConfigError("normalization ranges need min < max")

    def tin_norm(self, t):
        return (np.asarray(t, dtype=np.float64) - self.tin_lo) / (self.tin_hi - self.tin_lo)

    def tin_denorm(self, y):
        return np.asarray(y, dtype=np.float64) * (self.tin_hi - self.tin_lo) + self.tin_lo

    def tout_norm(self, t):
        return (np.asarray(t, dtype=np.float64) - self.tout_lo) / (self.tout_hi - self.tout_lo)

    @property
    def tin_span(self) -> float:
        return self.tin_hi - self.tin_lo


@dataclass
class NodeModel:
    net: nn.Mlp
    integrator_dt: float = 1.0  # minutes per Euler step
    time_unit_min: float = 10.0  # normalized-time unit of the derivative
    norm: NormRanges = field(default_factory=NormRanges)

    def __post_init__(self):
        if self.net.layer_dims[0] != 3 or self.net.layer_dims[-1] != 1:
            raise ConfigError("thermal model needs 3 inputs and 1 output")
        if self.net.output_bounding:
            raise ConfigError("derivative output must be unbounded")

    @property
    def dt_norm(self) -> float:
        return self.integrator_dt / self.time_unit_min


def rollout_norm(model: NodeModel, y0n, u, gn, want_caches: bool = False):
    """Euler-integrate normalized batches: y0n (B,), u and gn (B, H).

    Returns predictions (B, H); with ``want_caches`` also the per-step
    forward caches needed for backpropagation through time.
    """
    y0n = np.asarray(y0n, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    gn = np.asarray(gn, dtype=np.float64)
    if u.shape != gn.shape or u.ndim != 2 or y0n.shape != (u.shape[0],):
        raise InputShapeError("rollout inputs must be (B,), (B,H), (B,H)")
    b, h = u.shape
    dtn = model.dt_norm
    y = np.empty((b, h))
    caches = [] if want_caches else None
    cur = y0n
    for t in range(h):
        x = np.stack([cur, u[:, t], gn[:, t]], axis=1)
        if want_caches:
            f, acts = nn.forward_batch(model.net, x, want_cache=True)
            caches.append(acts)
        else:
            f = nn.forward_batch(model.net, x)
        cur = cur + dtn * f[:, 0]
        y[:, t] = cur
    if want_caches:
        return y, caches
    return y


def rollout_backward(model: NodeModel, caches, d_y):
    """Reverse-mode pass through a rollout.

    ``d_y`` is d(loss)/d(predictions), shape (B, H).  Returns the summed
    parameter GradientSet plus d(loss)/d(u) with shape (B, H) and
    d(loss)/d(y0) with shape (B,).
    """
    d_y = np.asarray(d_y, dtype=np.float64)
    b, h = d_y.shape
    dtn = model.dt_norm
    grads = nn.GradientSet.zeros_like(model.net)
    du = np.empty((b, h))
    carry = np.zeros(b)
    for t in range(h - 1, -1, -1):
        dy_t = d_y[:, t] + carry
        step_grads, dx = nn.backward_batch(model.net, caches[t], (dtn * dy_t)[:, None])
        grads.add_(step_grads)
        du[:, t] = dx[:, 1]
        carry = dy_t + dx[:, 0]
    return grads, du, carry


def node_predict(model: NodeModel, y0_c: float, u_seq, g_seq_c) -> np.ndarray:
    """Predict indoor temperature in C over a horizon of len(u_seq) minutes."""
    u_seq = np.asarray(u_seq, dtype=np.float64)
    g_seq_c = np.asarray(g_seq_c, dtype=np.float64)
    if u_seq.ndim != 1 or g_seq_c.ndim != 1 or len(u_seq) != len(g_seq_c):
        raise InputShapeError("control and outdoor sequences must be equal-length vectors")
    if len(u_seq) < 1:
        raise ConfigError("prediction horizon must be at least one step")
    y0n = model.norm.tin_norm(y0_c)
    gn = model.norm.tout_norm(g_seq_c)
    yn = rollout_norm(model, np.array([y0n]), u_seq[None, :], gn[None, :])[0]
    return model.norm.tin_denorm(yn)


def rollout_mae(model: NodeModel, split_windows) -> float:
    """Mean absolute rollout error in normalized units over (y0,u,g,y) windows."""
    y0, u, g, y_true = split_windows
    if len(y0) == 0:
        raise ConfigError("empty window split")
    yn = rollout_norm(model, model.norm.tin_norm(y0), u, model.norm.tout_norm(g))
    return float(np.mean(np.abs(yn - model.norm.tin_norm(y_true))))


@dataclass
class TrainHyper:
    lr: float = 2e-3
    batch: int = 384
    max_epochs: int = 60
    patience: int = 12


@dataclass
class TrainingReport:
    stage: str
    seed: int
    epochs_run: int
    best_epoch: int
    final_train_loss: float
    best_val_loss: float
    mae_norm: float
    mae_c: float
    wall_s: float
    extra: dict = field(default_factory=dict)


def _split_norm(model_norm: NormRanges, windows):
    y0, u, g, y_true = windows
    return (model_norm.tin_norm(y0), u, model_norm.tout_norm(g),
            model_norm.tin_norm(y_true))


def train_node(dataset, building: int, hyper: TrainHyper = None, seed: int = 0):
    """Fit one building's thermal model on its train split.

    Full-rollout MSE objective, Adam updates, early stopping on the
    validation rollout loss with the best parameters retained.  Returns
    (NodeModel, TrainingReport); deterministic for a given seed.
    """
    hyper = hyper or TrainHyper()
    t_start = time.perf_counter()
    norm = NormRanges()
    train_w = _split_norm(norm, dataset.windows(building, "train"))
    val_w = _split_norm(norm, dataset.windows(building, "val"))
    if len(train_w[0]) == 0 or len(val_w[0]) == 0:
        raise ConfigError("dataset must provide non-empty train and val splits")

    net = nn.init_mlp(NODE_DIMS, substream(seed, "node-init", building))
    model = NodeModel(net=net, norm=norm)
    opt = nn.OptimizerState.for_net(net, lr=hyper.lr)
    n_train = len(train_w[0])
    best_val = np.inf
    best_net = net
    best_epoch = 0
    final_train = np.nan
    epochs_run = 0

    def val_loss(m):
        yn = rollout_norm(m, val_w[0], val_w[1], val_w[2])
        return float(np.mean((yn - val_w[3]) ** 2))

    for epoch in range(hyper.max_epochs):
        order = substream(seed, "node-shuffle", building, epoch).permutation(n_train)
        losses = []
        for lo in range(0, n_train, hyper.batch):
            idx = order[lo:lo + hyper.batch]
            y0n, u, gn, yt = (train_w[0][idx], train_w[1][idx],
                              train_w[2][idx], train_w[3][idx])
            yn, caches = rollout_norm(model, y0n, u, gn, want_caches=True)
            err = yn - yt
            loss = float(np.mean(err**2))
            if not np.isfinite(loss):
                raise NumericError(f"non-finite loss at epoch {epoch}, batch {lo // hyper.batch}")
            d_y = (2.0 / err.size) * err
            grads, _, _ = rollout_backward(model, caches, d_y)
            net2, opt = nn.optimizer_step(opt, model.net, grads)
            model = NodeModel(net=net2, integrator_dt=model.integrator_dt,
                              time_unit_min=model.time_unit_min, norm=norm)
            losses.append(loss)
        final_train = float(np.mean(losses))
        epochs_run = epoch + 1
        vl = val_loss(model)
        if vl < best_val:
            best_val, best_net, best_epoch = vl, model.net, epoch
        elif epoch - best_epoch >= hyper.patience:
            break

    best = NodeModel(net=best_net, norm=norm)
    mae = rollout_mae(best, dataset.windows(building, "val"))
    report = TrainingReport(
        stage="node", seed=int(seed), epochs_run=epochs_run, best_epoch=best_epoch,
        final_train_loss=final_train, best_val_loss=best_val,
        mae_norm=mae, mae_c=mae * norm.tin_span,
        wall_s=time.perf_counter() - t_start,
        extra={"building": building},
    )
    return best, report


# --- serialization -----------------------------------------------------------


def dump_node_lines(model: NodeModel) -> list:
    lines = [
        "hvacgrid-node 1",
        "norm %s" % " ".join(
            nn.FMT % v
            for v in (model.norm.tin_lo, model.norm.tin_hi,
                      model.norm.tout_lo, model.norm.tout_hi)
        ),
        "dt_min " + nn.FMT % model.integrator_dt,
        "time_unit_min " + nn.FMT % model.time_unit_min,
    ]
    return lines + nn.dump_mlp_lines(model.net)


def parse_node_lines(lines, pos: int = 0):
    if not lines[pos].startswith("hvacgrid-node"):
        raise ConfigError("missing thermal-model header")
    pos += 1
    norm_vals = [float(v) for v in lines[pos].split()[1:]]
    pos += 1
    dt_min = float(lines[pos].split()[1])
    pos += 1
    time_unit = float(lines[pos].split()[1])
    pos += 1
    net, pos = nn.parse_mlp_lines(lines, pos)
    model = NodeModel(
        net=net, integrator_dt=dt_min, time_unit_min=time_unit,
        norm=NormRanges(*norm_vals),
    )
    return model, pos


def save_node(model: NodeModel, path) -> None:
    with open(path, "w", encoding="ascii") as f:
        f.write("\n".join(dump_node_lines(model)) + "\n")


def load_node(path) -> NodeModel:
    with open(path, "r", encoding="ascii") as f:
        lines = f.read().splitlines()
    model, _ = parse_node_lines(lines)
    return model
