"""Training loops for the four policy variants and their inference modes.

The full model runs three sequential sub-updates per step, one Adam optimizer
per loss: safe-head likelihood on expert batches, unsafe-head likelihood on
collision batches, and a divergence term that pushes the safe distribution away
from the unsafe one on collision states. The unsafe head is detached in the
divergence update: its raw-output gradients are literally zero.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import gaussian, nnet
from .datasets import Dataset, normalize, split_80_20
from .simulator import Observation
from .util import fmt_float, make_rng

VARIANTS = ("ffn", "mdn", "amdn_nokl", "amdn")
HEAD_COUNTS = {"ffn": 1, "mdn": 2, "amdn_nokl": 4, "amdn": 4}
LOG_INTERVAL = 1000


class TrainingDivergedError(RuntimeError):
    """A loss went non-finite; the message carries the offending batch summary."""


@dataclass(frozen=True)
class Hyperparams:
    eta_s: float = 1e-4
    eta_c: float = 1e-5
    eta_kl: float = 1e-9
    batch_size: int = 100
    training_steps: int = 100_000
    seed: int = 0

    def __post_init__(self):
        if min(self.eta_s, self.eta_c, self.eta_kl) <= 0.0:
            raise ValueError("learning rates must be > 0")
        if self.batch_size < 1 or self.training_steps < 1:
            raise ValueError("batch_size and training_steps must be >= 1")


@dataclass(frozen=True)
class ModelVariant:
    tag: str
    inference_mode: str = "mean"

    def __post_init__(self):
        if self.tag not in VARIANTS:
            raise ValueError(f"unknown variant {self.tag!r}")
        if self.inference_mode not in ("mean", "sampling"):
            raise ValueError(f"unknown inference mode {self.inference_mode!r}")
        if self.tag == "ffn" and self.inference_mode != "mean":
            raise ValueError("ffn is deterministic; it has no sampling mode")


@dataclass
class TrainLog:
    """Interval losses and validation metric, one row per LOG_INTERVAL steps."""

    rows: list[dict] = field(default_factory=list)

    def add(self, step: int, loss_s: float, loss_c: float | None,
            kl: float | None, val: float) -> None:
        self.rows.append({"step": step, "loss_s": loss_s, "loss_c": loss_c,
                          "kl": kl, "val_loss_s": val})

    def write(self, path: str | Path) -> None:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["step", "loss_s", "loss_c", "kl", "val_loss_s"])
            for r in self.rows:
                writer.writerow([r["step"]] +
                                ["" if r[k] is None else fmt_float(r[k])
                                 for k in ("loss_s", "loss_c", "kl", "val_loss_s")])


@dataclass
class TrainResult:
    params: nnet.NetworkParams      # best-validation parameters
    variant: str
    hyper: Hyperparams
    log: TrainLog
    best_val: float
    best_step: int


def network_spec_for(tag: str) -> nnet.NetworkSpec:
    return nnet.NetworkSpec(input_dim=3, hidden_layers=3, hidden_width=50,
                            head_outputs=HEAD_COUNTS[tag])


def _check_finite(value: float, step: int, what: str, idx=None) -> None:
    if not np.isfinite(value):
        sample = "" if idx is None else f"; batch indices {np.asarray(idx)[:10].tolist()}"
        raise TrainingDivergedError(f"{what} became {value} at step {step}{sample}")


def _gauss_head_grads(raw_mu, raw_var, d_mu, d_var):
    """Chain loss gradients w.r.t. (mu, var) through tanh/nnelu squashing."""
    smu, svar = gaussian.squash_grads(raw_mu, raw_var)
    return d_mu * smu, d_var * svar


def ffn_step(params, state, xb, ab, lr, step=0, idx=None):
    """Squared-error imitation update on the single tanh output."""
    trace = nnet.forward(params, xb)
    raw = trace.head_raw
    y = np.tanh(raw[:, 0])
    n = len(ab)
    loss = float(np.mean((y - ab) ** 2))
    _check_finite(loss, step, "ffn mse", idx)
    head = np.zeros_like(raw)
    head[:, 0] = 2.0 * (y - ab) * (1.0 - y ** 2) / n
    grads = nnet.backward(params, trace, head)
    params, state = nnet.adam_step(params, grads, state, lr)
    return params, state, loss


def mdn_step(params, state, xb, ab, lr, step=0, idx=None):
    """Negative log-likelihood update on a single Gaussian head pair."""
    trace = nnet.forward(params, xb)
    raw = trace.head_raw
    mu = np.tanh(raw[:, 0])
    var = np.maximum(nnet.nnelu(raw[:, 1]), gaussian.VAR_FLOOR)
    n = len(ab)
    loss = float(np.mean(gaussian.nll_arrays(mu, var, ab)))
    _check_finite(loss, step, "nll", idx)
    d_mu, d_var = gaussian.nll_grad_arrays(mu, var, ab)
    g_mu, g_var = _gauss_head_grads(raw[:, 0], raw[:, 1], d_mu / n, d_var / n)
    head = np.zeros_like(raw)
    head[:, 0] = g_mu
    head[:, 1] = g_var
    grads = nnet.backward(params, trace, head)
    params, state = nnet.adam_step(params, grads, state, lr)
    return params, state, loss


def _amdn_nll_substep(params, state, xb, ab, lr, head0, step, idx):
    """NLL update on one head pair (columns head0, head0+1) of a 4-head net."""
    trace = nnet.forward(params, xb)
    raw = trace.head_raw
    mu = np.tanh(raw[:, head0])
    var = np.maximum(nnet.nnelu(raw[:, head0 + 1]), gaussian.VAR_FLOOR)
    n = len(ab)
    loss = float(np.mean(gaussian.nll_arrays(mu, var, ab)))
    _check_finite(loss, step, f"nll head {head0}", idx)
    d_mu, d_var = gaussian.nll_grad_arrays(mu, var, ab)
    g_mu, g_var = _gauss_head_grads(raw[:, head0], raw[:, head0 + 1], d_mu / n, d_var / n)
    head = np.zeros_like(raw)
    head[:, head0] = g_mu
    head[:, head0 + 1] = g_var
    grads = nnet.backward(params, trace, head)
    params, state = nnet.adam_step(params, grads, state, lr)
    return params, state, loss


def _amdn_kl_substep(params, state, xb, lr, step, idx):
    """Ascend KL(safe || unsafe) on collision states; unsafe head detached."""
    trace = nnet.forward(params, xb)
    raw = trace.head_raw
    mu_s, var_s, mu_c, var_c = gaussian.squash_raw(raw)
    n = len(xb)
    kl = float(np.mean(gaussian.kl_arrays(mu_s, var_s, mu_c, var_c)))
    _check_finite(kl, step, "kl", idx)
    d_mu, d_var = gaussian.kl_grad_p_arrays(mu_s, var_s, mu_c, var_c)
    # loss is -KL; unsafe-head columns stay exactly zero
    g_mu, g_var = _gauss_head_grads(raw[:, 0], raw[:, 1], -d_mu / n, -d_var / n)
    head = np.zeros_like(raw)
    head[:, 0] = g_mu
    head[:, 1] = g_var
    grads = nnet.backward(params, trace, head)
    params, state = nnet.adam_step(params, grads, state, lr)
    return params, state, kl


def train_step_amdn(params, states: dict, batch_e, batch_c, hyper: Hyperparams,
                    *, eta_s: float | None = None, eta_c: float | None = None,
                    eta_kl: float | None = None, step: int = 0):
    """One full three-loss step: safe NLL, unsafe NLL, then the KL push.

    The eta keywords override the corresponding learning rate (0 turns a
    sub-update into a bitwise no-op while keeping optimizer streams aligned).
    Returns updated params, states, and a dict of the step's loss values.
    """
    (xe, ae, idx_e), (xc, ac, idx_c) = batch_e, batch_c
    eta_s = hyper.eta_s if eta_s is None else eta_s
    eta_c = hyper.eta_c if eta_c is None else eta_c
    eta_kl = hyper.eta_kl if eta_kl is None else eta_kl
    params, states["s"], nll_s = _amdn_nll_substep(
        params, states["s"], xe, ae, eta_s, 0, step, idx_e)
    params, states["c"], nll_c = _amdn_nll_substep(
        params, states["c"], xc, ac, eta_c, 2, step, idx_c)
    params, states["kl"], kl = _amdn_kl_substep(
        params, states["kl"], xc, eta_kl, step, idx_c)
    return params, states, {"nll_s": nll_s, "nll_c": nll_c, "kl": kl}


def _validation_metric(params, tag, xv, av) -> float:
    raw = nnet.forward(params, xv).head_raw
    if tag == "ffn":
        return float(np.mean((np.tanh(raw[:, 0]) - av) ** 2))
    mu = np.tanh(raw[:, 0])
    var = np.maximum(nnet.nnelu(raw[:, 1]), gaussian.VAR_FLOOR)
    return float(np.mean(gaussian.nll_arrays(mu, var, av)))


def train(variant: ModelVariant | str, expert_ds: Dataset,
          collision_ds: Dataset | None, hyper: Hyperparams) -> TrainResult:
    """Train one variant; returns the parameters that scored the best validation
    safe-head loss, plus the interval log."""
    tag = variant.tag if isinstance(variant, ModelVariant) else variant
    if tag not in VARIANTS:
        raise ValueError(f"unknown variant {tag!r}")
    needs_collisions = tag in ("amdn", "amdn_nokl")
    if needs_collisions and (collision_ds is None or len(collision_ds) == 0):
        raise ValueError(f"variant {tag} requires a collision dataset")

    spec = network_spec_for(tag)
    params = nnet.init_network(spec, hyper.seed)

    e_split = split_80_20(expert_ds, hyper.seed)
    xe_all, ae_all = expert_ds.features(), expert_ds.action
    if hyper.batch_size > len(e_split.train):
        raise ValueError("batch_size exceeds expert training split")
    if needs_collisions:
        c_split = split_80_20(collision_ds, hyper.seed)
        xc_all, ac_all = collision_ds.features(), collision_ds.action
        if hyper.batch_size > len(c_split.train):
            raise ValueError("batch_size exceeds collision training split")
        states = {"s": nnet.init_adam(spec), "c": nnet.init_adam(spec),
                  "kl": nnet.init_adam(spec)}
        eta_kl = hyper.eta_kl if tag == "amdn" else 0.0
    else:
        state = nnet.init_adam(spec)

    xv, av = xe_all[e_split.val], ae_all[e_split.val]
    rng = make_rng(hyper.seed, 1)
    log = TrainLog()
    best_val = np.inf
    best_params = params.copy()
    best_step = 0

    for step in range(1, hyper.training_steps + 1):
        rows_e = e_split.train[rng.integers(0, len(e_split.train), size=hyper.batch_size)]
        xb, ab = xe_all[rows_e], ae_all[rows_e]
        loss_c = kl = None
        if tag == "ffn":
            params, state, loss_s = ffn_step(params, state, xb, ab, hyper.eta_s, step, rows_e)
        elif tag == "mdn":
            params, state, loss_s = mdn_step(params, state, xb, ab, hyper.eta_s, step, rows_e)
        else:
            rows_c = c_split.train[rng.integers(0, len(c_split.train), size=hyper.batch_size)]
            params, states, losses = train_step_amdn(
                params, states, (xb, ab, rows_e),
                (xc_all[rows_c], ac_all[rows_c], rows_c), hyper,
                eta_kl=eta_kl, step=step)
            loss_s, loss_c, kl = losses["nll_s"], losses["nll_c"], losses["kl"]

        if step % LOG_INTERVAL == 0 or step == hyper.training_steps:
            val = _validation_metric(params, tag, xv, av)
            _check_finite(val, step, "validation loss", e_split.val)
            log.add(step, loss_s, loss_c, kl, val)
            if val < best_val:
                best_val = val
                best_params = params.copy()
                best_step = step

    return TrainResult(best_params, tag, hyper, log, float(best_val), best_step)


def infer_pedal(params: nnet.NetworkParams, variant: str, obs: Observation,
                mode: str = "mean", rng: np.random.Generator | None = None) -> float:
    """Map one observation to a pedal action for any trained variant."""
    raw = nnet.forward(params, normalize(obs)).head_raw
    if variant == "ffn" or mode == "mean":
        return float(np.tanh(raw[0]))
    if rng is None:
        raise ValueError("sampling mode needs an RNG")
    g = gaussian.squash_heads(raw) if len(raw) == 4 else None
    if g is not None:
        return gaussian.sample(g.safe, rng)
    mu = float(np.tanh(raw[0]))
    var = float(max(nnet.nnelu(raw[1]), gaussian.VAR_FLOOR))
    return gaussian.sample(gaussian.GaussParams(mu, var), rng)


def make_follower(params: nnet.NetworkParams, variant: str, mode: str = "mean",
                  rng: np.random.Generator | None = None):
    """Bind a checkpoint into an Observation -> pedal closure for the simulator."""
    def follower(obs: Observation) -> float:
        return infer_pedal(params, variant, obs, mode, rng)
    return follower


def save_result(result: TrainResult, path: str | Path, extra_meta: dict | None = None) -> None:
    """Persist a training result as a checkpoint with hyperparameters recorded."""
    meta = {
        "seed": result.hyper.seed,
        "steps": result.hyper.training_steps,
        "eta_s": result.hyper.eta_s,
        "eta_c": result.hyper.eta_c,
        "eta_kl": result.hyper.eta_kl,
        "batch_size": result.hyper.batch_size,
        "best_val": result.best_val,
        "best_step": result.best_step,
        "kl_trunk_path": "safe-head only",
    }
    if extra_meta:
        meta.update(extra_meta)
    nnet.save_checkpoint(path, result.params, result.variant, meta)
