"""Forward and backward passes of the biaffine linker.

Architecture: dense reduction -> stacked BiLSTM -> source/target projections
-> biaffine scorer, with role (4-way) and depth (6-way) classification heads
reading the shared contextual representation. Everything is float64 numpy
with explicit gate arithmetic so that every gradient can be checked against
finite differences.

Parameters live in a flat ``dict[str, np.ndarray]``; gradients mirror the
same keys.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..errors import ConfigError, NumericError, ValidationError
from .losses import cross_entropy_grad, link_loss_grad, mtl_sigma_grad

TASK_LINK = "link"
TASK_QACT = "qact"
TASK_ND = "nd"

N_QACT_CLASSES = 4
N_ND_CLASSES = 6


@dataclass(frozen=True)
class ModelConfig:
    input_dim: int
    dense1_units: int = 512
    lstm_units: int = 256
    lstm_stacks: int = 3
    proj_units: int = 256
    dropout_rate: float = 0.3
    use_spos: bool = False
    use_qact_head: bool = True
    use_nd_head: bool = True
    margin: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("input_dim", "dense1_units", "lstm_units", "lstm_stacks",
                     "proj_units"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError("dropout_rate must lie in [0, 1)")

    @property
    def effective_input_dim(self) -> int:
        return self.input_dim + (1 if self.use_spos else 0)

    @property
    def tasks(self) -> tuple[str, ...]:
        tasks = [TASK_LINK]
        if self.use_qact_head:
            tasks.append(TASK_QACT)
        if self.use_nd_head:
            tasks.append(TASK_ND)
        return tuple(tasks)

    def to_dict(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "dense1_units": self.dense1_units,
            "lstm_units": self.lstm_units,
            "lstm_stacks": self.lstm_stacks,
            "proj_units": self.proj_units,
            "dropout_rate": self.dropout_rate,
            "use_spos": self.use_spos,
            "use_qact_head": self.use_qact_head,
            "use_nd_head": self.use_nd_head,
            "margin": self.margin,
            "seed": self.seed,
        }

    @staticmethod
    def from_dict(data: dict) -> "ModelConfig":
        return ModelConfig(**data)


def _uniform(rng: np.random.Generator, shape: tuple[int, ...],
             fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def _stack_input_dim(config: ModelConfig, stack: int) -> int:
    return config.dense1_units if stack == 0 else 2 * config.lstm_units


def init_params(config: ModelConfig) -> dict[str, np.ndarray]:
    """Seeded uniform [-1/sqrt(fan_in), 1/sqrt(fan_in)] weights, zero biases."""
    rng = np.random.default_rng(config.seed)
    u = config.lstm_units
    p = config.proj_units
    ctx = 2 * u
    params: dict[str, np.ndarray] = {}
    params["dense1.W"] = _uniform(rng, (config.effective_input_dim, config.dense1_units),
                                  config.effective_input_dim)
    params["dense1.b"] = np.zeros(config.dense1_units)
    for s in range(config.lstm_stacks):
        in_dim = _stack_input_dim(config, s)
        for direction in ("fw", "bw"):
            prefix = f"lstm{s}.{direction}"
            params[f"{prefix}.W"] = _uniform(rng, (in_dim, 4 * u), in_dim)
            params[f"{prefix}.U"] = _uniform(rng, (u, 4 * u), u)
            params[f"{prefix}.b"] = np.zeros(4 * u)
    params["src.W"] = _uniform(rng, (ctx, p), ctx)
    params["src.b"] = np.zeros(p)
    params["tgt.W"] = _uniform(rng, (ctx, p), ctx)
    params["tgt.b"] = np.zeros(p)
    params["biaf.U"] = _uniform(rng, (p, p), p)
    params["biaf.w"] = _uniform(rng, (2 * p,), 2 * p)
    params["biaf.b"] = np.zeros(1)
    if config.use_qact_head:
        params["qact.W"] = _uniform(rng, (ctx, N_QACT_CLASSES), ctx)
        params["qact.b"] = np.zeros(N_QACT_CLASSES)
    if config.use_nd_head:
        params["nd.W"] = _uniform(rng, (ctx, N_ND_CLASSES), ctx)
        params["nd.b"] = np.zeros(N_ND_CLASSES)
    params["log_sigma"] = np.zeros(len(config.tasks))
    return params


def biaffine(x1: np.ndarray, x2: np.ndarray, U: np.ndarray, w: np.ndarray,
             b: float) -> float:
    """x1^T U x2 + w . (x1 (+) x2) + b for a single vector pair."""
    x1 = np.asarray(x1, dtype=np.float64)
    x2 = np.asarray(x2, dtype=np.float64)
    d = U.shape[0]
    if x1.shape != (d,) or x2.shape != (U.shape[1],) or w.shape != (x1.size + x2.size,):
        raise ValidationError(
            f"biaffine shape mismatch: x1 {x1.shape}, x2 {x2.shape}, "
            f"U {U.shape}, w {w.shape}"
        )
    return float(x1 @ U @ x2 + w @ np.concatenate([x1, x2]) + b)


@dataclass
class ForwardOutput:
    G: np.ndarray
    qact_logits: Optional[np.ndarray]
    nd_logits: Optional[np.ndarray]
    cache: dict = field(repr=False, default_factory=dict)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-x))


def _check_finite(name: str, value: np.ndarray) -> None:
    if not np.isfinite(value).all():
        raise NumericError(f"layer {name!r} produced non-finite values")


def _lstm_direction(x: np.ndarray, W: np.ndarray, U: np.ndarray, b: np.ndarray,
                    reverse: bool) -> tuple[np.ndarray, dict]:
    n = x.shape[0]
    u = U.shape[0]
    h_out = np.zeros((n, u))
    gates = {name: np.zeros((n, u)) for name in ("i", "f", "g", "o")}
    c_all = np.zeros((n, u))
    c_prev_all = np.zeros((n, u))
    h_prev_all = np.zeros((n, u))
    h = np.zeros(u)
    c = np.zeros(u)
    order = range(n - 1, -1, -1) if reverse else range(n)
    for t in order:
        h_prev_all[t] = h
        c_prev_all[t] = c
        z = x[t] @ W + h @ U + b
        i = _sigmoid(z[:u])
        f = _sigmoid(z[u:2 * u])
        g = np.tanh(z[2 * u:3 * u])
        o = _sigmoid(z[3 * u:])
        c = f * c + i * g
        h = o * np.tanh(c)
        gates["i"][t], gates["f"][t], gates["g"][t], gates["o"][t] = i, f, g, o
        c_all[t] = c
        h_out[t] = h
    cache = {"gates": gates, "c": c_all, "c_prev": c_prev_all,
             "h_prev": h_prev_all, "x": x, "reverse": reverse}
    return h_out, cache


def _lstm_direction_backward(d_h: np.ndarray, cache: dict, W: np.ndarray,
                             U: np.ndarray) -> tuple[dict[str, np.ndarray], np.ndarray]:
    gates = cache["gates"]
    x = cache["x"]
    n, u = d_h.shape
    dW = np.zeros_like(W)
    dU = np.zeros_like(U)
    db = np.zeros(4 * u)
    dx = np.zeros_like(x)
    dh_rec = np.zeros(u)
    dc_rec = np.zeros(u)
    order = range(n - 1, -1, -1) if cache["reverse"] else range(n)
    for t in reversed(list(order)):
        i, f, g, o = (gates[name][t] for name in ("i", "f", "g", "o"))
        tc = np.tanh(cache["c"][t])
        dh = d_h[t] + dh_rec
        do = dh * tc
        dc = dc_rec + dh * o * (1.0 - tc**2)
        di = dc * g
        dg = dc * i
        df = dc * cache["c_prev"][t]
        dc_rec = dc * f
        dz = np.concatenate([
            di * i * (1.0 - i),
            df * f * (1.0 - f),
            dg * (1.0 - g**2),
            do * o * (1.0 - o),
        ])
        dW += np.outer(x[t], dz)
        dU += np.outer(cache["h_prev"][t], dz)
        db += dz
        dx[t] += dz @ W.T
        dh_rec = dz @ U.T
    return {"W": dW, "U": dU, "b": db}, dx


def _draw_masks(config: ModelConfig, n: int,
                rng: np.random.Generator) -> dict[str, np.ndarray]:
    p = config.dropout_rate
    shapes = {"h1": (n, config.dense1_units)}
    for s in range(config.lstm_stacks):
        shapes[f"stack{s}"] = (n, 2 * config.lstm_units)
    shapes["src"] = (n, config.proj_units)
    shapes["tgt"] = (n, config.proj_units)
    if p == 0.0:
        return {k: np.ones(shape) for k, shape in shapes.items()}
    return {
        k: (rng.random(shape) >= p) / (1.0 - p)
        for k, shape in shapes.items()
    }


def forward(params: dict[str, np.ndarray], config: ModelConfig, X: np.ndarray,
            train: bool = False, rng: Optional[np.random.Generator] = None,
            masks: Optional[dict[str, np.ndarray]] = None) -> ForwardOutput:
    """Score every source/target sentence pair and the auxiliary heads.

    In training mode inverted-dropout masks are drawn from ``rng`` (or taken
    from ``masks`` verbatim, which keeps the pass differentiable for gradient
    checking); in eval mode the pass is a deterministic function of the
    parameters and input.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != config.effective_input_dim:
        raise ConfigError(
            f"input of shape {X.shape} does not match effective input dim "
            f"{config.effective_input_dim}"
        )
    n = X.shape[0]
    if train and masks is None:
        if rng is None:
            raise ConfigError("training-mode forward needs an rng or explicit masks")
        masks = _draw_masks(config, n, rng)

    def dropped(name: str, value: np.ndarray) -> np.ndarray:
        return value * masks[name] if train else value

    a1 = X @ params["dense1.W"] + params["dense1.b"]
    h1 = np.tanh(a1)
    _check_finite("dense1", h1)
    z = dropped("h1", h1)

    lstm_caches = []
    stack_inputs = []
    for s in range(config.lstm_stacks):
        stack_inputs.append(z)
        h_fw, cache_fw = _lstm_direction(
            z, params[f"lstm{s}.fw.W"], params[f"lstm{s}.fw.U"],
            params[f"lstm{s}.fw.b"], reverse=False)
        h_bw, cache_bw = _lstm_direction(
            z, params[f"lstm{s}.bw.W"], params[f"lstm{s}.bw.U"],
            params[f"lstm{s}.bw.b"], reverse=True)
        h_stack = np.concatenate([h_fw, h_bw], axis=1)
        _check_finite(f"lstm{s}", h_stack)
        lstm_caches.append((cache_fw, cache_bw))
        z = dropped(f"stack{s}", h_stack)

    context = z
    a_src = context @ params["src.W"] + params["src.b"]
    h_src = np.tanh(a_src)
    a_tgt = context @ params["tgt.W"] + params["tgt.b"]
    h_tgt = np.tanh(a_tgt)
    _check_finite("projections", np.concatenate([h_src, h_tgt], axis=1))
    h_src_d = dropped("src", h_src)
    h_tgt_d = dropped("tgt", h_tgt)

    p = config.proj_units
    w_src = params["biaf.w"][:p]
    w_tgt = params["biaf.w"][p:]
    G = (h_src_d @ params["biaf.U"] @ h_tgt_d.T
         + (h_src_d @ w_src)[:, None]
         + (h_tgt_d @ w_tgt)[None, :]
         + params["biaf.b"][0])
    _check_finite("biaffine", G)

    qact_logits = None
    if config.use_qact_head:
        qact_logits = context @ params["qact.W"] + params["qact.b"]
        _check_finite("qact_head", qact_logits)
    nd_logits = None
    if config.use_nd_head:
        nd_logits = context @ params["nd.W"] + params["nd.b"]
        _check_finite("nd_head", nd_logits)

    cache = {
        "X": X,
        "h1": h1,
        "stack_inputs": stack_inputs,
        "lstm_caches": lstm_caches,
        "context": context,
        "h_src": h_src,
        "h_tgt": h_tgt,
        "h_src_d": h_src_d,
        "h_tgt_d": h_tgt_d,
        "train": train,
        "masks": masks,
    }
    return ForwardOutput(G=G, qact_logits=qact_logits, nd_logits=nd_logits,
                         cache=cache)


def task_losses(output: ForwardOutput, config: ModelConfig,
                gold_head: Sequence[int],
                gold_qact: Optional[Sequence[int]] = None,
                gold_nd: Optional[Sequence[int]] = None) -> dict[str, float]:
    losses: dict[str, float] = {}
    loss, _ = link_loss_grad(output.G, gold_head, config.margin)
    losses[TASK_LINK] = loss
    if config.use_qact_head:
        if gold_qact is None:
            raise ValidationError("qact head enabled but no gold qact labels given")
        losses[TASK_QACT], _ = cross_entropy_grad(output.qact_logits, gold_qact)
    if config.use_nd_head:
        if gold_nd is None:
            raise ValidationError("nd head enabled but no gold depth labels given")
        losses[TASK_ND], _ = cross_entropy_grad(output.nd_logits, gold_nd)
    return losses


def combined_loss(losses: dict[str, float], params: dict[str, np.ndarray],
                  config: ModelConfig) -> float:
    """Single task: plain link loss. Several tasks: uncertainty weighting."""
    tasks = config.tasks
    if len(tasks) == 1:
        return losses[TASK_LINK]
    sigmas = np.exp(params["log_sigma"])
    return float(sum(
        losses[t] / (2.0 * sigmas[k] ** 2) + np.log(sigmas[k])
        for k, t in enumerate(tasks)
    ))


def backward(output: ForwardOutput, params: dict[str, np.ndarray],
             config: ModelConfig, gold_head: Sequence[int],
             gold_qact: Optional[Sequence[int]] = None,
             gold_nd: Optional[Sequence[int]] = None,
             ) -> tuple[dict[str, float], float, dict[str, np.ndarray]]:
    """Gradients of the combined loss for every parameter tensor.

    Returns (per-task losses, combined loss, gradient dict). Requires the
    forward cache.
    """
    cache = output.cache
    if not cache:
        raise ValidationError("backward needs the cache produced by forward")
    train = cache["train"]
    masks = cache["masks"]

    def undrop(name: str, grad: np.ndarray) -> np.ndarray:
        return grad * masks[name] if train else grad

    tasks = config.tasks
    losses: dict[str, float] = {}
    grads: dict[str, np.ndarray] = {k: np.zeros_like(v) for k, v in params.items()}

    link_value, dG = link_loss_grad(output.G, gold_head, config.margin)
    losses[TASK_LINK] = link_value
    task_logit_grads: dict[str, np.ndarray] = {}
    if config.use_qact_head:
        if gold_qact is None:
            raise ValidationError("qact head enabled but no gold qact labels given")
        losses[TASK_QACT], task_logit_grads[TASK_QACT] = cross_entropy_grad(
            output.qact_logits, gold_qact)
    if config.use_nd_head:
        if gold_nd is None:
            raise ValidationError("nd head enabled but no gold depth labels given")
        losses[TASK_ND], task_logit_grads[TASK_ND] = cross_entropy_grad(
            output.nd_logits, gold_nd)

    if len(tasks) == 1:
        combined = losses[TASK_LINK]
        weights = {TASK_LINK: 1.0}
    else:
        sigmas = np.exp(params["log_sigma"])
        combined = float(sum(
            losses[t] / (2.0 * sigmas[k] ** 2) + np.log(sigmas[k])
            for k, t in enumerate(tasks)
        ))
        weights = {t: 1.0 / (2.0 * sigmas[k] ** 2) for k, t in enumerate(tasks)}
        sigma_grads = mtl_sigma_grad([losses[t] for t in tasks], list(sigmas))
        # chain rule through sigma = exp(log_sigma)
        grads["log_sigma"] = np.array(sigma_grads) * sigmas

    dG = dG * weights[TASK_LINK]

    h_src_d, h_tgt_d = cache["h_src_d"], cache["h_tgt_d"]
    p = config.proj_units
    w_src = params["biaf.w"][:p]
    w_tgt = params["biaf.w"][p:]
    row_sum = dG.sum(axis=1)
    col_sum = dG.sum(axis=0)
    grads["biaf.U"] += h_src_d.T @ dG @ h_tgt_d
    grads["biaf.w"][:p] += h_src_d.T @ row_sum
    grads["biaf.w"][p:] += h_tgt_d.T @ col_sum
    grads["biaf.b"][0] += dG.sum()
    d_src_d = dG @ h_tgt_d @ params["biaf.U"].T + row_sum[:, None] * w_src[None, :]
    d_tgt_d = dG.T @ h_src_d @ params["biaf.U"] + col_sum[:, None] * w_tgt[None, :]

    context = cache["context"]
    d_context = np.zeros_like(context)
    for name, proj_h, d_proj_d in (("src", cache["h_src"], d_src_d),
                                   ("tgt", cache["h_tgt"], d_tgt_d)):
        d_proj = undrop(name, d_proj_d)
        d_a = d_proj * (1.0 - proj_h**2)
        grads[f"{name}.W"] += context.T @ d_a
        grads[f"{name}.b"] += d_a.sum(axis=0)
        d_context += d_a @ params[f"{name}.W"].T

    for task, head in ((TASK_QACT, "qact"), (TASK_ND, "nd")):
        if task in task_logit_grads:
            d_logits = task_logit_grads[task] * weights[task]
            grads[f"{head}.W"] += context.T @ d_logits
            grads[f"{head}.b"] += d_logits.sum(axis=0)
            d_context += d_logits @ params[f"{head}.W"].T

    # back through the BiLSTM stacks, newest first
    d_stack_out = d_context
    u = config.lstm_units
    for s in range(config.lstm_stacks - 1, -1, -1):
        d_h_stack = undrop(f"stack{s}", d_stack_out)
        cache_fw, cache_bw = cache["lstm_caches"][s]
        fw_grads, dx_fw = _lstm_direction_backward(
            d_h_stack[:, :u], cache_fw, params[f"lstm{s}.fw.W"],
            params[f"lstm{s}.fw.U"])
        bw_grads, dx_bw = _lstm_direction_backward(
            d_h_stack[:, u:], cache_bw, params[f"lstm{s}.bw.W"],
            params[f"lstm{s}.bw.U"])
        for direction, dir_grads in (("fw", fw_grads), ("bw", bw_grads)):
            for part in ("W", "U", "b"):
                grads[f"lstm{s}.{direction}.{part}"] += dir_grads[part]
        d_stack_out = dx_fw + dx_bw

    d_h1 = undrop("h1", d_stack_out)
    d_a1 = d_h1 * (1.0 - cache["h1"]**2)
    grads["dense1.W"] += cache["X"].T @ d_a1
    grads["dense1.b"] += d_a1.sum(axis=0)

    return losses, combined, grads
