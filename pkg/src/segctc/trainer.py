"""Mini-batch gradient training with decoupled-weight-decay Adam.

Every random draw is keyed by (seed, stream, step[, utterance]) so runs are
bit-reproducible; batch gradients are reduced in sorted utterance order to fix
the summation order.

Metrics log format: one line per step, tab-separated
    step  ce  ctc  combined  alpha
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .ctc import ctc_loss_and_grad
from .errors import ConfigError, NonFiniteLossError, ShapeMismatchError
from .masking import apply_mask, sample_mask
from .model import Model, model_backward, model_forward, named_params, save_checkpoint
from .numerics import log_softmax
from .objectives import LossBreakdown, TrainingMode, effective_alpha, joint_loss
from .seeding import seeded_rng
from .synthesis import Corpus
from .targets import dedup

_BATCH_STREAM = 0
_MASK_STREAM = 1


@dataclass(frozen=True)
class AdamHyper:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.98
    eps: float = 1e-8
    weight_decay: float = 0.01


@dataclass
class AdamState:
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params, grads, state: AdamState, hyper: AdamHyper):
    """One bias-corrected Adam update with decoupled weight decay, in place.

    `params` is a list of (name, array) pairs; `grads` maps the same names to
    gradient arrays of identical shape.
    """
    state.step += 1
    t = state.step
    c1 = 1.0 - hyper.beta1**t
    c2 = 1.0 - hyper.beta2**t
    for name, p in params:
        g = grads[name]
        if g.shape != p.shape:
            raise ShapeMismatchError(
                f"gradient for {name} has shape {g.shape}, parameter {p.shape}"
            )
        m = state.m.setdefault(name, np.zeros_like(p))
        v = state.v.setdefault(name, np.zeros_like(p))
        m *= hyper.beta1
        m += (1.0 - hyper.beta1) * g
        v *= hyper.beta2
        v += (1.0 - hyper.beta2) * g * g
        p -= hyper.lr * (m / c1) / (np.sqrt(v / c2) + hyper.eps)
        if hyper.weight_decay:
            p -= hyper.lr * hyper.weight_decay * p
    return params, state


@dataclass(frozen=True)
class TrainConfig:
    steps: int
    batch_size: int = 8
    lr_peak: float = 5e-3
    lr_warmup_steps: int = 200
    schedule: str = "linear"
    adam_beta1: float = 0.9
    adam_beta2: float = 0.98
    adam_eps: float = 1e-8
    weight_decay: float = 0.01
    mask_p: float = 0.08
    mask_l: int = 10
    mode: TrainingMode = TrainingMode(alpha=0.5)
    grad_clip: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.steps < 0 or self.batch_size < 1:
            raise ConfigError("steps must be >= 0 and batch_size >= 1")
        if self.lr_peak <= 0.0:
            raise ConfigError("lr_peak must be > 0")
        if self.lr_warmup_steps < 0:
            raise ConfigError("lr_warmup_steps must be >= 0")
        if self.schedule != "linear":
            raise ConfigError(f"unknown schedule {self.schedule!r}")
        if self.seed < 0:
            raise ConfigError("seed must be >= 0")


@dataclass(frozen=True)
class StepMetrics:
    step: int
    ce: float
    ctc: float
    combined: float
    alpha: float


def learning_rate(step: int, cfg: TrainConfig) -> float:
    """Linear ramp to the peak, then linear decay toward 0 at the final step."""
    if cfg.lr_warmup_steps > 0 and step < cfg.lr_warmup_steps:
        return cfg.lr_peak * (step + 1) / cfg.lr_warmup_steps
    span = max(1, cfg.steps - cfg.lr_warmup_steps)
    return cfg.lr_peak * max(0.0, (cfg.steps - step) / span)


def format_metrics(metrics) -> str:
    lines = [
        f"{m.step}\t{m.ce:.10g}\t{m.ctc:.10g}\t{m.combined:.10g}\t{m.alpha:.10g}"
        for m in metrics
    ]
    return "\n".join(lines) + ("\n" if lines else "")


def pretrain_loss_and_grads(
    model: Model, features, ids, spec, alpha: float
) -> tuple[LossBreakdown, dict]:
    """Masked joint loss of one utterance plus gradients for every parameter."""
    masked = apply_mask(features, spec, model.encoder.mask_embedding)
    logits, cache = model_forward(model, masked)
    log_probs = log_softmax(logits, axis=1)
    breakdown, dlogits = joint_loss(log_probs, ids, spec, alpha)
    grads = model_backward(
        model, cache, dlogits, masked_rows=np.flatnonzero(spec.frame_mask())
    )
    return breakdown, grads


def finetune_loss_and_grads(model: Model, features, label_ids) -> tuple[float, dict]:
    """Token-normalized full-utterance CTC loss (no masking) plus gradients."""
    logits, cache = model_forward(model, features)
    log_probs = log_softmax(logits, axis=1)
    target = dedup(label_ids)
    loss, dlogits = ctc_loss_and_grad(log_probs, target)
    tokens = max(1, target.size)
    grads = model_backward(model, cache, dlogits / tokens, masked_rows=None)
    return loss / tokens, grads


def _clip_grads(grads: dict, max_norm: float) -> None:
    total = np.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if total > max_norm:
        scale = max_norm / total
        for g in grads.values():
            g *= scale


def _run_loop(corpus, cfg, model, step_fn, log_path, checkpoint_path, trainable):
    if not corpus.utterances:
        raise ConfigError("corpus is empty")
    n = len(corpus.utterances)
    state = AdamState()
    metrics: list[StepMetrics] = []
    for step in range(cfg.steps):
        batch_rng = seeded_rng(cfg.seed, _BATCH_STREAM, step)
        size = min(cfg.batch_size, n)
        indices = np.sort(batch_rng.choice(n, size=size, replace=False))
        grad_total = {name: np.zeros_like(p) for name, p in trainable}
        ce_sum = ctc_sum = combined_sum = 0.0
        alpha = effective_alpha(step, cfg.mode)
        for idx in indices:
            ce, ctc, combined, grads = step_fn(int(idx), step, alpha)
            ce_sum += ce
            ctc_sum += ctc
            combined_sum += combined
            for name in grad_total:
                grad_total[name] += grads[name]
        for name in grad_total:
            grad_total[name] /= size
        ce_mean, ctc_mean = ce_sum / size, ctc_sum / size
        combined_mean = combined_sum / size
        if not np.isfinite(combined_mean):
            raise NonFiniteLossError(step, combined_mean)
        if cfg.grad_clip > 0.0:
            _clip_grads(grad_total, cfg.grad_clip)
        hyper = AdamHyper(
            lr=learning_rate(step, cfg),
            beta1=cfg.adam_beta1,
            beta2=cfg.adam_beta2,
            eps=cfg.adam_eps,
            weight_decay=cfg.weight_decay,
        )
        adam_step(trainable, grad_total, state, hyper)
        metrics.append(StepMetrics(step, ce_mean, ctc_mean, combined_mean, alpha))
    if log_path is not None:
        with open(log_path, "w") as fh:
            fh.write(format_metrics(metrics))
    if checkpoint_path is not None:
        save_checkpoint(model, checkpoint_path)
    return model, metrics


def train(
    corpus: Corpus,
    cfg: TrainConfig,
    model: Model,
    *,
    log_path=None,
    checkpoint_path=None,
):
    """Masked pretraining on the corpus's noisy ids under the configured mode."""

    def step_fn(idx: int, step: int, alpha: float):
        utt = corpus.utterances[idx]
        mask_rng = seeded_rng(cfg.seed, _MASK_STREAM, idx, step)
        spec = sample_mask(utt.features.shape[0], cfg.mask_p, cfg.mask_l, mask_rng)
        breakdown, grads = pretrain_loss_and_grads(
            model, utt.features, utt.noisy_ids, spec, alpha
        )
        return breakdown.ce, breakdown.ctc, breakdown.combined, grads

    return _run_loop(
        corpus, cfg, model, step_fn, log_path, checkpoint_path, named_params(model)
    )


def finetune(
    corpus: Corpus,
    cfg: TrainConfig,
    model: Model,
    *,
    freeze_encoder: bool = False,
    log_path=None,
    checkpoint_path=None,
):
    """Full-utterance CTC training against deduplicated true ids (no masking).

    With freeze_encoder only the head is updated. Metrics reuse the pretraining
    log format with the CTC value in both loss columns and alpha fixed at 1.
    """

    def step_fn(idx: int, step: int, alpha: float):
        utt = corpus.utterances[idx]
        loss, grads = finetune_loss_and_grads(model, utt.features, utt.true_ids)
        return 0.0, loss, loss, grads

    trainable = named_params(model)
    if freeze_encoder:
        trainable = [(name, p) for name, p in trainable if name.startswith("head.")]
    cfg = replace(cfg, mode=TrainingMode(alpha=1.0, ce_warmup_steps=0))
    return _run_loop(corpus, cfg, model, step_fn, log_path, checkpoint_path, trainable)
