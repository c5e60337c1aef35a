"""Training losses over a log-probability lattice.

Three objectives share one (V+1)-way output head: frame-level cross-entropy on
masked frames, segment-wise CTC per masked region against deduplicated
targets, and their convex combination. CE is normalized by masked-frame count
and CTC by total target-token count so the two terms have comparable
magnitude. All gradients are with respect to the pre-softmax logits and are
exactly zero on unmasked rows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ctc import ctc_loss_and_grad
from .errors import DimensionMismatchError
from .masking import MaskSpec
from .targets import segment_targets


@dataclass(frozen=True)
class TrainingMode:
    """Loss mixing weight plus an optional initial CE-only phase."""

    alpha: float
    ce_warmup_steps: int = 0

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.ce_warmup_steps < 0:
            raise ValueError("ce_warmup_steps must be >= 0")


@dataclass(frozen=True)
class LossBreakdown:
    ce: float
    ctc: float
    combined: float
    masked_frames: int
    target_tokens: int


def effective_alpha(step: int, mode: TrainingMode) -> float:
    """0 while step < ce_warmup_steps, the configured alpha from then on."""
    if step < 0:
        raise ValueError("step must be >= 0")
    return 0.0 if step < mode.ce_warmup_steps else mode.alpha


def _check_inputs(log_probs, ids, spec: MaskSpec):
    log_probs = np.asarray(log_probs, dtype=float)
    ids = np.asarray(ids, dtype=int).reshape(-1)
    if log_probs.ndim != 2 or log_probs.shape[1] < 2:
        raise DimensionMismatchError(
            f"lattice must be (T, V+1) with V >= 1, got {log_probs.shape}"
        )
    frames = log_probs.shape[0]
    if ids.size != frames or spec.total_frames != frames:
        raise DimensionMismatchError(
            f"lattice has {frames} frames, ids {ids.size}, mask spec {spec.total_frames}"
        )
    if ids.size and (ids.min() < 0 or ids.max() >= log_probs.shape[1] - 1):
        raise DimensionMismatchError("frame ids must lie in [0, V); blank is never a label")
    return log_probs, ids


def masked_ce_loss(log_probs, ids, spec: MaskSpec) -> tuple[float, np.ndarray]:
    """Mean negative log-probability of each masked frame's id.

    Uses the full (V+1)-way softmax including blank, which is never a target.
    Returns (0, zero gradient) when nothing is masked.
    """
    log_probs, ids = _check_inputs(log_probs, ids, spec)
    grad = np.zeros_like(log_probs)
    rows = np.flatnonzero(spec.frame_mask())
    if rows.size == 0:
        return 0.0, grad
    n = rows.size
    loss = -float(log_probs[rows, ids[rows]].sum()) / n
    grad[rows] = np.exp(log_probs[rows]) / n
    grad[rows, ids[rows]] -= 1.0 / n
    return loss, grad


def masked_ctc_loss(log_probs, ids, spec: MaskSpec) -> tuple[float, np.ndarray]:
    """Per-region CTC against deduplicated targets, token-normalized.

    Each masked region is an independent CTC instance over its own rows; the
    region losses are summed and divided by the total number of target tokens.
    Returns (0, zero gradient) when there are no masked regions.
    """
    log_probs, ids = _check_inputs(log_probs, ids, spec)
    grad = np.zeros_like(log_probs)
    targets = segment_targets(ids, spec)
    total_tokens = sum(t.size for t in targets)
    if total_tokens == 0:
        return 0.0, grad
    total = 0.0
    for (start, end), target in zip(spec.intervals, targets):
        region_loss, region_grad = ctc_loss_and_grad(log_probs[start:end], target)
        total += region_loss
        grad[start:end] = region_grad
    return total / total_tokens, grad / total_tokens


def joint_loss(log_probs, ids, spec: MaskSpec, alpha: float) -> tuple[LossBreakdown, np.ndarray]:
    """combined = alpha * ctc + (1 - alpha) * ce, with the matching gradient mix."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    ce, ce_grad = masked_ce_loss(log_probs, ids, spec)
    ctc, ctc_grad = masked_ctc_loss(log_probs, ids, spec)
    combined = alpha * ctc + (1.0 - alpha) * ce
    grad = alpha * ctc_grad + (1.0 - alpha) * ce_grad
    tokens = sum(t.size for t in segment_targets(np.asarray(ids, dtype=int), spec))
    breakdown = LossBreakdown(
        ce=ce,
        ctc=ctc,
        combined=combined,
        masked_frames=spec.masked_frames,
        target_tokens=tokens,
    )
    return breakdown, grad
