"""Posterior-quality evaluation: average reference-label probability on
unmasked inputs, and the relative degradation between a clean and a
misaligned reference set.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyDatasetError
from .model import Model, model_logits
from .numerics import log_softmax


@dataclass(frozen=True)
class PosteriorReport:
    clean_prob: float
    degraded_prob: float
    relative_degradation: float


def avg_posterior(model: Model, utterances, refs: str = "noisy") -> float:
    """Frame-weighted mean probability assigned to each frame's reference id.

    The model runs on unmasked inputs. References are the utterances' noisy
    ids by default ("true" selects the ground-truth ids); blank is never a
    reference but stays in the softmax normalization.
    """
    if refs not in ("noisy", "true"):
        raise ValueError(f"refs must be 'noisy' or 'true', got {refs!r}")
    utterances = list(utterances)
    if not utterances:
        raise EmptyDatasetError("no utterances to evaluate")
    total = 0.0
    frames = 0
    for utt in utterances:
        log_probs = log_softmax(model_logits(model, utt.features), axis=1)
        ref = utt.noisy_ids if refs == "noisy" else utt.true_ids
        total += float(np.exp(log_probs[np.arange(ref.size), ref]).sum())
        frames += ref.size
    return total / frames


def degradation_report(clean_prob: float, degraded_prob: float) -> PosteriorReport:
    """Relative degradation (clean - degraded) / clean."""
    if clean_prob == 0.0:
        raise ZeroDivisionError("clean probability is zero")
    rel = (clean_prob - degraded_prob) / clean_prob
    return PosteriorReport(clean_prob, degraded_prob, rel)


def compare_models(
    ce_model: Model, ctc_model: Model, clean_utterances, jittered_utterances
) -> tuple[PosteriorReport, PosteriorReport, bool]:
    """Posterior degradation of both models on the same clean/misaligned pair.

    The verdict is True when the CTC-trained model degrades strictly less.
    """
    reports = []
    for model in (ce_model, ctc_model):
        clean = avg_posterior(model, clean_utterances)
        degraded = avg_posterior(model, jittered_utterances)
        reports.append(degradation_report(clean, degraded))
    ce_report, ctc_report = reports
    verdict = ctc_report.relative_degradation < ce_report.relative_degradation
    return ce_report, ctc_report, verdict


def format_report(ce_report, ctc_report, verdict) -> str:
    """Human-readable key: value report."""
    lines = [
        "# posterior averages are frame-weighted over all evaluation frames",
        f"ce_clean_prob: {ce_report.clean_prob:.6f}",
        f"ce_degraded_prob: {ce_report.degraded_prob:.6f}",
        f"ce_relative_degradation: {ce_report.relative_degradation:.6f}",
        f"ctc_clean_prob: {ctc_report.clean_prob:.6f}",
        f"ctc_degraded_prob: {ctc_report.degraded_prob:.6f}",
        f"ctc_relative_degradation: {ctc_report.relative_degradation:.6f}",
        f"ctc_degrades_less: {str(verdict).lower()}",
    ]
    return "\n".join(lines) + "\n"


def report_tsv(ce_report, ctc_report, verdict) -> str:
    """Machine-readable summary: one row per model."""
    lines = [
        "model\tclean_prob\tdegraded_prob\trelative_degradation",
        f"ce\t{ce_report.clean_prob:.10g}\t{ce_report.degraded_prob:.10g}"
        f"\t{ce_report.relative_degradation:.10g}",
        f"ctc\t{ctc_report.clean_prob:.10g}\t{ctc_report.degraded_prob:.10g}"
        f"\t{ctc_report.relative_degradation:.10g}",
        f"verdict\t{str(verdict).lower()}\t\t",
    ]
    return "\n".join(lines) + "\n"
