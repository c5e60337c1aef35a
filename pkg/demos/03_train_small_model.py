"""Generate a small synthetic corpus and pretrain under the joint objective.

Prints the loss trajectory for the CE-only baseline and a 50/50 CE+CTC mix,
plus a run with a CE warmup phase.
"""

import numpy as np

from segctc import (
    CorpusConfig,
    TrainConfig,
    TrainingMode,
    gen_corpus,
    init_model,
    seeded_rng,
    train,
)

corpus_cfg = CorpusConfig(
    utterances=60,
    frames=80,
    vocab=10,
    feature_dim=8,
    self_loop=0.9,
    sigma=0.4,
    jitter_k=2,
    jitter_q=0.5,
    corrupt_r=0.05,
    seed=0,
)
corpus = gen_corpus(corpus_cfg)
print(f"corpus: {len(corpus.utterances)} utterances, vocab {corpus.vocab}")


def run(mode, steps=400):
    model = init_model(
        feature_dim=corpus.feature_dim,
        model_dim=24,
        embed_dim=12,
        vocab=corpus.vocab,
        n_blocks=2,
        rng=seeded_rng(0, 2),
        attention=True,
        attn_window=6,
    )
    cfg = TrainConfig(
        steps=steps, batch_size=8, lr_peak=5e-3, lr_warmup_steps=40, mode=mode, seed=0
    )
    _, metrics = train(corpus, cfg, model)
    return metrics


def smoothed(metrics, lo, hi):
    return float(np.mean([m.combined for m in metrics[lo:hi]]))


for label, mode in [
    ("CE only (alpha=0)", TrainingMode(alpha=0.0)),
    ("joint 0.5 CE + 0.5 CTC", TrainingMode(alpha=0.5)),
    ("CTC with 100-step CE warmup", TrainingMode(alpha=1.0, ce_warmup_steps=100)),
]:
    metrics = run(mode)
    marks = "  ".join(
        f"@{at}={smoothed(metrics, at, at + 50):.3f}" for at in (0, 150, 350)
    )
    print(f"{label:30s} combined loss {marks}")

metrics = run(TrainingMode(alpha=1.0, ce_warmup_steps=100))
switch = [m.alpha for m in metrics]
print(f"warmup run effective alpha: steps 0-99 -> {set(switch[:100])}, 100+ -> {set(switch[100:])}")
