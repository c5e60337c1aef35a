"""Posterior-degradation comparison between CE-trained and joint-trained models.

Trains both objectives on the same noisy corpus, then scores each model's
average reference posterior on a clean and a boundary-jittered evaluation set
that share features and true label sequences.
"""

from segctc import (
    CorpusConfig,
    TrainConfig,
    TrainingMode,
    avg_posterior,
    compare_models,
    eval_split,
    gen_corpus,
    init_model,
    seeded_rng,
    train,
)
from segctc.analysis import format_report

corpus_cfg = CorpusConfig(
    utterances=100,
    frames=100,
    vocab=12,
    feature_dim=12,
    self_loop=0.95,
    sigma=0.5,
    jitter_k=2,
    jitter_q=0.5,
    corrupt_r=0.05,
    seed=1,
)
corpus = gen_corpus(corpus_cfg, stream=0)
clean, jittered = eval_split(corpus_cfg, 50)
print(f"train: {len(corpus.utterances)} utterances; eval: {len(clean.utterances)} shared pairs")


def pretrain(alpha, steps=1200):
    model = init_model(
        feature_dim=corpus.feature_dim,
        model_dim=32,
        embed_dim=16,
        vocab=corpus.vocab,
        n_blocks=2,
        rng=seeded_rng(1, 2),
        attention=True,
        attn_window=3,
        nonlin="relu",
    )
    cfg = TrainConfig(
        steps=steps,
        batch_size=8,
        lr_peak=5e-3,
        lr_warmup_steps=120,
        mode=TrainingMode(alpha=alpha),
        seed=1,
    )
    train(corpus, cfg, model)
    return model


print("training CE baseline (alpha=0)...")
ce_model = pretrain(0.0)
print("training joint model (alpha=0.5)...")
joint_model = pretrain(0.5)

ce_report, ctc_report, verdict = compare_models(
    ce_model, joint_model, clean.utterances, jittered.utterances
)
print()
print(format_report(ce_report, ctc_report, verdict))
print("uniform-model floor:", 1.0 / (corpus.vocab + 1))
print("joint clean posterior:", avg_posterior(joint_model, clean.utterances))
