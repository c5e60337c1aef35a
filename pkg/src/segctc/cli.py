"""Command-line entry point wiring configs, corpora, training and analysis.

Commands: gen-data, pretrain, finetune, analyze, export-blank. Configuration
is a flat key=value text file; command-line flags override file values, and
the effective configuration is echoed into every output directory. Exit code
is 0 on success, otherwise nonzero with one categorized error line on stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from .analysis import compare_models, format_report, report_tsv
from .errors import (
    ConfigError,
    DimensionMismatchError,
    LengthMismatchError,
    NonFiniteLossError,
    ShapeMismatchError,
    VersionMismatchError,
)
from .model import (
    EmbeddingHead,
    Model,
    extract_blank_params,
    init_finetune_head,
    init_model,
    load_checkpoint,
    read_blank_params,
    write_blank_params,
)
from .objectives import TrainingMode
from .seeding import seeded_rng
from .synthesis import CorpusConfig, eval_split, gen_corpus, load_corpus, save_corpus
from .trainer import TrainConfig, finetune, train

_MODEL_INIT_STREAM = 2
_HEAD_INIT_STREAM = 3


@dataclasses.dataclass(frozen=True)
class ExperimentConfig:
    """Flat experiment configuration; see SCHEMA for keys and defaults."""

    utterances: int = 200
    eval_utterances: int = 100
    frames: int = 100
    vocab: int = 20
    feature_dim: int = 16
    self_loop: float = 0.95
    sigma: float = 0.5
    jitter_k: int = 2
    jitter_q: float = 0.5
    corrupt_r: float = 0.05
    d_model: int = 32
    d_embed: int = 16
    layers: int = 2
    attention: int = 1
    attn_window: int = 3
    nonlin: str = "relu"
    n_pos: int = 8
    steps: int = 2000
    batch_size: int = 8
    lr_peak: float = 5e-3
    lr_warmup: int = 200
    schedule: str = "linear"
    beta1: float = 0.9
    beta2: float = 0.98
    adam_eps: float = 1e-8
    weight_decay: float = 0.01
    mask_p: float = 0.08
    mask_l: int = 10
    alpha: float = 0.5
    ce_warmup: int = 0
    grad_clip: float = 0.0
    seed: int = 0

    def corpus_config(self) -> CorpusConfig:
        return CorpusConfig(
            utterances=self.utterances,
            frames=self.frames,
            vocab=self.vocab,
            feature_dim=self.feature_dim,
            self_loop=self.self_loop,
            sigma=self.sigma,
            jitter_k=self.jitter_k,
            jitter_q=self.jitter_q,
            corrupt_r=self.corrupt_r,
            seed=self.seed,
        )

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            steps=self.steps,
            batch_size=self.batch_size,
            lr_peak=self.lr_peak,
            lr_warmup_steps=self.lr_warmup,
            schedule=self.schedule,
            adam_beta1=self.beta1,
            adam_beta2=self.beta2,
            adam_eps=self.adam_eps,
            weight_decay=self.weight_decay,
            mask_p=self.mask_p,
            mask_l=self.mask_l,
            mode=TrainingMode(alpha=self.alpha, ce_warmup_steps=self.ce_warmup),
            grad_clip=self.grad_clip,
            seed=self.seed,
        )


def _parse_bool(raw: str) -> int:
    if raw in ("0", "1"):
        return int(raw)
    raise ValueError(f"expected 0 or 1, got {raw!r}")


# Parser per key, derived from the dataclass field types.
SCHEMA = {}
for _field in dataclasses.fields(ExperimentConfig):
    if _field.name == "attention":
        SCHEMA[_field.name] = _parse_bool
    elif _field.type == "int":
        SCHEMA[_field.name] = int
    elif _field.type == "float":
        SCHEMA[_field.name] = float
    else:
        SCHEMA[_field.name] = str


def parse_config_file(path) -> dict:
    """key=value lines; '#' starts a comment; unknown keys are rejected."""
    values = {}
    text = Path(path).read_text()
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw_line!r}")
        key, _, raw_value = line.partition("=")
        key = key.strip()
        raw_value = raw_value.strip()
        if key not in SCHEMA:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            values[key] = SCHEMA[key](raw_value)
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key!r}: {exc}") from exc
    return values


def build_config(config_path, overrides: dict) -> ExperimentConfig:
    """File values first, then flag overrides (flags win)."""
    values = parse_config_file(config_path) if config_path else {}
    for key, value in overrides.items():
        if value is None:
            continue
        if key not in SCHEMA:
            raise ConfigError(f"unknown config key {key!r}")
        values[key] = SCHEMA[key](str(value))
    try:
        return ExperimentConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def config_text(cfg: ExperimentConfig) -> str:
    lines = [
        f"{field.name}={getattr(cfg, field.name)}"
        for field in dataclasses.fields(ExperimentConfig)
    ]
    return "\n".join(lines) + "\n"


def _require_dir(path) -> Path:
    out = Path(path)
    if not out.is_dir():
        raise FileNotFoundError(f"output directory does not exist: {out}")
    return out


def _echo_config(cfg: ExperimentConfig, out_dir: Path) -> None:
    (out_dir / "effective_config.txt").write_text(config_text(cfg))


def cmd_gen_data(cfg: ExperimentConfig, out_dir) -> None:
    """Write train, eval_clean and eval_jittered corpus files."""
    out = _require_dir(out_dir)
    train_corpus = gen_corpus(cfg.corpus_config(), stream=0)
    clean, jittered = eval_split(cfg.corpus_config(), cfg.eval_utterances)
    save_corpus(train_corpus, out / "train.corpus")
    save_corpus(clean, out / "eval_clean.corpus")
    save_corpus(jittered, out / "eval_jittered.corpus")
    _echo_config(cfg, out)


def cmd_pretrain(cfg: ExperimentConfig, corpus_path, out_dir) -> None:
    """Train a fresh model on a corpus's noisy ids; write checkpoint and log."""
    out = _require_dir(out_dir)
    corpus = load_corpus(corpus_path)
    model = init_model(
        feature_dim=corpus.feature_dim,
        model_dim=cfg.d_model,
        embed_dim=cfg.d_embed,
        vocab=corpus.vocab,
        n_blocks=cfg.layers,
        rng=seeded_rng(cfg.seed, _MODEL_INIT_STREAM),
        attention=bool(cfg.attention),
        nonlin=cfg.nonlin,
        n_pos=cfg.n_pos,
        attn_window=cfg.attn_window,
    )
    train(
        corpus,
        cfg.train_config(),
        model,
        log_path=out / "metrics.tsv",
        checkpoint_path=out / "checkpoint.bin",
    )
    _echo_config(cfg, out)


def cmd_finetune(
    cfg: ExperimentConfig,
    checkpoint_path,
    corpus_path,
    out_dir,
    blank_path=None,
    freeze_encoder: bool = False,
) -> None:
    """CTC finetuning with a fresh affine head over the corpus's label vocab."""
    out = _require_dir(out_dir)
    pretrained = load_checkpoint(checkpoint_path)
    corpus = load_corpus(corpus_path)
    if corpus.feature_dim != pretrained.encoder.feature_dim:
        raise DimensionMismatchError(
            f"corpus feature dim {corpus.feature_dim} does not match checkpoint "
            f"{pretrained.encoder.feature_dim}"
        )
    blank = read_blank_params(blank_path) if blank_path else None
    head = init_finetune_head(
        blank,
        vocab=corpus.vocab,
        model_dim=pretrained.encoder.model_dim,
        rng=seeded_rng(cfg.seed, _HEAD_INIT_STREAM),
    )
    model = Model(encoder=pretrained.encoder, head=head)
    finetune(
        corpus,
        cfg.train_config(),
        model,
        freeze_encoder=freeze_encoder,
        log_path=out / "metrics.tsv",
        checkpoint_path=out / "checkpoint.bin",
    )
    _echo_config(cfg, out)


def cmd_analyze(ce_checkpoint, ctc_checkpoint, clean_path, jittered_path, out_dir) -> str:
    """Compare posterior degradation of two checkpoints; returns the report text."""
    out = _require_dir(out_dir)
    ce_model = load_checkpoint(ce_checkpoint)
    ctc_model = load_checkpoint(ctc_checkpoint)
    clean = load_corpus(clean_path)
    jittered = load_corpus(jittered_path)
    if ce_model.encoder.feature_dim != ctc_model.encoder.feature_dim:
        raise DimensionMismatchError("checkpoints were trained on different feature dims")
    ce_report, ctc_report, verdict = compare_models(
        ce_model, ctc_model, clean.utterances, jittered.utterances
    )
    text = format_report(ce_report, ctc_report, verdict)
    (out / "report.txt").write_text(text)
    (out / "report.tsv").write_text(report_tsv(ce_report, ctc_report, verdict))
    return text


def cmd_export_blank(checkpoint_path, out_path) -> None:
    """Extract blank-related parameters from a checkpoint into a small file."""
    model = load_checkpoint(checkpoint_path)
    if not isinstance(model.head, EmbeddingHead):
        raise ConfigError("checkpoint has no embedding head to extract blank parameters from")
    write_blank_params(extract_blank_params(model.head), out_path)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key=value configuration file")
    parser.add_argument("--seed", type=int, help="override the seed")


def _add_train_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--alpha", type=float, help="CTC weight in the joint loss")
    parser.add_argument("--ce-warmup", type=int, help="steps of CE-only training")
    parser.add_argument("--mask-p", type=float, help="mask start probability")
    parser.add_argument("--mask-l", type=int, help="mask span length")
    parser.add_argument("--steps", type=int, help="training steps")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="segctc",
        description="Masked-prediction pretraining with segment-wise CTC objectives",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate train/eval corpus files")
    _add_common(p)
    p.add_argument("--out", required=True, help="existing output directory")

    p = sub.add_parser("pretrain", help="train a model on a corpus")
    _add_common(p)
    _add_train_flags(p)
    p.add_argument("--corpus", required=True, help="training corpus file")
    p.add_argument("--out", required=True, help="existing output directory")

    p = sub.add_parser("finetune", help="CTC-finetune a pretrained checkpoint")
    _add_common(p)
    _add_train_flags(p)
    p.add_argument("--checkpoint", required=True, help="pretrained checkpoint")
    p.add_argument("--corpus", required=True, help="labeled corpus file")
    p.add_argument("--load-blank", help="blank-parameter file to seed the head")
    p.add_argument("--freeze-encoder", action="store_true", help="update only the head")
    p.add_argument("--out", required=True, help="existing output directory")

    p = sub.add_parser("analyze", help="posterior degradation report for two checkpoints")
    _add_common(p)
    p.add_argument("--ce-checkpoint", required=True)
    p.add_argument("--ctc-checkpoint", required=True)
    p.add_argument("--eval-clean", required=True)
    p.add_argument("--eval-jittered", required=True)
    p.add_argument("--out", required=True, help="existing output directory")

    p = sub.add_parser("export-blank", help="write blank-related parameters to a file")
    _add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True, help="output file path")

    return parser


_ERROR_CATEGORIES = [
    (ConfigError, "config", 2),
    (VersionMismatchError, "format", 4),
    (NonFiniteLossError, "numeric", 5),
    ((DimensionMismatchError, ShapeMismatchError, LengthMismatchError), "data", 6),
    ((FileNotFoundError, IsADirectoryError, PermissionError, OSError), "io", 3),
]


def _categorize(exc: Exception) -> tuple[str, int]:
    for types, category, code in _ERROR_CATEGORIES:
        if isinstance(exc, types):
            return category, code
    return "internal", 1


def _overrides(args: argparse.Namespace) -> dict:
    mapping = {
        "seed": "seed",
        "alpha": "alpha",
        "ce_warmup": "ce_warmup",
        "mask_p": "mask_p",
        "mask_l": "mask_l",
        "steps": "steps",
    }
    return {
        key: getattr(args, attr)
        for attr, key in mapping.items()
        if hasattr(args, attr) and getattr(args, attr) is not None
    }


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command in ("gen-data", "pretrain", "finetune"):
            cfg = build_config(args.config, _overrides(args))
        if args.command == "gen-data":
            cmd_gen_data(cfg, args.out)
        elif args.command == "pretrain":
            cmd_pretrain(cfg, args.corpus, args.out)
        elif args.command == "finetune":
            cmd_finetune(
                cfg,
                args.checkpoint,
                args.corpus,
                args.out,
                blank_path=args.load_blank,
                freeze_encoder=args.freeze_encoder,
            )
        elif args.command == "analyze":
            text = cmd_analyze(
                args.ce_checkpoint,
                args.ctc_checkpoint,
                args.eval_clean,
                args.eval_jittered,
                args.out,
            )
            _echo_config(build_config(args.config, _overrides(args)), Path(args.out))
            sys.stdout.write(text)
        elif args.command == "export-blank":
            cmd_export_blank(args.checkpoint, args.out)
    except Exception as exc:  # noqa: BLE001 - single reporting point for the CLI
        category, code = _categorize(exc)
        print(f"error[{category}]: {exc}", file=sys.stderr)
        return code
    return 0


if __name__ == "__main__":
    sys.exit(main())
