"""Desk-scale masked-prediction encoder with an embedding-similarity head.

Fixed sinusoidal position channels are appended to the input frames (masked
prediction needs to know where a masked frame sits; without any positional
signal every masked frame would produce the same output). An input projection
maps to the model width, then each block applies affine -> nonlinearity ->
optional single-head self-attention with a residual connection.

The pretraining head scores hidden states against per-class embeddings,
logits[t, k] = E_k . (W h_t + b), with the blank class at the last index.
Under this bilinear form the blank class collapses exactly to one affine row
(W^T E_blank, b . E_blank), which can seed the blank row of a fresh affine
head for a downstream CTC task.

Checkpoint format (version 1, little-endian):
    magic       4 bytes  b"SCTC"
    version     u32      1
    head_kind   u32      0 = embedding-similarity, 1 = direct affine
    d           u32      input feature dimension
    d_model     u32      hidden width
    d_embed     u32      class-embedding width (0 for affine heads)
    vocab       u32      V; the output layer has V+1 classes (last = blank)
    n_blocks    u32      number of encoder blocks
    n_pos       u32      sinusoidal position channels
    nonlin      u32      0 = tanh, 1 = relu
    attn_window u32      attention band half-width (0 = full attention)
    attn_flags  u32 * n_blocks   1 if the block carries attention weights
then raw float32 parameter blobs, row-major, in this order:
    mask_embedding, input_weight, input_bias,
    per block: weight, bias, [wq, wk, wv when the flag is set],
    head: proj_weight, proj_bias, embeddings   (embedding head)
          weight, bias                         (affine head)

Blank-parameter file (version 1, little-endian):
    magic b"BLNK", version u32, d_model u32, then float64 weight (d_model)
    and one float64 bias.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, VersionMismatchError

CHECKPOINT_MAGIC = b"SCTC"
CHECKPOINT_VERSION = 1
BLANK_MAGIC = b"BLNK"
BLANK_VERSION = 1
POSITION_BASE = 100.0

_NONLIN_CODES = {"tanh": 0, "relu": 1}
_NONLIN_NAMES = {code: name for name, code in _NONLIN_CODES.items()}


@dataclass
class AttentionParams:
    wq: np.ndarray
    wk: np.ndarray
    wv: np.ndarray


@dataclass
class EncoderBlock:
    weight: np.ndarray
    bias: np.ndarray
    attention: AttentionParams | None = None


@dataclass
class EncoderParams:
    mask_embedding: np.ndarray
    input_weight: np.ndarray
    input_bias: np.ndarray
    blocks: list[EncoderBlock]
    nonlin: str = "tanh"
    n_pos: int = 8
    attn_window: int = 0  # 0 = full attention; w > 0 restricts to |i - j| <= w

    @property
    def feature_dim(self) -> int:
        return self.mask_embedding.shape[0]

    @property
    def model_dim(self) -> int:
        return self.input_weight.shape[0]


@dataclass
class EmbeddingHead:
    """logits[t, k] = embeddings[k] . (proj_weight @ h_t + proj_bias)."""

    proj_weight: np.ndarray
    proj_bias: np.ndarray
    embeddings: np.ndarray

    @property
    def vocab(self) -> int:
        return self.embeddings.shape[0] - 1


@dataclass
class AffineHead:
    """logits = h @ weight.T + bias, blank at the last row."""

    weight: np.ndarray
    bias: np.ndarray

    @property
    def vocab(self) -> int:
        return self.weight.shape[0] - 1


@dataclass
class BlankParams:
    """The blank class's effective affine row under an embedding head."""

    weight: np.ndarray
    bias: float


@dataclass
class Model:
    encoder: EncoderParams
    head: EmbeddingHead | AffineHead


def position_channels(total_frames: int, n_pos: int) -> np.ndarray:
    """Fixed sin/cos channels with geometrically spaced wavelengths."""
    if n_pos % 2 != 0:
        raise ValueError("n_pos must be even")
    out = np.empty((total_frames, n_pos))
    if n_pos == 0:
        return out
    t = np.arange(total_frames, dtype=float)[:, None]
    inv_freq = POSITION_BASE ** (-2.0 * np.arange(n_pos // 2, dtype=float) / n_pos)
    angles = t * inv_freq[None, :]
    out[:, 0::2] = np.sin(angles)
    out[:, 1::2] = np.cos(angles)
    return out


def init_model(
    feature_dim: int,
    model_dim: int,
    embed_dim: int,
    vocab: int,
    n_blocks: int,
    rng: np.random.Generator,
    *,
    attention=True,
    nonlin: str = "tanh",
    n_pos: int = 8,
    attn_window: int = 0,
) -> Model:
    """Fresh model: affine weights uniform scaled by 1/sqrt(fan_in), biases
    zero, embeddings Gaussian scaled by 1/sqrt(embed_dim).

    `attention` is a bool applied to every block or a per-block sequence.
    `attn_window` > 0 restricts attention to a band of that half-width.
    """
    if nonlin not in _NONLIN_CODES:
        raise ValueError(f"unknown nonlinearity {nonlin!r}")
    if isinstance(attention, bool):
        attention = [attention] * n_blocks
    attention = [bool(a) for a in attention]
    if len(attention) != n_blocks:
        raise ValueError("attention flags must match the number of blocks")

    def affine(out_dim: int, in_dim: int) -> np.ndarray:
        bound = 1.0 / np.sqrt(in_dim)
        return rng.uniform(-bound, bound, size=(out_dim, in_dim))

    d_in = feature_dim + n_pos
    blocks = []
    for has_attn in attention:
        attn = None
        if has_attn:
            attn = AttentionParams(
                wq=affine(model_dim, model_dim),
                wk=affine(model_dim, model_dim),
                wv=affine(model_dim, model_dim),
            )
        blocks.append(EncoderBlock(affine(model_dim, model_dim), np.zeros(model_dim), attn))
    encoder = EncoderParams(
        mask_embedding=rng.uniform(-1.0, 1.0, size=feature_dim) / np.sqrt(feature_dim),
        input_weight=affine(model_dim, d_in),
        input_bias=np.zeros(model_dim),
        blocks=blocks,
        nonlin=nonlin,
        n_pos=n_pos,
        attn_window=attn_window,
    )
    head = EmbeddingHead(
        proj_weight=affine(embed_dim, model_dim),
        proj_bias=np.zeros(embed_dim),
        embeddings=rng.normal(size=(vocab + 1, embed_dim)) / np.sqrt(embed_dim),
    )
    return Model(encoder=encoder, head=head)


def _nonlin(u: np.ndarray, kind: str) -> np.ndarray:
    if kind == "tanh":
        return np.tanh(u)
    if kind == "relu":
        return np.maximum(u, 0.0)
    raise ValueError(f"unknown nonlinearity {kind!r}")


def _nonlin_deriv(u: np.ndarray, v: np.ndarray, kind: str) -> np.ndarray:
    if kind == "tanh":
        return 1.0 - v * v
    if kind == "relu":
        return (u > 0.0).astype(float)
    raise ValueError(f"unknown nonlinearity {kind!r}")


def _encoder_forward(features, params: EncoderParams):
    x = np.asarray(features, dtype=float)
    if x.ndim != 2 or x.shape[1] != params.feature_dim:
        raise DimensionMismatchError(
            f"features of shape {x.shape} do not match feature dimension {params.feature_dim}"
        )
    frames = x.shape[0]
    xin = np.concatenate([x, position_channels(frames, params.n_pos)], axis=1)
    h = xin @ params.input_weight.T + params.input_bias
    cache = {"xin": xin, "blocks": []}
    scale = 1.0 / np.sqrt(params.model_dim)
    band = None
    if params.attn_window > 0:
        offsets = np.arange(frames)
        band = np.abs(offsets[:, None] - offsets[None, :]) > params.attn_window
    for block in params.blocks:
        h_in = h
        u = h_in @ block.weight.T + block.bias
        v = _nonlin(u, params.nonlin)
        record = {"h_in": h_in, "u": u, "v": v}
        if block.attention is not None:
            q = v @ block.attention.wq.T
            k = v @ block.attention.wk.T
            w = v @ block.attention.wv.T
            scores = (q @ k.T) * scale
            if band is not None:
                scores[band] = -np.inf
            scores -= scores.max(axis=1, keepdims=True)
            att = np.exp(scores)
            att /= att.sum(axis=1, keepdims=True)
            h = v + att @ w
            record.update({"q": q, "k": k, "w": w, "att": att})
        else:
            h = v
        cache["blocks"].append(record)
    return h, cache


def encoder_forward(features, params: EncoderParams) -> np.ndarray:
    """Hidden states (T, d_model) for already-masked input frames."""
    return _encoder_forward(features, params)[0]


def _encoder_backward(dh, params: EncoderParams, cache) -> dict[str, np.ndarray]:
    grads: dict[str, np.ndarray] = {}
    scale = 1.0 / np.sqrt(params.model_dim)
    for i in range(len(params.blocks) - 1, -1, -1):
        block = params.blocks[i]
        rec = cache["blocks"][i]
        if block.attention is not None:
            att, q, k, w, v = rec["att"], rec["q"], rec["k"], rec["w"], rec["v"]
            do = dh
            dw = att.T @ do
            datt = do @ w.T
            dscores = att * (datt - (datt * att).sum(axis=1, keepdims=True))
            dq = (dscores @ k) * scale
            dk = (dscores.T @ q) * scale
            grads[f"encoder.blocks.{i}.attention.wq"] = dq.T @ v
            grads[f"encoder.blocks.{i}.attention.wk"] = dk.T @ v
            grads[f"encoder.blocks.{i}.attention.wv"] = dw.T @ v
            dv = dh + dq @ block.attention.wq + dk @ block.attention.wk + dw @ block.attention.wv
        else:
            dv = dh
        du = dv * _nonlin_deriv(rec["u"], rec["v"], params.nonlin)
        grads[f"encoder.blocks.{i}.weight"] = du.T @ rec["h_in"]
        grads[f"encoder.blocks.{i}.bias"] = du.sum(axis=0)
        dh = du @ block.weight
    grads["encoder.input_weight"] = dh.T @ cache["xin"]
    grads["encoder.input_bias"] = dh.sum(axis=0)
    dxin = dh @ params.input_weight
    grads["_dx"] = dxin[:, : params.feature_dim]
    return grads


def compute_logits(hidden, head) -> np.ndarray:
    """Per-frame class scores (T, V+1) for either head type."""
    hidden = np.asarray(hidden, dtype=float)
    if isinstance(head, EmbeddingHead):
        if hidden.shape[1] != head.proj_weight.shape[1]:
            raise DimensionMismatchError(
                f"hidden width {hidden.shape[1]} does not match projection "
                f"input {head.proj_weight.shape[1]}"
            )
        proj = hidden @ head.proj_weight.T + head.proj_bias
        return proj @ head.embeddings.T
    if isinstance(head, AffineHead):
        if hidden.shape[1] != head.weight.shape[1]:
            raise DimensionMismatchError(
                f"hidden width {hidden.shape[1]} does not match head input "
                f"{head.weight.shape[1]}"
            )
        return hidden @ head.weight.T + head.bias
    raise TypeError(f"unknown head type {type(head).__name__}")


def model_forward(model: Model, features) -> tuple[np.ndarray, dict]:
    """Logits (T, V+1) plus the cache needed by model_backward."""
    hidden, cache = _encoder_forward(features, model.encoder)
    cache["hidden"] = hidden
    if isinstance(model.head, EmbeddingHead):
        cache["proj"] = hidden @ model.head.proj_weight.T + model.head.proj_bias
        logits = cache["proj"] @ model.head.embeddings.T
    else:
        logits = hidden @ model.head.weight.T + model.head.bias
    return logits, cache


def model_logits(model: Model, features) -> np.ndarray:
    return model_forward(model, features)[0]


def model_backward(model: Model, cache, dlogits, masked_rows=None) -> dict[str, np.ndarray]:
    """Parameter gradients for a loss whose logit gradient is `dlogits`.

    `masked_rows` are the frame indices whose input was the mask embedding;
    their input gradients accumulate into the mask embedding's gradient.
    """
    dlogits = np.asarray(dlogits, dtype=float)
    hidden = cache["hidden"]
    grads: dict[str, np.ndarray] = {}
    if isinstance(model.head, EmbeddingHead):
        proj = cache["proj"]
        dproj = dlogits @ model.head.embeddings
        grads["head.embeddings"] = dlogits.T @ proj
        grads["head.proj_weight"] = dproj.T @ hidden
        grads["head.proj_bias"] = dproj.sum(axis=0)
        dh = dproj @ model.head.proj_weight
    else:
        grads["head.weight"] = dlogits.T @ hidden
        grads["head.bias"] = dlogits.sum(axis=0)
        dh = dlogits @ model.head.weight
    grads.update(_encoder_backward(dh, model.encoder, cache))
    dx = grads.pop("_dx")
    if masked_rows is not None and len(masked_rows) > 0:
        grads["encoder.mask_embedding"] = dx[masked_rows].sum(axis=0)
    else:
        grads["encoder.mask_embedding"] = np.zeros_like(model.encoder.mask_embedding)
    return grads


def named_params(model: Model) -> list[tuple[str, np.ndarray]]:
    """All trainable arrays in the fixed order used by the optimizer and
    the checkpoint format."""
    enc = model.encoder
    out = [
        ("encoder.mask_embedding", enc.mask_embedding),
        ("encoder.input_weight", enc.input_weight),
        ("encoder.input_bias", enc.input_bias),
    ]
    for i, block in enumerate(enc.blocks):
        out.append((f"encoder.blocks.{i}.weight", block.weight))
        out.append((f"encoder.blocks.{i}.bias", block.bias))
        if block.attention is not None:
            out.append((f"encoder.blocks.{i}.attention.wq", block.attention.wq))
            out.append((f"encoder.blocks.{i}.attention.wk", block.attention.wk))
            out.append((f"encoder.blocks.{i}.attention.wv", block.attention.wv))
    if isinstance(model.head, EmbeddingHead):
        out.append(("head.proj_weight", model.head.proj_weight))
        out.append(("head.proj_bias", model.head.proj_bias))
        out.append(("head.embeddings", model.head.embeddings))
    else:
        out.append(("head.weight", model.head.weight))
        out.append(("head.bias", model.head.bias))
    return out


def extract_blank_params(head: EmbeddingHead) -> BlankParams:
    """Collapse the blank class to a direct affine row:
    weight = proj_weight^T @ E_blank, bias = proj_bias . E_blank."""
    blank_embedding = head.embeddings[-1]
    return BlankParams(
        weight=head.proj_weight.T @ blank_embedding,
        bias=float(head.proj_bias @ blank_embedding),
    )


def init_finetune_head(
    blank: BlankParams | None,
    vocab: int,
    model_dim: int,
    rng: np.random.Generator,
) -> AffineHead:
    """Fresh affine head for a (possibly different) vocabulary.

    All rows are drawn from the default initializer; when blank parameters
    are given they overwrite the blank row and bias, so two heads built from
    the same seed differ only in that row.
    """
    bound = 1.0 / np.sqrt(model_dim)
    weight = rng.uniform(-bound, bound, size=(vocab + 1, model_dim))
    bias = np.zeros(vocab + 1)
    if blank is not None:
        if blank.weight.shape != (model_dim,):
            raise DimensionMismatchError(
                f"blank weight of shape {blank.weight.shape} does not match "
                f"model width {model_dim}"
            )
        weight[-1] = blank.weight
        bias[-1] = blank.bias
    return AffineHead(weight=weight, bias=bias)


def _write_array(fh, arr: np.ndarray) -> None:
    fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def _read_array(fh, shape) -> np.ndarray:
    count = int(np.prod(shape)) if shape else 1
    raw = fh.read(4 * count)
    if len(raw) != 4 * count:
        raise VersionMismatchError("checkpoint file is truncated")
    return np.frombuffer(raw, dtype="<f4").astype(np.float64).reshape(shape)


def save_checkpoint(model: Model, path) -> None:
    enc = model.encoder
    head = model.head
    head_kind = 0 if isinstance(head, EmbeddingHead) else 1
    embed_dim = head.embeddings.shape[1] if isinstance(head, EmbeddingHead) else 0
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(
            struct.pack(
                "<10I",
                CHECKPOINT_VERSION,
                head_kind,
                enc.feature_dim,
                enc.model_dim,
                embed_dim,
                head.vocab,
                len(enc.blocks),
                enc.n_pos,
                _NONLIN_CODES[enc.nonlin],
                enc.attn_window,
            )
        )
        for block in enc.blocks:
            fh.write(struct.pack("<I", 1 if block.attention is not None else 0))
        for _, arr in named_params(model):
            _write_array(fh, arr)


def load_checkpoint(path) -> Model:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != CHECKPOINT_MAGIC:
            raise VersionMismatchError(f"bad checkpoint magic {magic!r}")
        raw = fh.read(40)
        if len(raw) != 40:
            raise VersionMismatchError("checkpoint file is truncated")
        (
            version,
            head_kind,
            d,
            d_model,
            d_embed,
            vocab,
            n_blocks,
            n_pos,
            nonlin_code,
            attn_window,
        ) = struct.unpack("<10I", raw)
        if version != CHECKPOINT_VERSION:
            raise VersionMismatchError(f"unsupported checkpoint version {version}")
        if head_kind not in (0, 1) or nonlin_code not in _NONLIN_NAMES:
            raise VersionMismatchError("corrupt checkpoint header")
        flags_raw = fh.read(4 * n_blocks)
        if len(flags_raw) != 4 * n_blocks:
            raise VersionMismatchError("checkpoint file is truncated")
        attn_flags = struct.unpack(f"<{n_blocks}I", flags_raw) if n_blocks else ()
        mask_embedding = _read_array(fh, (d,))
        input_weight = _read_array(fh, (d_model, d + n_pos))
        input_bias = _read_array(fh, (d_model,))
        blocks = []
        for flag in attn_flags:
            weight = _read_array(fh, (d_model, d_model))
            bias = _read_array(fh, (d_model,))
            attn = None
            if flag:
                attn = AttentionParams(
                    wq=_read_array(fh, (d_model, d_model)),
                    wk=_read_array(fh, (d_model, d_model)),
                    wv=_read_array(fh, (d_model, d_model)),
                )
            blocks.append(EncoderBlock(weight, bias, attn))
        encoder = EncoderParams(
            mask_embedding=mask_embedding,
            input_weight=input_weight,
            input_bias=input_bias,
            blocks=blocks,
            nonlin=_NONLIN_NAMES[nonlin_code],
            n_pos=n_pos,
            attn_window=attn_window,
        )
        if head_kind == 0:
            head = EmbeddingHead(
                proj_weight=_read_array(fh, (d_embed, d_model)),
                proj_bias=_read_array(fh, (d_embed,)),
                embeddings=_read_array(fh, (vocab + 1, d_embed)),
            )
        else:
            head = AffineHead(
                weight=_read_array(fh, (vocab + 1, d_model)),
                bias=_read_array(fh, (vocab + 1,)),
            )
    return Model(encoder=encoder, head=head)


def write_blank_params(blank: BlankParams, path) -> None:
    with open(path, "wb") as fh:
        fh.write(BLANK_MAGIC)
        fh.write(struct.pack("<II", BLANK_VERSION, blank.weight.shape[0]))
        fh.write(np.ascontiguousarray(blank.weight, dtype="<f8").tobytes())
        fh.write(struct.pack("<d", blank.bias))


def read_blank_params(path) -> BlankParams:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != BLANK_MAGIC:
            raise VersionMismatchError(f"bad blank-parameter magic {magic!r}")
        raw = fh.read(8)
        if len(raw) != 8:
            raise VersionMismatchError("blank-parameter file is truncated")
        version, d_model = struct.unpack("<II", raw)
        if version != BLANK_VERSION:
            raise VersionMismatchError(f"unsupported blank-parameter version {version}")
        body = fh.read(8 * d_model + 8)
        if len(body) != 8 * d_model + 8:
            raise VersionMismatchError("blank-parameter file is truncated")
        weight = np.frombuffer(body[: 8 * d_model], dtype="<f8").copy()
        (bias,) = struct.unpack("<d", body[8 * d_model :])
    return BlankParams(weight=weight, bias=bias)
