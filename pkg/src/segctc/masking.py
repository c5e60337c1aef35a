"""Span masking: sampling mask starts, merging spans, and embedding substitution."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError


@dataclass(frozen=True)
class MaskSpec:
    """Sorted, disjoint, non-adjacent masked [start, end) intervals over T frames.

    Each maximal interval is one masked region; touching or overlapping raw
    spans must be merged before construction (see merge_spans).
    """

    intervals: tuple[tuple[int, int], ...]
    total_frames: int

    def __post_init__(self):
        if self.total_frames < 1:
            raise ValueError("total_frames must be >= 1")
        prev_end = None
        for start, end in self.intervals:
            if not (0 <= start < end <= self.total_frames):
                raise ValueError(
                    f"interval [{start}, {end}) out of bounds for {self.total_frames} frames"
                )
            if prev_end is not None and start <= prev_end:
                raise ValueError("intervals must be sorted, disjoint and non-adjacent")
            prev_end = end

    @property
    def masked_frames(self) -> int:
        return sum(end - start for start, end in self.intervals)

    def frame_mask(self) -> np.ndarray:
        """Boolean vector over frames, True inside masked intervals."""
        mask = np.zeros(self.total_frames, dtype=bool)
        for start, end in self.intervals:
            mask[start:end] = True
        return mask


def merge_spans(spans, total_frames: int) -> MaskSpec:
    """Merge raw [start, end) spans (any order, overlaps allowed) into a MaskSpec.

    Touching spans merge into a single region, so every resulting interval is
    a maximal contiguous masked stretch.
    """
    clipped = sorted(
        (max(0, int(s)), min(int(e), total_frames)) for s, e in spans if int(e) > int(s)
    )
    merged: list[list[int]] = []
    for start, end in clipped:
        if merged and start <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], end)
        else:
            merged.append([start, end])
    return MaskSpec(tuple((s, e) for s, e in merged), total_frames)


def sample_mask(
    total_frames: int, start_prob: float, span_length: int, rng: np.random.Generator
) -> MaskSpec:
    """floor(start_prob * T) distinct start frames, each opening a span of
    `span_length` frames truncated at T; overlapping or touching spans merge.
    """
    if total_frames < 1:
        raise ValueError("total_frames must be >= 1")
    if not 0.0 <= start_prob <= 1.0:
        raise ValueError("start_prob must lie in [0, 1]")
    if span_length < 1:
        raise ValueError("span_length must be >= 1")
    n_starts = int(start_prob * total_frames)
    if n_starts == 0:
        return MaskSpec((), total_frames)
    starts = rng.choice(total_frames, size=n_starts, replace=False)
    return merge_spans(
        ((int(s), int(s) + span_length) for s in starts), total_frames
    )


def apply_mask(features, spec: MaskSpec, mask_embedding) -> np.ndarray:
    """Copy of `features` with every masked frame replaced by `mask_embedding`."""
    features = np.asarray(features)
    mask_embedding = np.asarray(mask_embedding)
    if features.ndim != 2:
        raise DimensionMismatchError(f"features must be (T, d), got {features.shape}")
    if mask_embedding.shape != (features.shape[1],):
        raise DimensionMismatchError(
            f"mask embedding of shape {mask_embedding.shape} does not match "
            f"feature dimension {features.shape[1]}"
        )
    if spec.total_frames != features.shape[0]:
        raise DimensionMismatchError(
            f"mask spec covers {spec.total_frames} frames, features have {features.shape[0]}"
        )
    out = features.copy()
    for start, end in spec.intervals:
        out[start:end] = mask_embedding
    return out
