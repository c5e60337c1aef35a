"""Span masking and per-region target extraction.

Samples mask spans the way the trainer does, shows the merge into maximal
regions, and derives the deduplicated CTC target of each region.
"""

import numpy as np

from segctc import apply_mask, dedup, sample_mask, segment_targets, seeded_rng

rng = seeded_rng(7)
frames = 60

print("=== sampled mask spans ===")
spec = sample_mask(frames, start_prob=0.08, span_length=10, rng=rng)
print(f"{frames} frames, 8% starts, span 10 -> regions: {spec.intervals}")
print(f"masked frames: {spec.masked_frames} ({spec.masked_frames / frames:.0%})")

row = np.array(["."] * frames)
for start, end in spec.intervals:
    row[start:end] = "#"
print("".join(row))

print()
print("=== deduplication: misaligned sequences share one target ===")
reference = [187, 187, 288, 288, 288]
shifted = [187, 187, 187, 288, 288]
print(f"reference ids  {reference} -> {dedup(reference).tolist()}")
print(f"shifted ids    {shifted} -> {dedup(shifted).tolist()}")

print()
print("=== per-region targets ===")
ids = np.repeat([4, 9, 9, 2, 7], [14, 10, 8, 16, 12])
targets = segment_targets(ids, spec)
for (start, end), target in zip(spec.intervals, targets):
    print(f"region [{start:2d},{end:2d}): ids {ids[start:end].tolist()} -> target {target.tolist()}")

print()
print("=== mask embedding substitution ===")
features = np.round(np.arange(frames, dtype=float)[:, None] / 10, 1) * np.ones((1, 3))
masked = apply_mask(features, spec, mask_embedding=np.full(3, -1.0))
changed = int((masked != features).any(axis=1).sum())
print(f"rows replaced by the mask embedding: {changed} (equals masked frames: {spec.masked_frames})")
