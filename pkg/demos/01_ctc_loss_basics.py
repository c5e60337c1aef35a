"""Walk through the CTC loss on tiny lattices.

Shows the path-sum definition against the brute-force oracle, the collapse
rule on greedy decodes, and the gradient's occupancy structure.
"""

import numpy as np

from segctc import (
    brute_force_ctc,
    ctc_loss,
    ctc_loss_and_grad,
    greedy_collapse,
    log_softmax,
)

rng = np.random.default_rng(0)

print("=== single frame, uniform over {A, B, blank} ===")
lattice = np.log(np.full((1, 3), 1 / 3))
print(f"loss for target [A]: {ctc_loss(lattice, [0]):.6f}  (-log 1/3 = {np.log(3):.6f})")

print()
print("=== two frames, target [A]: three paths ===")
lattice = log_softmax(rng.normal(size=(2, 3)), axis=1)
p = np.exp(lattice)
by_hand = -np.log(p[0, 2] * p[1, 0] + p[0, 0] * p[1, 2] + p[0, 0] * p[1, 0])
print(f"paths (blank,A), (A,blank), (A,A) summed by hand: {by_hand:.6f}")
print(f"dynamic program:                                  {ctc_loss(lattice, [0]):.6f}")
print(f"brute-force oracle:                               {brute_force_ctc(lattice, [0]):.6f}")

print()
print("=== oracle agreement on random instances ===")
worst = 0.0
for _ in range(200):
    frames = int(rng.integers(1, 7))
    vocab = int(rng.integers(1, 5))
    lattice = log_softmax(rng.normal(size=(frames, vocab + 1)), axis=1)
    target = []
    for _ in range(int(rng.integers(0, min(frames, 3) + 1))):
        c = int(rng.integers(vocab))
        if not target or c != target[-1]:
            target.append(c)
    worst = max(worst, abs(ctc_loss(lattice, target) - brute_force_ctc(lattice, target)))
print(f"max |dp - brute force| over 200 instances: {worst:.2e}")

print()
print("=== greedy decode and collapse ===")
lattice = np.full((6, 3), -8.0)
for t, k in enumerate([2, 0, 0, 2, 0, 1]):  # blank A A blank A B
    lattice[t, k] = 0.0
print(f"argmax path [blank A A blank A B] collapses to: {greedy_collapse(lattice)}")

print()
print("=== gradient = softmax - occupancy ===")
lattice = log_softmax(rng.normal(size=(5, 4)), axis=1)
loss, grad = ctc_loss_and_grad(lattice, [1, 0])
gamma = np.exp(lattice) - grad
print(f"occupancy rows sum to one: {gamma.sum(axis=1)}")
print(f"occupancy of the first label over time: {np.round(gamma[:, 1], 3)}")
