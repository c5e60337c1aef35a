"""CTC loss and gradient over a log-probability lattice, plus a brute-force oracle.

Conventions: a lattice is a (T, V+1) array of per-frame log-probabilities whose
rows each sum to 1 after exponentiation; the blank class sits at the last
column (index V). Targets are integer sequences over [0, V), never blank.
The loss is computed with the extended-label forward recursion (labels
interleaved with blanks, 2U+1 states), entirely in the log domain.
"""

from __future__ import annotations

import numpy as np

from .errors import EnumerationTooLargeError, InfeasibleTargetError
from .numerics import NEG_INF, log_sum_exp

ENUMERATION_LIMIT = 10_000_000
_ENUMERATION_CHUNK = 1 << 16


def collapse_path(path, blank: int) -> list[int]:
    """Map a frame-level path to labels: collapse adjacent repeats, drop blanks."""
    out: list[int] = []
    prev = None
    for sym in path:
        sym = int(sym)
        if sym != prev:
            if sym != blank:
                out.append(sym)
            prev = sym
    return out


def _extended_labels(target: np.ndarray, blank: int) -> np.ndarray:
    ext = np.full(2 * target.size + 1, blank, dtype=int)
    ext[1::2] = target
    return ext


def _skip_allowed(ext: np.ndarray, blank: int) -> np.ndarray:
    """Whether state s may be entered directly from state s-2."""
    ok = np.zeros(ext.size, dtype=bool)
    if ext.size > 2:
        ok[2:] = (ext[2:] != blank) & (ext[2:] != ext[:-2])
    return ok


def _forward(lattice: np.ndarray, ext: np.ndarray, skip_ok: np.ndarray):
    T = lattice.shape[0]
    S = ext.size
    emit = lattice[:, ext]
    alpha = np.full((T, S), NEG_INF)
    alpha[0, 0] = emit[0, 0]
    if S > 1:
        alpha[0, 1] = emit[0, 1]
    for t in range(1, T):
        prev = alpha[t - 1]
        step = np.full(S, NEG_INF)
        step[1:] = prev[:-1]
        skip = np.full(S, NEG_INF)
        skip[2:] = prev[:-2]
        skip[~skip_ok] = NEG_INF
        alpha[t] = np.logaddexp(np.logaddexp(prev, step), skip) + emit[t]
    if S > 1:
        total = float(np.logaddexp(alpha[-1, -1], alpha[-1, -2]))
    else:
        total = float(alpha[-1, -1])
    return alpha, total


def _backward(lattice: np.ndarray, ext: np.ndarray, skip_ok: np.ndarray) -> np.ndarray:
    """Suffix log-probabilities excluding the emission at the current frame."""
    T = lattice.shape[0]
    S = ext.size
    emit = lattice[:, ext]
    beta = np.full((T, S), NEG_INF)
    beta[-1, -1] = 0.0
    if S > 1:
        beta[-1, -2] = 0.0
    for t in range(T - 2, -1, -1):
        nxt = emit[t + 1] + beta[t + 1]
        step = np.full(S, NEG_INF)
        step[:-1] = nxt[1:]
        skip = np.full(S, NEG_INF)
        if S > 2:
            skip[:-2] = np.where(skip_ok[2:], nxt[2:], NEG_INF)
        beta[t] = np.logaddexp(np.logaddexp(nxt, step), skip)
    return beta


def _prepare(lattice, target):
    lattice = np.asarray(lattice, dtype=float)
    target = np.asarray(target, dtype=int).reshape(-1)
    if lattice.ndim != 2 or lattice.shape[1] < 2:
        raise ValueError(f"lattice must be (T, V+1) with V >= 1, got {lattice.shape}")
    if target.size > lattice.shape[0]:
        raise InfeasibleTargetError(
            f"target of length {target.size} cannot fit in {lattice.shape[0]} frames"
        )
    blank = lattice.shape[1] - 1
    if target.size and (target.min() < 0 or target.max() >= blank):
        raise ValueError("target labels must lie in [0, V)")
    return lattice, target, blank


def ctc_loss(lattice, target) -> float:
    """Negative log-probability of all paths collapsing to `target`.

    +inf when no path can produce the target (e.g. adjacent repeats with no
    room for a separating blank). Raises InfeasibleTargetError when the target
    is longer than the lattice.
    """
    lattice, target, blank = _prepare(lattice, target)
    ext = _extended_labels(target, blank)
    _, total = _forward(lattice, ext, _skip_allowed(ext, blank))
    return -total


def ctc_loss_and_grad(lattice, target) -> tuple[float, np.ndarray]:
    """Loss plus its gradient with respect to the pre-softmax logits.

    The gradient is softmax - gamma, where gamma[t, k] is the posterior
    occupancy of class k at frame t. For an unreachable target (infinite
    loss) the gradient is left at zero.
    """
    lattice, target, blank = _prepare(lattice, target)
    ext = _extended_labels(target, blank)
    skip_ok = _skip_allowed(ext, blank)
    alpha, total = _forward(lattice, ext, skip_ok)
    if total == NEG_INF:
        return float("inf"), np.zeros_like(lattice)
    beta = _backward(lattice, ext, skip_ok)
    state_post = np.exp(alpha + beta - total)
    gamma = np.zeros_like(lattice)
    np.add.at(gamma.T, ext, state_post.T)
    return -total, np.exp(lattice) - gamma


def ctc_grad(lattice, target) -> np.ndarray:
    """Gradient of ctc_loss with respect to the pre-softmax logits."""
    return ctc_loss_and_grad(lattice, target)[1]


def brute_force_ctc(lattice, target) -> float:
    """Oracle: enumerate every length-T path and sum those collapsing to `target`.

    Exact but exponential; guarded to (V+1)^T <= ENUMERATION_LIMIT.
    """
    lattice = np.asarray(lattice, dtype=float)
    target = np.asarray(target, dtype=int).reshape(-1)
    T, C = lattice.shape
    blank = C - 1
    n_paths = C**T
    if n_paths > ENUMERATION_LIMIT:
        raise EnumerationTooLargeError(
            f"{C}^{T} = {n_paths} paths exceeds the {ENUMERATION_LIMIT} limit"
        )
    u = target.size
    powers = C ** np.arange(T - 1, -1, -1, dtype=np.int64)
    matched: list[np.ndarray] = []
    for lo in range(0, n_paths, _ENUMERATION_CHUNK):
        idx = np.arange(lo, min(lo + _ENUMERATION_CHUNK, n_paths), dtype=np.int64)
        paths = (idx[:, None] // powers[None, :]) % C
        logp = lattice[np.arange(T)[None, :], paths].sum(axis=1)
        keep = np.ones(paths.shape, dtype=bool)
        keep[:, 1:] = paths[:, 1:] != paths[:, :-1]
        keep &= paths != blank
        candidates = keep.sum(axis=1) == u
        if not candidates.any():
            continue
        if u == 0:
            matched.append(logp[candidates])
            continue
        collapsed = paths[candidates][keep[candidates]].reshape(-1, u)
        hits = (collapsed == target[None, :]).all(axis=1)
        matched.append(logp[candidates][hits])
    if not matched:
        return float("inf")
    return -log_sum_exp(np.concatenate(matched))


def greedy_collapse(lattice) -> list[int]:
    """Per-frame argmax (ties to the lowest index) followed by path collapse."""
    lattice = np.asarray(lattice, dtype=float)
    best = np.argmax(lattice, axis=1)
    return collapse_path(best, lattice.shape[1] - 1)
