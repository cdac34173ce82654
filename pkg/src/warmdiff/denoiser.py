"""Synthetic reverse models standing in for a trained mask predictor.

Both models return a full n x V logit matrix on every call, fixed positions
included, because remasking needs the probability of each currently fixed
token. A denoiser is any callable `(state, ctx) -> logits` that is
deterministic given its inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bigram import BigramModel
from .core import DiffusionState, EmbeddingTable

__all__ = [
    "DenoiseContext",
    "NoisyOracleParams",
    "noisy_oracle_logits",
    "markov_logits",
]

PROB_FLOOR = 1e-12

_MODES = ("faithful", "credulous")


@dataclass(frozen=True, eq=False)
class DenoiseContext:
    """Planted ground-truth target (the prompt-determined answer) plus the
    model-specific parameters: NoisyOracleParams or a BigramModel."""

    target: np.ndarray
    params: object

    def __post_init__(self):
        target = np.asarray(self.target, dtype=np.int64)
        object.__setattr__(self, "target", target)
        if target.ndim != 1 or target.size == 0:
            raise ValueError("target must be a non-empty 1-d array")
        if (target < 0).any():
            raise ValueError("target tokens must be non-negative")


@dataclass(frozen=True)
class NoisyOracleParams:
    """Tunables for the synthetic oracle whose confidence grows with context.

    c0 is the base confidence, gamma the gain per unit of revealed-context
    fraction, eta the sensitivity to embedding overrides, c_max the ceiling.
    Faithful mode always intends the target token; credulous mode counts any
    revealed token as context and can flip its intent toward a distractor
    when the revealed neighborhood mostly disagrees with the target.
    """

    c0: float = 0.4
    gamma: float = 0.6
    eta: float = 0.0
    c_max: float = 0.99
    mode: str = "faithful"
    window: int = 3

    def __post_init__(self):
        if not 0.0 <= self.c0 <= 1.0:
            raise ValueError("c0 must be in [0, 1]")
        if self.gamma < 0.0:
            raise ValueError("gamma must be >= 0")
        if self.eta < 0.0:
            raise ValueError("eta must be >= 0")
        if not self.c0 <= self.c_max <= 1.0:
            raise ValueError("c_max must satisfy c0 <= c_max <= 1")
        if self.mode not in _MODES:
            raise ValueError(f"mode must be one of {_MODES}")
        if self.window < 1 or self.window % 2 == 0:
            raise ValueError("window must be an odd positive integer")


def _cosine(u: np.ndarray, v: np.ndarray) -> float:
    # Cosine with a zero vector is defined as 0 so degenerate rows stay neutral.
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.dot(u, v) / (nu * nv))


def _window_sums(values: np.ndarray, window: int) -> np.ndarray:
    """Sum of `values` over the width-`window` neighborhood centered at each
    position, truncated at the sequence edges."""
    n = len(values)
    half = (window - 1) // 2
    cum = np.concatenate([[0.0], np.cumsum(values)])
    lo = np.maximum(np.arange(n) - half, 0)
    hi = np.minimum(np.arange(n) + half + 1, n)
    return cum[hi] - cum[lo]


def _check_shapes(state: DiffusionState, ctx: DenoiseContext):
    if len(ctx.target) != len(state.tokens):
        raise ValueError(
            f"target length {len(ctx.target)} does not match state length {len(state.tokens)}"
        )
    if (ctx.target >= state.vocab.size).any():
        raise ValueError("target contains token ids outside the vocabulary")


def noisy_oracle_logits(
    state: DiffusionState, ctx: DenoiseContext, table: EmbeddingTable | None = None
) -> np.ndarray:
    """Logits from the context-gain oracle.

    Per-position confidence is c = min(c_max, c0 + gamma * f) where f is the
    fraction of correctly revealed positions (faithful mode) or of revealed
    positions regardless of correctness (credulous mode). When an embedding
    override is present, each masked position additionally earns
    eta * (cos(override, Emb(target)) - cos(mask_vec, Emb(target))), clipped
    into [0, c_max]. The intended token gets probability c, the remaining
    mass is uniform over the other V-1 tokens, and logits are exact logs of
    that distribution (floored at 1e-12).
    """
    _check_shapes(state, ctx)
    params: NoisyOracleParams = ctx.params
    n = len(state.tokens)
    V = state.vocab.size
    revealed = ~state.masked()

    if params.mode == "faithful":
        f = float((revealed & (state.tokens == ctx.target)).sum()) / n
    else:
        f = float(revealed.sum()) / n
    conf = np.full(n, min(params.c_max, params.c0 + params.gamma * f), dtype=np.float64)

    if state.embedding_override is not None and params.eta > 0.0:
        if table is None:
            raise ValueError("embedding table required when eta > 0 and an override is present")
        mask_vec = table.mask_vector()
        for i in np.flatnonzero(~revealed):
            target_vec = table.rows[ctx.target[i]]
            bonus = _cosine(state.embedding_override[i], target_vec) - _cosine(mask_vec, target_vec)
            conf[i] = min(params.c_max, max(0.0, conf[i] + params.eta * bonus))

    intended = ctx.target.copy()
    if params.mode == "credulous":
        wrong = (revealed & (state.tokens != ctx.target)).astype(np.float64)
        revealed_in_window = _window_sums(revealed.astype(np.float64), params.window)
        wrong_in_window = _window_sums(wrong, params.window)
        flip = 2.0 * wrong_in_window > revealed_in_window
        intended[flip] = (ctx.target[flip] + 1) % V

    pi = np.empty((n, V), dtype=np.float64)
    pi[:] = ((1.0 - conf) / (V - 1))[:, None]
    pi[np.arange(n), intended] = conf
    return np.log(np.maximum(pi, PROB_FLOOR))


def markov_logits(state: DiffusionState, ctx: DenoiseContext) -> np.ndarray:
    """Logits from a bigram mixture conditioned on the nearest revealed tokens.

    Each row is 0.5 * P(. | nearest revealed token to the left) plus
    0.5 * P_reverse(. | nearest revealed token to the right); a side with no
    revealed token contributes the unigram instead. Fixed positions use the
    same formula (their own token excluded from "nearest").
    """
    _check_shapes(state, ctx)
    model: BigramModel = ctx.params
    if not isinstance(model, BigramModel):
        raise ValueError("markov_logits expects ctx.params to be a BigramModel")
    n = len(state.tokens)
    if model.num_tokens != state.vocab.size:
        raise ValueError("bigram model vocabulary does not match the state vocabulary")
    revealed = ~state.masked()

    left = np.full(n, -1, dtype=np.int64)
    last = -1
    for i in range(n):
        left[i] = last
        if revealed[i]:
            last = int(state.tokens[i])
    right = np.full(n, -1, dtype=np.int64)
    last = -1
    for i in range(n - 1, -1, -1):
        right[i] = last
        if revealed[i]:
            last = int(state.tokens[i])

    uni = model.unigram()
    rows = np.empty((n, model.num_tokens), dtype=np.float64)
    for i in range(n):
        fwd = model.next_probs(int(left[i])) if left[i] >= 0 else uni
        bwd = model.prev_probs(int(right[i])) if right[i] >= 0 else uni
        rows[i] = 0.5 * fwd + 0.5 * bwd
    return np.log(rows)
