"""Sentence pooling over per-token hidden states.

Both modes take the final-layer hidden states (n_tokens x hidden) together
with a 0/1 mask of non-padding positions, so pooled vectors are independent
of how a batch was padded.
"""
from __future__ import annotations

import numpy as np


def mean_pool(hidden_states: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Arithmetic mean of the hidden states at non-padding positions."""
    hidden_states = np.asarray(hidden_states, dtype=float)
    mask = np.asarray(mask, dtype=float).reshape(-1)
    if hidden_states.shape[0] != mask.shape[0]:
        raise ValueError("mask length must match token count")
    total = mask.sum()
    if total == 0:
        raise ValueError("cannot pool an all-padding sequence")
    return (hidden_states * mask[:, None]).sum(axis=0) / total


def last_token_pool(hidden_states: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Hidden state at the final non-padding position, unchanged."""
    hidden_states = np.asarray(hidden_states, dtype=float)
    mask = np.asarray(mask).reshape(-1)
    if hidden_states.shape[0] != mask.shape[0]:
        raise ValueError("mask length must match token count")
    nonzero = np.nonzero(mask)[0]
    if nonzero.size == 0:
        raise ValueError("cannot pool an all-padding sequence")
    return hidden_states[nonzero[-1]].copy()


def pool(hidden_states: np.ndarray, mask: np.ndarray, mode: str) -> np.ndarray:
    if mode == "mean":
        return mean_pool(hidden_states, mask)
    if mode == "last_token":
        return last_token_pool(hidden_states, mask)
    raise ValueError(f"unknown pooling mode {mode!r}")
