"""Boolean attention masks for the four history/future attention modes.

Token layout: indices [0, n) are history tokens, [n, n+m) are the future
placeholders. ``allow[i][j]`` is True when query token i may attend key
token j. The diagonal is always allowed so no softmax row degenerates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

ATTENTION_MODES = ("fa", "nifa", "niha", "offh")

# additive logit value for disallowed positions; underflows to 0 in softmax
MASK_FILL = -1e30


@dataclass(frozen=True)
class AttnMask:
    allow: np.ndarray  # bool, (n+m) x (n+m), rows = queries
    n: int
    m: int

    def additive(self):
        """0 where allowed, MASK_FILL where suppressed."""
        return np.where(self.allow, 0.0, MASK_FILL)


def build_mask(mode, n, m):
    """Construct the mask for one attention mode.

    fa:   everything attends everything.
    nifa: history attends history; each placeholder attends history plus
          itself only (no placeholder-to-placeholder, no future-to-history
          leakage).
    niha: history attends only itself; placeholders attend everything.
    offh: intersection of nifa and niha; each placeholder independently
          reads history, history tokens stay self-contained.
    """
    if mode not in ATTENTION_MODES:
        raise ConfigError(f"unknown attention mode {mode!r}; expected one of {ATTENTION_MODES}")
    if n < 1 or m < 1:
        raise ConfigError(f"mask needs n >= 1 and m >= 1, got n={n}, m={m}")
    t = n + m
    if mode == "fa":
        allow = np.ones((t, t), dtype=bool)
    elif mode == "nifa":
        allow = np.zeros((t, t), dtype=bool)
        allow[:n, :n] = True
        allow[n:, :n] = True
        np.fill_diagonal(allow, True)
    elif mode == "niha":
        allow = np.zeros((t, t), dtype=bool)
        allow[n:, :] = True
        np.fill_diagonal(allow, True)
    else:  # offh
        allow = np.zeros((t, t), dtype=bool)
        allow[n:, :n] = True
        np.fill_diagonal(allow, True)
    return AttnMask(allow=allow, n=n, m=m)


def full_mask(t):
    """All-true t x t mask for plain self-attention over one segment."""
    if t < 1:
        raise ConfigError(f"mask needs at least one token, got {t}")
    return AttnMask(allow=np.ones((t, t), dtype=bool), n=t, m=0)
