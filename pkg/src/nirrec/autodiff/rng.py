"""Deterministic random streams keyed by a seed plus string context keys.

Every stochastic choice in the package draws from an :class:`Rng` whose
state is a pure function of ``(seed, *keys)``.  Substreams are derived by
hashing the key path, so two runs with the same seed produce identical
draws regardless of call order elsewhere in the program, and adding a new
consumer never perturbs existing streams.
"""

from __future__ import annotations

import hashlib

import numpy as np

from ..errors import DomainError

_MASK64 = (1 << 64) - 1


def _key_word(key: object) -> int:
    """Map a context key to a stable 64-bit word."""
    if isinstance(key, bool):
        raise DomainError("rng keys must be strings or integers, not bool")
    if isinstance(key, int):
        return key & _MASK64
    if isinstance(key, str):
        digest = hashlib.sha256(key.encode("utf-8")).digest()
        return int.from_bytes(digest[:8], "little")
    raise DomainError(f"rng keys must be strings or integers, got {type(key).__name__}")


class Rng:
    """PCG64 generator addressed by ``(seed, *keys)``.

    ``derive`` returns an independent substream; it never advances the
    parent, so the order in which substreams are created is irrelevant.
    """

    def __init__(self, seed: int, *keys: object) -> None:
        if not isinstance(seed, int) or isinstance(seed, bool):
            raise DomainError("seed must be an integer")
        self.seed = seed
        self.keys = tuple(keys)
        words = [seed & _MASK64] + [_key_word(k) for k in keys]
        self._gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence(words)))

    def derive(self, *keys: object) -> "Rng":
        return Rng(self.seed, *self.keys, *keys)

    def uniform(self, low: float = 0.0, high: float = 1.0, size=None) -> np.ndarray:
        return self._gen.uniform(low, high, size=size)

    def normal(self, loc: float = 0.0, scale: float = 1.0, size=None) -> np.ndarray:
        return self._gen.normal(loc, scale, size=size)

    def integers(self, low: int, high: int, size=None) -> np.ndarray:
        return self._gen.integers(low, high, size=size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def choice(self, n: int, size: int, replace: bool = False) -> np.ndarray:
        return self._gen.choice(n, size=size, replace=replace)

    def standard_gamma(self, shape_param, size=None) -> np.ndarray:
        return self._gen.standard_gamma(shape_param, size=size)


def sample_beta(rng: Rng, a, b) -> np.ndarray:
    """Draw Beta(a, b) variates elementwise via the two-gamma ratio.

    Draws land in the open interval (0, 1): underflowed gamma pairs are
    nudged off the endpoints so downstream log-density evaluation stays
    finite.
    """
    a_arr = np.asarray(a, dtype=np.float64)
    b_arr = np.asarray(b, dtype=np.float64)
    if a_arr.size and not np.all(a_arr > 0.0):
        raise DomainError("sample_beta requires a > 0")
    if b_arr.size and not np.all(b_arr > 0.0):
        raise DomainError("sample_beta requires b > 0")
    g1 = rng.standard_gamma(a_arr)
    g2 = rng.standard_gamma(b_arr)
    total = g1 + g2
    # Degenerate double-underflow: fall back to the distribution mean.
    mean = a_arr / (a_arr + b_arr)
    with np.errstate(invalid="ignore", divide="ignore"):
        x = np.where(total > 0.0, g1 / np.where(total > 0.0, total, 1.0), mean)
    tiny = np.finfo(np.float64).tiny
    return np.clip(x, tiny, 1.0 - 2 ** -53)
