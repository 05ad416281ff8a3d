"""Probability tables over the configurations of a finite volume.

Tables hold either 64-bit floats or, in exact mode, ``fractions.Fraction``
objects inside a numpy object array.  Every routine that combines tables is
written with plain numpy arithmetic so that both modes share one code path.
"""
from __future__ import annotations

from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import DomainError, PositivityError
from .lattice import Configuration, Volume, as_volume, config_index

FLOAT_SUM_TOL = 1e-12


def is_exact(arr: np.ndarray) -> bool:
    return arr.dtype == object


def to_exact(values) -> np.ndarray:
    """Object array of Fractions; floats are converted exactly."""
    arr = np.asarray(values, dtype=object)
    out = np.empty(arr.shape, dtype=object)
    flat_in, flat_out = arr.reshape(-1), out.reshape(-1)
    for i, v in enumerate(flat_in):
        flat_out[i] = v if isinstance(v, Fraction) else Fraction(v)
    return out


def parse_probability(value) -> Fraction | float:
    """JSON probability entry: a number, or a string like ``"3/7"`` for exact mode."""
    if isinstance(value, str):
        return Fraction(value)
    return float(value)


def max_abs(arr: np.ndarray):
    """Max absolute entry; 0 of the right kind for empty input."""
    if arr.size == 0:
        return Fraction(0) if is_exact(arr) else 0.0
    out = np.max(np.abs(arr))
    return out if is_exact(arr) else float(out)


class DistributionTable:
    """A probability distribution on X^volume, stored densely in canonical order."""

    __slots__ = ("volume", "probs", "alphabet_size", "half_width")

    def __init__(self, volume, probs, alphabet_size: int, half_width: float = 0.0,
                 validate: bool = True):
        self.volume: Volume = as_volume(volume)
        self.alphabet_size = int(alphabet_size)
        probs = np.asarray(probs)
        if probs.dtype != object:
            probs = probs.astype(np.float64)
        self.probs = probs.reshape(-1)
        self.half_width = float(half_width)
        if validate:
            self._validate()

    def _validate(self):
        n = self.alphabet_size ** len(self.volume)
        if self.probs.size != n:
            raise DomainError(f"table has {self.probs.size} entries, expected {n}")
        if np.any(self.probs < 0):
            raise DomainError("probabilities must be non-negative")
        total = self.probs.sum()
        if self.exact:
            if total != 1:
                raise DomainError(f"exact table sums to {total}, not 1")
        elif abs(float(total) - 1.0) > FLOAT_SUM_TOL * max(1, n ** 0.5):
            raise DomainError(f"table sums to {float(total)!r}, not 1")

    @classmethod
    def from_weights(cls, volume, weights, alphabet_size: int, half_width: float = 0.0):
        """Normalize non-negative weights into a table."""
        w = np.asarray(weights)
        if w.dtype != object:
            w = w.astype(np.float64)
        total = w.sum()
        if not total > 0:
            raise PositivityError("weights sum to zero")
        return cls(volume, w / total, alphabet_size, half_width, validate=False)

    @classmethod
    def uniform(cls, volume, alphabet_size: int, exact: bool = False):
        n = alphabet_size ** len(as_volume(volume))
        probs = to_exact([Fraction(1, n)] * n) if exact else np.full(n, 1.0 / n)
        return cls(volume, probs, alphabet_size)

    @property
    def exact(self) -> bool:
        return is_exact(self.probs)

    def __len__(self):
        return self.probs.size

    def __repr__(self):
        return (f"DistributionTable(volume={list(self.volume.sites)}, "
                f"probs={self.probs.tolist()})")

    def tensor(self) -> np.ndarray:
        return self.probs.reshape((self.alphabet_size,) * len(self.volume))

    def prob(self, values: Sequence[int]):
        return self.probs[config_index(values, self.alphabet_size)]

    def __getitem__(self, x: Configuration):
        if x.support != self.volume:
            raise DomainError("configuration support differs from the table volume")
        return self.prob(x.values)

    def min(self):
        return self.probs.min()

    def is_strictly_positive(self) -> bool:
        return bool(np.all(self.probs > 0))

    def marginal(self, sub) -> "DistributionTable":
        """Marginal on ``sub``; ``sub`` must be contained in the volume."""
        sub = as_volume(sub)
        if not sub.issubset(self.volume):
            raise DomainError(f"{sub!r} is not contained in {self.volume!r}")
        keep = set(self.volume.positions(sub))
        axes = tuple(i for i in range(len(self.volume)) if i not in keep)
        t = self.tensor()
        m = t.sum(axis=axes) if axes else t
        return DistributionTable(sub, np.asarray(m).reshape(-1), self.alphabet_size,
                                 self.half_width, validate=False)

    def astype_float(self) -> "DistributionTable":
        return DistributionTable(self.volume, self.probs.astype(np.float64),
                                 self.alphabet_size, self.half_width, validate=False)

    def total_variation(self, other: "DistributionTable") -> float:
        if other.volume != self.volume:
            raise DomainError("tables live on different volumes")
        diff = np.abs(self.probs - other.probs).sum() / 2
        return diff if self.exact and other.exact else float(diff)

    def max_difference(self, other: "DistributionTable"):
        if other.volume != self.volume:
            raise DomainError("tables live on different volumes")
        return max_abs(self.probs - other.probs)

    def to_json(self) -> dict:
        probs = ([str(p) for p in self.probs] if self.exact
                 else [float(p) for p in self.probs])
        return {"volume": [list(s) for s in self.volume],
                "alphabet_size": self.alphabet_size,
                "probabilities": probs, "order": "lexicographic"}
