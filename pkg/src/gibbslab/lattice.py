"""Sites, finite volumes and configurations on a window of Z^nu.

Sites are plain integer tuples. A :class:`Volume` keeps its sites in
lexicographic order, and every array in the package that is indexed by
configurations uses the induced order: the first site of the volume is the
most significant digit, exactly as ``itertools.product`` enumerates.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import DomainError, ResourceError

Site = tuple[int, ...]

#: Default enumeration guard, in bits: ``|volume| * log2(k)`` may not exceed it.
DEFAULT_BUDGET_BITS = 30


@dataclass(frozen=True)
class LatticeConfig:
    dimension: int
    alphabet_size: int

    def __post_init__(self):
        if self.dimension < 1:
            raise DomainError(f"dimension must be >= 1, got {self.dimension}")
        if self.alphabet_size < 2:
            raise DomainError(f"alphabet_size must be >= 2, got {self.alphabet_size}")


def as_site(coords) -> Site:
    if isinstance(coords, (int, np.integer)):
        return (int(coords),)
    return tuple(int(c) for c in coords)


def distance(s: Site, t: Site) -> int:
    """l-infinity distance between two sites."""
    return max(abs(a - b) for a, b in zip(s, t))


def diameter(sites: Iterable[Site]) -> int:
    sites = list(sites)
    if len(sites) < 2:
        return 0
    return max(max(c) - min(c) for c in zip(*sites))


class Volume:
    """A finite set of sites in canonical (lexicographic) order."""

    __slots__ = ("sites", "_index", "_hash")

    def __init__(self, sites: Iterable = ()):
        uniq = sorted({as_site(s) for s in sites})
        if uniq and len({len(s) for s in uniq}) != 1:
            raise DomainError("sites of a volume must share one dimension")
        self.sites: tuple[Site, ...] = tuple(uniq)
        self._index = {s: i for i, s in enumerate(self.sites)}
        self._hash = hash(self.sites)

    @classmethod
    def box(cls, extents: Sequence[int], origin: Sequence[int] | None = None) -> "Volume":
        """Rectangular window with the given side lengths."""
        origin = [0] * len(extents) if origin is None else list(origin)
        if len(origin) != len(extents):
            raise DomainError("origin and extents differ in dimension")
        ranges = [range(o, o + n) for o, n in zip(origin, extents)]
        return cls(itertools.product(*ranges))

    @classmethod
    def interval(cls, start: int, stop: int) -> "Volume":
        """1D sites start, start+1, ..., stop (inclusive)."""
        return cls((i,) for i in range(start, stop + 1))

    def __len__(self):
        return len(self.sites)

    def __iter__(self) -> Iterator[Site]:
        return iter(self.sites)

    def __contains__(self, site) -> bool:
        return as_site(site) in self._index

    def __eq__(self, other):
        return isinstance(other, Volume) and self.sites == other.sites

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"Volume({list(self.sites)!r})"

    @property
    def dimension(self) -> int | None:
        return len(self.sites[0]) if self.sites else None

    def index(self, site: Site) -> int:
        return self._index[as_site(site)]

    def positions(self, other: Iterable[Site]) -> list[int]:
        return [self._index[s] for s in other]

    def issubset(self, other: "Volume") -> bool:
        return all(s in other._index for s in self.sites)

    def isdisjoint(self, other: "Volume") -> bool:
        return not any(s in other._index for s in self.sites)

    def __or__(self, other):
        return Volume(self.sites + tuple(_sites(other)))

    def __and__(self, other):
        keep = set(_sites(other))
        return Volume(s for s in self.sites if s in keep)

    def __sub__(self, other):
        drop = set(_sites(other))
        return Volume(s for s in self.sites if s not in drop)

    def subsets(self, nonempty: bool = False) -> Iterator["Volume"]:
        start = 1 if nonempty else 0
        for r in range(start, len(self.sites) + 1):
            for combo in itertools.combinations(self.sites, r):
                yield Volume(combo)


def _sites(obj) -> Iterable[Site]:
    if isinstance(obj, Volume):
        return obj.sites
    return [as_site(s) for s in obj]


def as_volume(obj) -> Volume:
    return obj if isinstance(obj, Volume) else Volume(obj)


@dataclass(frozen=True)
class Configuration:
    """Alphabet indices attached to the sites of a finite support."""

    support: Volume
    values: tuple[int, ...]

    def __post_init__(self):
        if len(self.values) != len(self.support):
            raise DomainError(
                f"{len(self.values)} values for a support of {len(self.support)} sites")

    @classmethod
    def from_mapping(cls, mapping: Mapping) -> "Configuration":
        items = sorted((as_site(s), int(v)) for s, v in mapping.items())
        return cls(Volume(s for s, _ in items), tuple(v for _, v in items))

    @classmethod
    def from_values(cls, support, values: Sequence[int]) -> "Configuration":
        return cls(as_volume(support), tuple(int(v) for v in values))

    @classmethod
    def constant(cls, support, value: int) -> "Configuration":
        support = as_volume(support)
        return cls(support, (int(value),) * len(support))

    @classmethod
    def empty(cls) -> "Configuration":
        return cls(Volume(), ())

    def __len__(self):
        return len(self.values)

    def __getitem__(self, site) -> int:
        return self.values[self.support.index(site)]

    def as_dict(self) -> dict[Site, int]:
        return dict(zip(self.support.sites, self.values))

    def __repr__(self):
        body = ", ".join(f"{s}: {v}" for s, v in zip(self.support.sites, self.values))
        return f"Configuration({{{body}}})"


def restrict(x: Configuration, T) -> Configuration:
    """Subconfiguration of ``x`` on ``T``."""
    T = as_volume(T)
    if not T.issubset(x.support):
        raise DomainError(f"{T!r} is not contained in the support of the configuration")
    return Configuration(T, tuple(x.values[x.support.index(s)] for s in T))


def concatenate(x: Configuration, y: Configuration) -> Configuration:
    if not x.support.isdisjoint(y.support):
        raise DomainError("cannot concatenate configurations with overlapping supports")
    merged = x.as_dict()
    merged.update(y.as_dict())
    return Configuration.from_mapping(merged)


def ball(t: Site, radius: int) -> Volume:
    """All sites within l-infinity distance ``radius`` of ``t`` (``t`` included)."""
    t = as_site(t)
    return Volume(itertools.product(*[range(c - radius, c + radius + 1) for c in t]))


def neighborhood(volume, radius: int) -> Volume:
    """Sites at l-infinity distance 1..radius from ``volume``."""
    volume = as_volume(volume)
    if radius < 1 or not len(volume):
        return Volume()
    out: set[Site] = set()
    for t in volume:
        out.update(ball(t, radius).sites)
    return Volume(out) - volume


def within(sites: Iterable[Site], volume, radius: int) -> Volume:
    """The members of ``sites`` at distance <= radius from some site of ``volume``."""
    volume = as_volume(volume)
    return Volume(s for s in sites if any(distance(s, t) <= radius for t in volume))


def check_budget(n_sites: int, k: int, budget_bits: float | None = None, what: str = "volume"):
    bits = DEFAULT_BUDGET_BITS if budget_bits is None else budget_bits
    need = n_sites * math.log2(k)
    if need > bits + 1e-9:
        raise ResourceError(
            f"enumerating {k}^{n_sites} configurations of the {what} needs "
            f"{need:.1f} bits, over the budget of {bits} bits")


def enumerate_configurations(volume, k: int, budget_bits: float | None = None
                             ) -> Iterator[Configuration]:
    """Every configuration on ``volume`` once, in canonical order."""
    volume = as_volume(volume)
    check_budget(len(volume), k, budget_bits)
    for values in itertools.product(range(k), repeat=len(volume)):
        yield Configuration(volume, values)


def configuration_array(n_sites: int, k: int, budget_bits: float | None = None) -> np.ndarray:
    """All value tuples as rows of an ``(k**n, n)`` integer array, canonical order."""
    check_budget(n_sites, k, budget_bits)
    if n_sites == 0:
        return np.zeros((1, 0), dtype=np.int64)
    grids = np.indices((k,) * n_sites).reshape(n_sites, -1).T
    return np.ascontiguousarray(grids, dtype=np.int64)


def config_index(values: Sequence[int], k: int) -> int:
    idx = 0
    for v in values:
        idx = idx * k + int(v)
    return idx
