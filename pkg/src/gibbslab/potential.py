"""Interaction potentials, truncated energies and tail bounds.

A potential assigns a real number to every configuration with non-empty
finite support.  Inverse temperature is folded into the potential and the
Boltzmann weight of an energy ``U`` is ``exp(-U)``.  Potentials that also
carry exact rational Boltzmann factors (``exp(-Phi)`` given as a
``Fraction``) can drive the exact numeric mode.

Binary alphabets are read as Ising spins through ``spin(a) = 2a - 1``, so
symbol 1 is spin +1 and symbol 0 is spin -1.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Iterator, Mapping

import numpy as np

from .distribution import DistributionTable, is_exact
from .errors import DomainError, PositivityError, UnsupportedPotentialError
from .lattice import (
    Configuration,
    Site,
    Volume,
    as_site,
    as_volume,
    concatenate,
    configuration_array,
    diameter,
    distance,
    neighborhood,
    restrict,
    within,
)

Support = tuple[Site, ...]


def spin(a):
    return 2 * a - 1


@dataclass(frozen=True)
class EnergyValue:
    value: float
    tail_bound: float = 0.0

    def __post_init__(self):
        if self.tail_bound < 0:
            raise DomainError("tail bound must be non-negative")


class Potential:
    """Base class. Subclasses implement ``_value`` and ``supports``."""

    dimension: int
    alphabet_size: int
    range: int | None = None
    max_body: int = 2

    @property
    def exact(self) -> bool:
        """True when exact rational Boltzmann factors are available."""
        return False

    def _value(self, sites: Support, values: tuple[int, ...]) -> float:
        raise NotImplementedError

    def _weight(self, sites: Support, values: tuple[int, ...]) -> Fraction:
        raise DomainError(f"{type(self).__name__} has no exact Boltzmann factors")

    def supports(self, touching: Iterable[Site], available: Iterable[Site]) -> Iterator[Support]:
        """Supports, drawn from ``available``, that meet ``touching`` and may carry
        a nonzero value.  Yielded once each, in a deterministic order."""
        raise NotImplementedError

    def tail(self, t: Site, radius: int) -> float:
        raise UnsupportedPotentialError(
            f"{type(self).__name__} has no finite range and no tail metadata")

    def __call__(self, z: Configuration) -> float:
        return evaluate_potential(self, z)

    def value_table(self, sites: Support) -> np.ndarray:
        """Values on every configuration of ``sites`` in canonical order."""
        configs = configuration_array(len(sites), self.alphabet_size)
        return np.array([self._value(sites, tuple(row)) for row in configs.tolist()],
                        dtype=np.float64)

    def weight_table(self, sites: Support) -> np.ndarray:
        configs = configuration_array(len(sites), self.alphabet_size)
        out = np.empty(len(configs), dtype=object)
        for i, row in enumerate(configs.tolist()):
            out[i] = self._weight(sites, tuple(row))
        return out

    def _finite_tail(self, t: Site, radius: int) -> float:
        """Brute-force tail for a finite-range potential: sum over supports through
        ``t`` that leave the radius ball of the largest absolute value."""
        r = self.range
        if radius >= r:
            return 0.0
        from .lattice import ball
        region = ball(t, r)
        total = 0.0
        for sites in self.supports([t], region.sites):
            if all(distance(s, t) <= radius for s in sites):
                continue
            total += float(np.max(np.abs(self.value_table(sites))))
        return total


#: Name used for the potential interface in the documentation.
PotentialSpec = Potential


def evaluate_potential(potential: Potential, z: Configuration) -> float:
    if len(z.support) == 0:
        raise DomainError("a potential is only defined on non-empty supports")
    sites = z.support.sites
    if len(sites) > potential.max_body:
        return 0.0
    if potential.range is not None and diameter(sites) > potential.range:
        return 0.0
    return float(potential._value(sites, z.values))


def boltzmann_factor(potential: Potential, z: Configuration) -> Fraction:
    """Exact ``exp(-Phi(z))`` for potentials that carry rational weights."""
    if len(z.support) == 0:
        raise DomainError("a potential is only defined on non-empty supports")
    return potential._weight(z.support.sites, z.values)


class PairPotential(Potential):
    """Single-site plus two-body interactions.

    ``field`` is a length-k array of single-site values (or None).
    ``coupling(d)`` returns the k-by-k table of pair values for displacement
    ``d = u - s`` between sites ``s < u``, or None when the pair does not
    interact.  ``range`` is the largest l-infinity displacement that may
    interact; ``None`` means unbounded, in which case ``tail_fn`` is required
    for certified truncation.
    """

    max_body = 2

    def __init__(self, dimension: int, alphabet_size: int, field=None,
                 coupling: Callable | None = None, range: int | None = 0,
                 tail_fn: Callable[[Site, int], float] | None = None,
                 field_weights=None, coupling_weights: Callable | None = None,
                 name: str = "pair"):
        self.dimension = int(dimension)
        self.alphabet_size = int(alphabet_size)
        self.field = None if field is None else np.asarray(field, dtype=np.float64)
        self.coupling = coupling
        self.range = range if coupling is not None else 0
        self.tail_fn = tail_fn
        self.field_weights = field_weights
        self.coupling_weights = coupling_weights
        self.name = name
        self._pair_cache: dict = {}

    @property
    def exact(self) -> bool:
        has_field = self.field is not None
        return ((not has_field or self.field_weights is not None)
                and (self.coupling is None or self.coupling_weights is not None))

    def _pair(self, d):
        if d not in self._pair_cache:
            table = None if self.coupling is None else self.coupling(d)
            self._pair_cache[d] = None if table is None else np.asarray(table, dtype=np.float64)
        return self._pair_cache[d]

    def _value(self, sites, values):
        if len(sites) == 1:
            return 0.0 if self.field is None else float(self.field[values[0]])
        if len(sites) == 2:
            s, u = sites
            table = self._pair(tuple(b - a for a, b in zip(s, u)))
            return 0.0 if table is None else float(table[values[0], values[1]])
        return 0.0

    def _weight(self, sites, values):
        if len(sites) == 1:
            if self.field is None:
                return Fraction(1)
            if self.field_weights is None:
                raise DomainError("no exact field weights")
            return Fraction(self.field_weights[values[0]])
        if len(sites) == 2:
            s, u = sites
            d = tuple(b - a for a, b in zip(s, u))
            if self._pair(d) is None:
                return Fraction(1)
            if self.coupling_weights is None:
                raise DomainError("no exact coupling weights")
            return Fraction(self.coupling_weights(d)[values[0]][values[1]])
        return Fraction(1)

    def supports(self, touching, available):
        touching = sorted({as_site(t) for t in touching})
        available = sorted({as_site(s) for s in available})
        seen: set[Support] = set()
        for t in touching:
            if self.field is not None:
                yield (t,)
            if self.coupling is None:
                continue
            for u in available:
                if u == t:
                    continue
                if self.range is not None and distance(t, u) > self.range:
                    continue
                pair = (t, u) if t < u else (u, t)
                if pair in seen:
                    continue
                if self._pair(tuple(b - a for a, b in zip(*pair))) is None:
                    continue
                seen.add(pair)
                yield pair

    def tail(self, t, radius):
        if radius < 0:
            raise DomainError("radius must be non-negative")
        if self.range is not None:
            if radius >= self.range:
                return 0.0
            total = 0.0
            r = self.range
            for d in itertools.product(range(-r, r + 1), repeat=self.dimension):
                if max(abs(c) for c in d) <= radius:
                    continue
                key = d if d > (0,) * self.dimension else tuple(-c for c in d)
                table = self._pair(key)
                if table is not None:
                    total += float(np.max(np.abs(table)))
            return total
        if self.tail_fn is None:
            return super().tail(t, radius)
        return float(self.tail_fn(as_site(t), radius))


class TablePotential(Potential):
    """A potential given by explicit value tables on a finite list of supports."""

    def __init__(self, alphabet_size: int, tables: Mapping):
        self.alphabet_size = int(alphabet_size)
        self.tables: dict[Support, np.ndarray] = {}
        for sites, values in tables.items():
            key = tuple(sorted(as_site(s) for s in sites))
            arr = np.asarray(values, dtype=np.float64).reshape(-1)
            if arr.size != self.alphabet_size ** len(key):
                raise DomainError(f"table on {key} has {arr.size} entries")
            self.tables[key] = arr
        if any(len(key) == 0 for key in self.tables):
            raise DomainError("supports must be non-empty")
        dims = {len(s) for key in self.tables for s in key}
        self.dimension = dims.pop() if len(dims) == 1 else 1
        self.range = max((diameter(k) for k in self.tables), default=0)
        self.max_body = max((len(k) for k in self.tables), default=1)
        self._by_site: dict[Site, list[Support]] = {}
        for key in sorted(self.tables):
            for s in key:
                self._by_site.setdefault(s, []).append(key)

    def _value(self, sites, values):
        arr = self.tables.get(tuple(sites))
        if arr is None:
            return 0.0
        idx = 0
        for v in values:
            idx = idx * self.alphabet_size + v
        return float(arr[idx])

    def value_table(self, sites):
        arr = self.tables.get(tuple(sites))
        if arr is None:
            return np.zeros(self.alphabet_size ** len(sites))
        return arr.copy()

    def supports(self, touching, available):
        avail = {as_site(s) for s in available}
        seen = set()
        for t in sorted({as_site(t) for t in touching}):
            for key in self._by_site.get(t, ()):
                if key not in seen and all(s in avail for s in key):
                    seen.add(key)
                    yield key

    def tail(self, t, radius):
        t = as_site(t)
        total = 0.0
        for key in self._by_site.get(t, ()):
            if any(distance(s, t) > radius for s in key):
                total += float(np.max(np.abs(self.tables[key])))
        return total

    def to_json(self) -> list[dict]:
        return [{"support": [list(s) for s in key], "values": self.tables[key].tolist()}
                for key in sorted(self.tables)]

    @classmethod
    def from_json(cls, doc, alphabet_size: int) -> "TablePotential":
        if isinstance(doc, dict):
            alphabet_size = doc.get("alphabet_size", alphabet_size)
            doc = doc["terms"]
        return cls(alphabet_size, {tuple(as_site(s) for s in item["support"]): item["values"]
                                   for item in doc})

    def dump(self, path):
        with open(path, "w") as fh:
            json.dump({"alphabet_size": self.alphabet_size, "terms": self.to_json()}, fh)

    @classmethod
    def load(cls, path, alphabet_size: int = 2) -> "TablePotential":
        with open(path) as fh:
            return cls.from_json(json.load(fh), alphabet_size)


class FunctionPotential(Potential):
    """A potential given by an arbitrary callable on configurations.

    ``range`` bounds the l-infinity diameter of interacting supports and
    ``max_body`` their size.  Without a finite range a ``tail_fn`` is needed
    for truncation certificates, and support enumeration is exhaustive.
    """

    def __init__(self, fn: Callable[[Configuration], float], dimension: int,
                 alphabet_size: int, range: int | None, max_body: int,
                 tail_fn: Callable | None = None,
                 weight_fn: Callable[[Configuration], Fraction] | None = None):
        self.fn = fn
        self.dimension = dimension
        self.alphabet_size = alphabet_size
        self.range = range
        self.max_body = max_body
        self.tail_fn = tail_fn
        self.weight_fn = weight_fn

    @property
    def exact(self):
        return self.weight_fn is not None

    def _value(self, sites, values):
        return float(self.fn(Configuration(Volume(sites), tuple(values))))

    def _weight(self, sites, values):
        if self.weight_fn is None:
            return super()._weight(sites, values)
        return Fraction(self.weight_fn(Configuration(Volume(sites), tuple(values))))

    def supports(self, touching, available):
        touching = {as_site(t) for t in touching}
        pool = sorted({as_site(s) for s in available})
        if self.range is not None:
            pool = list(within(pool, touching, self.range))
        for size in range(1, self.max_body + 1):
            for combo in itertools.combinations(pool, size):
                if not touching.intersection(combo):
                    continue
                if self.range is not None and diameter(combo) > self.range:
                    continue
                yield combo

    def tail(self, t, radius):
        if self.tail_fn is not None:
            return float(self.tail_fn(as_site(t), radius))
        if self.range is not None:
            return self._finite_tail(as_site(t), radius)
        return super().tail(t, radius)


def tail(potential: Potential, t, radius: int) -> float:
    """Uniform bound on the part of the single-site energy series at ``t``
    contributed by supports reaching beyond distance ``radius``."""
    if radius < 0:
        raise DomainError("radius must be non-negative")
    return potential.tail(as_site(t), radius)


def _margin(volume: Volume, boundary_sites: set, cap: int | None) -> int:
    """Largest m (<= cap) with every site at distance 1..m of ``volume`` present."""
    m = 0
    while cap is None or m < cap:
        shell = neighborhood(volume, m + 1)
        if not all(s in boundary_sites for s in shell):
            break
        m += 1
    return m


def energy(potential: Potential, volume, x: Configuration, boundary: Configuration,
           radius: int | None = None) -> EnergyValue:
    """Energy of ``x`` on ``volume`` given ``boundary``.

    Sums the potential over all supports that meet ``volume`` and otherwise
    lie in the part of the boundary within ``radius`` of ``volume`` (all of
    it when ``radius`` is None).  ``tail_bound`` covers every omitted term,
    whether cut off by ``radius`` or by the edge of the boundary support.
    """
    volume = as_volume(volume)
    if x.support != volume:
        raise DomainError("x must be a configuration on the volume")
    if not boundary.support.isdisjoint(volume):
        raise DomainError("boundary overlaps the volume")
    if radius is not None and radius < 0:
        raise DomainError("radius must be non-negative")
    if radius is None:
        kept = boundary
    else:
        kept = restrict(boundary, within(boundary.support, volume, radius))
    config = concatenate(x, kept)
    terms = [evaluate_potential(potential, restrict(config, sites))
             for sites in potential.supports(volume, config.support)]
    value = math.fsum(terms)

    cap = radius
    if potential.range is not None:
        cap = potential.range if cap is None else min(cap, potential.range)
    margin = _margin(volume, set(boundary.support.sites), cap)
    if potential.range is not None and margin >= potential.range:
        tail_total = 0.0
    else:
        tail_total = math.fsum(potential.tail(t, margin) for t in volume)
    return EnergyValue(value, tail_total)


class Interactions:
    """Vectorised energy evaluation for a fixed potential on a fixed window.

    All supports inside the window are listed once with their value tables,
    so energies of many window configurations are computed by gathers.
    """

    def __init__(self, potential: Potential, window):
        self.potential = potential
        self.window = as_volume(window)
        self.k = potential.alphabet_size
        self.terms: list[tuple[Support, np.ndarray, np.ndarray]] = []
        for sites in potential.supports(self.window.sites, self.window.sites):
            if len(sites) > potential.max_body:
                continue
            pos = np.array(self.window.positions(sites), dtype=np.int64)
            self.terms.append((sites, pos, potential.value_table(sites)))
        self._weights: dict[Support, np.ndarray] = {}

    def select(self, volume, allowed: Volume | None = None) -> list[int]:
        """Indices of terms meeting ``volume`` and contained in ``allowed``."""
        volume = as_volume(volume)
        vs = set(volume.sites)
        ok = None if allowed is None else set(allowed.sites)
        out = []
        for i, (sites, _, _) in enumerate(self.terms):
            if not vs.intersection(sites):
                continue
            if ok is not None and not ok.issuperset(sites):
                continue
            out.append(i)
        return out

    def _gather_index(self, configs: np.ndarray, pos: np.ndarray) -> np.ndarray:
        powers = self.k ** np.arange(len(pos) - 1, -1, -1, dtype=np.int64)
        return configs[:, pos] @ powers

    def energies(self, configs: np.ndarray, term_ids: list[int]) -> np.ndarray:
        out = np.zeros(configs.shape[0])
        for i in term_ids:
            _, pos, table = self.terms[i]
            out += table[self._gather_index(configs, pos)]
        return out

    def weights(self, configs: np.ndarray, term_ids: list[int]) -> np.ndarray:
        out = np.empty(configs.shape[0], dtype=object)
        out[:] = Fraction(1)
        for i in term_ids:
            sites, pos, _ = self.terms[i]
            if sites not in self._weights:
                self._weights[sites] = self.potential.weight_table(sites)
            out = out * self._weights[sites][self._gather_index(configs, pos)]
        return out


def moebius_extract(table: DistributionTable, vacuum: int = 0) -> TablePotential:
    """Potential in vacuum gauge whose Gibbs weights reproduce ``table``.

    With ``H = -log P``, the value on a support ``A`` is the alternating sum
    of ``H`` over the configurations that agree with ``z`` on a subset of
    ``A`` and equal ``vacuum`` elsewhere.  Values vanish whenever any site
    of the support carries the vacuum symbol.
    """
    probs = table.probs.astype(np.float64) if is_exact(table.probs) else table.probs
    if not np.all(probs > 0):
        raise PositivityError("Möbius extraction needs a strictly positive table")
    k = table.alphabet_size
    if not 0 <= vacuum < k:
        raise DomainError(f"vacuum symbol {vacuum} outside alphabet")
    volume = table.volume
    n = len(volume)
    H = -np.log(probs).reshape((k,) * n)
    tables = {}
    for size in range(1, n + 1):
        for combo in itertools.combinations(range(n), size):
            index = tuple(slice(None) if i in combo else vacuum for i in range(n))
            h = np.array(H[index], dtype=np.float64)
            for ax in range(size):
                base = np.take(h, [vacuum], axis=ax)
                h = h - base
            tables[tuple(volume.sites[i] for i in combo)] = h.reshape(-1)
    return TablePotential(k, tables)


# built-ins ------------------------------------------------------------------

def _nearest(d) -> bool:
    return sum(abs(c) for c in d) == 1


def zero_potential(dimension: int = 1, alphabet_size: int = 2) -> PairPotential:
    return PairPotential(dimension, alphabet_size, name="zero")


def ising(J: float = 1.0, h: float = 0.0, dimension: int = 1) -> PairPotential:
    """Nearest-neighbour Ising: ``-J s_s s_t`` on bonds, ``-h s_t`` on sites."""
    pair = np.array([[-J * spin(a) * spin(b) for b in (0, 1)] for a in (0, 1)])
    field = None if h == 0 else np.array([-h * spin(a) for a in (0, 1)])
    return PairPotential(dimension, 2, field=field,
                         coupling=lambda d: pair if _nearest(d) else None,
                         range=1, name="ising")


def ising_weights(pair_weight, field_weight=None, dimension: int = 1) -> PairPotential:
    """Nearest-neighbour Ising given by exact Boltzmann factors.

    Aligned bonds get factor ``pair_weight`` and anti-aligned bonds its
    inverse; a site with spin +1 gets ``field_weight`` and spin -1 its
    inverse.  Equivalent to ``ising(log a, log b)``.
    """
    a = Fraction(pair_weight)
    if a <= 0:
        raise DomainError("weights must be positive")
    w_pair = [[a if x == y else 1 / a for y in (0, 1)] for x in (0, 1)]
    J = math.log(a)
    pair = np.array([[-J * spin(x) * spin(y) for y in (0, 1)] for x in (0, 1)])
    field = field_w = None
    if field_weight is not None:
        b = Fraction(field_weight)
        if b <= 0:
            raise DomainError("weights must be positive")
        field_w = [1 / b, b]
        field = np.array([math.log(b), -math.log(b)])
    return PairPotential(dimension, 2, field=field,
                         coupling=lambda d: pair if _nearest(d) else None,
                         range=1, field_weights=field_w,
                         coupling_weights=lambda d: w_pair, name="ising_weights")


def potts(J: float = 1.0, alphabet_size: int = 3, dimension: int = 1) -> PairPotential:
    """Nearest-neighbour Potts: ``-J`` on bonds with equal symbols."""
    pair = -J * np.eye(alphabet_size)
    return PairPotential(dimension, alphabet_size,
                         coupling=lambda d: pair if _nearest(d) else None,
                         range=1, name="potts")


def exponential_pair(J0: float = 0.5, decay: float = 0.4) -> PairPotential:
    """1D Ising with coupling ``J0 * decay**d`` between sites at distance d.

    Infinite range; the tail beyond radius R is the geometric sum over both
    directions, ``2 * |J0| * decay**(R+1) / (1 - decay)``.
    """
    if not 0 < decay < 1:
        raise DomainError("decay must lie in (0, 1)")
    base = np.array([[-spin(a) * spin(b) for b in (0, 1)] for a in (0, 1)], dtype=float)

    def coupling(d):
        return J0 * decay ** abs(d[0]) * base

    def tail_fn(t, radius):
        return 2 * abs(J0) * decay ** (radius + 1) / (1 - decay)

    return PairPotential(1, 2, coupling=coupling, range=None, tail_fn=tail_fn,
                         name="exponential_pair")


BUILTINS: dict[str, Callable[..., Potential]] = {
    "zero": zero_potential,
    "ising": ising,
    "ising_weights": ising_weights,
    "potts": potts,
    "exponential_pair": exponential_pair,
}


def build_potential(name: str, **params) -> Potential:
    try:
        factory = BUILTINS[name]
    except KeyError:
        raise DomainError(f"unknown potential {name!r}; choose from {sorted(BUILTINS)}")
    return factory(**params)
