"""Explicit random fields and their finite-conditional distributions.

A field here is anything that can return the probability of every
configuration on a finite support (its *cylinder* tensor).  Three kinds are
provided: dense tables on a window, mixtures of fields, and the exact
infinite-volume Gibbs field of a 1D finite-range potential computed with a
transfer matrix.
"""
from __future__ import annotations

import itertools
import json
import math
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .distribution import DistributionTable, is_exact, max_abs, parse_probability, to_exact
from .errors import DomainError, InconsistentKernelError, PositivityError
from .lattice import (
    Configuration,
    Site,
    Volume,
    as_site,
    as_volume,
    check_budget,
    config_index,
    configuration_array,
)
from .potential import Interactions, Potential
from .specification import (
    FINITE,
    OnePointKernel,
    SpecKernel,
    _resolve_order,
    _resolve_reference,
    chain_weights,
    cycle_defect,
    embed,
    normalize_over,
)

RECONSTRUCTION_TOL = 1e-8


class Field:
    """Interface shared by all field types."""

    window: Volume
    alphabet_size: int
    exact: bool = False

    def cylinder(self, support) -> np.ndarray:
        """Probabilities of all configurations on ``support``, shape ``(k,)*|support|``."""
        raise NotImplementedError

    def is_strictly_positive(self) -> bool:
        return True

    def prob(self, x: Configuration):
        if len(x.support) == 0:
            return Fraction(1) if self.exact else 1.0
        return self.cylinder(x.support)[tuple(x.values)]

    def marginal(self, sub) -> DistributionTable:
        return marginal(self, sub)

    def onepoint(self) -> "FieldOnePointKernel":
        return FieldOnePointKernel(self)

    def specification(self) -> "FieldSpecification":
        return FieldSpecification(self)

    def describe(self) -> str:
        return type(self).__name__


class FieldTable(Field):
    """A strictly positive distribution on ``X^window`` stored densely."""

    def __init__(self, window, probs, alphabet_size: int, require_positive: bool = True):
        self.window = as_volume(window)
        self.alphabet_size = int(alphabet_size)
        self.table = DistributionTable(self.window, probs, alphabet_size)
        self.exact = self.table.exact
        if require_positive and not self.table.is_strictly_positive():
            raise PositivityError("field tables must be strictly positive")
        self._cyl: dict[Volume, np.ndarray] = {}

    @classmethod
    def from_weights(cls, window, weights, alphabet_size: int) -> "FieldTable":
        t = DistributionTable.from_weights(window, weights, alphabet_size)
        return cls(window, t.probs, alphabet_size)

    @classmethod
    def from_potential(cls, potential: Potential, window, exact: bool = False) -> "FieldTable":
        """Free-boundary Gibbs distribution of ``potential`` on ``window``."""
        window = as_volume(window)
        k = potential.alphabet_size
        inter = Interactions(potential, window)
        configs = configuration_array(len(window), k)
        terms = list(range(len(inter.terms)))
        if exact:
            return cls.from_weights(window, inter.weights(configs, terms), k)
        U = inter.energies(configs, terms)
        return cls.from_weights(window, np.exp(-(U - U.min())), k)

    @classmethod
    def random(cls, window, alphabet_size: int, rng: np.random.Generator,
               exact: bool = False, spread: float = 1.0) -> "FieldTable":
        """Random strictly positive table.

        Float tables use log-normal weights with scale ``spread``; exact
        tables use integer weights 1..100 over their sum.
        """
        window = as_volume(window)
        n = alphabet_size ** len(window)
        if exact:
            w = rng.integers(1, 101, size=n)
            total = int(w.sum())
            return cls(window, to_exact([Fraction(int(v), total) for v in w]), alphabet_size)
        return cls.from_weights(window, np.exp(spread * rng.standard_normal(n)), alphabet_size)

    @classmethod
    def product(cls, window, p, exact: bool = False) -> "FieldTable":
        window = as_volume(window)
        p = to_exact(p) if exact else np.asarray(p, dtype=np.float64)
        t = np.ones((), dtype=object) if exact else np.ones(())
        if exact:
            t[()] = Fraction(1)
        for _ in window:
            t = np.multiply.outer(t, p)
        return cls(window, t.reshape(-1), len(p))

    def is_strictly_positive(self):
        return self.table.is_strictly_positive()

    def cylinder(self, support):
        support = as_volume(support)
        hit = self._cyl.get(support)
        if hit is None:
            if not support.issubset(self.window):
                raise DomainError(f"{support!r} is not inside the field window")
            keep = set(self.window.positions(support))
            axes = tuple(i for i in range(len(self.window)) if i not in keep)
            T = self.table.tensor()
            hit = np.asarray(T.sum(axis=axes)) if axes else T
            self._cyl[support] = hit
        return hit

    def describe(self):
        return f"FieldTable(|V|={len(self.window)}, k={self.alphabet_size})"

    def to_json(self) -> dict:
        probs = ([str(p) for p in self.table.probs] if self.exact
                 else [float(p) for p in self.table.probs])
        return {"window": [list(s) for s in self.window], "alphabet_size": self.alphabet_size,
                "probabilities": probs, "order": "lexicographic"}

    @classmethod
    def from_json(cls, doc: dict) -> "FieldTable":
        if doc.get("order", "lexicographic") != "lexicographic":
            raise DomainError("only lexicographic order is supported")
        window = Volume(as_site(s) for s in doc["window"])
        probs = [parse_probability(p) for p in doc["probabilities"]]
        exact = all(isinstance(p, Fraction) for p in probs)
        arr = to_exact(probs) if exact else np.array(probs, dtype=np.float64)
        n = len(window)
        k = doc.get("alphabet_size") or round(len(probs) ** (1 / n)) if n else 2
        return cls(window, arr, int(k))

    def dump(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh)

    @classmethod
    def load(cls, path) -> "FieldTable":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


class ProductMeasure(Field):
    """I.i.d. field with single-site law ``p`` on all of Z^nu.

    ``window`` only fixes where diagnostics look; cylinders are available
    on any finite support.
    """

    def __init__(self, p, window, exact: bool = False):
        self.p = to_exact(p) if exact else np.asarray(p, dtype=np.float64)
        self.exact = exact
        self.alphabet_size = len(self.p)
        self.window = as_volume(window)
        if not np.all(self.p > 0):
            raise PositivityError("product measure needs a strictly positive law")
        if (self.p.sum() != 1) if exact else abs(float(self.p.sum()) - 1) > 1e-12:
            raise DomainError("single-site law must sum to 1")

    def cylinder(self, support):
        support = as_volume(support)
        t = np.ones((), dtype=object) if self.exact else np.ones(())
        if self.exact:
            t[()] = Fraction(1)
        for _ in support:
            t = np.multiply.outer(t, self.p)
        return t

    def log_cylinder(self, support) -> np.ndarray:
        logp = np.log(self.p.astype(np.float64))
        t = np.zeros(())
        for _ in as_volume(support):
            t = np.add.outer(t, logp)
        return t

    def describe(self):
        return f"ProductMeasure(p={[float(v) for v in self.p]})"


class MixtureField(Field):
    """Convex combination of fields (product measures or tables)."""

    def __init__(self, components: Sequence[tuple[float, Field]], window=None):
        if len(components) < 2:
            raise DomainError("a mixture needs at least two components")
        weights = [w for w, _ in components]
        if any(not w > 0 for w in weights):
            raise DomainError("mixture weights must be positive")
        total = sum(weights)
        exact = all(isinstance(w, Fraction) for w in weights) and all(
            c.exact for _, c in components)
        if exact and total != 1 or not exact and abs(float(total) - 1) > 1e-12:
            raise DomainError("mixture weights must sum to 1")
        self.components = list(components)
        self.exact = exact
        ks = {c.alphabet_size for _, c in components}
        if len(ks) != 1:
            raise DomainError("components use different alphabets")
        self.alphabet_size = ks.pop()
        if window is None:
            tables = [c.window for _, c in components if isinstance(c, FieldTable)]
            if not tables:
                raise DomainError("a window is required for a mixture of product measures")
            window = tables[0]
            for w in tables[1:]:
                window = window & w
        self.window = as_volume(window)

    @classmethod
    def bernoulli(cls, ps: Sequence[float], weights: Sequence[float], window) -> "MixtureField":
        """Mixture of i.i.d. Bernoulli fields; ``ps`` are the probabilities of symbol 1."""
        return cls([(w, ProductMeasure([1 - p, p], window)) for p, w in zip(ps, weights)],
                    window)

    def cylinder(self, support):
        out = None
        for w, comp in self.components:
            c = comp.cylinder(support)
            out = w * c if out is None else out + w * c
        return out

    def describe(self):
        parts = ", ".join(f"{float(w):g}*{c.describe()}" for w, c in self.components)
        return f"MixtureField({parts})"

    def onepoint(self):
        if all(isinstance(c, ProductMeasure) for _, c in self.components) and not self.exact:
            return _MixtureOnePoint(self)
        return FieldOnePointKernel(self)


class TransferChain(Field):
    """Unique infinite-volume Gibbs field of a 1D finite-range potential.

    The chain runs on blocks of ``L = max(range, 1)`` consecutive spins.
    Leading eigenvectors of the block transfer matrix come from power
    iteration with a deterministic start vector.
    """

    def __init__(self, potential: Potential, window=None, tol: float = 1e-14,
                 max_iter: int = 1_000_000):
        if potential.dimension != 1:
            raise DomainError("transfer chains need a one-dimensional potential")
        if potential.range is None:
            raise DomainError("transfer chains need a finite-range potential")
        self.potential = potential
        self.alphabet_size = k = potential.alphabet_size
        self.block = L = max(potential.range, 1)
        self.window = as_volume(window) if window is not None else Volume.interval(-L, L)
        sites = [(i,) for i in range(-L, 1)]
        inter = Interactions(potential, Volume(sites))
        terms = inter.select(Volume([(0,)]))
        configs = configuration_array(L + 1, k)
        e_new = inter.energies(configs, terms).reshape((k ** L, k))
        K = k ** L
        T = np.zeros((K, K))
        for B in range(K):
            for a in range(k):
                B2 = (B * k + a) % K
                T[B, B2] = math.exp(-e_new[B, a])
        self.transfer = T
        self.eigenvalue, self.right = _power_iteration(T, tol, max_iter)
        lam_left, self.left = _power_iteration(T.T, tol, max_iter)
        self.left = self.left / (self.left @ self.right)
        self.stationary = self.left * self.right
        self.stationary = self.stationary / self.stationary.sum()
        self.step = T * self.right[None, :] / (self.eigenvalue * self.right[:, None])
        self._cyl: dict = {}

    def _digit(self, j: int) -> np.ndarray:
        """Symbol held by position ``j`` (0 = oldest) of every block state."""
        k, L = self.alphabet_size, self.block
        return (np.arange(k ** L) // k ** (L - 1 - j)) % k

    def cylinder(self, support):
        support = as_volume(support)
        if support.dimension not in (None, 1):
            raise DomainError("transfer chains live in one dimension")
        hit = self._cyl.get(support)
        if hit is not None:
            return hit
        k, L = self.alphabet_size, self.block
        n = len(support)
        if n == 0:
            return np.ones(())
        check_budget(n, k, None, "cylinder support")
        pos = [s[0] for s in support]
        a, b = pos[0], pos[-1]
        wanted = set(pos)
        alpha = self.stationary[None, :]

        def expand(alpha, digits):
            return np.stack([alpha * (digits == v) for v in range(k)], axis=1).reshape(
                -1, alpha.shape[1])

        for j in range(L):
            if a + j in wanted:
                alpha = expand(alpha, self._digit(j))
        newest = self._digit(L - 1)
        for i in range(a + L, b + 1):
            alpha = alpha @ self.step
            if i in wanted:
                alpha = expand(alpha, newest)
        hit = alpha.sum(axis=1).reshape((k,) * n)
        self._cyl[support] = hit
        return hit

    def describe(self):
        return f"TransferChain({getattr(self.potential, 'name', 'potential')}, block={self.block})"


def _power_iteration(M: np.ndarray, tol: float, max_iter: int):
    v = np.ones(M.shape[0]) / M.shape[0]
    lam = 0.0
    for _ in range(max_iter):
        w = M @ v
        lam_new = w.sum() / v.sum()
        w = w / w.sum()
        if np.max(np.abs(w - v)) < tol and abs(lam_new - lam) <= tol * abs(lam_new):
            return lam_new, w
        v, lam = w, lam_new
    raise RuntimeError("power iteration did not converge")


def transfer_marginals(chain: TransferChain, volume) -> DistributionTable:
    volume = as_volume(volume)
    if volume.dimension not in (None, 1):
        raise DomainError("transfer-chain marginals need a one-dimensional volume")
    return DistributionTable(volume, chain.cylinder(volume).reshape(-1), chain.alphabet_size,
                             validate=False)


# finite conditionals ---------------------------------------------------------

def marginal(field: Field, sub) -> DistributionTable:
    sub = as_volume(sub)
    if isinstance(field, FieldTable) and not sub.issubset(field.window):
        raise DomainError(f"{sub!r} is not contained in the field window")
    if len(sub) == 0:
        one = to_exact([1]) if field.exact else np.ones(1)
        return DistributionTable(sub, one, field.alphabet_size)
    return DistributionTable(sub, field.cylinder(sub).reshape(-1), field.alphabet_size,
                             validate=False)


def finite_conditional(field: Field, volume, cond: Configuration) -> DistributionTable:
    """``P(x cond) / P(cond)`` on ``X^volume`` for a non-empty conditioning."""
    volume = as_volume(volume)
    if len(cond.support) == 0:
        raise DomainError("finite conditioning needs a non-empty support")
    if not volume.isdisjoint(cond.support):
        raise DomainError("volume and conditioning support overlap")
    k = field.alphabet_size
    joint_sites = volume | cond.support
    J = field.cylinder(joint_sites)
    idx = [slice(None)] * len(joint_sites)
    for s, v in zip(cond.support, cond.values):
        idx[joint_sites.index(s)] = v
    num = np.asarray(J[tuple(idx)]).reshape(-1)
    den = field.prob(cond)
    if not den > 0:
        raise PositivityError("conditioning configuration has probability zero")
    return DistributionTable(volume, num / den, k, validate=False)


class FieldOnePointKernel(OnePointKernel):
    """One-point finite-conditional distribution of a field."""

    def __init__(self, field: Field, budget_bits: float | None = None):
        super().__init__(field.window, field.alphabet_size, FINITE, field.exact, budget_bits)
        self.field = field

    def _compute_table(self, t, support):
        joint = support | [t]
        J = self.field.cylinder(joint)
        J = np.moveaxis(J, joint.index(t), -1)
        if len(support) == 0:
            return J
        den = self.field.cylinder(support)
        return J / den[..., None]


class _MixtureOnePoint(FieldOnePointKernel):
    """Posterior form of the mixture conditionals, stable on long supports."""

    def _compute_table(self, t, support):
        logs = []
        comps = self.field.components
        for w, comp in comps:
            logs.append(math.log(float(w)) + comp.log_cylinder(support))
        L = np.stack(logs, axis=-1)
        post = np.exp(L - L.max(axis=-1, keepdims=True))
        post /= post.sum(axis=-1, keepdims=True)
        P = np.stack([comp.p for _, comp in comps], axis=0)
        return post @ P


class FieldSpecification(SpecKernel):
    """Window conditionals ``P(x xbar) / P(xbar)`` of a field."""

    def __init__(self, field: Field, budget_bits: float | None = None):
        super().__init__(field.window, field.alphabet_size, field.exact, budget_bits)
        self.field = field

    def _compute_element(self, volume, boundary):
        if len(boundary.support) == 0:
            return marginal(self.field, volume)
        return finite_conditional(self.field, volume, boundary)

    def _compute_window_tensor(self, volume):
        k, n = self.alphabet_size, len(self.window)
        full = self.field.cylinder(self.window)
        rest = self.window - volume
        if len(rest) == 0:
            return full
        den = embed(self.field.cylinder(rest), rest.sites, self.window, k)
        return full / den


# consistency of one-point finite-conditional kernels -------------------------

def _cond_in_layout(q: OnePointKernel, t: Site, support: Volume, layout: Volume) -> np.ndarray:
    return embed(q.table(t, support), support.sites + (t,), layout, q.alphabet_size)


def validate_fcycle(q: OnePointKernel, t, s, cond: Configuration):
    """Max over x, y of the defect of
    ``q_t^c(x) q_s^{c x}(y) = q_s^c(y) q_t^{c y}(x)`` for one conditioning ``c``."""
    t, s = as_site(t), as_site(s)
    if t == s:
        raise DomainError("the identity needs two distinct sites")
    if len(cond.support) == 0 or t in cond.support or s in cond.support:
        raise DomainError("conditioning must be non-empty and avoid both sites")
    k = q.alphabet_size
    base = cond.as_dict()
    qt = q.probs(t, cond)
    qs = q.probs(s, cond)
    worst = Fraction(0) if q.exact else 0.0
    for x in range(k):
        qs_x = q.probs(s, Configuration.from_mapping({**base, t: x}))
        for y in range(k):
            qt_y = q.probs(t, Configuration.from_mapping({**base, s: y}))
            d = abs(qt[x] * qs_x[y] - qs[y] * qt_y[x])
            worst = max(worst, d if q.exact else float(d))
    return worst


def fcycle_defect(q: OnePointKernel, t, s, support):
    """:func:`validate_fcycle` maximised over all configurations on ``support``."""
    t, s, support = as_site(t), as_site(s), as_volume(support)
    layout = support | [t, s]
    lhs = _cond_in_layout(q, t, support, layout) * _cond_in_layout(q, s, support | [t], layout)
    rhs = _cond_in_layout(q, s, support, layout) * _cond_in_layout(q, t, support | [s], layout)
    return max_abs(lhs - rhs)


def validate_fcycle2(q: OnePointKernel, t, s):
    """Max defect of the eight-factor identity with single-site conditionings."""
    t, s = as_site(t), as_site(s)
    if t == s:
        raise DomainError("the identity needs two distinct sites")
    a = np.swapaxes(q.table(t, Volume([s])), 0, 1)   # a[x_t, v_s] = q_t^{v}(x)
    b = q.table(s, Volume([t]))                      # b[x_t, y_s] = q_s^{x}(y)
    return cycle_defect(a, b)


def _pairs(q: OnePointKernel, sites):
    sites = q.window.sites if sites is None else sorted(as_site(s) for s in sites)
    return sites, [(t, s) for t in sites for s in sites if t != s]


def fcycle_suite(q: OnePointKernel, sites=None, max_support: int | None = None):
    """Max two-site ratio-identity defect over ordered site pairs and every non-empty
    conditioning support inside ``sites`` avoiding both."""
    sites, pairs = _pairs(q, sites)
    worst = Fraction(0) if q.exact else 0.0
    for t, s in pairs:
        others = [u for u in sites if u != t and u != s]
        top = len(others) if max_support is None else min(max_support, len(others))
        for r in range(1, top + 1):
            for combo in itertools.combinations(others, r):
                worst = max(worst, fcycle_defect(q, t, s, Volume(combo)))
    return worst


def fcycle2_suite(q: OnePointKernel, sites=None):
    sites, pairs = _pairs(q, sites)
    worst = Fraction(0) if q.exact else 0.0
    for t, s in pairs:
        worst = max(worst, validate_fcycle2(q, t, s))
    return worst


def reconstruct_field(q: OnePointKernel, volume, reference: Configuration | None = None,
                      order: Sequence | None = None, tol: float = RECONSTRUCTION_TOL,
                      validate: bool = True) -> FieldTable:
    """The unique strictly positive field on ``volume`` with kernel ``q``.

    Weights relative to the reference ``u`` are products of one-point ratios
    obtained by switching sites from ``u`` to ``x`` one at a time, each
    conditioned on the rest of ``volume``.  With ``validate`` the kernel is
    first checked against both cycle identities on ``volume`` and rejected
    above ``tol``.
    """
    volume = as_volume(volume)
    if len(volume) < 2:
        raise DomainError("reconstruction needs at least two sites")
    if not volume.issubset(q.window):
        raise DomainError("volume must lie inside the kernel window")
    if validate:
        d6 = fcycle_suite(q, volume.sites)
        d7 = fcycle2_suite(q, volume.sites)
        if d6 > tol or d7 > tol:
            raise InconsistentKernelError(
                f"kernel violates the cycle identities (defects {float(d6):.3g}, "
                f"{float(d7):.3g}) beyond tolerance {tol:g}")
    order = _resolve_order(volume, order)
    u = _resolve_reference(volume, reference)
    w = np.array(chain_weights(q, volume, volume, order, u))
    axes = tuple(range(len(volume)))
    probs = normalize_over(w, axes, log=not q.exact)
    return FieldTable(volume, probs.reshape(-1), q.alphabet_size)


def random_onepoint_kernel(window, alphabet_size: int, rng: np.random.Generator,
                           mode: str = FINITE) -> OnePointKernel:
    """Independently drawn distributions for every (site, conditioning); almost
    surely violates every cycle identity."""
    from .specification import FunctionOnePointKernel
    cache: dict = {}

    def fn(t, cond):
        key = (t, cond)
        if key not in cache:
            w = rng.random(alphabet_size) + 0.05
            cache[key] = w / w.sum()
        return cache[key]

    return FunctionOnePointKernel(fn, window, alphabet_size, mode)
