"""Specification kernels, one-point kernels and their consistency checks.

Everything lives on an observation window ``W``.  A conditioning "on the
exterior" of a volume is a configuration on ``W`` minus that volume; for
finite-range potentials with enough margin this is exact, for decaying ones
each Gibbs element records a certified half-width.

Most bulk computations go through *window tensors*: for a volume ``L`` the
array of shape ``(k,) * |W|`` whose entry at a window configuration ``w`` is
``q_L^{w outside L}(w on L)``.  Consistency identities then reduce to
broadcast arithmetic, which works unchanged on float arrays and on exact
object arrays of ``Fraction``.
"""
from __future__ import annotations

import itertools
import math
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .distribution import DistributionTable, is_exact, max_abs, to_exact
from .errors import DomainError, PositivityError, ResourceError
from .lattice import (
    Configuration,
    Site,
    Volume,
    as_site,
    as_volume,
    ball,
    check_budget,
    concatenate,
    configuration_array,
    config_index,
    enumerate_configurations,
    restrict,
    within,
)
from .potential import Interactions, Potential, _margin, boltzmann_factor, energy, evaluate_potential

FULL = "full"
FINITE = "finite"


def _logsumexp(a: np.ndarray, axis) -> np.ndarray:
    m = np.max(a, axis=axis, keepdims=True)
    return m + np.log(np.sum(np.exp(a - m), axis=axis, keepdims=True))


def normalize_over(weights: np.ndarray, axes: tuple[int, ...], log: bool = False) -> np.ndarray:
    """Normalize a (log-)weight tensor over ``axes``."""
    if log:
        return np.exp(weights - _logsumexp(weights, axes))
    return weights / np.sum(weights, axis=axes, keepdims=True)


def embed(arr: np.ndarray, arr_sites: Sequence[Site], layout: Volume, k: int) -> np.ndarray:
    """Re-lay an array indexed by ``arr_sites`` onto ``layout`` axes.

    Sites of the layout that ``arr`` does not depend on become size-1 axes.
    """
    order = sorted(range(len(arr_sites)), key=lambda i: layout.index(arr_sites[i]))
    out = np.transpose(arr, order) if len(arr_sites) > 1 else arr
    shape = [1] * len(layout)
    for s in arr_sites:
        shape[layout.index(s)] = k
    return out.reshape(shape)


def cycle_defect(a: np.ndarray, b: np.ndarray):
    """Max defect of the four-factor cycle identity.

    ``a[..., x, v] = q_t(x | v at s)`` and ``b[..., x, y] = q_s(y | x at t)``,
    with any leading axes carrying the common ambient conditioning.
    """
    k = a.shape[-1]
    X = np.arange(k).reshape(k, 1, 1, 1)
    U = np.arange(k).reshape(1, k, 1, 1)
    Y = np.arange(k).reshape(1, 1, k, 1)
    V = np.arange(k).reshape(1, 1, 1, k)
    lhs = a[..., X, V] * b[..., X, Y] * a[..., U, Y] * b[..., U, V]
    rhs = b[..., U, Y] * a[..., X, Y] * b[..., X, V] * a[..., U, V]
    return max_abs(lhs - rhs)


class OnePointKernel:
    """Single-site conditional distributions ``t, conditioning -> X^t``.

    ``mode`` is ``"full"`` when the conditioning must cover ``W - t`` (a
    1-specification on the window) and ``"finite"`` when any non-empty
    subset of ``W - t`` is allowed (a one-point finite-conditional
    distribution).  Subclasses override ``_compute_table`` or
    ``_compute_probs``.
    """

    def __init__(self, window, alphabet_size: int, mode: str = FULL, exact: bool = False,
                 budget_bits: float | None = None):
        if mode not in (FULL, FINITE):
            raise DomainError(f"unknown kernel mode {mode!r}")
        self.window = as_volume(window)
        self.alphabet_size = int(alphabet_size)
        self.mode = mode
        self.exact = exact
        self.budget_bits = budget_bits
        self._tables: dict = {}
        self._probs: dict = {}
        self._tensors: dict = {}

    # conditioning checks ----------------------------------------------------
    def _check(self, t: Site, support: Volume):
        if t not in self.window:
            raise DomainError(f"site {t} is outside the window")
        if t in support or not support.issubset(self.window):
            raise DomainError("conditioning must lie in the window, away from the site")
        if self.mode == FULL and len(support) != len(self.window) - 1:
            raise DomainError("a full-mode kernel conditions on the whole window minus the site")
        if self.mode == FINITE and len(support) == 0:
            raise DomainError("finite conditioning needs a non-empty support")

    def probs(self, t, cond: Configuration) -> np.ndarray:
        """Distribution of the value at ``t`` as a length-k array."""
        t = as_site(t)
        self._check(t, cond.support)
        key = (t, cond)
        hit = self._probs.get(key)
        if hit is None:
            hit = self._compute_probs(t, cond)
            self._probs[key] = hit
        return hit

    def element(self, t, cond: Configuration) -> DistributionTable:
        t = as_site(t)
        return DistributionTable(Volume([t]), self.probs(t, cond), self.alphabet_size,
                                 validate=False)

    def table(self, t, support, cache: bool = True) -> np.ndarray:
        """All elements with conditioning support ``support`` at once.

        Shape ``(k,) * |support| + (k,)``: leading axes index the
        conditioning values in canonical order, the last the value at ``t``.
        Large scans pass ``cache=False`` to keep memory flat.
        """
        t, support = as_site(t), as_volume(support)
        key = (t, support)
        hit = self._tables.get(key)
        if hit is None:
            if len(support):
                self._check(t, support)
            check_budget(len(support) + 1, self.alphabet_size, self.budget_bits,
                         "conditioning support")
            hit = self._compute_table(t, support)
            if cache:
                self._tables[key] = hit
        return hit

    def tensor(self, t, layout=None) -> np.ndarray:
        """``q_t`` conditioned on ``layout - t``, laid out over ``layout``."""
        t = as_site(t)
        layout = self.window if layout is None else as_volume(layout)
        key = (t, layout)
        hit = self._tensors.get(key)
        if hit is None:
            tab = self.table(t, layout - [t])
            cond_sites = (layout - [t]).sites
            hit = embed(tab, cond_sites + (t,), layout, self.alphabet_size)
            self._tensors[key] = hit
        return hit

    def window_tensor(self, t) -> np.ndarray:
        return self.tensor(t, self.window)

    # defaults ----------------------------------------------------------------
    def _compute_probs(self, t, cond):
        tab = self.table(t, cond.support)
        return tab[tuple(cond.values)] if len(cond) else tab

    def _compute_table(self, t, support):
        k = self.alphabet_size
        rows = configuration_array(len(support), k, self.budget_bits)
        out = np.empty((len(rows), k), dtype=object if self.exact else np.float64)
        for i, row in enumerate(rows.tolist()):
            out[i] = self._compute_probs(t, Configuration(support, tuple(row)))
        return out.reshape((k,) * len(support) + (k,))

    def with_override(self, t, cond: Configuration, probs) -> "OnePointKernel":
        """A copy of this kernel with one element replaced."""
        return _OverriddenOnePoint(self, {(as_site(t), cond): np.asarray(probs)})


class FunctionOnePointKernel(OnePointKernel):
    """Kernel given by a callable ``(t, cond) -> length-k probabilities``."""

    def __init__(self, fn, window, alphabet_size, mode=FULL, exact=False, budget_bits=None):
        super().__init__(window, alphabet_size, mode, exact, budget_bits)
        self.fn = fn

    def _compute_probs(self, t, cond):
        p = np.asarray(self.fn(t, cond))
        return to_exact(p) if self.exact else p.astype(np.float64)


class _OverriddenOnePoint(OnePointKernel):
    def __init__(self, base: OnePointKernel, overrides: dict):
        super().__init__(base.window, base.alphabet_size, base.mode, base.exact, base.budget_bits)
        self.base = base
        self.overrides = overrides

    def _compute_probs(self, t, cond):
        if (t, cond) in self.overrides:
            return self.overrides[(t, cond)]
        return self.base.probs(t, cond)

    def _compute_table(self, t, support):
        tab = np.array(self.base.table(t, support), copy=True)
        for (s, cond), p in self.overrides.items():
            if s == t and cond.support == support:
                tab[tuple(cond.values)] = p
        return tab


class SpecKernel:
    """Family ``(volume, boundary on W - volume) -> distribution on X^volume``."""

    def __init__(self, window, alphabet_size: int, exact: bool = False,
                 budget_bits: float | None = None):
        self.window = as_volume(window)
        self.alphabet_size = int(alphabet_size)
        self.exact = exact
        self.budget_bits = budget_bits
        self._elements: dict = {}
        self._tensors: dict = {}

    def _check(self, volume: Volume, boundary: Configuration):
        if not volume.issubset(self.window):
            raise DomainError(f"{volume!r} is not inside the window")
        if boundary.support != self.window - volume:
            raise DomainError("boundary must cover exactly the window minus the volume")

    def element(self, volume, boundary: Configuration) -> DistributionTable:
        volume = as_volume(volume)
        self._check(volume, boundary)
        key = (volume, boundary)
        hit = self._elements.get(key)
        if hit is None:
            hit = self._compute_element(volume, boundary)
            self._elements[key] = hit
        return hit

    def window_tensor(self, volume) -> np.ndarray:
        volume = as_volume(volume)
        hit = self._tensors.get(volume)
        if hit is None:
            check_budget(len(self.window), self.alphabet_size, self.budget_bits, "window")
            hit = self._compute_window_tensor(volume)
            self._tensors[volume] = hit
        return hit

    def _compute_element(self, volume, boundary) -> DistributionTable:
        raise NotImplementedError

    def _compute_window_tensor(self, volume: Volume) -> np.ndarray:
        k = self.alphabet_size
        n = len(self.window)
        out = np.empty((k,) * n, dtype=object if self.exact else np.float64)
        rest = self.window - volume
        pos_v = self.window.positions(volume)
        pos_r = self.window.positions(rest)
        for bnd in enumerate_configurations(rest, k, self.budget_bits):
            probs = self.element(volume, bnd).tensor()
            idx = [slice(None)] * n
            for p, v in zip(pos_r, bnd.values):
                idx[p] = v
            out[tuple(idx)] = probs
        return out

    def onepoint(self) -> OnePointKernel:
        """The 1-specification contained in this kernel."""
        return _SpecOnePoint(self)

    def with_override(self, volume, boundary: Configuration, probs) -> "SpecKernel":
        return _OverriddenSpec(self, {(as_volume(volume), boundary): np.asarray(probs)})


class _SpecOnePoint(OnePointKernel):
    def __init__(self, spec: SpecKernel):
        super().__init__(spec.window, spec.alphabet_size, FULL, spec.exact, spec.budget_bits)
        self.spec = spec

    def _compute_probs(self, t, cond):
        return self.spec.element(Volume([t]), cond).probs

    def _compute_table(self, t, support):
        T = self.spec.window_tensor(Volume([t]))
        pos = self.window.index(t)
        return np.moveaxis(T, pos, -1)


class _OverriddenSpec(SpecKernel):
    def __init__(self, base: SpecKernel, overrides: dict):
        super().__init__(base.window, base.alphabet_size, base.exact, base.budget_bits)
        self.base = base
        self.overrides = overrides

    def _compute_element(self, volume, boundary):
        if (volume, boundary) in self.overrides:
            return DistributionTable(volume, self.overrides[(volume, boundary)],
                                     self.alphabet_size, validate=False)
        return self.base.element(volume, boundary)

    def _compute_window_tensor(self, volume):
        T = np.array(self.base.window_tensor(volume), copy=True)
        for (vol, bnd), probs in self.overrides.items():
            if vol != volume:
                continue
            idx = [slice(None)] * len(self.window)
            for s, v in zip(bnd.support, bnd.values):
                idx[self.window.index(s)] = v
            T[tuple(idx)] = probs.reshape((self.alphabet_size,) * len(volume))
        return T


# Gibbs kernels ---------------------------------------------------------------

def _softmax_half_width(tail_total: float) -> float:
    # energies off by at most tail_total each => logits oscillate by <= 2*tail_total
    return math.tanh(tail_total / 2) if tail_total > 0 else 0.0


def gibbs_element(potential: Potential, volume, boundary: Configuration,
                  radius: int | None = None, exact: bool = False) -> DistributionTable:
    """``exp(-U)`` normalized over ``X^volume``, energies from :func:`energy`.

    Evaluates the defining formula term by term; :class:`GibbsSpecification`
    is the vectorised equivalent for whole windows.
    """
    volume = as_volume(volume)
    k = potential.alphabet_size
    configs = list(enumerate_configurations(volume, k))
    if exact:
        if not potential.exact:
            raise DomainError("exact mode needs a potential with rational Boltzmann factors")
        kept = boundary if radius is None else restrict(
            boundary, within(boundary.support, volume, radius))
        weights = []
        for x in configs:
            cfg = concatenate(x, kept)
            w = Fraction(1)
            for sites in potential.supports(volume, cfg.support):
                w *= boltzmann_factor(potential, restrict(cfg, sites))
            weights.append(w)
        return DistributionTable.from_weights(volume, to_exact(weights), k)
    values = [energy(potential, volume, x, boundary, radius) for x in configs]
    U = np.array([e.value for e in values])
    tail_total = max(e.tail_bound for e in values)
    w = np.exp(-(U - U.min()))
    return DistributionTable.from_weights(volume, w, k, _softmax_half_width(tail_total))


class GibbsSpecification(SpecKernel):
    """Gibbsian kernel of a potential on a window.

    ``radius`` truncates every energy to supports within that distance of
    the volume; ``None`` keeps everything inside the window.
    """

    def __init__(self, potential: Potential, window, radius: int | None = None,
                 exact: bool = False, budget_bits: float | None = None):
        super().__init__(window, potential.alphabet_size, exact, budget_bits)
        if exact and not potential.exact:
            raise DomainError("exact mode needs a potential with rational Boltzmann factors")
        self.potential = potential
        self.radius = radius
        self.interactions = Interactions(potential, self.window)
        self._selected: dict = {}

    def _terms(self, volume: Volume) -> list[int]:
        hit = self._selected.get(volume)
        if hit is None:
            allowed = None
            if self.radius is not None:
                allowed = volume | within(self.window - volume, volume, self.radius)
            hit = self.interactions.select(volume, allowed)
            self._selected[volume] = hit
        return hit

    def tail_bound(self, volume) -> float:
        """Certified bound on the energy omitted for ``volume`` on this window."""
        volume = as_volume(volume)
        pot = self.potential
        cap = self.radius
        if pot.range is not None:
            cap = pot.range if cap is None else min(cap, pot.range)
        margin = _margin(volume, set((self.window - volume).sites), cap)
        if pot.range is not None and margin >= pot.range:
            return 0.0
        return math.fsum(pot.tail(t, margin) for t in volume)

    def _compute_element(self, volume, boundary):
        k = self.alphabet_size
        n = len(self.window)
        inner = configuration_array(len(volume), k, self.budget_bits)
        configs = np.zeros((len(inner), n), dtype=np.int64)
        configs[:, self.window.positions(volume)] = inner
        for s, v in zip(boundary.support, boundary.values):
            configs[:, self.window.index(s)] = v
        terms = self._terms(volume)
        if self.exact:
            return DistributionTable.from_weights(
                volume, self.interactions.weights(configs, terms), k)
        U = self.interactions.energies(configs, terms)
        w = np.exp(-(U - U.min()))
        return DistributionTable.from_weights(
            volume, w, k, _softmax_half_width(self.tail_bound(volume)))

    def _compute_window_tensor(self, volume):
        k = self.alphabet_size
        n = len(self.window)
        configs = configuration_array(n, k, self.budget_bits)
        terms = self._terms(volume)
        axes = tuple(self.window.positions(volume))
        if self.exact:
            w = self.interactions.weights(configs, terms).reshape((k,) * n)
            return normalize_over(w, axes)
        U = self.interactions.energies(configs, terms).reshape((k,) * n)
        return normalize_over(-U, axes, log=True)


def gibbs_onepoint(potential: Potential, window, radius: int | None = None,
                   exact: bool = False) -> OnePointKernel:
    return GibbsSpecification(potential, window, radius, exact).onepoint()


# reconstruction -------------------------------------------------------------

def _resolve_order(volume: Volume, order) -> list[Site]:
    if order is None:
        return list(volume.sites)
    order = [as_site(s) for s in order]
    if sorted(order) != list(volume.sites):
        raise DomainError("order must be a permutation of the volume")
    return order


def _resolve_reference(volume: Volume, reference) -> Configuration:
    if reference is None:
        return Configuration.constant(volume, 0)
    if reference.support != volume:
        raise DomainError("reference configuration must live on the volume")
    return reference


def reconstruct_from_onepoint(q: OnePointKernel, volume, boundary: Configuration,
                              reference: Configuration | None = None,
                              order: Sequence | None = None) -> DistributionTable:
    """Element of the specification generated by a strictly positive one-point kernel.

    The weight of ``x`` is the product over the enumeration ``t_1..t_n`` of
    ``q_{t_i}(x_{t_i}) / q_{t_i}(u_{t_i})``, where site ``t_i`` is conditioned
    on the boundary, on ``x`` at the earlier sites and on the reference ``u``
    at the later ones.  The result does not depend on ``u`` or the order
    when ``q`` satisfies the cycle condition.
    """
    volume = as_volume(volume)
    order = _resolve_order(volume, order)
    u = _resolve_reference(volume, reference)
    k = q.alphabet_size
    u_map = u.as_dict()
    base = boundary.as_dict()
    weights = []
    for x in enumerate_configurations(volume, k):
        x_map = x.as_dict()
        w = Fraction(1) if q.exact else 0.0
        for i, t in enumerate(order):
            cond = dict(base)
            cond.update({s: x_map[s] for s in order[:i]})
            cond.update({s: u_map[s] for s in order[i + 1:]})
            p = q.probs(t, Configuration.from_mapping(cond))
            num, den = p[x_map[t]], p[u_map[t]]
            if not den > 0 or not num > 0:
                raise PositivityError(f"kernel at {t} is not strictly positive")
            if q.exact:
                w *= num / den
            else:
                w += math.log(num) - math.log(den)
        weights.append(w)
    if q.exact:
        return DistributionTable.from_weights(volume, to_exact(weights), k)
    lw = np.array(weights)
    return DistributionTable.from_weights(volume, np.exp(lw - lw.max()), k)


def chain_weights(q: OnePointKernel, layout: Volume, volume: Volume,
                  order: Sequence[Site], reference: Configuration) -> np.ndarray:
    """Vectorised reconstruction weights over ``layout`` axes.

    Returns a tensor of shape ``(k,) * |layout|`` holding the (log, in float
    mode) product ratio for every configuration; sites of ``layout`` outside
    ``volume`` act as the fixed boundary.
    """
    k = q.alphabet_size
    n = len(layout)
    u_map = reference.as_dict()
    acc = np.ones((1,) * n, dtype=object) if q.exact else np.zeros((1,) * n)
    if q.exact:
        acc[(0,) * n] = Fraction(1)
    for i, t in enumerate(order):
        T = q.tensor(t, layout)
        idx = [slice(None)] * n
        for s in order[i + 1:]:
            p = layout.index(s)
            idx[p] = slice(u_map[s], u_map[s] + 1)
        num = T[tuple(idx)]
        p = layout.index(t)
        idx[p] = slice(u_map[t], u_map[t] + 1)
        den = T[tuple(idx)]
        if not (np.all(num > 0) and np.all(den > 0)):
            raise PositivityError(f"kernel at {t} is not strictly positive")
        if q.exact:
            acc = acc * (num / den)
        else:
            acc = acc + (np.log(num) - np.log(den))
    return np.broadcast_to(acc, (k,) * n)


class ReconstructedSpecification(SpecKernel):
    """The specification generated by a strictly positive full-mode one-point kernel."""

    def __init__(self, q: OnePointKernel, order: Sequence | None = None,
                 reference: Configuration | None = None):
        super().__init__(q.window, q.alphabet_size, q.exact, q.budget_bits)
        self.q = q
        self.order = order
        self.reference = reference

    def _order_ref(self, volume):
        # ``order`` ranks sites; unlisted sites follow in canonical order
        order = None
        if self.order is not None:
            order = [s for s in (as_site(s) for s in self.order) if s in volume]
            order += [s for s in volume if s not in order]
        u = None
        if self.reference is not None:
            u = restrict(self.reference, volume)
        return _resolve_order(volume, order), _resolve_reference(volume, u)

    def _compute_element(self, volume, boundary):
        order, u = self._order_ref(volume)
        return reconstruct_from_onepoint(self.q, volume, boundary, u, order)

    def _compute_window_tensor(self, volume):
        if len(volume) == 0:
            k, n = self.alphabet_size, len(self.window)
            return np.ones((k,) * n, dtype=object if self.exact else np.float64)
        order, u = self._order_ref(volume)
        w = chain_weights(self.q, self.window, volume, order, u)
        axes = tuple(self.window.positions(volume))
        return normalize_over(np.array(w), axes, log=not self.exact)


# validators -----------------------------------------------------------------

def _unit_tensor(spec: SpecKernel) -> np.ndarray:
    n = len(spec.window)
    if spec.exact:
        out = np.empty((1,) * n, dtype=object)
        out[(0,) * n] = Fraction(1)
        return out
    return np.ones((1,) * n)


def validate_spec_consistency(Q: SpecKernel, volume, sub) -> float:
    """Max over boundaries and configurations of the defect of
    ``q_L(xy) = (q_L)_{L-I}(x) * q_I^{boundary x}(y)``."""
    volume, sub = as_volume(volume), as_volume(sub)
    if not sub.issubset(volume):
        raise DomainError("the sub-volume must be contained in the volume")
    T_L = Q.window_tensor(volume)
    if len(sub):
        marg = np.sum(T_L, axis=tuple(Q.window.positions(sub)), keepdims=True)
        T_I = Q.window_tensor(sub)
    else:
        marg, T_I = T_L, _unit_tensor(Q)
    return max_abs(T_L - marg * T_I)


def spec_consistency_suite(Q: SpecKernel, volumes: Iterable) -> float:
    """Max defect over the given volumes and every sub-volume of each."""
    worst = Fraction(0) if Q.exact else 0.0
    for vol in volumes:
        vol = as_volume(vol)
        for sub in vol.subsets():
            worst = max(worst, validate_spec_consistency(Q, vol, sub))
    return worst


def _pair_matrices(q: OnePointKernel, t: Site, s: Site):
    """Window tensors of ``q_t`` and ``q_s`` with the ``(t, s)`` axes moved last."""
    pt, ps = q.window.index(t), q.window.index(s)
    a = np.moveaxis(q.window_tensor(t), (pt, ps), (-2, -1))
    b = np.moveaxis(q.window_tensor(s), (pt, ps), (-2, -1))
    return a, b


def validate_onepoint_cycle(q: OnePointKernel, t, s, boundary: Configuration):
    """Max defect of the 1-specification cycle condition for one ambient boundary."""
    t, s = as_site(t), as_site(s)
    if t == s:
        raise DomainError("the cycle condition needs two distinct sites")
    if boundary.support != q.window - [t, s]:
        raise DomainError("boundary must cover the window minus both sites")
    k = q.alphabet_size
    dtype = object if q.exact else np.float64
    a = np.empty((k, k), dtype=dtype)
    b = np.empty((k, k), dtype=dtype)
    base = boundary.as_dict()
    for i in range(k):
        a[:, i] = q.probs(t, Configuration.from_mapping({**base, s: i}))
        b[i, :] = q.probs(s, Configuration.from_mapping({**base, t: i}))
    return cycle_defect(a, b)


def onepoint_cycle_defect(q: OnePointKernel, t, s):
    """Cycle defect maximised over every ambient boundary on ``W - {t, s}``."""
    t, s = as_site(t), as_site(s)
    if t == s:
        raise DomainError("the cycle condition needs two distinct sites")
    a, b = _pair_matrices(q, t, s)
    return cycle_defect(a, b)


def onepoint_cycle_suite(q: OnePointKernel, sites: Iterable | None = None):
    sites = q.window.sites if sites is None else [as_site(s) for s in sites]
    worst = Fraction(0) if q.exact else 0.0
    for t, s in itertools.combinations(sites, 2):
        worst = max(worst, onepoint_cycle_defect(q, t, s))
    return worst


def quasilocality_modulus(q: OnePointKernel, t, x: int, radii: Sequence[int],
                          budget_bits: float | None = None) -> list[float]:
    """For each radius R, the largest change of ``q_t(x)`` between two
    boundaries that agree on the radius-R ball around ``t``."""
    t = as_site(t)
    rest = q.window - [t]
    k = q.alphabet_size
    try:
        check_budget(len(rest), k, budget_bits, "window exterior")
    except ResourceError as exc:
        bits = budget_bits if budget_bits is not None else 30
        feasible = -1
        R = 0
        while len(ball(t, R) & rest) * math.log2(k) <= bits and R <= max(radii, default=0):
            feasible = R
            R += 1
        raise ResourceError(f"{exc}; largest feasible radius is {feasible}") from exc
    tab = q.table(t, rest)[..., x]
    out = []
    for R in radii:
        keep = set(rest.positions(ball(t, R) & rest))
        other = tuple(i for i in range(len(rest)) if i not in keep)
        if not other:
            out.append(0.0)
            continue
        spread = np.max(tab, axis=other) - np.min(tab, axis=other)
        out.append(float(np.max(spread)))
    return out


# export ---------------------------------------------------------------------

def _num(p):
    return str(p) if isinstance(p, Fraction) else float(p)


def kernel_to_json(q: OnePointKernel, supports: dict | None = None) -> dict:
    """Element list of a one-point kernel.

    ``supports`` maps sites to the conditioning supports to export; by
    default every site is exported with the full conditioning ``W - t``.
    """
    elements = []
    for t in q.window:
        sups = [q.window - [t]] if supports is None else supports.get(t, [])
        for sup in sups:
            sup = as_volume(sup)
            tab = q.table(t, sup)
            for cond in enumerate_configurations(sup, q.alphabet_size):
                p = tab[tuple(cond.values)] if len(sup) else tab
                elements.append({
                    "site": list(t),
                    "conditioning": {"sites": [list(s) for s in sup],
                                     "values": list(cond.values)},
                    "probabilities": [_num(v) for v in p],
                })
    return {"window": [list(s) for s in q.window], "alphabet_size": q.alphabet_size,
            "mode": q.mode, "order": "lexicographic", "elements": elements}


def spec_to_json(Q: SpecKernel, volumes: Iterable) -> dict:
    elements = []
    for vol in volumes:
        vol = as_volume(vol)
        for bnd in enumerate_configurations(Q.window - vol, Q.alphabet_size):
            el = Q.element(vol, bnd)
            elements.append({
                "volume": [list(s) for s in vol],
                "boundary": {"sites": [list(s) for s in bnd.support],
                             "values": list(bnd.values)},
                "probabilities": [_num(v) for v in el.probs],
            })
    return {"window": [list(s) for s in Q.window], "alphabet_size": Q.alphabet_size,
            "order": "lexicographic", "elements": elements}
