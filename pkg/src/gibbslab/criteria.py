"""Gibbsianness diagnostics on a finite window.

Every supremum over "all exterior configurations" is realised as an
exhaustive scan over the configurations of the window, which is exact for
finite-range subjects and only a finite-window surrogate otherwise.  For a
site ``t``, a volume ``Lam`` and a one-point finite-conditional kernel ``q``
the scans range over conditioning supports ``S`` with ``Lam <= S <= W - t``:

* C: largest spread of ``q_t^{xs}(x)`` over pairs whose configurations agree on ``Lam``;
* D: the same with both members of the pair on one common support;
* E: largest ``|q_t^{xs}(x) - q_t^{xs_Lam}(x)|``.
"""
from __future__ import annotations

import csv
import io
import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import DomainError, ResourceError
from .lattice import Configuration, Volume, as_site, as_volume, ball, check_budget
from .specification import FULL, OnePointKernel, SpecKernel

CONDITIONS = ("A", "C", "D", "E")
DEFAULT_THRESHOLDS = {"positivity_floor": 1e-6, "decay_threshold": 1e-3, "flat_floor": 5e-2}
MONOTONE_TOL = 1e-12

SEMANTICS = ("suprema over exterior configurations are exhaustive over the configurations "
             "of the observation window; exact for finite-range subjects whose range fits "
             "the window, a finite-window surrogate otherwise")


def _as_kernel(q) -> OnePointKernel:
    if isinstance(q, SpecKernel):
        return q.onepoint()
    if isinstance(q, OnePointKernel):
        return q
    if hasattr(q, "onepoint"):
        return q.onepoint()
    raise DomainError(f"cannot read a one-point kernel from {type(q).__name__}")


def _check_inner(q: OnePointKernel, t, lam) -> tuple:
    t, lam = as_site(t), as_volume(lam)
    if t not in q.window:
        raise DomainError(f"site {t} is outside the window")
    if t in lam or not lam.issubset(q.window):
        raise DomainError("the volume must lie in the window and avoid the site")
    return t, lam


# the C/D/E scan --------------------------------------------------------------

@dataclass
class _Acc:
    hi: np.ndarray
    lo: np.ndarray
    dspread: np.ndarray
    edev: np.ndarray | None
    floor: object

    def merge(self, other: "_Acc") -> "_Acc":
        return _Acc(np.maximum(self.hi, other.hi), np.minimum(self.lo, other.lo),
                    np.maximum(self.dspread, other.dspread),
                    None if self.edev is None else np.maximum(self.edev, other.edev),
                    min(self.floor, other.floor))


def _scan_chunk(q, t, lam, supports, base):
    acc = None
    for S in supports:
        tab = q.table(t, S, cache=False)
        free_axes = tuple(i for i, s in enumerate(S) if s not in lam)
        if free_axes:
            hi, lo = tab.max(axis=free_axes), tab.min(axis=free_axes)
        else:
            hi = lo = tab
        edev = None
        if base is not None:
            shape = [q.alphabet_size if s in lam else 1 for s in S] + [q.alphabet_size]
            dev = np.abs(tab - base.reshape(shape))
            edev = dev.max(axis=free_axes) if free_axes else dev
        part = _Acc(hi, lo, hi - lo, edev, tab.min())
        acc = part if acc is None else acc.merge(part)
    return acc


def _supports(q: OnePointKernel, t, lam) -> list[Volume]:
    rest = q.window - [t]
    if q.mode == FULL:
        return [rest]
    free = (rest - lam).sites
    return [lam | combo for r in range(len(free) + 1)
            for combo in itertools.combinations(free, r)]


def _scan(q: OnePointKernel, t, lam, budget_bits=None, threads: int = 1) -> dict:
    """One pass over the admissible supports; results are memoised on ``q``."""
    cache = q.__dict__.setdefault("_criteria_scans", {})
    key = (t, lam)
    if key in cache:
        return cache[key]
    if q.mode != FULL and len(lam) == 0:
        raise DomainError("finite conditionings need a non-empty volume")
    rest = q.window - [t]
    bits = budget_bits if budget_bits is not None else q.budget_bits
    check_budget(len(rest) + 1, q.alphabet_size, bits, "scan window")
    if q.mode != FULL:
        check_budget(len(rest - lam), 2, bits, "support family")
    supports = _supports(q, t, lam)
    base = q.table(t, lam) if q.mode != FULL else None
    if threads > 1 and len(supports) > 1:
        chunks = [supports[i::threads] for i in range(threads)]
        chunks = [c for c in chunks if c]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda c: _scan_chunk(q, t, lam, c, base), chunks))
        acc = parts[0]
        for p in parts[1:]:
            acc = acc.merge(p)
    else:
        acc = _scan_chunk(q, t, lam, supports, base)
    axes = tuple(range(len(lam)))

    def reduce(a):
        out = a.max(axis=axes) if axes else a
        return [v if q.exact else float(v) for v in out]

    res = {"C": reduce(acc.hi - acc.lo), "D": reduce(acc.dspread),
           "E": None if acc.edev is None else reduce(acc.edev),
           "min": acc.floor if q.exact else float(acc.floor)}
    cache[key] = res
    return res


def condition_C_defect(q, t, x: int, lam, budget_bits=None, threads: int = 1):
    """Largest ``|q_t^{a}(x) - q_t^{b}(x)|`` over conditionings ``a, b`` whose
    supports contain ``lam`` and which agree there."""
    q = _as_kernel(q)
    t, lam = _check_inner(q, t, lam)
    return _scan(q, t, lam, budget_bits, threads)["C"][x]


def condition_D_defect(q, t, x: int, lam, budget_bits=None, threads: int = 1):
    """As :func:`condition_C_defect` with both conditionings on one support."""
    q = _as_kernel(q)
    t, lam = _check_inner(q, t, lam)
    return _scan(q, t, lam, budget_bits, threads)["D"][x]


def condition_E_defect(q, t, x: int, lam, budget_bits=None, threads: int = 1):
    """Largest ``|q_t^{a}(x) - q_t^{a_lam}(x)|`` over conditionings ``a`` on
    supports containing ``lam``.  Needs a finite-conditional kernel."""
    q = _as_kernel(q)
    t, lam = _check_inner(q, t, lam)
    if q.mode == FULL:
        raise DomainError("condition E compares with conditionings on the volume alone; "
                          "it needs a finite-conditional kernel")
    return _scan(q, t, lam, budget_bits, threads)["E"][x]


def uniform_nonnullness(q, sites=None, supports=None):
    """Smallest kernel value over the scanned sites and conditioning supports.

    ``supports`` maps each site to a list of supports (or is a list used
    for every site); by default each site is conditioned on the rest of
    the window.
    """
    q = _as_kernel(q)
    sites = q.window.sites if sites is None else [as_site(s) for s in sites]
    best = None
    for t in sites:
        if supports is None:
            sups = [q.window - [t]]
        elif isinstance(supports, dict):
            sups = supports.get(t, [])
        else:
            sups = supports
        for S in sups:
            m = q.table(t, as_volume(S)).min()
            best = m if best is None else min(best, m)
    if best is None:
        raise DomainError("nothing to scan")
    return best if q.exact else float(best)


def sullivan_envelope(q, t, x: int, lam, z: Configuration, budget_bits=None):
    """``(min, max)`` of ``q_t(x)`` over full window conditionings extending ``z``."""
    q = _as_kernel(q)
    t, lam = _check_inner(q, t, lam)
    if z.support != lam:
        raise DomainError("z must be a configuration on the volume")
    rest = q.window - [t]
    check_budget(len(rest) + 1, q.alphabet_size,
                 budget_bits if budget_bits is not None else q.budget_bits, "window exterior")
    tab = q.table(t, rest)[..., x]
    idx = [slice(None)] * len(rest)
    for s, v in zip(z.support, z.values):
        idx[rest.index(s)] = v
    sub = np.asarray(tab[tuple(idx)])
    lo, hi = sub.min(), sub.max()
    return (lo, hi) if q.exact else (float(lo), float(hi))


# condition A, computed straight from the field ------------------------------

@dataclass
class DefectSchedule:
    site: tuple
    symbol: int
    radii: list
    defects: list
    condition: str
    truncated: bool = False

    def __post_init__(self):
        if self.condition not in CONDITIONS:
            raise DomainError(f"unknown condition {self.condition!r}")
        if len(self.radii) != len(self.defects):
            raise DomainError("radii and defects differ in length")

    def to_json(self) -> dict:
        return {"site": list(self.site), "symbol": self.symbol, "condition": self.condition,
                "radii": list(self.radii), "defects": [float(d) for d in self.defects],
                "truncated": self.truncated}


def inner_ball(window: Volume, t, radius: int) -> Volume:
    """Sites of the radius ball around ``t`` other than ``t``; must fit in the window."""
    t = as_site(t)
    b = ball(t, radius)
    if not b.issubset(window):
        raise DomainError(f"the radius-{radius} ball around {t} does not fit the window")
    return b - [t]


def check_radii(radii: Sequence[int]):
    radii = [int(r) for r in radii]
    if not radii:
        raise DomainError("radii must be non-empty")
    if radii[0] < 1 or any(b <= a for a, b in zip(radii, radii[1:])):
        raise DomainError("radii must be strictly increasing and at least 1")
    return radii


def _cond_from_cylinder(field, t, support: Volume):
    joint = support | [t]
    J = np.moveaxis(field.cylinder(joint), joint.index(t), -1)
    return J / J.sum(axis=-1, keepdims=True)


def condition_A_schedule(field, t, x: int, radii: Sequence[int], window=None,
                         budget_bits=None) -> DefectSchedule:
    """For each radius R, the largest change of ``P(x at t | ...)`` when the
    conditioning grows from the radius-R ball to any larger support in the
    window.  Computed from field cylinders, independently of the kernel scans.
    A budget overrun ends the schedule early with ``truncated`` set."""
    window = as_volume(window) if window is not None else field.window
    t = as_site(t)
    radii = check_radii(radii)
    k = field.alphabet_size
    rest = window - [t]
    done, defects, truncated = [], [], False
    for R in radii:
        lam = inner_ball(window, t, R)
        try:
            check_budget(len(rest) + 1, k, budget_bits, "window")
            check_budget(len(rest - lam), 2, budget_bits, "support family")
        except ResourceError:
            truncated = True
            break
        base = _cond_from_cylinder(field, t, lam)[..., x]
        worst = Fraction(0) if field.exact else 0.0
        free = (rest - lam).sites
        for r in range(1, len(free) + 1):
            for combo in itertools.combinations(free, r):
                S = lam | combo
                cur = _cond_from_cylinder(field, t, S)[..., x]
                shape = [k if s in lam else 1 for s in S]
                d = np.abs(cur - base.reshape(shape)).max()
                worst = max(worst, d if field.exact else float(d))
        done.append(R)
        defects.append(worst)
    return DefectSchedule(t, x, done, defects, "A", truncated)


# verdict --------------------------------------------------------------------

@dataclass
class VerdictReport:
    site: tuple
    window_size: int
    alphabet_size: int
    radii: list
    positivity: float
    schedules: list
    thresholds: dict
    monotone: bool
    decayed: bool
    verdict: str
    truncated: bool
    subject: str = ""
    notes: list = dc_field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "subject": self.subject, "site": list(self.site), "window_size": self.window_size,
            "alphabet_size": self.alphabet_size, "radii": list(self.radii),
            "positivity": float(self.positivity), "thresholds": dict(self.thresholds),
            "flags": {"monotone": self.monotone, "decayed": self.decayed},
            "verdict": self.verdict, "truncated": self.truncated, "semantics": SEMANTICS,
            "notes": list(self.notes), "schedules": [s.to_json() for s in self.schedules],
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["site", "symbol", "radius", "condition", "defect"])
        for s in self.schedules:
            for R, d in zip(s.radii, s.defects):
                w.writerow([" ".join(map(str, s.site)), s.symbol, R, s.condition,
                            "%.17g" % float(d)])
        return buf.getvalue()


def window_centre(window: Volume):
    lo = [min(c) for c in zip(*window.sites)]
    hi = [max(c) for c in zip(*window.sites)]
    t = tuple((a + b) // 2 for a, b in zip(lo, hi))
    if t not in window:
        raise DomainError("the window has no centre site; pass one explicitly")
    return t


def decide(positivity, e_max: Sequence[float], thresholds: dict, positive: bool = True):
    """Three-valued verdict from the positivity floor and the E schedule."""
    if not positive:
        return "non-gibbs-flagged", False, False
    if not e_max:
        return "inconclusive", False, False
    monotone = all(b <= a + MONOTONE_TOL for a, b in zip(e_max, e_max[1:]))
    decayed = e_max[-1] <= thresholds["decay_threshold"]
    if positivity >= thresholds["positivity_floor"] and monotone and decayed:
        return "gibbs-consistent", monotone, decayed
    if e_max[-1] > thresholds["flat_floor"]:
        return "non-gibbs-flagged", monotone, decayed
    return "inconclusive", monotone, decayed


def gibbs_verdict(subject, radii: Sequence[int], thresholds: dict | None = None, site=None,
                  budget_bits=None, threads: int = 1, with_A: bool = True) -> VerdictReport:
    """Scan conditions C, D, E (and A) around ``site`` and classify ``subject``."""
    th = dict(DEFAULT_THRESHOLDS)
    th.update(thresholds or {})
    window = subject.window
    t = window_centre(window) if site is None else as_site(site)
    radii = check_radii(radii)
    k = subject.alphabet_size
    desc = subject.describe() if hasattr(subject, "describe") else type(subject).__name__
    common = dict(site=t, window_size=len(window), alphabet_size=k, radii=radii,
                  thresholds=th, subject=desc)
    if not subject.is_strictly_positive():
        return VerdictReport(positivity=0.0, schedules=[], monotone=False, decayed=False,
                             verdict="non-gibbs-flagged", truncated=False,
                             notes=["subject is not strictly positive"], **common)
    q = subject.onepoint()
    done, scans, truncated = [], [], False
    for R in radii:
        lam = inner_ball(window, t, R)
        try:
            scans.append(_scan(q, t, lam, budget_bits, threads))
        except ResourceError:
            truncated = True
            break
        done.append(R)
    schedules = []
    for x in range(k):
        if with_A:
            a = condition_A_schedule(subject, t, x, done, window, budget_bits)
            schedules.append(a)
        for cond in ("C", "D", "E"):
            schedules.append(DefectSchedule(t, x, list(done), [s[cond][x] for s in scans],
                                            cond, truncated))
    positivity = min((s["min"] for s in scans), default=0.0)
    e_max = [max(s["E"]) for s in scans]
    verdict, monotone, decayed = decide(positivity, e_max, th)
    notes = []
    if truncated:
        notes.append(f"schedule truncated at radius {done[-1] if done else None} by the budget")
    return VerdictReport(positivity=float(positivity), schedules=schedules, monotone=monotone,
                         decayed=decayed, verdict=verdict, truncated=truncated, notes=notes,
                         **common)

#: Alias matching the name used in the documentation.
DiagnosticsReport = VerdictReport
