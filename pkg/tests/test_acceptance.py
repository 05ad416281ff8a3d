"""Acceptance criteria, one test per criterion.

Each test records a one-line PASS/FAIL verdict that the terminal summary
prints (see ``conftest.py``); running this file directly prints the same
lines.  Tolerances and runtime limits are the documented acceptance values.
"""
import itertools
import math
import time
from fractions import Fraction

import numpy as np
import pytest

from gibbslab.criteria import (condition_C_defect, condition_D_defect, condition_E_defect,
                               gibbs_verdict, inner_ball, sullivan_envelope)
from gibbslab.fields import (FieldTable, MixtureField, TransferChain, fcycle2_suite,
                             fcycle_suite, finite_conditional, reconstruct_field)
from gibbslab.lattice import Configuration, Volume, enumerate_configurations
from gibbslab.potential import exponential_pair, ising, moebius_extract, potts
from gibbslab.specification import (GibbsSpecification, gibbs_element, onepoint_cycle_suite,
                                    quasilocality_modulus, reconstruct_from_onepoint,
                                    spec_consistency_suite)

RESULTS: list[str] = []
SEED = 1729


def record(name: str, ok: bool, detail: str):
    line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
    RESULTS.append(line)
    print(line)
    return ok


def random_tables(exact=False):
    """The criterion-1 corpus: 20 float tables or 4 rational ones."""
    rng = np.random.default_rng(SEED + exact)
    shapes = ([[4], [2, 2], [5], [2, 3], [6], [3, 2], [7], [2, 4], [8], [3, 3],
               [9], [2, 5], [10], [5, 2], [4], [2, 2], [5], [3, 2], [6], [2, 3]]
              if not exact else [[3], [2, 2], [4], [2, 3]])
    out = []
    for i, ext in enumerate(shapes):
        n = int(np.prod(ext))
        k = 3 if (i % 3 == 1 and n <= 6) or (exact and i % 2) else 2
        out.append(FieldTable.random(Volume.box(ext), k, rng, exact=exact, spread=1.5))
    return out


# shared kernels for criterion 6 ---------------------------------------------

KERNELS = {}


def mixture_field(n_sites):
    return MixtureField.bernoulli([0.2, 0.8], [0.5, 0.5], Volume.interval(0, n_sites - 1))


def mixture_floor(n_lam, n_free, p=0.8):
    """Condition-C defect of the symmetric Bernoulli mixture, from counts alone."""
    def q1(ones, zeros):
        a = p ** ones * (1 - p) ** zeros
        b = (1 - p) ** ones * p ** zeros
        w = a / (a + b)
        return w * p + (1 - w) * (1 - p)
    best = 0.0
    for a in range(n_lam + 1):
        vals = [q1(a + b1, n_lam - a + b0)
                for b1 in range(n_free + 1) for b0 in range(n_free + 1 - b1)]
        best = max(best, max(vals) - min(vals))
    return best


def test_criterion_1_identity_suite():
    start = time.perf_counter()
    worst = 0.0
    tables = random_tables()
    for P in tables:
        q = P.onepoint()
        worst = max(worst, fcycle_suite(q), fcycle2_suite(q))
    exact_worst = Fraction(0)
    for P in random_tables(exact=True):
        q = P.onepoint()
        exact_worst = max(exact_worst, fcycle_suite(q), fcycle2_suite(q))
    KERNELS["random"] = [(P.onepoint(), P.window) for P in tables[:6]]
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-10 and exact_worst == 0 and elapsed <= 60 and len(tables) >= 20
    assert record("criterion 1 (one-point identities on random fields)", ok,
                  f"{len(tables)} tables, float max defect {worst:.3g} <= 1e-10, "
                  f"rational max defect {exact_worst} == 0, {elapsed:.1f}s <= 60s")


def test_criterion_2_specification_suite():
    start = time.perf_counter()
    cases = [(ising(0.5, 0.1), Volume.interval(0, 11)),
             (ising(0.4, -0.2, dimension=2), Volume.box([3, 4])),
             (potts(0.7, 3), Volume.interval(0, 7)),
             (potts(0.5, 3, dimension=2), Volume.box([2, 4]))]
    eq1 = eq5 = 0.0
    for pot, W in cases:
        Q = GibbsSpecification(pot, W)
        vols = [v for r in range(1, 5) for v in map(Volume, itertools.combinations(W.sites, r))]
        eq1 = max(eq1, spec_consistency_suite(Q, vols))
        eq5 = max(eq5, onepoint_cycle_suite(Q.onepoint()))
        Q._tensors.clear()
    elapsed = time.perf_counter() - start
    ok = eq1 <= 1e-10 and eq5 <= 1e-10 and elapsed <= 120
    assert record("criterion 2 (consistency and cycle condition on Gibbs kernels)", ok,
                  f"consistency max defect {eq1:.3g}, cycle max defect {eq5:.3g} (<= 1e-10), "
                  f"{elapsed:.1f}s <= 120s")


def test_criterion_3_reconstruction_round_trips():
    start = time.perf_counter()
    rng = np.random.default_rng(SEED)
    err_a = spread = 0.0
    cases = [(ising(0.6, 0.3, dimension=2), Volume.box([3, 3]),
              [[(1, 1)], [(0, 1), (1, 1)], [(0, 0), (1, 1), (2, 2)], [(0, 1), (1, 0), (1, 2), (2, 1)]]),
             (potts(0.8, 3), Volume.interval(0, 6),
              [[(3,)], [(2,), (4,)], [(1,), (2,), (3,), (5,)]])]
    for pot, W, vols in cases:
        q = GibbsSpecification(pot, W).onepoint()
        k = pot.alphabet_size
        for vol in map(Volume, vols):
            bnds = list(enumerate_configurations(W - vol, k))
            for j in rng.choice(len(bnds), size=min(6, len(bnds)), replace=False):
                bnd = bnds[j]
                want = gibbs_element(pot, vol, bnd).probs
                outs = []
                for _ in range(10):
                    order = [vol.sites[i] for i in rng.permutation(len(vol))]
                    ref = Configuration.from_values(vol, rng.integers(0, k, len(vol)))
                    outs.append(reconstruct_from_onepoint(q, vol, bnd, ref, order).probs)
                outs = np.array(outs)
                err_a = max(err_a, float(np.abs(outs - want).max()))
                spread = max(spread, float(np.ptp(outs, axis=0).max()))
    tv = 0.0
    for P in random_tables():
        rec = reconstruct_field(P.onepoint(), P.window)
        tv = max(tv, rec.table.total_variation(P.table))
    elapsed = time.perf_counter() - start
    ok = err_a <= 1e-10 and spread <= 1e-10 and tv <= 1e-10 and elapsed <= 120
    assert record("criterion 3 (reconstruction round trips)", ok,
                  f"(a) max error {err_a:.3g}, order/reference spread {spread:.3g}; "
                  f"(b) max TV {tv:.3g} (all <= 1e-10), {elapsed:.1f}s <= 120s")


def test_criterion_4_markov_sharpness():
    start = time.perf_counter()
    W = Volume.interval(0, 8)
    t = (4,)
    chain = TransferChain(ising(0.5), W)
    q = chain.onepoint()
    Q = GibbsSpecification(ising(0.5), W)
    KERNELS["chain"] = (q, W, t)
    others = [s for s in W if s not in ((3,), (4,), (5,))]
    worst = width = 0.0
    n = 0
    for r in range(len(others) + 1):
        for extra in itertools.combinations(others, r):
            lam = Volume([(3,), (5,), *extra])
            n += 1
            for x in (0, 1):
                worst = max(worst, condition_C_defect(q, t, x, lam),
                            condition_E_defect(q, t, x, lam))
                for z in list(enumerate_configurations(lam, 2))[:: max(1, 2 ** len(lam) // 8)]:
                    for kern in (Q, q):
                        lo, hi = sullivan_envelope(kern, t, x, lam, z)
                        width = max(width, hi - lo)
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-12 and width <= 1e-12 and elapsed <= 60
    assert record("criterion 4 (Markov sharpness under the transfer chain)", ok,
                  f"{n} volumes containing both neighbours: max C/E defect {worst:.3g}, "
                  f"max envelope width {width:.3g} (<= 1e-12), {elapsed:.1f}s <= 60s")


def test_criterion_5_non_gibbs_detection():
    start = time.perf_counter()
    details, ok = [], True
    for n_sites in (10, 13, 16):
        m = mixture_field(n_sites)
        q = m.onepoint()
        t = (n_sites // 2,)
        for R in (1, 2, 3):
            lam = inner_ball(m.window, t, R)
            floor = mixture_floor(len(lam), n_sites - 1 - len(lam))
            C = condition_C_defect(q, t, 1, lam)
            ok &= C >= 0.1 and abs(C - floor) <= 1e-9
            if n_sites == 16:
                details.append(f"R={R}: C={C:.6f} (oracle {floor:.6f})")
        if n_sites == 16:
            KERNELS["mixture"] = (q, m.window, t)
            verdict = gibbs_verdict(m, [1, 2, 3], with_A=False).verdict
            ok &= verdict == "non-gibbs-flagged"
    elapsed = time.perf_counter() - start
    ok &= elapsed <= 180
    assert record("criterion 5 (non-Gibbs detection on the Bernoulli mixture)", ok,
                  f"{'; '.join(details)}; all >= 0.1; verdict {verdict}; {elapsed:.1f}s <= 180s")


def _nested_chains(window, t, rng):
    """The ball sequence around t plus two random nested chains."""
    rest = [s for s in window if s != t]
    balls = []
    R = 1
    while True:
        try:
            balls.append(inner_ball(window, t, R))
        except Exception:
            break
        R += 1
    chains = [balls] if len(balls) > 1 else []
    for _ in range(2):
        perm = [rest[i] for i in rng.permutation(len(rest))]
        chains.append([Volume(perm[:j]) for j in range(1, min(len(perm), 5) + 1)])
    return chains


def _criterion_6_scan():
    if "scan" in KERNELS:
        return KERNELS["scan"]
    for name, test in (("random", test_criterion_1_identity_suite),
                       ("chain", test_criterion_4_markov_sharpness),
                       ("mixture", test_criterion_5_non_gibbs_detection)):
        if name not in KERNELS:
            test()
    rng = np.random.default_rng(SEED)
    subjects = [(q, W, W.sites[len(W) // 2]) for q, W in KERNELS["random"]]
    for pot, W in ((ising(0.5, 0.1), Volume.interval(0, 6)), (potts(0.7, 3), Volume.interval(0, 4))):
        F = FieldTable.from_potential(pot, W)
        subjects.append((F.onepoint(), W, W.sites[len(W) // 2]))
    subjects += [KERNELS["chain"], KERNELS["mixture"]]
    rows = []
    for q, W, t in subjects:
        chains = _nested_chains(W, t, rng)
        if len(W) > 12:
            chains = chains[:1]
        for chain in chains:
            for x in range(q.alphabet_size):
                vals = [(condition_C_defect(q, t, x, lam), condition_D_defect(q, t, x, lam),
                         condition_E_defect(q, t, x, lam)) for lam in chain]
                rows.append((len(W), vals))
    KERNELS["scan"] = rows
    return rows


def test_criterion_6a_sandwich():
    rows = _criterion_6_scan()
    bad = sum(1 for _, vals in rows for C, D, E in vals if not (E <= C <= 2 * E and D <= C))
    n = sum(len(v) for _, v in rows)
    assert record("criterion 6a (E <= C <= 2E and D <= C)", bad == 0,
                  f"{n} (kernel, symbol, volume) triples, {bad} violations")


def test_criterion_6b_C_D_monotone():
    rows = _criterion_6_scan()
    bad = 0
    for _, vals in rows:
        for (C1, D1, _), (C2, D2, _) in zip(vals, vals[1:]):
            bad += (C2 > C1) + (D2 > D1)
    assert record("criterion 6b (C and D non-increasing in the volume)", bad == 0,
                  f"{len(rows)} nested chains, {bad} increases")


@pytest.mark.xfail(strict=True, reason="E is not monotone in the volume in general: "
                   "the reference conditional q^{x_Lam} moves with Lam (see decisions ledger)")
def test_criterion_6c_E_monotone():
    rows = _criterion_6_scan()
    bad, worst = 0, 0.0
    for _, vals in rows:
        for (_, _, E1), (_, _, E2) in zip(vals, vals[1:]):
            if E2 > E1:
                bad += 1
                worst = max(worst, E2 - E1)
    assert record("criterion 6c (E non-increasing in the volume)", bad == 0,
                  f"{len(rows)} nested chains, {bad} increases, largest increase {worst:.3g}")


def test_criterion_7_decaying_potential():
    start = time.perf_counter()
    pot = exponential_pair(0.5, 0.4)
    W = Volume.interval(0, 12)
    t = (6,)
    q = GibbsSpecification(pot, W).onepoint()
    details, ok = [], True
    for R in range(1, 6):
        tau = pot.tail(t, R)
        bound = math.expm1(2 * tau)
        mod = max(quasilocality_modulus(q, t, x, [R])[0] for x in (0, 1))
        # the kernel cut at radius R stays within the same bound of the full one
        qR = GibbsSpecification(pot, W, radius=R).onepoint()
        cut = float(np.abs(qR.window_tensor(t) - q.window_tensor(t)).max())
        ok &= mod <= bound and cut <= bound
        details.append(f"R={R}: {mod:.3g}|{cut:.3g} <= {bound:.3g}")
    elapsed = time.perf_counter() - start
    ok &= elapsed <= 180
    assert record("criterion 7 (modulus and truncation vs e^(2 tau) - 1)", ok,
                  f"{'; '.join(details)}; 13-site window, {elapsed:.1f}s <= 180s")


def test_criterion_8_representation():
    rng = np.random.default_rng(SEED + 8)
    worst = 0.0
    n = 0
    for ext, k in (([3], 3), ([2, 2], 3), ([5], 2), ([2, 3], 2), ([6], 2), ([4], 3)):
        W = Volume.box(ext)
        P = FieldTable.random(W, k, rng, spread=1.5)
        pot = moebius_extract(P.table)
        Q = GibbsSpecification(pot, W)
        for t in W:
            rest = W - [t]
            for bnd in enumerate_configurations(rest, k):
                want = finite_conditional(P, [t], bnd).probs
                worst = max(worst, float(np.abs(Q.element([t], bnd).probs - want).max()))
                n += 1
            bnd = Configuration.from_values(rest, rng.integers(0, k, len(rest)))
            lit = gibbs_element(pot, [t], bnd).probs
            worst = max(worst, float(np.abs(lit - finite_conditional(P, [t], bnd).probs).max()))
    assert record("criterion 8 (Moebius extraction then Gibbs kernel)", worst <= 1e-10,
                  f"{n} one-point elements on |V| <= 6, k <= 3: max error {worst:.3g} <= 1e-10")


if __name__ == "__main__":
    for name, fn in list(globals().items()):
        if name.startswith("test_criterion"):
            try:
                fn()
            except AssertionError:
                pass
