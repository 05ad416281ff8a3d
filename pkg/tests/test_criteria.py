import itertools
import math

import numpy as np
import pytest

from gibbslab.criteria import (DEFAULT_THRESHOLDS, DefectSchedule, condition_A_schedule,
                               condition_C_defect, condition_D_defect, condition_E_defect,
                               decide, gibbs_verdict, inner_ball, sullivan_envelope,
                               uniform_nonnullness)
from gibbslab.errors import DomainError
from gibbslab.fields import FieldTable, MixtureField, ProductMeasure, TransferChain, finite_conditional
from gibbslab.lattice import Configuration, Volume, enumerate_configurations
from gibbslab.potential import ising, potts, zero_potential
from gibbslab.specification import GibbsSpecification, gibbs_onepoint


def brute_CDE(P, t, x, lam):
    """Literal suprema from finite conditionals of the field, pair by pair."""
    rest = P.window - [t]
    free = (rest - lam).sites
    values = {}   # (support, config) -> q_t(x)
    for r in range(len(free) + 1):
        for combo in itertools.combinations(free, r):
            S = lam | combo
            for c in enumerate_configurations(S, P.alphabet_size):
                values[(S, c.values)] = float(finite_conditional(P, [t], c).probs[x])
    C = D = E = 0.0
    items = list(values.items())
    for (S1, v1), a in items:
        z1 = tuple(v1[S1.index(s)] for s in lam)
        E = max(E, abs(a - values[(lam, z1)]))
        for (S2, v2), b in items:
            if tuple(v2[S2.index(s)] for s in lam) != z1:
                continue
            C = max(C, abs(a - b))
            if S1 == S2:
                D = max(D, abs(a - b))
    return C, D, E


def mixture_C_oracle(n_lam: int, n_free: int, p: float = 0.8) -> float:
    """Condition-C defect of the symmetric Bernoulli mixture from counts alone."""
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


@pytest.fixture(scope="module")
def mixture16():
    return MixtureField.bernoulli([0.2, 0.8], [0.5, 0.5], Volume.interval(0, 15))


@pytest.mark.parametrize("lam", [[(1,)], [(1,), (3,)], [(0,), (4,)]])
def test_cde_against_brute_force(lam):
    rng = np.random.default_rng(7)
    P = FieldTable.random(Volume.interval(0, 4), 2, rng)
    q = P.onepoint()
    C, D, E = brute_CDE(P, (2,), 1, Volume(lam))
    assert condition_C_defect(q, (2,), 1, lam) == pytest.approx(C, abs=1e-14)
    assert condition_D_defect(q, (2,), 1, lam) == pytest.approx(D, abs=1e-14)
    assert condition_E_defect(q, (2,), 1, lam) == pytest.approx(E, abs=1e-14)


def test_product_measure_defects_vanish():
    m = ProductMeasure([0.3, 0.7], Volume.interval(0, 6))
    q = m.onepoint()
    for lam in ([(2,)], [(2,), (4,)]):
        assert condition_C_defect(q, (3,), 0, lam) <= 1e-15
        assert condition_D_defect(q, (3,), 0, lam) <= 1e-15
        assert condition_E_defect(q, (3,), 0, lam) <= 1e-15
    sched = condition_A_schedule(m, (3,), 1, [1, 2])
    assert max(sched.defects) <= 1e-15


@pytest.mark.parametrize("seed", range(6))
def test_sandwich_on_random_kernels(seed):
    rng = np.random.default_rng(seed)
    P = FieldTable.random(Volume.box([2, 3]), 2 + seed % 2, rng, spread=1.5)
    q = P.onepoint()
    t = (0, 1)
    for lam in ([(0, 0)], [(1, 1)], [(0, 0), (1, 2)], [(0, 0), (0, 2), (1, 1)]):
        for x in range(P.alphabet_size):
            C = condition_C_defect(q, t, x, lam)
            D = condition_D_defect(q, t, x, lam)
            E = condition_E_defect(q, t, x, lam)
            assert E <= C <= 2 * E
            assert D <= C


def test_C_and_D_are_monotone_in_the_volume():
    rng = np.random.default_rng(3)
    P = FieldTable.random(Volume.interval(0, 6), 2, rng, spread=1.5)
    q = P.onepoint()
    chain = [[(2,)], [(2,), (4,)], [(1,), (2,), (4,)], [(1,), (2,), (4,), (5,)]]
    C = [condition_C_defect(q, (3,), 1, lam) for lam in chain]
    D = [condition_D_defect(q, (3,), 1, lam) for lam in chain]
    assert all(b <= a for a, b in zip(C, C[1:]))
    assert all(b <= a for a, b in zip(D, D[1:]))


def test_E_needs_finite_kernel():
    q = gibbs_onepoint(ising(0.5), Volume.interval(0, 3))
    with pytest.raises(DomainError):
        condition_E_defect(q, (1,), 1, [(0,)])
    # on a full kernel only the whole exterior is admissible: the spread over
    # the right neighbour is logistic(2) - logistic(0)
    want = 1 / (1 + math.exp(-2)) - 0.5
    assert condition_C_defect(q, (1,), 1, [(0,)]) == pytest.approx(want, abs=1e-14)
    assert condition_D_defect(q, (1,), 1, [(0,)]) == condition_C_defect(q, (1,), 1, [(0,)])


def test_markov_collapse_under_transfer_chain():
    ch = TransferChain(ising(0.5), Volume.interval(0, 8))
    q = ch.onepoint()
    for lam in ([(3,), (5,)], [(2,), (3,), (5,)], [(3,), (5,), (6,), (8,)]):
        assert condition_C_defect(q, (4,), 1, lam) <= 1e-12
        assert condition_E_defect(q, (4,), 1, lam) <= 1e-12
    assert condition_C_defect(q, (4,), 1, [(3,)]) > 0.1
    sched = condition_A_schedule(ch, (4,), 1, [1, 2, 3])
    assert max(sched.defects) <= 1e-12


def test_condition_A_agrees_with_E(mixture16):
    rng = np.random.default_rng(11)
    P = FieldTable.random(Volume.interval(0, 6), 2, rng)
    sched = condition_A_schedule(P, (3,), 0, [1, 2])
    for R, d in zip(sched.radii, sched.defects):
        lam = inner_ball(P.window, (3,), R)
        assert d == pytest.approx(condition_E_defect(P.onepoint(), (3,), 0, lam), abs=1e-14)


def test_condition_A_truncates_on_budget():
    P = ProductMeasure([0.5, 0.5], Volume.interval(0, 8))
    sched = condition_A_schedule(P, (4,), 1, [1, 2, 3], budget_bits=6)
    assert sched.truncated and sched.radii == [] and sched.defects == []
    assert not condition_A_schedule(P, (4,), 1, [1, 2, 3]).truncated


def test_mixture_defects_against_oracle(mixture16):
    q = mixture16.onepoint()
    t = (8,)
    for R in (1, 2, 3):
        lam = inner_ball(mixture16.window, t, R)
        want = mixture_C_oracle(len(lam), 15 - len(lam))
        C = condition_C_defect(q, t, 1, lam)
        D = condition_D_defect(q, t, 1, lam)
        E = condition_E_defect(q, t, 1, lam)
        assert C == pytest.approx(want, abs=1e-12)
        assert C >= 0.1
        assert D <= C and E <= C <= 2 * E
        assert E >= 0.1


def test_sullivan_envelope_examples():
    W = Volume.interval(0, 2)
    q = gibbs_onepoint(ising(0.5), W)
    lo, hi = sullivan_envelope(q, (1,), 1, [(0,)], Configuration.from_values([(0,)], [1]))
    assert lo == pytest.approx(0.5, abs=1e-15)
    assert hi == pytest.approx(0.880797, abs=1e-6)
    z = Configuration.from_values([(0,), (2,)], [1, 0])
    lo, hi = sullivan_envelope(q, (1,), 1, [(0,), (2,)], z)
    assert lo == hi
    qz = gibbs_onepoint(zero_potential(alphabet_size=3), W)
    lo, hi = sullivan_envelope(qz, (1,), 2, [(0,)], Configuration.from_values([(0,)], [2]))
    assert lo == pytest.approx(1 / 3) and hi == pytest.approx(1 / 3)
    with pytest.raises(DomainError):
        sullivan_envelope(q, (1,), 1, [(0,)], Configuration.from_values([(2,)], [1]))


def test_sullivan_envelope_contains_field_conditionals():
    W = Volume.box([2, 4])
    pot = potts(0.8, 3, dimension=2)
    Q = GibbsSpecification(pot, W)
    P = FieldTable.from_potential(pot, W)
    t = (0, 1)
    for lam in ([(1, 1)], [(0, 0), (0, 2)], [(0, 3), (1, 0), (1, 2)]):
        lam = Volume(lam)
        for z in enumerate_configurations(lam, 3):
            fc = finite_conditional(P, [t], z).probs
            for x in range(3):
                lo, hi = sullivan_envelope(Q, t, x, lam, z)
                assert lo - 1e-14 <= fc[x] <= hi + 1e-14


def test_uniform_nonnullness_examples(mixture16):
    q = gibbs_onepoint(ising(0.5), Volume.interval(0, 2))
    assert uniform_nonnullness(q, sites=[(1,)]) == pytest.approx(
        math.exp(-1) / (math.exp(1) + math.exp(-1)), abs=1e-15)
    u = FieldTable(Volume.interval(0, 2), np.full(27, 1 / 27), 3)
    assert uniform_nonnullness(u.onepoint(), supports=[[(0,)], [(2,)]],
                               sites=[(1,)]) == pytest.approx(1 / 3)
    qm = mixture16.onepoint()
    floor = uniform_nonnullness(qm, sites=[(8,)],
                                supports=[Volume.interval(0, 15) - [(8,)]])
    assert 0.2 < floor < 0.2 + 1e-6


def test_verdicts(mixture16):
    ch = TransferChain(ising(0.5), Volume.interval(0, 8))
    rep = gibbs_verdict(ch, [1, 2, 3])
    assert rep.verdict == "gibbs-consistent"
    assert rep.window_size == 9 and not rep.truncated
    rep = gibbs_verdict(mixture16, [1, 2, 3], with_A=False)
    assert rep.verdict == "non-gibbs-flagged"
    u = ProductMeasure([0.5, 0.5], Volume.interval(0, 6))
    rep = gibbs_verdict(u, [1, 2])
    assert rep.verdict == "gibbs-consistent"
    assert all(d == 0 for s in rep.schedules for d in s.defects)
    z = FieldTable(Volume.interval(0, 2), [0.0] + [1 / 7] * 7, 2, require_positive=False)
    assert gibbs_verdict(z, [1]).verdict == "non-gibbs-flagged"


def test_decide_rule():
    th = DEFAULT_THRESHOLDS
    assert decide(0.1, [0.01, 0.0001], th)[0] == "gibbs-consistent"
    assert decide(0.1, [0.01, 0.02], th)[0] == "inconclusive"
    assert decide(0.1, [0.2, 0.3], th)[0] == "non-gibbs-flagged"
    assert decide(1e-9, [0.01, 0.0001], th)[0] == "inconclusive"
    assert decide(0.1, [], th)[0] == "inconclusive"


def test_verdict_determinism_and_csv():
    rng = np.random.default_rng(5)
    P = FieldTable.random(Volume.interval(0, 8), 2, rng)
    a = gibbs_verdict(P, [1, 2, 3])
    b = gibbs_verdict(FieldTable(P.window, P.table.probs, 2), [1, 2, 3], threads=3)
    assert a.to_json() == b.to_json()
    assert a.to_csv() == b.to_csv()
    lines = a.to_csv().splitlines()
    assert lines[0] == "site,symbol,radius,condition,defect"
    assert len(lines) == 1 + 2 * 4 * 3
    for line in lines[1:]:
        field = line.split(",")[-1]
        assert "%.17g" % float(field) == field


def test_schedule_validation():
    with pytest.raises(DomainError):
        DefectSchedule((0,), 0, [1, 2], [0.0], "C")
    with pytest.raises(DomainError):
        DefectSchedule((0,), 0, [1], [0.0], "Z")
    with pytest.raises(DomainError):
        gibbs_verdict(ProductMeasure([0.5, 0.5], Volume.interval(0, 4)), [2, 1])
    with pytest.raises(DomainError):
        gibbs_verdict(ProductMeasure([0.5, 0.5], Volume.interval(0, 4)), [3])
