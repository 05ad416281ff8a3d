import itertools

import numpy as np
import pytest

from gibbslab.errors import DomainError, ResourceError
from gibbslab.lattice import (Configuration, LatticeConfig, Volume, ball, check_budget,
                              concatenate, config_index, configuration_array, diameter,
                              distance, enumerate_configurations, neighborhood, restrict,
                              within)


def test_lattice_config_validates():
    LatticeConfig(2, 3)
    with pytest.raises(DomainError):
        LatticeConfig(0, 2)
    with pytest.raises(DomainError):
        LatticeConfig(1, 1)


def test_volume_is_sorted_and_deduplicated():
    v = Volume([(2, 0), (0, 1), (2, 0), (0, 0)])
    assert v.sites == ((0, 0), (0, 1), (2, 0))
    assert v.index((2, 0)) == 2
    assert (0, 1) in v and (1, 1) not in v
    assert v == Volume([(0, 0), (0, 1), (2, 0)])
    assert hash(v) == hash(Volume(reversed(v.sites)))


def test_volume_mixed_dimensions_rejected():
    with pytest.raises(DomainError):
        Volume([(0,), (0, 1)])


def test_box_and_interval():
    assert len(Volume.box([3, 4])) == 12
    assert Volume.box([2], origin=[5]).sites == ((5,), (6,))
    assert Volume.interval(-1, 1).sites == ((-1,), (0,), (1,))


def test_set_operations():
    a, b = Volume.interval(0, 3), Volume.interval(2, 5)
    assert (a | b) == Volume.interval(0, 5)
    assert (a & b) == Volume.interval(2, 3)
    assert (a - b) == Volume.interval(0, 1)
    assert Volume.interval(1, 2).issubset(a)
    assert Volume.interval(4, 5).isdisjoint(a)


def test_subsets_count():
    v = Volume.interval(0, 3)
    assert len(list(v.subsets())) == 16
    assert len(list(v.subsets(nonempty=True))) == 15


def test_ball_uses_max_norm():
    b = ball((0, 0), 1)
    assert len(b) == 9 and (1, 1) in b
    assert distance((0, 0), (2, -1)) == 2
    assert diameter([(0, 0), (2, 1), (1, 3)]) == 3


def test_neighborhood_excludes_volume():
    n = neighborhood(Volume.interval(0, 1), 2)
    assert n.sites == ((-2,), (-1,), (2,), (3,))
    assert len(neighborhood([(0, 0)], 1)) == 8
    assert len(neighborhood([(0,)], 0)) == 0


def test_within():
    w = within(Volume.interval(-5, 5), [(0,)], 2)
    assert w == Volume.interval(-2, 2)


def test_configuration_roundtrip():
    x = Configuration.from_mapping({(1,): 0, (0,): 1})
    assert x.support.sites == ((0,), (1,))
    assert x.values == (1, 0)
    assert x[(0,)] == 1 and x.as_dict() == {(0,): 1, (1,): 0}
    with pytest.raises(DomainError):
        Configuration(Volume.interval(0, 1), (1,))


def test_restrict_and_concatenate():
    x = Configuration.from_values(Volume.interval(0, 3), [0, 1, 1, 0])
    r = restrict(x, [(1,), (3,)])
    assert r.values == (1, 0)
    with pytest.raises(DomainError):
        restrict(x, [(7,)])
    y = Configuration.from_values([(9,)], [1])
    assert concatenate(r, y).values == (1, 0, 1)
    with pytest.raises(DomainError):
        concatenate(x, r)


def test_enumeration_matches_itertools_product():
    v = Volume.box([2, 2])
    got = [c.values for c in enumerate_configurations(v, 3)]
    assert got == list(itertools.product(range(3), repeat=4))
    arr = configuration_array(4, 3)
    assert arr.tolist() == [list(g) for g in got]
    for i, g in enumerate(got):
        assert config_index(g, 3) == i


def test_budget_guard():
    check_budget(30, 2)
    with pytest.raises(ResourceError):
        check_budget(31, 2)
    with pytest.raises(ResourceError):
        list(enumerate_configurations(Volume.interval(0, 10), 2, budget_bits=8))
    assert configuration_array(0, 2).shape == (1, 0)
