from collections import Counter

import numpy as np
import pytest

from predinspect.tank import (COMPARTMENT, LONGITUDINAL, MANHOLE, WALL, InvalidSpec, TankSpec, build_ssg,
                              generate_ssg, layout, missing_longitudinals, standard_spec)


def counts(g):
    return Counter(v.label for v in g.vertices.values())


def test_two_compartment_counts():
    g = generate_ssg(TankSpec(n_compartments=2, longitudinals_per_wall=2))
    c = counts(g)
    assert c[COMPARTMENT] == 2 and c[WALL] == 8 and c[LONGITUDINAL] == 8 and c[MANHOLE] == 1
    # every bar on a wall, every wall bounding a compartment, the manhole joining both
    assert g.num_edges() == 8 + 8 + 2


def test_missing_longitudinal():
    g = generate_ssg(TankSpec(n_compartments=2, longitudinals_per_wall=2, missing=[(1, 0, 1)]))
    tl = layout(TankSpec(n_compartments=2, longitudinals_per_wall=2))
    per = Counter(tl.object(v).compartment for v, x in g.vertices.items() if x.label == LONGITUDINAL)
    assert per == {0: 4, 1: 3}


def test_single_compartment_has_no_manhole():
    assert counts(generate_ssg(TankSpec(n_compartments=1)))[MANHOLE] == 0


def test_exit_manhole():
    c = counts(generate_ssg(standard_spec(3)))
    assert c[MANHOLE] == 3


@pytest.mark.parametrize("kw", [dict(n_compartments=0), dict(interior=(5, 25, 20)), dict(bulkhead=1),
                                dict(longitudinals_per_wall=9), dict(manhole_z=0),
                                dict(missing=[(5, 0, 0)])])
def test_invalid_specs(kw):
    with pytest.raises(InvalidSpec):
        TankSpec(**kw).validate()


def test_spec_round_trip(tmp_path):
    spec = TankSpec(n_compartments=3, missing=[(1, 1, 2)], start=(1.0, 2.0, 2.0, 0.5))
    p = tmp_path / "s.json"
    spec.save(p)
    assert TankSpec.load(p) == spec


def test_spec_unknown_key():
    with pytest.raises(InvalidSpec):
        TankSpec.from_dict({"n_compartments": 2, "bogus": 1})


def test_missing_longitudinals_distinct_compartments():
    spec = standard_spec(8)
    for k in range(6):
        m = missing_longitudinals(spec, k, seed=k)
        assert len({c for c, _, _ in m}) == k
    with pytest.raises(InvalidSpec):
        missing_longitudinals(spec, 9)


def test_bars_lie_on_their_walls():
    tl = layout(TankSpec(n_compartments=2))
    g = build_ssg(tl)
    for o in tl.by_label(LONGITUDINAL):
        wall = g.vertex(o.parent)
        bar = g.vertex(o.oid)
        # the bar's outer face touches the wall plane
        gap = np.abs(bar.position[1] - wall.position[1]) - bar.half_extents[1]
        assert gap == pytest.approx(0.0, abs=1e-9)
