import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from topoeffect.diagrams import (
    DROPPED,
    DiagramMetric,
    PersistenceDiagram,
    bottleneck_distance,
    capped_at,
    diagram_distance,
    wasserstein_distance,
)
from topoeffect.exceptions import (
    DimensionMismatchError,
    EssentialClassError,
    InvalidOrderError,
    TopoEffectError,
)

from oracles import brute_bottleneck, brute_wasserstein


def D(*pairs, **kw):
    return PersistenceDiagram(np.array(pairs, dtype=float).reshape(-1, 2), **kw)


EMPTY = D()

point = st.tuples(
    st.floats(0, 2, allow_nan=False), st.floats(0, 2, allow_nan=False)
).map(lambda bp: (bp[0], bp[0] + bp[1]))
# coarse lattice points make ties and coincident points common
lattice_point = st.tuples(st.integers(0, 4), st.integers(0, 4)).map(
    lambda bp: (bp[0] / 2, (bp[0] + bp[1]) / 2)
)
diagram = st.lists(st.one_of(point, lattice_point), max_size=6).map(lambda ps: D(*ps))
small_diagram = st.lists(st.one_of(point, lattice_point), max_size=4).map(lambda ps: D(*ps))


class TestPersistenceDiagram:
    def test_rejects_death_before_birth(self):
        with pytest.raises(TopoEffectError):
            D((1.0, 0.5))

    def test_dropped_policy_forbids_infinite_death(self):
        with pytest.raises(EssentialClassError):
            D((0.0, math.inf))

    def test_raw_diagram_keeps_essential_class(self):
        raw = D((0.0, 1.0), (0.0, math.inf), infinite_bar_policy=None)
        assert raw.has_essential
        assert len(raw.apply_policy(DROPPED)) == 1
        capped = raw.apply_policy(capped_at(5.0))
        np.testing.assert_array_equal(capped.pairs, [[0.0, 1.0], [0.0, 5.0]])
        assert capped.infinite_bar_policy == capped_at(5.0)

    def test_multiset_semantics(self):
        d = D((0, 1), (0, 1))
        assert len(d) == 2
        assert bottleneck_distance(d, D((0, 1))) == pytest.approx(0.5)

    def test_pairs_are_read_only(self):
        d = D((0, 1))
        with pytest.raises(ValueError):
            d.pairs[0, 0] = 3.0

    def test_csv_round_trip(self):
        d = D((0, 1.25), (0.5, 2.0))
        text = d.to_csv()
        assert text.splitlines()[0] == "birth,death"
        assert PersistenceDiagram.from_csv(text) == d

    def test_json_round_trip_keeps_policy_and_dim(self):
        d = D((0, 1.25), (0, 4.0), homology_dim=0, infinite_bar_policy=capped_at(4.0))
        back = PersistenceDiagram.from_json(d.to_json())
        assert back == d
        assert back.infinite_bar_policy.cap == 4.0

    def test_json_round_trip_raw(self):
        raw = D((0, 1.0), (0, math.inf), infinite_bar_policy=None)
        assert PersistenceDiagram.from_json(raw.to_json()) == raw

    def test_csv_refuses_raw_essential(self):
        with pytest.raises(EssentialClassError):
            D((0, math.inf), infinite_bar_policy=None).to_csv()


class TestBottleneck:
    def test_identical(self):
        assert bottleneck_distance(D((0, 2)), D((0, 2))) == 0.0

    def test_against_empty(self):
        assert bottleneck_distance(D((0, 2)), EMPTY) == 1.0

    def test_both_empty(self):
        assert bottleneck_distance(EMPTY, EMPTY) == 0.0

    def test_two_point_example(self):
        # exhaustive enumeration gives 0.5
        assert bottleneck_distance(D((0, 1), (0, 3)), D((0, 1.5), (0, 2.5))) == pytest.approx(0.5, abs=1e-12)

    def test_diagonal_beats_direct_match(self):
        # direct match costs 2; sending both points to the diagonal costs max(0.5, 1.5)
        assert bottleneck_distance(D((0, 1)), D((0, 3))) == pytest.approx(1.5, abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            bottleneck_distance(D((0, 1)), D((0, 1), homology_dim=1))

    def test_essential_class_rejected(self):
        raw = D((0, math.inf), infinite_bar_policy=None)
        with pytest.raises(EssentialClassError):
            bottleneck_distance(raw, EMPTY)

    @settings(max_examples=150, deadline=None)
    @given(small_diagram, small_diagram)
    def test_matches_exhaustive_enumeration(self, a, b):
        assert bottleneck_distance(a, b) == pytest.approx(brute_bottleneck(a.pairs, b.pairs), abs=1e-9)


class TestWasserstein:
    def test_identical(self):
        assert wasserstein_distance(D((0, 2)), D((0, 2)), 2) == 0.0

    def test_against_empty(self):
        assert wasserstein_distance(D((0, 2)), EMPTY, 1) == 1.0

    def test_two_versus_one(self):
        # enumeration: (0,3)->(0,2) cost 1 and (0,1)->diagonal cost 0.5
        assert wasserstein_distance(D((0, 1), (0, 3)), D((0, 2)), 2) == pytest.approx(
            1.118033988749895, abs=1e-12
        )

    @pytest.mark.parametrize("p", [0.5, 0.0, -1.0, math.inf, math.nan])
    def test_invalid_order(self, p):
        with pytest.raises(InvalidOrderError):
            wasserstein_distance(D((0, 1)), EMPTY, p)

    @settings(max_examples=150, deadline=None)
    @given(small_diagram, small_diagram, st.sampled_from([1.0, 1.5, 2.0, 3.0]))
    def test_matches_exhaustive_enumeration(self, a, b, p):
        expected = brute_wasserstein(a.pairs, b.pairs, p)
        assert wasserstein_distance(a, b, p) == pytest.approx(expected, abs=1e-9)


class TestDiagramMetric:
    def test_parse(self):
        assert DiagramMetric.parse("bottleneck") == DiagramMetric("bottleneck")
        assert DiagramMetric.parse("wasserstein:1.5").p == 1.5
        assert DiagramMetric.parse("wasserstein") == DiagramMetric()
        assert str(DiagramMetric("wasserstein", 2)) == "wasserstein:2"
        with pytest.raises(TopoEffectError):
            DiagramMetric.parse("hausdorff")
        with pytest.raises(InvalidOrderError):
            DiagramMetric("wasserstein", 0.5)

    @pytest.mark.parametrize("metric", ["bottleneck", "wasserstein:2"])
    def test_self_distance_zero(self, metric):
        d = D((0, 1), (0.2, 0.9), (0, 3))
        assert diagram_distance(d, d, metric) == 0.0

    def test_five_point_diagrams_match_oracle(self):
        rng = np.random.default_rng(11)
        for _ in range(5):
            a = rng.uniform(0, 1, (5, 2)).cumsum(axis=1)
            b = rng.uniform(0, 1, (5, 2)).cumsum(axis=1)
            got = diagram_distance(D(*a), D(*b), DiagramMetric("bottleneck"))
            assert got == pytest.approx(brute_bottleneck(a, b), abs=1e-9)


class TestMetricProperties:
    @settings(max_examples=200, deadline=None)
    @given(diagram, diagram, diagram, st.sampled_from(["bottleneck", "wasserstein:1", "wasserstein:2"]))
    def test_axioms(self, a, b, c, metric):
        dab, dba = diagram_distance(a, b, metric), diagram_distance(b, a, metric)
        assert dab >= 0
        assert diagram_distance(a, a, metric) == 0
        assert abs(dab - dba) <= 1e-12
        assert diagram_distance(a, c, metric) <= dab + diagram_distance(b, c, metric) + 1e-9

    @settings(max_examples=100, deadline=None)
    @given(diagram, diagram, diagram, diagram, st.sampled_from(["bottleneck", "wasserstein:2"]))
    def test_reverse_triangle(self, a, b, c, d, metric):
        lhs = abs(diagram_distance(a, b, metric) - diagram_distance(c, d, metric))
        assert lhs <= diagram_distance(a, c, metric) + diagram_distance(b, d, metric) + 1e-9

    @settings(max_examples=100, deadline=None)
    @given(diagram, diagram, st.sampled_from([1.0, 2.0, 4.0, 10.0]))
    def test_bottleneck_below_wasserstein(self, a, b, p):
        assert bottleneck_distance(a, b) <= wasserstein_distance(a, b, p) + 1e-9
