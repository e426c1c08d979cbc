import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mvassoc.affinity import (
    AffinityMatrix,
    PairHistory,
    affinity_m4,
    affinity_m5,
    build_affinity,
    save_affinity,
)
from mvassoc.correspondence import KeypointMatch
from mvassoc.dataset import Detection

unit_floats = st.floats(0.0, 1.0, allow_nan=False)
conf_lists = st.lists(unit_floats, min_size=0, max_size=10)


def _det(camera, person, x0=0.0):
    return Detection(0, camera, person, (x0, 0.0, x0 + 20.0, 40.0))


def _match(pa, pb, conf):
    return KeypointMatch(pa, pb, conf)


class TestSingleFrameFusion:
    def test_no_evidence_is_zero(self):
        assert affinity_m4([]) == 0.0

    def test_single_cue_passes_through(self):
        assert affinity_m4([0.8]) == pytest.approx(0.8)

    def test_two_halves(self):
        assert affinity_m4([0.5, 0.5]) == pytest.approx(0.75)

    def test_certain_cue_saturates(self):
        assert affinity_m4([0.3, 1.0, 0.2]) == 1.0

    def test_all_zero_cues(self):
        assert affinity_m4([0.0, 0.0, 0.0]) == 0.0

    @given(conf_lists)
    def test_bounded(self, confs):
        assert 0.0 <= affinity_m4(confs) <= 1.0

    @given(conf_lists, st.randoms(use_true_random=False))
    def test_permutation_invariant(self, confs, rand):
        shuffled = list(confs)
        rand.shuffle(shuffled)
        assert affinity_m4(shuffled) == pytest.approx(
            affinity_m4(confs), abs=1e-12
        )

    @given(conf_lists, st.floats(1e-6, 1.0, allow_nan=False))
    def test_monotone_in_added_evidence(self, confs, extra):
        assert affinity_m4(list(confs) + [extra]) >= affinity_m4(confs) - 1e-12

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            affinity_m4([1.5])


class TestMultiFrame:
    def test_single_frame_window_equals_single_frame_value(self):
        assert affinity_m5([(3, 0.42)]) == 0.42

    def test_mean(self):
        assert affinity_m5([(0, 0.2), (1, 0.4)]) == pytest.approx(0.3)

    def test_empty_window_is_error(self):
        with pytest.raises(ValueError):
            affinity_m5([])

    @given(st.lists(st.tuples(st.integers(0, 100), unit_floats), min_size=1))
    def test_within_min_max_of_inputs(self, values):
        out = affinity_m5(values)
        vs = [v for _, v in values]
        assert min(vs) - 1e-12 <= out <= max(vs) + 1e-12


class TestPairHistory:
    def test_window_pruning(self):
        h = PairHistory(window=2)
        for frame, value in enumerate((0.1, 0.2, 0.3)):
            h.start_frame()
            h.record((1, 1), frame, value)
        assert h.windowed((1, 1)) == [(1, 0.2), (2, 0.3)]

    def test_missing_key_empty(self):
        assert PairHistory().windowed((9, 9)) == []

    def test_invalid_window(self):
        with pytest.raises(ValueError):
            PairHistory(window=0)


class TestBuildAffinity:
    def test_no_matches_gives_zero_matrix(self):
        am = build_affinity(0, [_det(1, 0)], [_det(2, 0)], {})
        assert am.values.shape == (1, 1)
        assert (am.values == 0).all()
        assert am.metric_tag == "M4"

    def test_single_pair_single_cue(self):
        grouped = {(0, 0): [_match((1.0, 1.0), (2.0, 2.0), 0.9)]}
        am = build_affinity(0, [_det(1, 0)], [_det(2, 0)], grouped)
        assert am.values[0, 0] == pytest.approx(0.9)

    def test_diagonal_dominance_on_separated_people(self):
        # person 0's cues land in (0, 0), person 1's in (1, 1)
        dets_a = [_det(1, 0, 0.0), _det(1, 1, 50.0)]
        dets_b = [_det(2, 0, 0.0), _det(2, 1, 50.0)]
        grouped = {
            (0, 0): [_match((5.0, 5.0), (5.0, 5.0), c) for c in (0.8, 0.9)],
            (1, 1): [_match((55.0, 5.0), (55.0, 5.0), c) for c in (0.7, 0.85)],
        }
        am = build_affinity(0, dets_a, dets_b, grouped)
        v = am.values
        assert v[0, 0] > v[0, 1] and v[0, 0] > v[1, 0]
        assert v[1, 1] > v[0, 1] and v[1, 1] > v[1, 0]

    def test_multi_frame_presence_patterns(self):
        # window of 3 with the pair present in only 2 frames: mean of those 2
        history = PairHistory(window=3)
        d_a, d_b = _det(1, 7), _det(2, 7)
        values = []
        for frame, (present, conf) in enumerate(
            [(True, 0.8), (False, None), (True, 0.4)]
        ):
            if present:
                grouped = {(0, 0): [_match((1.0, 1.0), (1.0, 1.0), conf)]}
                am = build_affinity(
                    frame, [d_a], [d_b], grouped, metric="M5",
                    window=3, history=history,
                )
                values.append(am.values[0, 0])
            # absent frame: build for a frame without this pair
            else:
                build_affinity(
                    frame, [], [], {}, metric="M5", window=3, history=history
                )
        assert values[-1] == pytest.approx((0.8 + 0.4) / 2.0)

    def test_multi_frame_links_by_person_id(self):
        # index order flips between frames; history follows the ids
        history = PairHistory(window=2)
        a0, a1 = _det(1, 0, 0.0), _det(1, 1, 50.0)
        b0, b1 = _det(2, 0, 0.0), _det(2, 1, 50.0)
        grouped = {
            (0, 0): [_match((1.0, 1.0), (1.0, 1.0), 0.9)],
            (1, 1): [_match((51.0, 1.0), (51.0, 1.0), 0.5)],
        }
        build_affinity(0, [a0, a1], [b0, b1], grouped, metric="M5",
                       window=2, history=history)
        flipped = {
            (1, 1): [_match((1.0, 1.0), (1.0, 1.0), 0.7)],
            (0, 0): [_match((51.0, 1.0), (51.0, 1.0), 0.3)],
        }
        am = build_affinity(1, [a1, a0], [b1, b0], flipped, metric="M5",
                            window=2, history=history)
        # person 0 is now at index 1: mean of 0.9 and 0.7
        assert am.values[1, 1] == pytest.approx(0.8)
        assert am.values[0, 0] == pytest.approx(0.4)

    def test_m5_single_frame_equals_m4(self):
        grouped = {(0, 0): [_match((1.0, 1.0), (1.0, 1.0), 0.6)]}
        m4 = build_affinity(0, [_det(1, 0)], [_det(2, 0)], grouped)
        m5 = build_affinity(
            0, [_det(1, 0)], [_det(2, 0)], grouped,
            metric="M5", window=3, history=PairHistory(window=3),
        )
        assert m5.values[0, 0] == m4.values[0, 0]

    def test_m5_requires_history(self):
        with pytest.raises(ValueError):
            build_affinity(0, [], [], {}, metric="M5")

    def test_out_of_bounds_key_rejected(self):
        grouped = {(2, 0): [_match((1.0, 1.0), (1.0, 1.0), 0.5)]}
        with pytest.raises(ValueError):
            build_affinity(0, [_det(1, 0)], [_det(2, 0)], grouped)

    def test_unknown_metric(self):
        with pytest.raises(ValueError):
            build_affinity(0, [], [], {}, metric="M6")

    def test_entries_validated_and_frozen(self):
        am = build_affinity(0, [_det(1, 0)], [_det(2, 0)], {})
        with pytest.raises(ValueError):
            AffinityMatrix(0, am.rows, am.cols, np.array([[1.5]]), "M4")
        with pytest.raises((ValueError, RuntimeError)):
            am.values[0, 0] = 0.5

    def test_export(self, tmp_path):
        grouped = {(0, 0): [_match((1.0, 1.0), (2.0, 2.0), 0.9)]}
        am = build_affinity(0, [_det(1, 3)], [_det(2, 8)], grouped)
        path = tmp_path / "affinity.txt"
        save_affinity(path, am)
        lines = path.read_text().splitlines()
        assert lines[0] == "frame=0 metric=M4"
        assert lines[1] == "cols 8"
        assert lines[2].startswith("3 ")
