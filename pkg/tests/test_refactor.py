import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mvassoc.correspondence import KeypointMatch, MatchSet
from mvassoc.geometry import Homography, project_point_h
from mvassoc.refactor import (
    RefactorParams,
    gaussian_confidence,
    refactor_matches,
    refactor_records,
    write_refactor_diagnostics,
)


def _match_set(matches):
    return MatchSet(0, 1, 2, tuple(matches), size_a=(100, 100), size_b=(100, 100))


_IDENTITY = Homography(np.eye(3))


class TestGaussianConfidence:
    def test_zero_residual_is_one(self):
        assert gaussian_confidence(0.0, 10.0) == 1.0

    def test_one_sigma(self):
        assert gaussian_confidence(10.0, 10.0) == pytest.approx(
            math.exp(-0.5), abs=1e-15
        )

    def test_two_sigma(self):
        assert gaussian_confidence(20.0, 10.0) == pytest.approx(
            math.exp(-2.0), abs=1e-15
        )

    def test_non_positive_coeff_rejected(self):
        with pytest.raises(ValueError):
            gaussian_confidence(1.0, 0.0)

    @given(
        st.floats(0.0, 1e4, allow_nan=False),
        st.floats(0.0, 1e4, allow_nan=False),
        st.floats(1e-3, 1e3, allow_nan=False),
    )
    def test_monotone_decreasing_in_distance(self, d1, d2, coeff):
        lo, hi = min(d1, d2), max(d1, d2)
        assert gaussian_confidence(hi, coeff) <= gaussian_confidence(lo, coeff)

    def test_strictly_decreasing_at_representable_spacing(self):
        for coeff in (2.0, 10.0, 40.0):
            grid = np.linspace(0.1, 5.0, 30) * coeff
            values = [gaussian_confidence(d, coeff) for d in grid]
            assert all(b < a for a, b in zip(values, values[1:]))

    @given(
        st.floats(1e-2, 1e3, allow_nan=False),
        st.floats(1e-3, 1e3, allow_nan=False),
        st.floats(1e-3, 1e3, allow_nan=False),
    )
    def test_larger_coeff_is_more_lenient(self, d, c1, c2):
        lo, hi = min(c1, c2), max(c1, c2)
        assert gaussian_confidence(d, hi) >= gaussian_confidence(d, lo)


class TestRefactorMatches:
    def test_zero_coefficient_is_bitwise_identity(self):
        ms = _match_set(
            [KeypointMatch((3.0, 4.0), (30.0, 40.0), 0.77) for _ in range(5)]
        )
        out = refactor_matches(ms, _IDENTITY, RefactorParams(0.0))
        assert out is ms

    def test_exact_prediction_keeps_confidence(self):
        h = Homography(np.diag([2.0, 2.0, 1.0]))
        pt_a = (12.0, 7.0)
        ms = _match_set([KeypointMatch(pt_a, project_point_h(h, pt_a), 0.66)])
        out = refactor_matches(ms, h, RefactorParams(10.0))
        assert out.matches[0].confidence == 0.66

    def test_hand_computed_example(self):
        # conf 0.8 at a 10 px residual with sigma 10
        ms = _match_set([KeypointMatch((0.0, 0.0), (10.0, 0.0), 0.8)])
        out = refactor_matches(ms, _IDENTITY, RefactorParams(10.0))
        assert out.matches[0].confidence == pytest.approx(
            0.8 * math.exp(-0.5), abs=1e-12
        )

    def test_geometry_unchanged(self, rng):
        ms = _match_set(
            [
                KeypointMatch(
                    tuple(rng.uniform(0, 100, 2)),
                    tuple(rng.uniform(0, 100, 2)),
                    float(rng.uniform(0, 1)),
                )
                for _ in range(20)
            ]
        )
        out = refactor_matches(ms, _IDENTITY, RefactorParams(5.0))
        assert [m.pt_a for m in out.matches] == [m.pt_a for m in ms.matches]
        assert [m.pt_b for m in out.matches] == [m.pt_b for m in ms.matches]

    def test_never_increases_confidence(self, rng):
        ms = _match_set(
            [
                KeypointMatch(
                    tuple(rng.uniform(0, 100, 2)),
                    tuple(rng.uniform(0, 100, 2)),
                    float(rng.uniform(0, 1)),
                )
                for _ in range(50)
            ]
        )
        for coeff in (2.0, 10.0, 40.0):
            out = refactor_matches(ms, _IDENTITY, RefactorParams(coeff))
            for before, after in zip(ms.matches, out.matches):
                assert 0.0 <= after.confidence <= before.confidence

    def test_projection_to_infinity_zeroes_confidence(self):
        H = np.array([[1.0, 0, 0], [0, 1.0, 0], [0, -0.01, 1.0]])
        h = Homography(H)  # points on y = 100 map to infinity
        ms = _match_set([KeypointMatch((50.0, 100.0), (50.0, 50.0), 0.9)])
        out = refactor_matches(ms, h, RefactorParams(10.0))
        assert out.matches[0].confidence == 0.0

    def test_symmetric_variant_averages_residuals(self):
        h = _IDENTITY
        ms = _match_set([KeypointMatch((0.0, 0.0), (6.0, 8.0), 1.0)])
        one_way = refactor_matches(ms, h, RefactorParams(10.0))
        both = refactor_matches(ms, h, RefactorParams(10.0, symmetric=True))
        # identity homography: forward and backward residuals are equal
        assert both.matches[0].confidence == pytest.approx(
            one_way.matches[0].confidence, abs=1e-15
        )

    def test_negative_coefficient_rejected(self):
        with pytest.raises(ValueError):
            RefactorParams(-1.0)


class TestDiagnostics:
    def test_records_match_closed_form(self):
        ms = _match_set([KeypointMatch((0.0, 0.0), (10.0, 0.0), 0.8)])
        (rec,) = refactor_records(ms, _IDENTITY, RefactorParams(10.0))
        assert rec.distance_px == pytest.approx(10.0)
        assert rec.gaussian_factor == pytest.approx(math.exp(-0.5))
        assert rec.old_confidence == 0.8
        assert rec.new_confidence == pytest.approx(0.8 * math.exp(-0.5))

    def test_zero_coeff_records_unity_factor(self):
        ms = _match_set([KeypointMatch((0.0, 0.0), (10.0, 0.0), 0.8)])
        (rec,) = refactor_records(ms, _IDENTITY, RefactorParams(0.0))
        assert rec.gaussian_factor == 1.0
        assert rec.new_confidence == 0.8

    def test_diagnostics_file(self, tmp_path):
        ms = _match_set([KeypointMatch((0.0, 0.0), (10.0, 0.0), 0.8)])
        records = refactor_records(ms, _IDENTITY, RefactorParams(10.0))
        out = tmp_path / "diag.txt"
        write_refactor_diagnostics(out, records)
        lines = out.read_text().splitlines()
        assert lines[0].split() == [
            "distance_px",
            "gaussian_factor",
            "old_confidence",
            "new_confidence",
        ]
        assert len(lines) == 2
