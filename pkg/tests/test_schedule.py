"""Schedule compilation, reversal, smoothing windows, sweeps, demo."""

import io

import numpy as np
import pytest

from gllab.curvature import WarpedSphereMetric
from gllab.errors import (CertificationFailedError, HypothesisViolationError,
                          InvalidSpecError, InvalidWindowError)
from gllab.fnspace import SinePiece, SmoothFn1D
from gllab.morsealg import CriticalPoint, MorseDescription
from gllab.schedule import (DemoReport, batch_sweep, compile_gl_cobordism,
                            compile_reverse, round_doubly_warped,
                            round_metric, smooth_YsYt, two_surgery_demo,
                            write_schedule_csv)


@pytest.fixture(scope="module")
def g0():
    return round_metric(7, 1.0)


def one_point_desc(index=3):
    return MorseDescription(7, [CriticalPoint("w", index, 0.5)])


class TestCompile:
    def test_empty_desc_single_product(self, g0):
        s = compile_gl_cobordism(g0, MorseDescription(7, []))
        assert [seg.kind for seg in s.segments] == ["product-extension"]
        assert s.min_scalar > 0

    def test_one_point_three_segments(self, g0):
        s = compile_gl_cobordism(g0, one_point_desc())
        assert [seg.kind for seg in s.segments] == \
            ["product-extension", "standardize", "handle-attach"]
        assert s.min_scalar > 0
        # chaining: descriptors match end-to-start
        for a, b in zip(s.segments, s.segments[1:]):
            assert a.end == b.start

    def test_top_index_rejected(self, g0):
        with pytest.raises(HypothesisViolationError):
            compile_gl_cobordism(g0, MorseDescription(
                7, [CriticalPoint("x", 6, 0.5)]))

    def test_not_well_indexed_rejected(self, g0):
        desc = MorseDescription(7, [CriticalPoint("a", 4, 0.3),
                                    CriticalPoint("b", 3, 0.7)])
        with pytest.raises(InvalidSpecError):
            compile_gl_cobordism(g0, desc)

    def test_two_points_with_transition_smoothing(self, g0):
        desc = MorseDescription(7, [CriticalPoint("a", 3, 0.3),
                                    CriticalPoint("b", 4, 0.7)],
                                {(4, 3): [[1]]})
        s = compile_gl_cobordism(g0, desc)
        kinds = [seg.kind for seg in s.segments]
        assert kinds.count("handle-attach") == 2
        assert "transition-smoothing" in kinds

    def test_round_dw_metric_accepted(self):
        g = round_doubly_warped(2, 4, 1.0)
        s = compile_gl_cobordism(g, one_point_desc())
        assert s.min_scalar > 0

    def test_csv(self, g0):
        s = compile_gl_cobordism(g0, one_point_desc())
        buf = io.StringIO()
        write_schedule_csv(s, buf)
        lines = buf.getvalue().strip().splitlines()
        assert lines[0] == "index,kind,min_scalar"
        assert len(lines) == 4

    def test_schedule_json(self, g0):
        s = compile_gl_cobordism(g0, one_point_desc())
        blob = s.dumps()
        assert '"handle-attach"' in blob


class TestReverse:
    def test_round_trip_identity_report(self, g0):
        desc = one_point_desc()
        s = compile_gl_cobordism(g0, desc)
        rs, rep = compile_reverse(s, desc)
        assert rep["identity"]
        assert rep["max_profile_deviation"] < 1e-8
        assert len(rs.segments) == len(s.segments)
        assert rs.segments[0].start == s.segments[-1].end

    def test_empty_trivial(self, g0):
        s = compile_gl_cobordism(g0, MorseDescription(7, []))
        _, rep = compile_reverse(s, MorseDescription(7, []))
        assert rep["identity"]

    def test_reverse_inadmissible_rejected(self, g0):
        desc = one_point_desc(index=2)      # reverses to index 6 > n-2
        s = compile_gl_cobordism(g0, desc)
        with pytest.raises(HypothesisViolationError):
            compile_reverse(s, desc)


class TestSmoothing:
    def test_identity_on_constant(self):
        Y1 = lambda x: np.ones_like(np.asarray(x, dtype=float))
        Ysp, Ytp = smooth_YsYt(Y1, Y1, 1.0, 0.5, 0.2)
        x = np.linspace(0.0, 1.5, 301)
        assert np.allclose(Ysp(x), 1.0)
        assert np.allclose(Ytp(x), 1.0)

    def test_bands(self):
        Y = lambda x: 1.0 + 0.3 * np.sin(3.0 * np.asarray(x, dtype=float))
        Yp, _ = smooth_YsYt(Y, Y, 1.0, 0.5, 0.2)
        x = np.linspace(0.0, 1.5, 601)
        assert np.allclose(Yp(x[x <= 0.2]), 1.0)
        assert np.allclose(Yp(x[x >= 0.5]), Y(x[x >= 0.5]))
        # deviation compactly supported in [0, eps2]
        assert np.allclose((Yp(x) - Y(x))[x > 0.5], 0.0)

    def test_blend_is_c2(self):
        Y = lambda x: 1.0 + 0.3 * np.sin(3.0 * np.asarray(x, dtype=float))
        Yp, _ = smooth_YsYt(Y, Y, 1.0, 0.5, 0.2)
        h = 1e-4
        for x0 in (0.2, 0.5):
            for side in (-1.0, 1.0):
                a = x0 + side * 2 * h
                d2_in = (Yp(a + h) - 2 * Yp(a) + Yp(a - h)) / h ** 2
                b = x0 - side * 2 * h
                d2_out = (Yp(b + h) - 2 * Yp(b) + Yp(b - h)) / h ** 2
                # second derivative stays bounded across the junction
                assert abs(d2_in - d2_out) < 10.0

    def test_window_order_enforced(self):
        Y1 = lambda x: np.ones_like(np.asarray(x, dtype=float))
        with pytest.raises(InvalidWindowError):
            smooth_YsYt(Y1, Y1, 0.5, 1.0, 0.2)
        with pytest.raises(InvalidWindowError):
            smooth_YsYt(Y1, Y1, 1.0, 0.5, 0.0)


class TestSweep:
    def test_radius_family_shared_delta(self):
        desc = one_point_desc()
        out = batch_sweep([round_metric(7, r) for r in (0.8, 1.0, 1.2)],
                          [desc])
        assert all(c["ok"] for c in out["cells"])
        assert out["shared_delta"] is not None

    def test_empty_grid(self):
        out = batch_sweep([], [])
        assert out["cells"] == [] and out["shared_delta"] is None

    def test_non_psc_cell_isolated(self):
        b = np.pi / 3
        bad = WarpedSphereMetric(
            7, SmoothFn1D(b, [SinePiece((0.0, b), 0.5, 3.0)]),
            open_profile=True)
        out = batch_sweep([round_metric(7, 1.0), bad], [one_point_desc()])
        oks = [c["ok"] for c in out["cells"]]
        assert oks == [True, False]
        assert "CertificationFailedError" in out["cells"][1]["error"]


class TestDemo:
    def test_smallest_admissible(self):
        rep = two_surgery_demo(5, 1)
        assert isinstance(rep, DemoReport)
        assert rep.passed
        assert all(v > 0 for v in rep.minima().values())

    def test_q_precondition(self):
        with pytest.raises(HypothesisViolationError):
            two_surgery_demo(7, 4)
        with pytest.raises(InvalidSpecError):
            two_surgery_demo(7, 0)

    def test_stage_ids_and_endpoints(self):
        rep = two_surgery_demo(7, 2)
        ids = [s["id"] for s in rep.stages]
        assert ids == ["round", "standardize", "surgery-1", "surgery-2",
                       "f-to-torpedo", "foliation", "mtor-endpoint"]
        start, end = rep.endpoints
        assert start.kind == "warped"
        assert end.kind == "post-surgery"
        blob = rep.to_json()
        assert blob["passed"] is True
