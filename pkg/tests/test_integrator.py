"""Event-located integration against the closed-form flight oracle."""

import numpy as np
import pytest

from fshil.integrator import (
    ChatteringError,
    EventKind,
    FlowError,
    flow_filippov,
    flow_slide,
    flow_smooth,
)
from fshil.models import (
    ShilnikovModelParams,
    build_model,
    oracle_known_points,
    oracle_x_flow,
)

P11 = ShilnikovModelParams(1.0, 1.0)
SYS = build_model(P11)
KNOWN = oracle_known_points(P11)


class TestFlowSmooth:
    def test_flight_from_fold_hits_manifold(self):
        seg, ev = flow_smooth(SYS, "X", KNOWN.fold_point, 10.0)
        assert ev.kind is EventKind.HIT_MANIFOLD
        assert ev.time == pytest.approx(1.5, abs=1e-10)
        assert np.allclose(ev.location, [0.0, 0.0, 0.0], atol=1e-8)
        assert abs(ev.residual) < 1e-12

    def test_lower_field_rises_to_manifold(self):
        seg, ev = flow_smooth(SYS, "Y", (0.0, 0.0, -1.0), 10.0)
        # third component of the lower field is constant 0.375
        assert ev.kind is EventKind.HIT_MANIFOLD
        assert ev.time == pytest.approx(8 / 3, abs=1e-10)
        assert ev.location[0] == pytest.approx(8 / 3, abs=1e-9)
        assert abs(ev.location[2]) < 1e-12

    def test_zero_horizon(self):
        p0 = np.array([1.0, 2.0, 3.0])
        seg, ev = flow_smooth(SYS, "X", p0, 0.0)
        assert ev.kind is EventKind.MAX_TIME
        assert np.allclose(ev.location, p0)
        assert seg.t_start == seg.t_end == 0.0

    @pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0])
    @pytest.mark.parametrize("beta", [0.5, 1.0, 2.0])
    def test_matches_closed_form_flight(self, alpha, beta):
        p = ShilnikovModelParams(alpha, beta)
        sysm = build_model(p)
        kp = oracle_known_points(p)
        seg, ev = flow_smooth(sysm, "X", kp.fold_point, 2 * kp.flight_time)
        assert ev.kind is EventKind.HIT_MANIFOLD
        assert ev.time == pytest.approx(kp.flight_time, abs=1e-8)
        exact = oracle_x_flow(p, kp.fold_point, seg.times)
        sup = np.max(np.linalg.norm(seg.points - exact, axis=1))
        assert sup < 1e-8

    def test_round_trip_reversibility(self):
        # interior start, path clear of M both ways
        start = np.array([0.0, 0.0, 1.0])
        seg, ev = flow_smooth(SYS, "X", start, 0.8)
        assert ev.kind is EventKind.MAX_TIME
        back, bev = flow_smooth(SYS, "X", ev.location, -0.8)
        assert bev.kind is EventKind.MAX_TIME
        assert np.linalg.norm(back.points[-1] - start) < 1e-8

    def test_domain_escape(self):
        # |x| reaches the box wall near t=1.9, well before the manifold hit
        seg, ev = flow_smooth(SYS, "X", (0.0, 2.0, 1.0), 1e6, box=1.9)
        assert ev.kind is EventKind.LEAVE_DOMAIN

    def test_event_residuals_stay_tight(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            p0 = np.array([rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(0.1, 2)])
            seg, ev = flow_smooth(SYS, "X", p0, 30.0)
            if ev.kind is EventKind.HIT_MANIFOLD:
                assert abs(ev.residual) < 1e-12


class TestFlowSlide:
    def test_outward_spiral_exits_at_fold(self):
        # seed by sliding backward from the fold departure point, then the
        # forward run must retrace the spiral and leave at (nearly) the same spot
        back, bev = flow_slide(SYS, KNOWN.fold_point, -30.0)
        seed = back.points[-1]
        seg, ev = flow_slide(SYS, seed, 35.0)
        assert ev.kind is EventKind.EXIT_SLIDE_AT_FOLD
        assert ev.location[1] == pytest.approx(0.375, abs=1e-9)
        assert ev.location[0] == pytest.approx(1.5, abs=1e-5)
        # crossings of the positive-x axis march outward: unstable focus
        xs = seg.points[:, 0]
        ys = seg.points[:, 1]
        crossings = [
            xs[i] - ys[i] * (xs[i + 1] - xs[i]) / (ys[i + 1] - ys[i])
            for i in range(len(xs) - 1)
            if ys[i] < 0 <= ys[i + 1] and xs[i] > 0
        ]
        assert len(crossings) >= 3
        assert all(b > a for a, b in zip(crossings, crossings[1:]))

    def test_pseudo_equilibrium_stalls_immediately(self):
        seg, ev = flow_slide(SYS, (0.0, 0.0, 0.0), 10.0)
        assert ev.kind is EventKind.REACH_PSEUDO_EQUILIBRIUM
        assert ev.time == pytest.approx(0.0, abs=1e-9)

    def test_zero_horizon(self):
        seg, ev = flow_slide(SYS, (0.01, 0.0, 0.0), 0.0)
        assert ev.kind is EventKind.MAX_TIME

    def test_stays_on_manifold(self):
        seg, ev = flow_slide(SYS, (0.05, 0.02, 0.0), 40.0)
        assert np.max(np.abs(seg.points[:, 2])) < 1e-12

    def test_rejects_non_sliding_start(self):
        with pytest.raises(FlowError):
            flow_slide(SYS, (0.0, 1.0, 0.0), 1.0)  # crossing region


class TestFlowFilippov:
    def test_homoclinic_loop_from_fold_point(self):
        traj = flow_filippov(SYS, KNOWN.fold_point, 20.0)
        modes = [seg.mode for seg in traj.segments]
        assert modes[0] == "SmoothX"
        assert traj.segments[0].t_end == pytest.approx(1.5, abs=1e-8)
        hit = traj.events[0]
        assert hit.kind is EventKind.HIT_MANIFOLD
        assert np.allclose(hit.location, [0, 0, 0], atol=1e-8)
        assert traj.events[-1].kind is EventKind.REACH_PSEUDO_EQUILIBRIUM

    def test_slide_flight_alternation(self):
        # start on the fold inside a branch whose flight lands back in the
        # sliding strip, so one full return fits in the horizon
        traj = flow_filippov(SYS, (1.5 - 0.05252, 0.375, 0.0), 14.0)
        # drop the O(sqrt(eps)) glue segments at fold take-offs
        modes = [seg.mode for seg in traj.segments if seg.t_end - seg.t_start > 1e-6]
        assert modes[0] == "SmoothX"
        assert "Slide" in modes
        # every fold exit here is a visible upper-field fold, so slides
        # and flights alternate
        for a, b in zip(modes, modes[1:]):
            assert {a, b} == {"Slide", "SmoothX"}
        assert len(modes) >= 3

    def test_short_smooth_run_stays_smooth(self):
        traj = flow_filippov(SYS, (0.0, 0.0, 1.0), 0.05)
        assert len(traj.segments) == 1
        assert traj.segments[0].mode == "SmoothX"
        assert traj.events[-1].kind is EventKind.MAX_TIME

    def test_crossing_passes_through(self):
        # from below the rise meets M far right of the strip (both normal
        # velocities positive), so the orbit crosses and continues on top
        traj = flow_filippov(SYS, (0.0, 0.5, -0.5), 3.0)
        kinds = [ev.kind for ev in traj.events]
        assert EventKind.CROSS_THROUGH in kinds
        modes = [seg.mode for seg in traj.segments]
        assert modes == ["SmoothY", "SmoothX"]

    def test_forward_time_only(self):
        with pytest.raises(ValueError):
            flow_filippov(SYS, (0.0, 0.0, 1.0), -1.0)

    def test_random_starts_keep_mode_sign_invariants(self):
        rng = np.random.default_rng(2026)
        h_tol = 1e-9
        for _ in range(200):
            p0 = rng.uniform(-2, 2, size=3)
            try:
                traj = flow_filippov(SYS, p0, 8.0)
            except FlowError:
                continue
            prev_end = None
            for seg in traj.segments:
                z = seg.points[:, 2]
                if seg.mode == "SmoothX":
                    assert np.min(z) > -1e-7
                elif seg.mode == "SmoothY":
                    assert np.max(z) < 1e-7
                else:
                    assert np.max(np.abs(z)) < h_tol
                if prev_end is not None:
                    assert np.linalg.norm(seg.points[0] - prev_end) < 1e-8
                prev_end = seg.points[-1]

    def test_manifold_event_residuals(self):
        rng = np.random.default_rng(7)
        on_m = (
            EventKind.HIT_MANIFOLD,
            EventKind.BEGIN_SLIDE,
            EventKind.EXIT_SLIDE_AT_FOLD,
            EventKind.CROSS_THROUGH,
        )
        seen = 0
        for _ in range(40):
            p0 = rng.uniform(-1.5, 1.5, size=3)
            try:
                traj = flow_filippov(SYS, p0, 6.0)
            except FlowError:
                continue
            for ev in traj.events:
                if ev.kind in on_m:
                    seen += 1
                    assert abs(ev.residual) < 1e-12
        assert seen > 30

    def test_chattering_guard_is_a_flow_error(self):
        assert issubclass(ChatteringError, FlowError)


class TestTrajectoryExport:
    def test_csv_and_event_log(self, tmp_path):
        traj = flow_filippov(SYS, KNOWN.fold_point, 5.0)
        csv = tmp_path / "run.csv"
        js = tmp_path / "run.events.json"
        traj.write_csv(csv)
        traj.write_events_json(js)
        lines = csv.read_text().splitlines()
        assert lines[0] == "t,x,y,z,mode"
        # the flight is polynomial, so the adaptive stepper needs few steps
        assert len(lines) > 5
        first = lines[1].split(",")
        assert len(first) == 5
        assert first[4] == "SmoothX"
        import json

        events = json.loads(js.read_text())
        assert events[0]["kind"] == "HitManifold"
        assert abs(events[0]["residual"]) < 1e-12

    def test_end_point_properties(self):
        traj = flow_filippov(SYS, KNOWN.fold_point, 20.0)
        assert np.allclose(traj.end_point, [0, 0, 0], atol=1e-6)
        assert traj.t_end <= 20.0
