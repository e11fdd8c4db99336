"""Sign classification and Lie-derivative checks on the builtin family."""

import numpy as np
import pytest

from fshil.geometry import (
    FoldKind,
    GradientDegenerateError,
    PiecewiseSystem,
    RegionTag,
    classify,
    lie_derivatives,
    second_lie,
)
from fshil.models import ShilnikovModelParams, build_model, oracle_known_points

PARAMS = ShilnikovModelParams(1.0, 1.0)
SYS = build_model(PARAMS)
KNOWN = oracle_known_points(PARAMS)


class TestLieDerivatives:
    def test_at_pseudo_equilibrium(self):
        xh, yh = lie_derivatives(SYS, (0.0, 0.0, 0.0))
        assert xh == pytest.approx(-0.375, abs=1e-14)
        assert yh == pytest.approx(0.375, abs=1e-14)

    def test_at_fold_point(self):
        xh, yh = lie_derivatives(SYS, KNOWN.fold_point)
        assert xh == pytest.approx(0.0, abs=1e-14)
        assert yh == pytest.approx(0.375, abs=1e-14)

    def test_identical_fields_give_equal_derivatives(self):
        f = lambda p: np.array([1.0, -2.0, 0.5])
        twin = PiecewiseSystem(X=f, Y=f, h=lambda p: p[2])
        xh, yh = lie_derivatives(twin, (0.3, -1.0, 0.0))
        assert xh == yh

    def test_finite_difference_gradient_fallback(self):
        # curved switching surface, no analytic gradient supplied
        curved = PiecewiseSystem(
            X=SYS.X, Y=SYS.Y, h=lambda p: p[2] - 0.1 * p[0] ** 2
        )
        p = (0.5, 0.2, 0.1 * 0.25)
        xh, yh = lie_derivatives(curved, p)
        gx = np.array([-0.1, 0.0, 1.0])  # exact grad at x=0.5
        assert xh == pytest.approx(float(gx @ SYS.X(np.asarray(p))), abs=1e-8)
        assert yh == pytest.approx(float(gx @ SYS.Y(np.asarray(p))), abs=1e-8)

    def test_degenerate_gradient_rejected(self):
        bad = PiecewiseSystem(X=SYS.X, Y=SYS.Y, h=lambda p: p[2] ** 2)
        with pytest.raises(GradientDegenerateError):
            lie_derivatives(bad, (0.1, 0.1, 0.0))


class TestClassify:
    def test_crossing_above_the_strip(self):
        assert classify(SYS, (0.0, 1.0, 0.0)).tag is RegionTag.CROSSING

    def test_sliding_at_origin(self):
        assert classify(SYS, (0.0, 0.0, 0.0)).tag is RegionTag.SLIDING

    def test_visible_regular_fold(self):
        rc = classify(SYS, KNOWN.fold_point)
        assert rc.tag is RegionTag.TANGENCY_X
        assert rc.fold_kind is FoldKind.VISIBLE
        assert rc.regular_fold is True

    def test_invisible_fold_below_threshold(self):
        # X^2h = x - beta < 0 left of the fold apex
        rc = classify(SYS, (0.25, 0.375, 0.0))
        assert rc.tag is RegionTag.TANGENCY_X
        assert rc.fold_kind is FoldKind.INVISIBLE

    def test_off_surface_point_rejected(self):
        with pytest.raises(ValueError):
            classify(SYS, (0.0, 0.0, 0.5))

    def test_degenerate_gradient_rejected(self):
        bad = PiecewiseSystem(X=SYS.X, Y=SYS.Y, h=lambda p: p[2] ** 2)
        with pytest.raises(GradientDegenerateError):
            classify(bad, (0.0, 0.0, 0.0))

    def test_matches_closed_form_decomposition_on_grid(self):
        c = KNOWN.fold_level
        xs = np.linspace(-3.0, 3.0, 100)
        ys = np.linspace(-3.0, 3.0, 100)
        tol = 1e-6
        for x in xs:
            for y in ys:
                rc = classify(SYS, (float(x), float(y), 0.0))
                if y > c + tol:
                    assert rc.tag is RegionTag.CROSSING
                elif y < c - tol:
                    assert rc.tag is RegionTag.SLIDING
                else:
                    assert rc.tag is RegionTag.TANGENCY_X
                assert rc.tag is not RegionTag.ESCAPING

    def test_tags_invariant_under_positive_rescaling(self):
        points = [
            (0.0, 1.0, 0.0),
            (0.0, 0.0, 0.0),
            (1.5, 0.375, 0.0),
            (-2.0, -1.0, 0.0),
        ]
        base = [classify(SYS, p) for p in points]
        for c in (0.5, 2.0, 10.0):
            scaled = PiecewiseSystem(
                X=lambda p, c=c: c * SYS.X(p),
                Y=lambda p, c=c: c * SYS.Y(p),
                h=SYS.h,
                grad_h=SYS.grad_h,
            )
            for p, rc in zip(points, base):
                got = classify(scaled, p)
                assert got.tag is rc.tag
                assert got.fold_kind == rc.fold_kind


class TestSecondLie:
    def test_x_fold_curvature_along_the_fold_line(self):
        for x in (-1.0, 0.5, 1.5, 3.0):
            v = second_lie(SYS, (x, 0.375, 0.0), "X")
            assert v == pytest.approx(x - 1.0, abs=1e-6)

    def test_y_side_is_flat_for_this_family(self):
        # Yh is identically c here, so its derivative along Y vanishes
        for p in [(0.0, 0.0, 0.0), (1.5, 0.375, 0.0), (2.0, -1.0, 0.0)]:
            assert second_lie(SYS, p, "Y") == pytest.approx(0.0, abs=1e-9)

    def test_constant_field_linear_surface(self):
        flat = PiecewiseSystem(
            X=lambda p: np.array([1.0, 2.0, 3.0]),
            Y=lambda p: np.array([0.0, 0.0, -1.0]),
            h=lambda p: p[2],
        )
        assert second_lie(flat, (0.0, 0.0, 0.0), "X") == pytest.approx(
            0.0, abs=1e-9
        )

    def test_vanishing_field_returns_zero(self):
        stuck = PiecewiseSystem(
            X=lambda p: np.zeros(3), Y=SYS.Y, h=lambda p: p[2]
        )
        assert second_lie(stuck, (0.0, 0.0, 0.0), "X") == 0.0
