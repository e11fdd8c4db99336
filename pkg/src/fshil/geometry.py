"""Pointwise geometry of a piecewise-smooth vector field near its switching surface.

A system is a pair of smooth fields (X, Y) on R^3 separated by the zero set
M = {h = 0} of a scalar function with nonvanishing gradient.  Everything in
this module is local and derivative-based: Lie derivatives of h along the two
fields, the sign classification of points of M (crossing, sliding, escaping,
tangency), and second-order data used to tell visible folds from invisible
ones.

Sign conventions
----------------
X governs {h > 0} and Y governs {h < 0}.  Writing Xh = <grad h, X> and
Yh = <grad h, Y> at a point of M:

* crossing   : Xh * Yh > 0
* sliding    : Xh < 0 < Yh
* escaping   : Yh < 0 < Xh
* tangency   : Xh = 0 or Yh = 0 (within tolerance)

A tangency of X is a visible fold when the second Lie derivative X(Xh) is
positive (the X-orbit curves away from M into {h > 0}), invisible when
negative; the symmetric test for Y uses Y(Yh) < 0.  A fold of one field is
regular when the other field remains transverse to M there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Callable, Optional

import numpy as np

__all__ = [
    "H_TOL",
    "SIGN_TOL",
    "FD_STEP",
    "GRAD_TOL",
    "FoldKind",
    "GradientDegenerateError",
    "PiecewiseSystem",
    "RegionClass",
    "RegionTag",
    "classify",
    "lie_derivatives",
    "second_lie",
]

# Default tolerances.  |h| below H_TOL counts as "on the surface"; Lie
# derivative magnitudes below SIGN_TOL are treated as zero when classifying.
H_TOL = 1e-9
SIGN_TOL = 1e-8
FD_STEP = 1e-6
GRAD_TOL = 1e-8


class GradientDegenerateError(ValueError):
    """Raised when grad h (nearly) vanishes at an on-surface point."""


class RegionTag(str, Enum):
    CROSSING = "Crossing"
    SLIDING = "Sliding"
    ESCAPING = "Escaping"
    TANGENCY_X = "TangencyX"
    TANGENCY_Y = "TangencyY"
    TANGENCY_BOTH = "TangencyBoth"


class FoldKind(str, Enum):
    VISIBLE = "VisibleFold"
    INVISIBLE = "InvisibleFold"
    HIGHER_ORDER = "HigherOrder"


def _as_point(p) -> np.ndarray:
    q = np.asarray(p, dtype=float)
    if q.shape != (3,):
        raise ValueError(f"expected a 3-vector, got shape {q.shape}")
    return q


def _wrap_scalar_field(f: Callable[[np.ndarray], object]):
    """Adapt a vector-signature field callable to the scalar fast path."""

    def fs(x: float, y: float, z: float):
        v = f(np.array((x, y, z)))
        return float(v[0]), float(v[1]), float(v[2])

    return fs


def _wrap_scalar_h(h: Callable[[np.ndarray], float]):
    def hs(x: float, y: float, z: float) -> float:
        return float(h(np.array((x, y, z))))

    return hs


@dataclass(frozen=True)
class PiecewiseSystem:
    """A two-field piecewise-smooth system with switching function h.

    Parameters
    ----------
    X, Y : callable
        Smooth fields R^3 -> R^3; X governs {h > 0}, Y governs {h < 0}.
    h : callable
        Switching function R^3 -> R with regular zero set.
    grad_h : callable, optional
        Analytic gradient of h.  When omitted, central differences with
        step ``FD_STEP`` are used.
    jac_X, jac_Y : callable, optional
        Analytic 3x3 field Jacobians (used by consumers that want them;
        nothing in this package requires them).
    scalar_x, scalar_y : callable, optional
        Fast-path evaluators ``(x, y, z) -> (fx, fy, fz)`` of plain floats.
        Auto-wrapped from the vector callables when omitted; supplying
        native scalar forms speeds up the integrator considerably.
    scalar_h, scalar_grad_h : callable, optional
        Same fast path for h and grad h.
    """

    X: Callable[[np.ndarray], np.ndarray]
    Y: Callable[[np.ndarray], np.ndarray]
    h: Callable[[np.ndarray], float]
    grad_h: Optional[Callable[[np.ndarray], np.ndarray]] = None
    jac_X: Optional[Callable[[np.ndarray], np.ndarray]] = None
    jac_Y: Optional[Callable[[np.ndarray], np.ndarray]] = None
    scalar_x: Optional[Callable] = None
    scalar_y: Optional[Callable] = None
    scalar_h: Optional[Callable] = None
    scalar_grad_h: Optional[Callable] = None
    name: str = "piecewise-system"

    # -- fast scalar accessors -------------------------------------------

    @cached_property
    def sx(self) -> Callable:
        return self.scalar_x if self.scalar_x is not None else _wrap_scalar_field(self.X)

    @cached_property
    def sy(self) -> Callable:
        return self.scalar_y if self.scalar_y is not None else _wrap_scalar_field(self.Y)

    @cached_property
    def sh(self) -> Callable:
        return self.scalar_h if self.scalar_h is not None else _wrap_scalar_h(self.h)

    @cached_property
    def sgrad_h(self) -> Callable:
        if self.scalar_grad_h is not None:
            return self.scalar_grad_h
        if self.grad_h is not None:
            return _wrap_scalar_field(self.grad_h)

        hs = self.sh
        d = FD_STEP

        def gs(x: float, y: float, z: float):
            return (
                (hs(x + d, y, z) - hs(x - d, y, z)) / (2.0 * d),
                (hs(x, y + d, z) - hs(x, y - d, z)) / (2.0 * d),
                (hs(x, y, z + d) - hs(x, y, z - d)) / (2.0 * d),
            )

        return gs

    # -- convenience vector forms ----------------------------------------

    def field(self, which: str) -> Callable[[np.ndarray], np.ndarray]:
        if which == "X":
            return self.X
        if which == "Y":
            return self.Y
        raise ValueError(f"which must be 'X' or 'Y', got {which!r}")

    def scalar_field(self, which: str) -> Callable:
        if which == "X":
            return self.sx
        if which == "Y":
            return self.sy
        raise ValueError(f"which must be 'X' or 'Y', got {which!r}")

    def grad_h_at(self, p) -> np.ndarray:
        x, y, z = _as_point(p)
        return np.array(self.sgrad_h(x, y, z))

    def check_gradient(self, p, grad_tol: float = GRAD_TOL) -> np.ndarray:
        """Return grad h at p, raising if it is degenerate on the surface."""
        q = _as_point(p)
        g = self.grad_h_at(q)
        if abs(self.sh(*q)) <= H_TOL and float(np.linalg.norm(g)) <= grad_tol:
            raise GradientDegenerateError(
                f"grad h has norm {np.linalg.norm(g):.3e} <= {grad_tol:.1e} "
                f"at on-surface point {q.tolist()}"
            )
        return g


@dataclass(frozen=True)
class RegionClass:
    """Classification of a switching-surface point.

    ``fold_kind`` and ``regular_fold`` are populated only for tangency tags.
    ``regular_fold`` records whether the non-tangent field is transverse to
    the surface at the point.
    """

    tag: RegionTag
    fold_kind: Optional[FoldKind] = None
    regular_fold: Optional[bool] = None

    @property
    def is_tangency(self) -> bool:
        return self.tag in (
            RegionTag.TANGENCY_X,
            RegionTag.TANGENCY_Y,
            RegionTag.TANGENCY_BOTH,
        )


def lie_derivatives(sys: PiecewiseSystem, p) -> tuple[float, float]:
    """First Lie derivatives (Xh, Yh) of h along both fields at p.

    These are plain directional derivatives <grad h(p), X(p)> and
    <grad h(p), Y(p)>; p need not lie on the switching surface.  Raises
    GradientDegenerateError when grad h (nearly) vanishes at an on-surface
    point, where the signs below would be meaningless.
    """
    x, y, z = _as_point(p)
    gx, gy, gz = sys.sgrad_h(x, y, z)
    if (
        gx * gx + gy * gy + gz * gz <= GRAD_TOL * GRAD_TOL
        and abs(sys.sh(x, y, z)) <= H_TOL
    ):
        raise GradientDegenerateError(
            f"grad h (nearly) vanishes at on-surface point ({x}, {y}, {z})"
        )
    fx, fy, fz = sys.sx(x, y, z)
    ex, ey, ez = sys.sy(x, y, z)
    return (gx * fx + gy * fy + gz * fz, gx * ex + gy * ey + gz * ez)


def _lie_one(sys: PiecewiseSystem, x: float, y: float, z: float, which: str) -> float:
    gx, gy, gz = sys.sgrad_h(x, y, z)
    fx, fy, fz = sys.scalar_field(which)(x, y, z)
    return gx * fx + gy * fy + gz * fz


def second_lie(sys: PiecewiseSystem, p, which: str, fd_step: float = FD_STEP) -> float:
    """Second Lie derivative W(Wh) at p for W = X or Y.

    Computed as the directional derivative of the scalar map q -> Wh(q)
    along W(p), by a central difference of step ``fd_step`` along the unit
    field direction.  Returns 0.0 when W(p) vanishes.
    """
    x, y, z = _as_point(p)
    fx, fy, fz = sys.scalar_field(which)(x, y, z)
    n = math.sqrt(fx * fx + fy * fy + fz * fz)
    if n == 0.0:
        return 0.0
    ux, uy, uz = fx / n, fy / n, fz / n
    d = fd_step
    ahead = _lie_one(sys, x + d * ux, y + d * uy, z + d * uz, which)
    behind = _lie_one(sys, x - d * ux, y - d * uy, z - d * uz, which)
    return (ahead - behind) / (2.0 * d) * n


def classify(
    sys: PiecewiseSystem,
    p,
    tol: float = SIGN_TOL,
    h_tol: float = H_TOL,
    check_on_surface: bool = True,
) -> RegionClass:
    """Classify a switching-surface point by the signs of (Xh, Yh).

    Tangency tests (|Wh| <= tol) take precedence over the sign products, so
    points inside the tolerance band are always reported as tangencies.  For
    a tangency of a single field the fold kind is decided by the sign of the
    second Lie derivative against the same tolerance.

    Raises
    ------
    ValueError
        If ``check_on_surface`` and |h(p)| > h_tol.
    GradientDegenerateError
        If grad h (nearly) vanishes at an on-surface point.
    """
    q = _as_point(p)
    hv = sys.sh(*q)
    if check_on_surface and abs(hv) > h_tol:
        raise ValueError(
            f"point is not on the switching surface: |h| = {abs(hv):.3e} > {h_tol:.1e}"
        )
    sys.check_gradient(q)
    xh, yh = lie_derivatives(sys, q)

    x_tangent = abs(xh) <= tol
    y_tangent = abs(yh) <= tol
    if x_tangent and y_tangent:
        return RegionClass(RegionTag.TANGENCY_BOTH)
    if x_tangent:
        w2 = second_lie(sys, q, "X")
        if w2 > tol:
            kind = FoldKind.VISIBLE
        elif w2 < -tol:
            kind = FoldKind.INVISIBLE
        else:
            kind = FoldKind.HIGHER_ORDER
        return RegionClass(RegionTag.TANGENCY_X, kind, regular_fold=not y_tangent)
    if y_tangent:
        w2 = second_lie(sys, q, "Y")
        # mirrored test: the Y-orbit is on the h<0 side, so visible means
        # Y(Yh) < 0 (it curves away from the surface downward)
        if w2 < -tol:
            kind = FoldKind.VISIBLE
        elif w2 > tol:
            kind = FoldKind.INVISIBLE
        else:
            kind = FoldKind.HIGHER_ORDER
        return RegionClass(RegionTag.TANGENCY_Y, kind, regular_fold=not x_tangent)

    if xh > 0.0 and yh > 0.0 or xh < 0.0 and yh < 0.0:
        return RegionClass(RegionTag.CROSSING)
    if xh < 0.0 < yh:
        return RegionClass(RegionTag.SLIDING)
    return RegionClass(RegionTag.ESCAPING)
