"""Sliding dynamics on the switching manifold.

The sliding vector field is the unique convex combination of the two smooth
fields that is tangent to M; it governs motion inside the sliding and
escaping regions.  This module computes it, finds its equilibria (pseudo-
equilibria of the piecewise system), classifies them by their planar
linearization, and checks transversality of the sliding flow at fold points.

Planar work happens in a TangentChart: an orthonormal frame spanning the
tangent plane of M at a base point, with an h-constrained embedding back
into R^3.  For a flat manifold the chart is a rigid motion, so chart
coordinates are global; for curved manifolds it is trustworthy only within
chart_radius.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .geometry import (
    FD_STEP,
    H_TOL,
    PiecewiseSystem,
    RegionTag,
    classify,
    lie_derivatives,
)

__all__ = [
    "DENOM_TOL",
    "EQ_TOL",
    "DEDUP_TOL",
    "DenominatorDegenerateError",
    "EquilibriumKind",
    "PseudoEquilibrium",
    "TangentChart",
    "build_chart",
    "sliding_field",
    "sliding_field_scalar",
    "find_pseudo_equilibria",
    "fold_transversality",
]

DENOM_TOL = 1e-12
EQ_TOL = 1e-10
DEDUP_TOL = 1e-6
HYP_TOL = 1e-9


class DenominatorDegenerateError(ValueError):
    """Yh - Xh vanished: the convex combination defining the sliding field
    is ill-posed at this point (double tangency)."""


def sliding_field(sys: PiecewiseSystem, p, denom_tol: float = DENOM_TOL) -> np.ndarray:
    """Sliding vector field (Yh*X - Xh*Y)/(Yh - Xh) at a point of M.

    Valid on the sliding and escaping regions; at a fold the formula
    degenerates gracefully to the tangent field itself, which is the
    correct one-sided limit, so fold points are accepted.
    """
    p = np.asarray(p, dtype=float)
    xh, yh = lie_derivatives(sys, p)
    den = yh - xh
    if abs(den) <= denom_tol:
        raise DenominatorDegenerateError(
            f"Yh - Xh = {den:.3e} at {p.tolist()}; sliding field undefined"
        )
    xv = np.asarray(sys.X(p), dtype=float)
    yv = np.asarray(sys.Y(p), dtype=float)
    return (yh * xv - xh * yv) / den


def sliding_field_scalar(sys: PiecewiseSystem, denom_tol: float = DENOM_TOL):
    """Scalar-signature closure f(t,x,y,z)->(wx,wy,wz) for the integrator."""
    fx = sys.sx
    fy = sys.sy
    grad = sys.sgrad_h

    def field(t, x, y, z):
        gx, gy, gz = grad(x, y, z)
        ax, ay, az = fx(x, y, z)
        bx, by, bz = fy(x, y, z)
        xh = gx * ax + gy * ay + gz * az
        yh = gx * bx + gy * by + gz * bz
        den = yh - xh
        if abs(den) <= denom_tol:
            raise DenominatorDegenerateError(
                f"Yh - Xh = {den:.3e} at ({x}, {y}, {z})"
            )
        return (
            (yh * ax - xh * bx) / den,
            (yh * ay - xh * by) / den,
            (yh * az - xh * bz) / den,
        )

    return field


@dataclass(frozen=True)
class TangentChart:
    """Orthonormal planar chart on M around an origin point.

    embed(u, v) walks from the origin along e1, e2 and then corrects along
    the normal until back on M; to_chart projects a nearby manifold point
    onto the frame.
    """

    origin: np.ndarray
    e1: np.ndarray
    e2: np.ndarray
    normal: np.ndarray
    radius: float
    _sys: PiecewiseSystem

    def embed(self, u: float, v: float, tol: float = 1e-12) -> np.ndarray:
        p = self.origin + u * self.e1 + v * self.e2
        # Newton along the normal; M is a regular level set so this converges
        # in one step for flat manifolds and a few otherwise.
        for _ in range(30):
            hv = self._sys.h(p)
            if abs(hv) < tol:
                return p
            gn = float(np.dot(self._sys.grad_h_at(p), self.normal))
            if abs(gn) < 1e-14:
                break
            p = p - (hv / gn) * self.normal
        raise RuntimeError(
            f"chart embedding failed to reach |h|<{tol:g} at (u,v)=({u},{v})"
        )

    def to_chart(self, p) -> tuple[float, float]:
        d = np.asarray(p, dtype=float) - self.origin
        return float(np.dot(d, self.e1)), float(np.dot(d, self.e2))


def build_chart(sys: PiecewiseSystem, origin, radius: float) -> TangentChart:
    """Chart at a manifold point with a deterministic in-plane frame."""
    origin = np.asarray(origin, dtype=float)
    if abs(sys.h(origin)) > H_TOL:
        raise ValueError(f"chart origin is off the manifold: h={sys.h(origin):.3e}")
    g = sys.grad_h_at(origin)
    n = g / np.linalg.norm(g)
    # first standard basis vector not close to the normal keeps frames stable
    seed = np.zeros(3)
    seed[int(np.argmin(np.abs(n)))] = 1.0
    e1 = seed - np.dot(seed, n) * n
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(n, e1)
    return TangentChart(origin=origin, e1=e1, e2=e2, normal=n, radius=float(radius), _sys=sys)


class EquilibriumKind(str, Enum):
    SADDLE_FOCUS_UNSTABLE = "SaddleFocusUnstable"
    SADDLE_FOCUS_STABLE = "SaddleFocusStable"
    NODE = "Node"
    SADDLE = "Saddle"
    NON_HYPERBOLIC = "NonHyperbolic"


@dataclass(frozen=True)
class PseudoEquilibrium:
    """Zero of the sliding field with its planar spectral data."""

    location: np.ndarray
    eigenvalues: tuple[complex, complex]
    kind: EquilibriumKind
    chart_coords: tuple[float, float]
    planar_jacobian: np.ndarray


def _classify_kind(eigs, hyp_tol: float) -> EquilibriumKind:
    re = sorted(abs(ev.real) for ev in eigs)
    if re[0] < hyp_tol:
        return EquilibriumKind.NON_HYPERBOLIC
    if max(abs(ev.imag) for ev in eigs) > hyp_tol:
        if eigs[0].real > 0:
            return EquilibriumKind.SADDLE_FOCUS_UNSTABLE
        return EquilibriumKind.SADDLE_FOCUS_STABLE
    r0, r1 = sorted(ev.real for ev in eigs)
    if r0 * r1 < 0:
        return EquilibriumKind.SADDLE
    return EquilibriumKind.NODE


def find_pseudo_equilibria(
    sys: PiecewiseSystem,
    chart: TangentChart,
    search_radius: float,
    *,
    grid_n: int = 21,
    eq_tol: float = EQ_TOL,
    dedup_tol: float = DEDUP_TOL,
    fd_step: float = FD_STEP,
    hyp_tol: float = HYP_TOL,
) -> list[PseudoEquilibrium]:
    """Multi-start damped-Newton root search for the planar sliding field.

    Starts on a grid_n x grid_n grid over the chart square of the given
    radius; each start runs Newton with step halving (at most 40 halvings
    per iteration, at most 100 iterations) until the planar residual drops
    below eq_tol.  Roots closer than dedup_tol in chart distance are merged.
    Starts that wander off the chart, hit a degenerate denominator, or fail
    to converge are dropped silently.
    """

    def planar(u, v):
        p = chart.embed(u, v)
        w = sliding_field(sys, p)
        return np.array([np.dot(w, chart.e1), np.dot(w, chart.e2)])

    def planar_jac(u, v):
        j = np.empty((2, 2))
        for col, (du, dv) in enumerate(((fd_step, 0.0), (0.0, fd_step))):
            j[:, col] = (planar(u + du, v + dv) - planar(u - du, v - dv)) / (2 * fd_step)
        return j

    lim = 2.0 * search_radius
    roots: list[np.ndarray] = []
    grid = np.linspace(-search_radius, search_radius, grid_n)
    for u0 in grid:
        for v0 in grid:
            uv = np.array([u0, v0])
            try:
                fval = planar(*uv)
            except (DenominatorDegenerateError, RuntimeError):
                continue
            ok = False
            for _ in range(100):
                res = np.linalg.norm(fval)
                if res < eq_tol:
                    ok = True
                    break
                try:
                    j = planar_jac(*uv)
                    step = np.linalg.solve(j, -fval)
                except (np.linalg.LinAlgError, DenominatorDegenerateError, RuntimeError):
                    break
                lam = 1.0
                moved = False
                for _ in range(40):
                    cand = uv + lam * step
                    if np.max(np.abs(cand)) <= lim:
                        try:
                            fcand = planar(*cand)
                        except (DenominatorDegenerateError, RuntimeError):
                            fcand = None
                        if fcand is not None and np.linalg.norm(fcand) < res:
                            uv, fval = cand, fcand
                            moved = True
                            break
                    lam *= 0.5
                if not moved:
                    break
            if ok and np.max(np.abs(uv)) <= search_radius + dedup_tol:
                if not any(np.linalg.norm(uv - r) < dedup_tol for r in roots):
                    roots.append(uv)

    roots.sort(key=lambda r: (r[0], r[1]))
    out = []
    for uv in roots:
        jac = planar_jac(*uv)
        eigs = np.linalg.eigvals(jac)
        eigs = tuple(sorted((complex(e) for e in eigs), key=lambda e: (e.real, e.imag)))
        out.append(
            PseudoEquilibrium(
                location=chart.embed(*uv),
                eigenvalues=eigs,
                kind=_classify_kind(eigs, hyp_tol),
                chart_coords=(float(uv[0]), float(uv[1])),
                planar_jacobian=jac,
            )
        )
    return out


def fold_transversality(sys: PiecewiseSystem, p, *, fd_step: float = FD_STEP) -> float:
    """Component of the limiting sliding field along the in-M normal of the
    fold line through p.  Nonzero certifies the sliding flow meets the fold
    transversally; the sign is taken along increasing Wh (out of the region
    where the tangent field points toward M).
    """
    p = np.asarray(p, dtype=float)
    cls = classify(sys, p)
    if cls.tag not in (RegionTag.TANGENCY_X, RegionTag.TANGENCY_Y):
        raise ValueError(f"not a single tangency point: {cls.tag}")
    if not cls.regular_fold:
        raise ValueError("fold is not regular; transversality undefined")
    which = "X" if cls.tag is RegionTag.TANGENCY_X else "Y"
    w = np.asarray(sys.field(which)(p), dtype=float)

    def wh(q):
        return lie_derivatives(sys, q)[0 if which == "X" else 1]

    g = np.empty(3)
    for i in range(3):
        e = np.zeros(3)
        e[i] = fd_step
        g[i] = (wh(p + e) - wh(p - e)) / (2 * fd_step)
    n = sys.grad_h_at(p)
    n = n / np.linalg.norm(n)
    g_in = g - np.dot(g, n) * n
    norm = np.linalg.norm(g_in)
    if norm < 1e-12:
        raise ValueError("fold line direction degenerate (in-M gradient of Wh ~ 0)")
    return float(np.dot(w, g_in / norm))
