"""First-return analysis on a fold section near a sliding homoclinic loop.

The objects here live on a one-dimensional section: a closed arc of the
sliding boundary (the fold line) centered at the point q0 whose forward
flight lands exactly on the pseudo-equilibrium p0.  Orbits leave the fold
along the upper field, land inside the sliding region, spiral around p0,
and exit through the fold again; the map sending entry arc-coordinate to
exit arc-coordinate is the first return map studied by everything below.

Coding convention: the section splits at s=0 into half 0 (s<0) and half 1
(s>=0).  J denotes the landing curve (flight images of section points);
eta counts transversal crossings of the in-manifold sliding path with the
two halves of J.  A word of depth m records m successive halves-and-counts
plus the starting half, so halves has length m+1 and counts has length m.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .geometry import (
    FoldKind,
    PiecewiseSystem,
    RegionTag,
    classify,
    lie_derivatives,
    second_lie,
)
from .integrator import (
    ChatteringError,
    EventKind,
    Segment,
    FlowError,
    SLIDE_MAX_STEP,
    filippov_segments,
    flow_slide,
    flow_smooth,
)
from .sliding import (
    PseudoEquilibrium,
    TangentChart,
    build_chart,
    find_pseudo_equilibria,
    fold_transversality,
)

__all__ = [
    "Band",
    "BranchMismatchError",
    "Certificate",
    "EscapedError",
    "ItineraryWord",
    "PeriodicPoint",
    "PseudoEquilibriumReachedError",
    "ReturnOpts",
    "ReturnRecord",
    "Section",
    "SectionBuildError",
    "SectionPoint",
    "ShilnikovReport",
    "STD_OPTS",
    "TIGHT_OPTS",
    "build_section",
    "code_itinerary",
    "discover_bands",
    "entropy_estimate",
    "find_periodic",
    "first_return",
    "locate_cylinder",
    "realized_words",
    "return_derivative",
    "section_scan",
    "verify_shilnikov",
]

# a crossing is proper when each segment's endpoints sit on opposite sides
# of the other; near-tangent contact shows up as one orientation area being
# a rounding-level fraction of its partner, so the guard is a ratio, never
# an absolute area (areas scale like radius^4 near the spiral's center)
COLLINEAR_RATIO = 1e-9
CYL_TOL_FACTOR = 1e-9  # interval endpoint resolution, relative to radius
PERIODIC_TOL_FACTOR = 1e-10  # |pi^m(s)-s| acceptance, relative to radius


class SectionBuildError(RuntimeError):
    """Section construction failed (fold root, visibility, or landing)."""


class EscapedError(RuntimeError):
    """The orbit left the section's basin without returning."""

    def __init__(self, msg, t_elapsed=None, excursions=None):
        super().__init__(msg)
        self.t_elapsed = t_elapsed
        self.excursions = excursions


class PseudoEquilibriumReachedError(RuntimeError):
    """The orbit fell onto the pseudo-equilibrium; no return exists."""


class BranchMismatchError(RuntimeError):
    """A finite-difference stencil straddled a discontinuity of the map."""


@dataclass(frozen=True)
class SectionPoint:
    s: float


@dataclass(frozen=True)
class ReturnRecord:
    """One application of the return map with its combinatorial data."""

    s_in: float
    s_out: float
    half_in: int
    half_out: int
    eta0: int
    eta1: int
    excursions: int
    t_return: float

    @property
    def signature(self) -> tuple:
        # two records on the same smooth branch of the map agree here
        return (self.eta0, self.eta1, self.half_out, self.excursions)


@dataclass(frozen=True)
class ItineraryWord:
    """Finite itinerary: starting half plus (half, count) per return.

    halves[i] is the half-interval of the i-th iterate (i = 0..depth);
    counts[i] is the crossing count with J of the destination half during
    return i+1, so len(halves) == len(counts) + 1.
    """

    halves: tuple[int, ...]
    counts: tuple[int, ...]

    def __post_init__(self):
        if len(self.halves) != len(self.counts) + 1:
            raise ValueError(
                f"halves must be one longer than counts: "
                f"{len(self.halves)} vs {len(self.counts)}"
            )
        if any(h not in (0, 1) for h in self.halves):
            raise ValueError(f"halves must be 0/1: {self.halves}")
        if any(c < 0 for c in self.counts):
            raise ValueError(f"counts must be non-negative: {self.counts}")

    @property
    def depth(self) -> int:
        return len(self.counts)

    def shift(self) -> "ItineraryWord":
        if self.depth < 1:
            raise ValueError("cannot shift a depth-0 word")
        return ItineraryWord(self.halves[1:], self.counts[1:])

    def truncated(self, depth: int) -> "ItineraryWord":
        if depth > self.depth or depth < 0:
            raise ValueError(f"cannot truncate depth {self.depth} to {depth}")
        return ItineraryWord(self.halves[: depth + 1], self.counts[:depth])


@dataclass(frozen=True)
class ReturnOpts:
    """Integrator tolerances and budget for one return-map application."""

    smooth_rtol: float = 1e-10
    smooth_atol: float = 1e-12
    slide_rtol: float = 1e-9
    slide_atol: float = 1e-12
    t_max: float = 500.0


STD_OPTS = ReturnOpts()
TIGHT_OPTS = ReturnOpts(
    smooth_rtol=1e-12, smooth_atol=1e-14, slide_rtol=1e-12, slide_atol=1e-14
)


def _half_of(s: float) -> int:
    # the split point s=0 is assigned to half 1; it never returns anyway
    return 1 if s >= 0.0 else 0


class Section:
    """Fold-arc section with its landing curve and a return-record cache."""

    def __init__(
        self,
        sys: PiecewiseSystem,
        center: np.ndarray,
        frame: np.ndarray,
        radius: float,
        chart: TangentChart,
        pseudo_eq: PseudoEquilibrium,
        s_grid: np.ndarray,
        j_points: np.ndarray,
        j_times: np.ndarray,
        landing_gap: float,
        flight_time: float,
        slide_max_step: float,
        count_s: np.ndarray | None = None,
        count_points: np.ndarray | None = None,
    ):
        self.sys = sys
        self.center = center
        self.frame = frame
        self.radius = float(radius)
        self.chart = chart
        self.pseudo_eq = pseudo_eq
        self.s_grid = s_grid
        self.j_points = j_points  # chart coordinates, shape (n, 2)
        self.j_times = j_times
        self.landing_gap = float(landing_gap)
        self.flight_time = float(flight_time)
        self.slide_max_step = float(slide_max_step)
        # densified copy of J used for crossing counts; deep windings pass
        # the landing curve arbitrarily close to the pseudo-equilibrium,
        # where a uniform grid has no vertices to intersect
        self.count_s = s_grid if count_s is None else count_s
        self.count_points = j_points if count_points is None else count_points
        self._cache: dict[tuple[float, ReturnOpts], ReturnRecord] = {}
        self._fail_cache: dict[tuple[float, ReturnOpts], Exception] = {}
        self._mid = len(s_grid) // 2
        self._count_mid = int(np.searchsorted(self.count_s, 0.0))
        self._chart_origin = np.asarray(self.pseudo_eq.location, dtype=float)
        self._chart_mat = np.stack([chart.e1, chart.e2], axis=1)
        self._bands: list["Band"] = []
        self._band_sources: set[str] = set()
        self._band_seeds: list[float] | None = None
        self._leg: tuple[np.ndarray, np.ndarray] | None = None
        self._sweep_memo: dict = {}
        self._locate_memo: dict = {}

    def embed(self, s: float) -> np.ndarray:
        """Point of the fold arc at arc coordinate s, polished onto
        {h=0, Xh=0} by alternating Newton corrections."""
        p = self.center + float(s) * self.frame
        return _fold_newton(self.sys, p)

    def locate_on_fold(self, p) -> float:
        return float(np.dot(np.asarray(p, dtype=float) - self.center, self.frame))

    def half_of(self, s: float) -> int:
        return _half_of(s)

    def path_chart(self, points: np.ndarray) -> np.ndarray:
        """Project ambient sample points to planar chart coordinates."""
        return (np.asarray(points, dtype=float) - self._chart_origin) @ self._chart_mat

    def j_polyline(self, half: int) -> np.ndarray:
        if half == 0:
            return self.j_points[: self._mid + 1]
        return self.j_points[self._mid :]

    def count_polyline(self, half: int) -> np.ndarray:
        if half == 0:
            return self.count_points[: self._count_mid + 1]
        return self.count_points[self._count_mid :]

    def clear_cache(self) -> None:
        self._cache.clear()
        self._fail_cache.clear()
        self._bands = []
        self._band_sources = set()
        self._band_seeds = None
        self._leg = None
        self._sweep_memo.clear()
        self._locate_memo.clear()


def _fold_newton(sys: PiecewiseSystem, p, tol: float = 1e-13, max_iter: int = 60):
    """Project p onto {h=0} cap {Xh=0} by alternating 1D Newton steps along
    the gradient of each constraint (projected into M for the fold one)."""
    p = np.asarray(p, dtype=float).copy()
    fd = 1e-6

    def xh_at(q):
        return lie_derivatives(sys, q)[0]

    for _ in range(max_iter):
        hv = sys.h(p)
        if abs(hv) > tol:
            g = sys.grad_h_at(p)
            p = p - (hv / float(np.dot(g, g))) * g
            hv = sys.h(p)
        w = xh_at(p)
        if abs(hv) <= tol and abs(w) <= tol:
            return p
        g = sys.grad_h_at(p)
        n = g / np.linalg.norm(g)
        gw = np.empty(3)
        for i in range(3):
            e = np.zeros(3)
            e[i] = fd
            gw[i] = (xh_at(p + e) - xh_at(p - e)) / (2 * fd)
        gw_in = gw - np.dot(gw, n) * n
        denom = float(np.dot(gw_in, gw_in))
        if denom < 1e-18:
            raise SectionBuildError(
                f"fold direction degenerate near {p.tolist()} (cusp?)"
            )
        p = p - (w / denom) * gw_in
    raise SectionBuildError(
        f"fold projection did not converge near {p.tolist()}: "
        f"h={sys.h(p):.2e}, Xh={xh_at(p):.2e}"
    )


def _fold_frame(sys: PiecewiseSystem, q0: np.ndarray) -> np.ndarray:
    """Unit tangent of the fold line, oriented as (in-M fold normal) x (manifold normal)."""
    fd = 1e-6

    def xh_at(q):
        return lie_derivatives(sys, q)[0]

    g = sys.grad_h_at(q0)
    n = g / np.linalg.norm(g)
    gw = np.empty(3)
    for i in range(3):
        e = np.zeros(3)
        e[i] = fd
        gw[i] = (xh_at(q0 + e) - xh_at(q0 - e)) / (2 * fd)
    gw_in = gw - np.dot(gw, n) * n
    nrm = np.linalg.norm(gw_in)
    if nrm < 1e-12:
        raise SectionBuildError("fold tangent undefined: in-M gradient of Xh vanishes")
    frame = np.cross(gw_in / nrm, n)
    return frame / np.linalg.norm(frame)


def _flight(sys: PiecewiseSystem, p, t_max: float, opts: ReturnOpts):
    """Upper-field flight from a fold point to its first manifold hit."""
    seg, ev = flow_smooth(
        sys, "X", p, t_max, rel_tol=opts.smooth_rtol, abs_tol=opts.smooth_atol
    )
    if ev.kind is not EventKind.HIT_MANIFOLD:
        raise SectionBuildError(
            f"flight from {np.asarray(p).tolist()} ended with {ev.kind.value}, "
            "not a manifold hit"
        )
    return ev.location, ev.time


def build_section(
    sys: PiecewiseSystem,
    q0_guess,
    r: float,
    n_samples: int = 401,
    *,
    flight_t_max: float = 50.0,
    opts: ReturnOpts = STD_OPTS,
) -> Section:
    """Construct the section: refine q0 on the fold so its flight lands on
    the pseudo-equilibrium, then sample the landing curve J.

    The refinement runs in two stages.  A constrained Newton projection pulls
    the guess onto the fold line; a scalar solve then moves the base point
    along the fold until the flight landing matches the pseudo-equilibrium in
    the direction the landing curve actually moves.  If no exact match exists
    (systems without the connection) the closest point is used and the
    residual gap is recorded for the verifier to judge.
    """
    if not (r > 0):
        raise SectionBuildError(f"section radius must be positive, got {r}")
    if n_samples < 3:
        raise SectionBuildError("n_samples must be at least 3")
    if n_samples % 2 == 0:
        n_samples += 1

    q_fold = _fold_newton(sys, np.asarray(q0_guess, dtype=float))
    frame = _fold_frame(sys, q_fold)

    land0, t_land0 = _flight(sys, q_fold, flight_t_max, opts)
    chart_r = max(0.6 * float(np.linalg.norm(land0 - q_fold)), 10.0 * r)
    probe_chart = build_chart(sys, land0, chart_r)
    eqs = find_pseudo_equilibria(sys, probe_chart, chart_r)
    if not eqs:
        raise SectionBuildError(
            "no pseudo-equilibrium found near the flight landing; cannot anchor q0"
        )
    p0_eq = min(eqs, key=lambda e: float(np.linalg.norm(e.location - land0)))
    p0 = p0_eq.location

    def fold_point(sigma: float) -> np.ndarray:
        return _fold_newton(sys, q_fold + sigma * frame)

    def landing(sigma: float):
        return _flight(sys, fold_point(sigma), flight_t_max, opts)

    # direction along which landings sweep as the base point moves
    d_sig = 1e-5 * max(1.0, float(np.linalg.norm(q_fold)))
    l_plus, _ = landing(d_sig)
    l_minus, _ = landing(-d_sig)
    sweep = l_plus - l_minus
    sweep_norm = np.linalg.norm(sweep)
    if sweep_norm < 1e-14:
        raise SectionBuildError("landing curve is stationary; cannot refine q0")
    u = sweep / sweep_norm

    def gap_along(sigma: float) -> float:
        lp, _ = landing(sigma)
        return float(np.dot(lp - p0, u))

    sigma = 0.0
    fval = gap_along(sigma)
    converged = False
    for _ in range(50):
        if abs(fval) < 1e-12:
            converged = True
            break
        slope = (gap_along(sigma + d_sig) - gap_along(sigma - d_sig)) / (2 * d_sig)
        if slope == 0.0 or not math.isfinite(slope):
            break
        step = -fval / slope
        cap = 10.0 * max(1.0, abs(sigma))
        if abs(step) > cap:
            step = math.copysign(cap, step)
        sigma += step
        fval = gap_along(sigma)
        if abs(step) < 1e-14:
            converged = abs(fval) < 1e-10
            break
    if not converged:
        # no exact connection along this direction: settle for the closest
        # landing so the section is still usable and the gap is reported
        from scipy.optimize import minimize_scalar

        span = max(1.0, 4.0 * abs(fval))
        res = minimize_scalar(
            lambda sg: float(np.linalg.norm(landing(sg)[0] - p0)),
            bounds=(sigma - span, sigma + span),
            method="bounded",
            options={"xatol": 1e-12},
        )
        sigma = float(res.x)

    q0 = fold_point(sigma)
    frame = _fold_frame(sys, q0)
    land_q0, flight_time = _flight(sys, q0, flight_t_max, opts)
    landing_gap = float(np.linalg.norm(land_q0 - p0))

    cls = classify(sys, q0)
    if cls.tag is not RegionTag.TANGENCY_X:
        raise SectionBuildError(f"refined center is not an X-fold point: {cls.tag}")
    if cls.fold_kind is not FoldKind.VISIBLE:
        raise SectionBuildError(
            f"visibility violated at q0: second derivative {second_lie(sys, q0, 'X'):.3e} <= 0"
        )
    if not cls.regular_fold:
        raise SectionBuildError("q0 is a two-fold point; section undefined")

    chart = build_chart(
        sys, p0, max(2.0 * float(np.linalg.norm(q0 - p0)), 10.0 * r)
    )

    s_grid = np.linspace(-r, r, n_samples)
    j_pts = np.empty((n_samples, 2))
    j_times = np.empty(n_samples)
    for i, s in enumerate(s_grid):
        p_s = _fold_newton(sys, q0 + float(s) * frame)
        lp, lt = _flight(sys, p_s, flight_t_max, opts)
        d = lp - p0
        j_pts[i] = (float(np.dot(d, chart.e1)), float(np.dot(d, chart.e2)))
        j_times[i] = lt

    # geometric refinement toward s=0 for the crossing-count copy of J
    fine = r * np.geomspace(1e-5, 1.0, 41)[:-1]
    s_extra = np.concatenate([-fine, fine])
    s_count = np.unique(np.concatenate([s_grid, s_extra]))
    count_pts = np.empty((len(s_count), 2))
    known = {float(s): i for i, s in enumerate(s_grid)}
    for i, s in enumerate(s_count):
        k = known.get(float(s))
        if k is not None:
            count_pts[i] = j_pts[k]
            continue
        p_s = _fold_newton(sys, q0 + float(s) * frame)
        lp, _ = _flight(sys, p_s, flight_t_max, opts)
        d = lp - p0
        count_pts[i] = (float(np.dot(d, chart.e1)), float(np.dot(d, chart.e2)))

    eigs = p0_eq.eigenvalues
    im = max(abs(ev.imag) for ev in eigs)
    slide_step = (2 * math.pi / im) / 48.0 if im > 1e-9 else SLIDE_MAX_STEP

    return Section(
        sys=sys,
        center=q0,
        frame=frame,
        radius=r,
        chart=chart,
        pseudo_eq=p0_eq,
        s_grid=s_grid,
        j_points=j_pts,
        j_times=j_times,
        landing_gap=landing_gap,
        flight_time=flight_time,
        slide_max_step=min(slide_step, SLIDE_MAX_STEP),
        count_s=s_count,
        count_points=count_pts,
    )


def _count_crossings(path: np.ndarray, poly: np.ndarray, skip_first: int = 0) -> int:
    """Transversal crossings between a sample path and a polyline, both in
    planar chart coordinates.  Touching or collinear contact within the
    area tolerance does not count; path edges are prefiltered against the
    polyline bounding box."""
    if len(path) < 2 + skip_first or len(poly) < 2:
        return 0
    p0 = path[skip_first:-1]
    p1 = path[skip_first + 1 :]
    lo = np.minimum(p0, p1)
    hi = np.maximum(p0, p1)
    box_lo = poly.min(axis=0)
    box_hi = poly.max(axis=0)
    mask = ~(
        (hi[:, 0] < box_lo[0])
        | (lo[:, 0] > box_hi[0])
        | (hi[:, 1] < box_lo[1])
        | (lo[:, 1] > box_hi[1])
    )
    if not mask.any():
        return 0
    a0 = p0[mask][:, None, :]  # (k, 1, 2)
    a1 = p1[mask][:, None, :]
    b0 = poly[None, :-1, :]  # (1, m, 2)
    b1 = poly[None, 1:, :]

    db = b1 - b0
    da = a1 - a0
    d1 = _cross2(db, a0 - b0)
    d2 = _cross2(db, a1 - b0)
    d3 = _cross2(da, b0 - a0)
    d4 = _cross2(da, b1 - a0)
    hits = _proper_sign_split(d1, d2) & _proper_sign_split(d3, d4)
    return int(hits.sum())


def first_return(
    sys: PiecewiseSystem,
    sec: Section,
    xi,
    opts: ReturnOpts = STD_OPTS,
) -> ReturnRecord:
    """Apply the return map once, accumulating crossing counts on the way.

    The orbit is consumed lazily: flight, land, slide, exit; an exit whose
    arc coordinate lies within the section radius is the return.  Exits
    beyond the section launch another excursion.  Results are cached on the
    section keyed by the exact float coordinate and the tolerance set.
    """
    s_in = float(getattr(xi, "s", xi))
    if abs(s_in) > sec.radius * (1 + 1e-12):
        raise ValueError(f"section coordinate {s_in} outside radius {sec.radius}")
    key = (s_in, opts)
    hit = sec._cache.get(key)
    if hit is not None:
        return hit
    failed = sec._fail_cache.get(key)
    if failed is not None:
        raise failed

    try:
        rec = _first_return_uncached(sys, sec, s_in, opts)
    except (EscapedError, PseudoEquilibriumReachedError) as exc:
        sec._fail_cache[key] = exc
        raise
    sec._cache[key] = rec
    return rec


def _first_return_uncached(sys, sec, s_in, opts) -> ReturnRecord:
    p_start = sec.embed(s_in)
    eta = [0, 0]
    excursions = 0
    j0 = sec.count_polyline(0)
    j1 = sec.count_polyline(1)
    gen = filippov_segments(
        sys,
        p_start,
        opts.t_max,
        smooth_rtol=opts.smooth_rtol,
        smooth_atol=opts.smooth_atol,
        slide_rtol=opts.slide_rtol,
        slide_atol=opts.slide_atol,
        slide_max_step=sec.slide_max_step,
    )
    while True:
        try:
            item = next(gen)
        except StopIteration:
            raise EscapedError(f"orbit from s={s_in!r} ended without returning")
        except ChatteringError as exc:
            # a grazing fold exit near the cusp loops the dispatcher; such
            # razor-edge orbits separate returning bands from plunges
            raise EscapedError(
                f"orbit from s={s_in!r} grazed the fold: {exc}",
                excursions=excursions,
            ) from exc
        if isinstance(item, Segment):
            if item.mode == "SmoothX":
                excursions += 1
            elif item.mode == "Slide":
                path = sec.path_chart(item.points)
                # skip the landing edge: the slide begins exactly on J
                eta[0] += _count_crossings(path, j0, skip_first=1)
                eta[1] += _count_crossings(path, j1, skip_first=1)
            continue
        ev = item
        if ev.kind is EventKind.EXIT_SLIDE_AT_FOLD:
            s_out = sec.locate_on_fold(ev.location)
            if abs(s_out) <= sec.radius:
                return ReturnRecord(
                    s_in=s_in,
                    s_out=s_out,
                    half_in=_half_of(s_in),
                    half_out=_half_of(s_out),
                    eta0=eta[0],
                    eta1=eta[1],
                    excursions=excursions,
                    t_return=ev.time,
                )
        elif ev.kind is EventKind.REACH_PSEUDO_EQUILIBRIUM:
            raise PseudoEquilibriumReachedError(
                f"orbit from s={s_in!r} reached the pseudo-equilibrium at t={ev.time:.6g}"
            )
        elif ev.kind is EventKind.MAX_TIME:
            raise EscapedError(
                f"no return from s={s_in!r} within t_max={opts.t_max}",
                t_elapsed=ev.time,
                excursions=excursions,
            )
        elif ev.kind in (EventKind.LEAVE_DOMAIN, EventKind.SINGULAR_TANGENCY):
            raise EscapedError(
                f"orbit from s={s_in!r} terminated with {ev.kind.value} at t={ev.time:.6g}",
                t_elapsed=ev.time,
                excursions=excursions,
            )


def _return_chain(sys, sec, s, m, opts):
    """m successive records; raises on escape/equilibrium like first_return."""
    recs = []
    cur = s
    for _ in range(m):
        rec = first_return(sys, sec, cur, opts)
        recs.append(rec)
        cur = rec.s_out
    return recs


def _chain_signature(recs) -> tuple:
    # branch invariants only: the sign of the exit coordinate is a symbolic
    # boundary, not a smoothness boundary, and with expansions of 1e4 and up
    # the images of any usable stencil straddle s=0 somewhere
    return tuple((r.eta0, r.eta1, r.excursions) for r in recs)


@dataclass(frozen=True)
class Band:
    """Maximal arc interval of the section whose points return.

    The returning set is a union of such intervals accumulating at s=0; on
    each one the return map is a smooth monotone sweep across the whole
    section, with constant crossing counts eta and a single excursion."""

    lo: float
    hi: float
    eta0: int
    eta1: int
    t_mid: float

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)

    @property
    def half(self) -> int:
        return _half_of(self.mid)

    def contains(self, s: float) -> bool:
        return self.lo <= s <= self.hi

    def interior(self, margin: float = 0.02) -> tuple[float, float]:
        pad = margin * self.width
        return self.lo + pad, self.hi - pad


class _OffBranchError(RuntimeError):
    """Internal: a solver probe fell off the returning set."""


def _comes_back(sys, sec, s, opts) -> bool:
    if abs(s) > sec.radius:
        return False
    try:
        first_return(sys, sec, float(s), opts)
        return True
    except (EscapedError, PseudoEquilibriumReachedError):
        return False


def _pi_or_none(sys, sec, s, opts):
    if abs(s) > sec.radius:
        return None
    try:
        return first_return(sys, sec, float(s), opts).s_out
    except (EscapedError, PseudoEquilibriumReachedError):
        return None


def _band_edge(sys, sec, inside, outside, opts, iters: int = 34) -> float:
    """Bisect between a returning and (nominally) escaping coordinate."""
    a, b = float(inside), float(outside)
    for _ in range(iters):
        mid = 0.5 * (a + b)
        if mid == a or mid == b:
            break
        if _comes_back(sys, sec, mid, opts):
            a = mid
        else:
            b = mid
    return a


def _adopt_band(sys, sec, member, out_lo, out_hi, opts) -> Optional[Band]:
    member = float(member)
    if not _comes_back(sys, sec, member, opts):
        return None
    if any(b.contains(member) for b in sec._bands):
        return None
    lo = _band_edge(sys, sec, member, max(out_lo, -sec.radius), opts)
    hi = _band_edge(sys, sec, member, min(out_hi, sec.radius), opts)
    if not (hi > lo):
        return None
    mid = 0.5 * (lo + hi)
    probe = mid if _comes_back(sys, sec, mid, opts) else member
    rec = first_return(sys, sec, probe, opts)
    band = Band(lo=lo, hi=hi, eta0=rec.eta0, eta1=rec.eta1, t_mid=rec.t_return)
    sec._bands.append(band)
    return band


def _cross2(u, v):
    return u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]


def _proper_sign_split(d_a, d_b):
    """True where d_a and d_b straddle zero decisively: opposite signs and
    neither a rounding-level fraction of the other."""
    return (d_a * d_b < 0) & (
        np.minimum(np.abs(d_a), np.abs(d_b))
        > COLLINEAR_RATIO * np.maximum(np.abs(d_a), np.abs(d_b))
    )


def _polyline_crossing_params(path: np.ndarray, poly: np.ndarray, poly_s: np.ndarray):
    """Arc coordinates (interpolated along poly_s) where a chart path
    properly crosses the parametrized polyline."""
    if len(path) < 2 or len(poly) < 2:
        return []
    a0 = path[:-1][:, None, :]
    a1 = path[1:][:, None, :]
    b0 = poly[None, :-1, :]
    b1 = poly[None, 1:, :]
    da = a1 - a0
    db = b1 - b0
    d1 = _cross2(db, a0 - b0)
    d2 = _cross2(db, a1 - b0)
    d3 = _cross2(da, b0 - a0)
    d4 = _cross2(da, b1 - a0)
    hit_i, hit_j = np.nonzero(
        _proper_sign_split(d1, d2) & _proper_sign_split(d3, d4)
    )
    out = []
    for i, j in zip(hit_i, hit_j):
        denom = _cross2(da[i, 0], db[0, j])
        if denom == 0.0:
            continue
        u = _cross2(path[i] - poly[j], da[i, 0]) / -denom
        out.append(float(poly_s[j] + u * (poly_s[j + 1] - poly_s[j])))
    return sorted(out, key=abs, reverse=True)


def _backward_leg(sys, sec, t_back: float = 300.0):
    """Sliding orbit flowed backward from the section center, in chart
    coordinates.  It spirals down toward the pseudo-equilibrium; where it
    crosses the landing curve J is where returning bands sit."""
    if sec._leg is None:
        seg, _ev = flow_slide(
            sys, sec.center, -float(t_back), max_step=sec.slide_max_step
        )
        sec._leg = (sec.path_chart(seg.points), seg.times)
    return sec._leg


def _hunt_member(sys, sec, s_c, opts) -> Optional[float]:
    if _comes_back(sys, sec, s_c, opts):
        return float(s_c)
    win = max(2e-3 * abs(s_c), 2e-6 * sec.radius)
    for d in np.linspace(-win, win, 25):
        sv = float(s_c + d)
        if sv != float(s_c) and _comes_back(sys, sec, sv, opts):
            return sv
    return None


def discover_bands(
    sys: PiecewiseSystem,
    sec: Section,
    max_bands: int = 16,
    *,
    opts: ReturnOpts = STD_OPTS,
    probe_n: int = 129,
) -> list[Band]:
    """Locate returning bands, widest first.

    Two sources feed the table.  A uniform probe pass catches bands wider
    than the probe spacing (fat-band systems, mocked maps).  For thin-band
    systems the seeds come from where the backward sliding leg crosses the
    landing curve; each seed is hunted for a returning member and the band
    edges are bisected.  Seeds are consumed lazily so small requests stay
    cheap; results accumulate on the section."""
    wanted = int(max_bands)
    if wanted < 1:
        return []

    if "probe" not in sec._band_sources:
        sec._band_sources.add("probe")
        grid = np.linspace(-sec.radius, sec.radius, int(probe_n))[1:-1]
        flags = [_comes_back(sys, sec, float(s), opts) for s in grid]
        i = 0
        while i < len(flags):
            if not flags[i]:
                i += 1
                continue
            j = i
            while j + 1 < len(flags) and flags[j + 1]:
                j += 1
            member = float(grid[(i + j) // 2])
            out_lo = float(grid[i - 1]) if i > 0 else -sec.radius
            out_hi = float(grid[j + 1]) if j + 1 < len(flags) else sec.radius
            _adopt_band(sys, sec, member, out_lo, out_hi, opts)
            i = j + 1

    if sec._band_seeds is None:
        try:
            leg_pts, _leg_t = _backward_leg(sys, sec)
            seeds = _polyline_crossing_params(
                leg_pts, sec.count_points, sec.count_s
            )
        except (FlowError, ChatteringError, SectionBuildError, ValueError):
            seeds = []
        sec._band_seeds = [s for s in seeds if abs(s) < sec.radius]

    while len(sec._bands) < wanted and sec._band_seeds:
        s_c = sec._band_seeds.pop(0)
        if any(b.contains(s_c) for b in sec._bands):
            continue
        member = _hunt_member(sys, sec, s_c, opts)
        if member is None:
            continue
        win = max(4e-3 * abs(s_c), 4e-6 * sec.radius)
        _adopt_band(sys, sec, member, member - win, member + win, opts)

    bands = sorted(sec._bands, key=lambda b: (-b.width, b.lo))
    return bands[:wanted]


_FULL_BAND_TABLE = 24
_WORD_ENUM_CAP = 1_000_000


def _band_budget(scan_n: int) -> int:
    return int(np.clip(int(scan_n) // 25, 2, _FULL_BAND_TABLE))


def section_scan(
    sys: PiecewiseSystem,
    sec: Section,
    n: int,
    *,
    opts: ReturnOpts = STD_OPTS,
) -> np.ndarray:
    """Scan grid of n points concentrated on the returning bands.

    With no bands found the grid falls back to uniform over the section.
    Points are allocated evenly across bands (widest bands take the
    remainder) and placed uniformly over each band interior."""
    n = int(n)
    if n < 1:
        raise ValueError("scan size must be positive")
    bands = discover_bands(sys, sec, _band_budget(n), opts=opts)
    if not bands:
        return np.linspace(-sec.radius, sec.radius, n)
    k = min(len(bands), n)
    base, extra = divmod(n, k)
    pieces = []
    for i, band in enumerate(bands[:k]):
        q = base + (1 if i < extra else 0)
        lo, hi = band.interior()
        if q == 1:
            pieces.append([band.mid])
        else:
            pieces.append(np.linspace(lo, hi, q))
    return np.sort(np.concatenate(pieces))


def _compositions(total: int, length: int, n: int):
    """Index tuples of the given length with entries in [0, n) summing to
    total, in lexicographic order."""
    if length == 1:
        if total < n:
            yield (total,)
        return
    for head in range(min(total, n - 1) + 1):
        for tail in _compositions(total - head, length - 1, n):
            yield (head,) + tail


def _sequences(n: int, length: int, budget: int):
    """Band-index sequences ordered by total index sum, then lexicographic.

    Low indices are wide bands, so the ordering explores itineraries in
    roughly decreasing cylinder width; the prefix enumerated under a given
    budget is stable as the budget grows."""
    out = 0
    for total in range((n - 1) * length + 1):
        for seq in _compositions(total, length, n):
            yield seq
            out += 1
            if out >= budget:
                return


def _chain_out(sys, sec, s, m, opts):
    if abs(s) > sec.radius:
        return None
    try:
        return _return_chain(sys, sec, float(s), m, opts)[-1].s_out
    except (EscapedError, PseudoEquilibriumReachedError):
        return None


def _pi_endpoints(sys, sec, lo, hi, opts, tries: int = 4):
    """Return-map values at the ends of a sub-band interval, nudging the
    ends inward when the extreme margin falls off the branch."""
    for _ in range(tries):
        g_lo = _pi_or_none(sys, sec, lo, opts)
        if g_lo is not None:
            break
        lo += (hi - lo) * 2e-3
    else:
        return None
    for _ in range(tries):
        g_hi = _pi_or_none(sys, sec, hi, opts)
        if g_hi is not None:
            break
        hi -= (hi - lo) * 2e-3
    else:
        return None
    return lo, hi, g_lo, g_hi


def _solve_pi_equals(sys, sec, lo, hi, target, opts) -> Optional[float]:
    """Root of pi(s) = target on [lo, hi], assumed inside one band."""

    def f(s):
        v = _pi_or_none(sys, sec, float(s), opts)
        if v is None:
            raise _OffBranchError(f"probe {s!r} escaped during solve")
        return v - target

    try:
        return float(brentq(f, lo, hi, xtol=5e-18, rtol=9e-16, maxiter=120))
    except (_OffBranchError, ValueError):
        return None


def _pullback(sys, sec, band: Band, t_lo: float, t_hi: float, opts):
    """Sub-interval of the band whose image under the return map lies in
    [t_lo, t_hi].  The sweep over a band is monotone, so this is a single
    bracketed solve per edge.  None when the target misses the sweep."""
    lo, hi = band.interior(0.005)
    ends = _pi_endpoints(sys, sec, lo, hi, opts)
    if ends is None:
        return None
    lo, hi, g_lo, g_hi = ends
    if g_lo == g_hi:
        return None
    increasing = g_hi > g_lo
    span_lo, span_hi = (g_lo, g_hi) if increasing else (g_hi, g_lo)
    a_t = max(t_lo, span_lo)
    b_t = min(t_hi, span_hi)
    if not (b_t > a_t):
        return None
    if increasing:
        a = lo if g_lo >= t_lo else _solve_pi_equals(sys, sec, lo, hi, t_lo, opts)
        b = hi if g_hi <= t_hi else _solve_pi_equals(sys, sec, lo, hi, t_hi, opts)
    else:
        a = lo if g_lo <= t_hi else _solve_pi_equals(sys, sec, lo, hi, t_hi, opts)
        b = hi if g_hi >= t_lo else _solve_pi_equals(sys, sec, lo, hi, t_lo, opts)
    if a is None or b is None:
        return None
    if b < a:
        a, b = b, a
    if not (b > a):
        return None
    return a, b


def _sequence_window(sys, sec, bands, seq, opts, final_half: Optional[int] = None):
    """Interval of the leading band whose orbit visits the given band
    sequence, pulled back edge by edge.  final_half additionally constrains
    which half the last return exits into."""
    last = bands[seq[-1]]
    if final_half is None:
        window = last.interior(0.01)
    else:
        pad = 1e-7 * sec.radius
        cap = (1.0 - 1e-9) * sec.radius
        t = (pad, cap) if final_half == 1 else (-cap, -pad)
        window = _pullback(sys, sec, last, t[0], t[1], opts)
        if window is None:
            return None
    for idx in reversed(seq[:-1]):
        window = _pullback(sys, sec, bands[idx], window[0], window[1], opts)
        if window is None:
            return None
    return window


def _band_sweep_certificate(sys, sec, band, opts) -> bool:
    """True when the band's return provably sweeps the whole section: the
    images of points just inside the two edges reach opposite section ends,
    so by continuity the image covers every interior target window.  The
    margins are section-sized while the evaluation error is at rounding
    level, which makes this the one numerical fact the symbolic word count
    rests on.  Cached per band."""
    key = (band.lo, band.hi, opts)
    cached = sec._sweep_memo.get(key)
    if cached is not None:
        return cached
    lo, hi = band.interior(0.002)
    g_lo = _pi_or_none(sys, sec, lo, opts)
    g_hi = _pi_or_none(sys, sec, hi, opts)
    reach = 0.98 * sec.radius
    ok = (
        g_lo is not None
        and g_hi is not None
        and g_lo * g_hi < 0
        and abs(g_lo) >= reach
        and abs(g_hi) >= reach
    )
    sec._sweep_memo[key] = ok
    return ok


def _atlas_word(bands, seq, final_half: int) -> ItineraryWord:
    """Word realized by orbits tracking the given band sequence and exiting
    the last return into final_half, composed from the per-band data."""
    halves = [bands[i].half for i in seq] + [int(final_half)]
    counts = [
        bands[seq[k]].eta1 if halves[k + 1] == 1 else bands[seq[k]].eta0
        for k in range(len(seq))
    ]
    return ItineraryWord(halves=tuple(halves), counts=tuple(counts))


def _composite_derivative(sys, sec, s, m, delta, opts) -> float:
    """Richardson-extrapolated central difference of pi^m at s, requiring
    the whole stencil to stay on one branch chain."""
    stencil = [s - delta, s - delta / 2, s, s + delta / 2, s + delta]
    chains = []
    for sv in stencil:
        if abs(sv) > sec.radius:
            raise BranchMismatchError(
                f"stencil point {sv!r} leaves the section; reduce delta"
            )
        try:
            chains.append(_return_chain(sys, sec, sv, m, opts))
        except (EscapedError, PseudoEquilibriumReachedError) as exc:
            raise BranchMismatchError(
                f"stencil point {sv!r} does not return: {exc}"
            ) from exc
    sig = _chain_signature(chains[2])
    for sv, ch in zip(stencil, chains):
        if _chain_signature(ch) != sig:
            raise BranchMismatchError(
                f"stencil point {sv!r} lies on a different branch; "
                "shrink delta or move the base point"
            )
    outs = [ch[-1].s_out for ch in chains]
    d_full = (outs[4] - outs[0]) / (2 * delta)
    d_half = (outs[3] - outs[1]) / delta
    return (4.0 * d_half - d_full) / 3.0


def return_derivative(
    sys: PiecewiseSystem,
    sec: Section,
    xi,
    delta: float | None = None,
    opts: ReturnOpts = STD_OPTS,
) -> float:
    """Slope of the return map at a branch-interior point.

    The default stencil half-width shrinks near the edges of a known band
    so the whole stencil stays on the branch; pass delta to override."""
    s = float(getattr(xi, "s", xi))
    if delta is None:
        delta = 1e-7 * sec.radius
        host = next((b for b in sec._bands if b.contains(s)), None)
        if host is not None:
            edge_gap = min(s - host.lo, host.hi - s)
            if edge_gap > 0:
                delta = min(delta, 0.25 * edge_gap)
    return _composite_derivative(sys, sec, s, 1, delta, opts)


def code_itinerary(
    sys: PiecewiseSystem,
    sec: Section,
    xi,
    depth: int,
    opts: ReturnOpts = STD_OPTS,
) -> ItineraryWord:
    """Symbolic word of the orbit: halves visited and crossing counts against
    the destination half's landing curve, one entry per return."""
    s = float(getattr(xi, "s", xi))
    if depth < 0:
        raise ValueError("depth must be non-negative")
    halves = [_half_of(s)]
    counts = []
    for _ in range(depth):
        rec = first_return(sys, sec, s, opts)
        counts.append(rec.eta1 if rec.half_out == 1 else rec.eta0)
        halves.append(rec.half_out)
        s = rec.s_out
    return ItineraryWord(halves=tuple(halves), counts=tuple(counts))


def _word_or_none(sys, sec, s, depth, opts):
    try:
        return code_itinerary(sys, sec, s, depth, opts)
    except (EscapedError, PseudoEquilibriumReachedError):
        return None


def _word_band_sequences(word: ItineraryWord, bands, cap: int = 8):
    """Band-index sequences consistent with a word.  Position t must be a
    band on the word's t-th half whose crossing count toward the (t+1)-th
    half matches; several bands can share a symbol, so this yields up to
    cap candidate combinations."""
    per = []
    for t in range(word.depth):
        dest_half = word.halves[t + 1]
        cands = [
            i
            for i, b in enumerate(bands)
            if b.half == word.halves[t]
            and (b.eta1 if dest_half == 1 else b.eta0) == word.counts[t]
        ]
        if not cands:
            return
        per.append(cands[:3])
    for emitted, combo in enumerate(itertools.product(*per)):
        if emitted >= cap:
            return
        yield combo


def _member_edge(member_fn, inside: float, outside: float, tol: float) -> float:
    while abs(outside - inside) > tol:
        mid = 0.5 * (inside + outside)
        if mid == inside or mid == outside:
            break
        if member_fn(mid):
            inside = mid
        else:
            outside = mid
    return inside


def locate_cylinder(
    sys: PiecewiseSystem,
    sec: Section,
    word: ItineraryWord,
    *,
    scan_n: int = 257,
    opts: ReturnOpts = STD_OPTS,
) -> Optional[tuple[float, float]]:
    """Arc interval realizing the given word, or None when it is not
    realized anywhere the search can see.

    A uniform scan is tried first: the widest matching block of the grid is
    bracketed and its endpoints bisected against the membership predicate
    down to a width of 1e-9 times the radius.  Words too thin for any
    practical grid are then pulled back through the band table instead; the
    certified edges are found by the same membership bisection, at a
    tolerance scaled to the pulled-back window so nested cylinders keep
    shrinking."""
    m = word.depth
    if m < 1:
        raise ValueError("cylinder words need depth >= 1")
    memo_key = (word, int(scan_n), opts)
    if memo_key in sec._locate_memo:
        return sec._locate_memo[memo_key]
    result = _locate_cylinder_uncached(sys, sec, word, int(scan_n), opts)
    sec._locate_memo[memo_key] = result
    return result


def _locate_cylinder_uncached(sys, sec, word, scan_n, opts):
    m = word.depth

    def member(s):
        if abs(s) > sec.radius:
            return False
        return _word_or_none(sys, sec, float(s), m, opts) == word

    grid = np.linspace(-sec.radius, sec.radius, scan_n)
    match = np.array([member(float(s)) for s in grid])
    if match.any():
        runs = []
        start = None
        for i, ok in enumerate(match):
            if ok and start is None:
                start = i
            elif not ok and start is not None:
                runs.append((start, i - 1))
                start = None
        if start is not None:
            runs.append((start, len(match) - 1))
        lo_i, hi_i = max(runs, key=lambda ab: ab[1] - ab[0])

        tol = CYL_TOL_FACTOR * sec.radius
        s_lo = grid[lo_i]
        if lo_i > 0:
            s_lo = _member_edge(member, grid[lo_i], grid[lo_i - 1], tol)
        s_hi = grid[hi_i]
        if hi_i < len(grid) - 1:
            s_hi = _member_edge(member, grid[hi_i], grid[hi_i + 1], tol)
        return (float(s_lo), float(s_hi))

    # no grid sample matched: pull the word back through the band table
    bands = discover_bands(sys, sec, _FULL_BAND_TABLE, opts=opts)
    for seq in _word_band_sequences(word, bands):
        window = _sequence_window(
            sys, sec, bands, seq, opts, final_half=word.halves[-1]
        )
        if window is None:
            continue
        w_lo, w_hi = window
        width = w_hi - w_lo
        probes = (
            0.5 * (w_lo + w_hi),
            w_lo + 0.25 * width,
            w_lo + 0.75 * width,
            w_lo,
            w_hi,
        )
        inside = next((p for p in probes if member(p)), None)
        if inside is None:
            continue
        pad = 4.0 * width
        tol = max(
            2.0 * np.spacing(max(abs(w_lo), abs(w_hi))),
            min(CYL_TOL_FACTOR * sec.radius, 0.02 * width),
        )
        s_lo = _member_edge(member, inside, max(w_lo - pad, -sec.radius), tol)
        s_hi = _member_edge(member, inside, min(w_hi + pad, sec.radius), tol)
        return (float(s_lo), float(s_hi))
    return None


@dataclass(frozen=True)
class PeriodicPoint:
    s: float
    period: int
    word: ItineraryWord
    multiplier: float | None
    residual: float


def find_periodic(
    sys: PiecewiseSystem,
    sec: Section,
    period: int,
    scan_n: int = 401,
    *,
    opts: ReturnOpts = STD_OPTS,
) -> list[PeriodicPoint]:
    """Fixed points of the m-fold return map.

    The returning set is a union of thin bands, so the scan budget is spent
    through the band table rather than uniformly: each admissible band
    sequence of length m is pulled back to the sub-interval of its leading
    band that realizes it, and the displacement g(s) = pi^m(s) - s is
    bracketed and solved there.  Every band sweeps the whole section, so a
    window that realizes a sequence always brackets exactly one root.

    Only roots whose re-measured displacement certifies below 1e-10 times
    the radius are reported.  For m = 1 the displacement of a solved root
    sits near rounding level and certification succeeds except on the very
    deepest bands.  For m >= 2 the m-fold expansion multiplies one ulp of s
    past 1e-8 on this family, so no root of the composed float map can
    certify at all and the honest result is empty; the roots exist (each
    window brackets a genuine sign change) but their displacement floor is
    set by double precision, not by the solver."""
    if period < 1:
        raise ValueError("period must be >= 1")
    r = sec.radius
    m = int(period)
    bands = discover_bands(sys, sec, _band_budget(scan_n), opts=opts)
    if not bands:
        return []
    n = len(bands)
    if m == 1:
        seqs = [(i,) for i in range(n)]
    else:
        budget = max(n + 6, min(n**m, max(8, int(scan_n) // (8 * m))))
        seqs = list(_sequences(n, m, budget))

    def g(s):
        v = _chain_out(sys, sec, s, m, opts)
        if v is None:
            raise _OffBranchError(f"probe {s!r} escaped during root solve")
        return v - s

    found: list[tuple[float, float, float]] = []
    for seq in seqs:
        window = _sequence_window(sys, sec, bands, seq, opts)
        if window is None:
            continue
        a, b = window
        try:
            ga, gb = g(a), g(b)
        except _OffBranchError:
            shrink = (b - a) * 2e-3
            a, b = a + shrink, b - shrink
            try:
                ga, gb = g(a), g(b)
            except _OffBranchError:
                continue
        width = b - a
        if ga == 0.0:
            found.append((a, 0.0, width))
            continue
        if gb == 0.0:
            found.append((b, 0.0, width))
            continue
        if ga * gb > 0:
            continue
        try:
            s_star = float(brentq(g, a, b, xtol=5e-18, rtol=9e-16, maxiter=140))
        except (_OffBranchError, ValueError):
            continue
        try:
            resid = abs(g(s_star))
        except _OffBranchError:
            continue
        if resid > PERIODIC_TOL_FACTOR * r:
            continue
        found.append((s_star, resid, width))

    found.sort(key=lambda item: item[0])
    dedup: list[tuple[float, float, float]] = []
    for cand in found:
        if dedup and abs(cand[0] - dedup[-1][0]) < 1e-9 * r:
            if cand[1] < dedup[-1][1]:
                dedup[-1] = cand
            continue
        dedup.append(cand)

    out = []
    for s_star, resid, width in dedup:
        word = _word_or_none(sys, sec, s_star, m, opts)
        if word is None:
            continue
        # the stencil must stay inside the window realizing the sequence,
        # which is the depth-m cylinder around the root
        delta = min(1e-7 * r, 0.2 * width)
        if delta < 8 * np.spacing(abs(s_star)):
            mult = None  # cylinder thinner than the stencil can resolve
        else:
            try:
                mult = _composite_derivative(sys, sec, s_star, m, delta, opts)
            except BranchMismatchError:
                mult = None
        out.append(
            PeriodicPoint(
                s=float(s_star),
                period=m,
                word=word,
                multiplier=mult,
                residual=float(resid),
            )
        )
    return out


def realized_words(
    sys: PiecewiseSystem,
    sec: Section,
    depth: int,
    scan_n: int = 401,
    *,
    opts: ReturnOpts = STD_OPTS,
) -> set[ItineraryWord]:
    """Distinct depth-m words realized at a scan budget of scan_n.

    Two passes feed the set.  A uniform pass codes every grid point that
    returns m times; on fat-band systems this is the whole story, and since
    odd grids nest under refinement the pass is monotone in scan_n.  The
    atlas pass counts words symbolically: the budget fixes how many
    returning bands the scan affords (widest first, so the atlas grows with
    the budget, pulling in ever higher crossing counts), and every band
    whose return provably sweeps the whole section reaches every band of
    the atlas and both exit halves, so each band sequence plus exit half
    names a nonempty cylinder and hence a realized word.

    Counting through the sweep certificates instead of chasing per-cylinder
    representatives matters from depth 4 on, where true cylinder widths on
    this family drop below the resolution at which the evaluated map can
    place a point (the event solves land each return on an irregular mesh
    coarser than the target window), so no double realizes the word
    pointwise even though the cylinder provably exists."""
    if depth < 1:
        raise ValueError("depth must be >= 1")
    m = int(depth)
    words: set[ItineraryWord] = set()
    for s in np.linspace(-sec.radius, sec.radius, int(scan_n)):
        w = _word_or_none(sys, sec, float(s), m, opts)
        if w is not None:
            words.add(w)
    bands = discover_bands(sys, sec, _band_budget(scan_n), opts=opts)
    atlas = [b for b in bands if _band_sweep_certificate(sys, sec, b, opts)]
    if atlas:
        if 2 * len(atlas) ** m > _WORD_ENUM_CAP:
            raise ValueError(
                f"an atlas of {len(atlas)} bands names {2 * len(atlas) ** m} "
                f"depth-{m} words; lower the depth or the scan budget"
            )
        for seq in itertools.product(range(len(atlas)), repeat=m):
            for final_half in (0, 1):
                words.add(_atlas_word(atlas, seq, final_half))
    return words


def entropy_estimate(
    sys: PiecewiseSystem,
    sec: Section,
    depth: int,
    scan_n: int = 401,
    *,
    opts: ReturnOpts = STD_OPTS,
) -> float:
    """(1/m) log of the number of distinct depth-m words the scan realizes."""
    words = realized_words(sys, sec, depth, scan_n, opts=opts)
    if not words:
        raise EscapedError("no itineraries realized at this resolution")
    return math.log(len(words)) / int(depth)


@dataclass(frozen=True)
class Certificate:
    name: str
    passed: bool
    value: float | None
    detail: str

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": bool(self.passed),
            "value": None if self.value is None else float(self.value),
            "detail": self.detail,
        }


@dataclass(frozen=True)
class ShilnikovReport:
    q0: np.ndarray
    p0: np.ndarray
    flight_time: float
    landing_gap: float
    eigenvalues: tuple[complex, complex]
    certificates: tuple[Certificate, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.certificates)

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "q0": [float(c) for c in self.q0],
            "p0": [float(c) for c in self.p0],
            "flight_time": float(self.flight_time),
            "landing_gap": float(self.landing_gap),
            "eigenvalues": [
                {"re": ev.real, "im": ev.imag} for ev in self.eigenvalues
            ],
            "certificates": [c.to_dict() for c in self.certificates],
        }


def _leg_point_at_distance(sys, seg, p0, eps):
    """First point along a sliding polyline at the given distance from p0,
    linearly interpolated between samples and re-projected onto M."""
    d = np.linalg.norm(seg.points - p0, axis=1)
    below = np.nonzero(d <= eps)[0]
    if len(below) == 0 or below[0] == 0:
        return None
    i = below[0]
    d0, d1 = d[i - 1], d[i]
    w = (d0 - eps) / (d0 - d1) if d0 != d1 else 0.0
    p = (1 - w) * seg.points[i - 1] + w * seg.points[i]
    for _ in range(4):
        hv = sys.h(p)
        if abs(hv) < 1e-13:
            break
        g = sys.grad_h_at(p)
        p = p - (hv / float(np.dot(g, g))) * g
    return p


def verify_shilnikov(
    sys: PiecewiseSystem,
    guess_q0,
    *,
    r: float = 0.05,
    n_samples: int = 41,
    gap_tol: float = 1e-8,
    approach_tol: float = 1e-4,
    t_back_max: float = 250.0,
    expulsion_eps: tuple[float, ...] = (1e-3, 1e-4),
    expulsion_t_max: float = 250.0,
    opts: ReturnOpts = STD_OPTS,
) -> ShilnikovReport:
    """Certify the geometric ingredients of the sliding loop, one by one.

    Structure checks (fold residuals, visibility, regularity, transversality,
    focus type) come from the refined section; the connection itself is
    checked in both directions: the forward flight from q0 must land on p0,
    and the sliding flow must link p0 back to q0 (backward run from q0
    approaches p0; forward runs from near p0 are expelled through the fold).
    A failed certificate never raises; it is itemized in the report.
    """
    sec = build_section(sys, guess_q0, r, n_samples, opts=opts)
    q0 = sec.center
    p0 = sec.pseudo_eq.location
    certs: list[Certificate] = []

    h_res = abs(float(sys.h(q0)))
    xh_res = abs(lie_derivatives(sys, q0)[0])
    fold_res = max(h_res, xh_res)
    certs.append(
        Certificate(
            "fold_point",
            fold_res < 1e-10,
            fold_res,
            f"|h(q0)|={h_res:.2e}, |Xh(q0)|={xh_res:.2e}",
        )
    )

    x2h = second_lie(sys, q0, "X")
    certs.append(
        Certificate(
            "visible_fold",
            x2h > 0,
            x2h,
            "second derivative of h along X at q0; positive = visible",
        )
    )

    yh = lie_derivatives(sys, q0)[1]
    certs.append(
        Certificate(
            "regular_fold",
            yh > 0,
            yh,
            "lower field pushes toward M at q0 (Yh > 0)",
        )
    )

    try:
        trans = fold_transversality(sys, q0)
        certs.append(
            Certificate(
                "fold_transversality",
                abs(trans) > 1e-8,
                trans,
                "limiting sliding velocity across the fold line at q0",
            )
        )
    except ValueError as exc:
        certs.append(Certificate("fold_transversality", False, None, str(exc)))

    kind = sec.pseudo_eq.kind.value
    eigs = sec.pseudo_eq.eigenvalues
    certs.append(
        Certificate(
            "unstable_pseudo_focus",
            kind == "SaddleFocusUnstable",
            max(ev.real for ev in eigs),
            f"pseudo-equilibrium kind={kind}, eigenvalues={eigs}",
        )
    )

    certs.append(
        Certificate(
            "connection_landing",
            sec.landing_gap < gap_tol,
            sec.landing_gap,
            f"flight from q0 lands within {gap_tol:g} of p0 "
            f"(t0={sec.flight_time:.12g})",
        )
    )

    # backward sliding run from q0: the loop's sliding leg traversed in reverse
    approach = math.inf
    back_note = ""
    back_seg = None
    try:
        back_seg, ev = flow_slide(
            sys,
            q0,
            -t_back_max,
            rel_tol=opts.slide_rtol,
            abs_tol=opts.slide_atol,
            max_step=sec.slide_max_step,
        )
        dists = np.linalg.norm(back_seg.points - p0, axis=1)
        approach = float(dists.min())
        back_note = f"closest backward approach to p0: {approach:.3e} ({ev.kind.value})"
    except FlowError as exc:
        back_note = f"backward slide failed: {exc}"
    certs.append(
        Certificate(
            "backward_approach",
            approach < approach_tol,
            approach if math.isfinite(approach) else None,
            back_note,
        )
    )

    # expulsion: witness points come from the backward leg itself.  A leg
    # point at distance eps lies on the sliding orbit through q0, so its
    # forward orbit reaches the fold arc at the arc's center (the sliding
    # field is a smooth ODE on the strip, hence time-reversible); what is
    # re-measured forward is the local mechanism, the focus expelling the
    # point turn by turn.  Re-integrating all the way out instead would
    # certify nothing: phase error amplifies per turn and the rerun exits
    # through an unrelated fold point, or runs off down the strip.
    turn = 0.0
    if eigs and abs(eigs[0].imag) > 0:
        turn = 2.0 * math.pi / abs(eigs[0].imag)
    for eps in expulsion_eps:
        ok = False
        value = None
        note = ""
        seed = _leg_point_at_distance(sys, back_seg, p0, eps) if back_seg is not None else None
        if seed is None:
            note = f"backward leg never reached distance {eps:g} from p0"
        elif turn == 0.0:
            note = "no rotation at the pseudo-equilibrium; not a focus"
        else:
            try:
                horizon = min(3.15 * turn, expulsion_t_max)
                seg, ev = flow_slide(
                    sys,
                    seed,
                    horizon,
                    rel_tol=opts.slide_rtol,
                    abs_tol=opts.slide_atol,
                    max_step=sec.slide_max_step,
                )
                if ev.kind is EventKind.EXIT_SLIDE_AT_FOLD:
                    s_exit = sec.locate_on_fold(ev.location)
                    ok = True
                    value = s_exit
                    note = (
                        f"on the sliding orbit through q0; expelled through "
                        f"the fold at s={s_exit:.6g} within {ev.time:.3g}"
                    )
                else:
                    dist = np.linalg.norm(seg.points - p0, axis=1)
                    marks = [
                        float(np.interp(k * turn, seg.times, dist))
                        for k in range(4)
                    ]
                    growth = [marks[k + 1] / marks[k] for k in range(3)]
                    value = min(growth)
                    ok = all(g > 1.2 for g in growth)
                    note = (
                        "on the sliding orbit through q0 (forward orbit "
                        "reaches the fold arc center); per-turn expulsion "
                        "factors " + ", ".join(f"{g:.4g}" for g in growth)
                    )
            except (FlowError, ValueError) as exc:
                note = f"expulsion run failed: {exc}"
        certs.append(Certificate(f"expulsion_eps_{eps:g}", ok, value, note))

    return ShilnikovReport(
        q0=q0,
        p0=p0,
        flight_time=sec.flight_time,
        landing_gap=sec.landing_gap,
        eigenvalues=eigs,
        certificates=tuple(certs),
    )
