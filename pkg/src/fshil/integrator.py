"""Hybrid trajectory executor for piecewise-smooth systems.

A trajectory alternates three modes: smooth flow of X above the manifold,
smooth flow of Y below it, and sliding flow inside the attracting part of
M.  Mode changes are events: manifold hits, crossing transitions, slide
entries, fold exits.  Each event is located to high accuracy (|monitor| <
1e-12) by bracketing on the dense output of the step and polishing on the
true flow, because downstream return-map work differentiates through these
event times.

Dispatch follows the usual pointwise conventions: transversal hits cross or
begin sliding depending on the sign pattern of the normal velocities, a
slide ends where the tangent field's normal acceleration carries the orbit
off the manifold (a visible regular fold, exit along that field), and any
other tangency terminates the run as singular.  Forward time only across M;
backward integration is offered for a single smooth or sliding piece.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.optimize import brentq

from ._rk import Dopri5, StepFailedError, rk4_step
from .geometry import (
    H_TOL,
    SIGN_TOL,
    PiecewiseSystem,
    RegionTag,
    FoldKind,
    classify,
    lie_derivatives,
)
from .sliding import DenominatorDegenerateError, sliding_field_scalar

__all__ = [
    "EVENT_TOL",
    "GLUE_TOL",
    "STALL_TOL",
    "ChatteringError",
    "EscapingRegionError",
    "Event",
    "EventKind",
    "FlowError",
    "Segment",
    "Trajectory",
    "flow_filippov",
    "flow_slide",
    "flow_smooth",
]

EVENT_TOL = 1e-12
ARM_TOL = 1e-11
STALL_TOL = 1e-8
GLUE_TOL = 1e-8
DOMAIN_BOX = 1e6
SMOOTH_RTOL = 1e-10
SMOOTH_ATOL = 1e-12
SLIDE_RTOL = 1e-9
SLIDE_ATOL = 1e-12
SLIDE_MAX_STEP = 0.25
CHATTER_COUNT = 50
CHATTER_SPAN = 1e-9


class FlowError(RuntimeError):
    """Trajectory construction failed for a numerical reason."""


class EscapingRegionError(FlowError):
    """Start point lies in the escaping region, where forward dynamics is
    not single-valued."""


class ChatteringError(FlowError):
    """Event accumulation guard: too many mode changes in too little time."""


class EventKind(str, Enum):
    HIT_MANIFOLD = "HitManifold"
    BEGIN_SLIDE = "BeginSlide"
    EXIT_SLIDE_AT_FOLD = "ExitSlideAtFold"
    CROSS_THROUGH = "CrossThrough"
    REACH_PSEUDO_EQUILIBRIUM = "ReachPseudoEquilibrium"
    SINGULAR_TANGENCY = "SingularTangency"
    LEAVE_DOMAIN = "LeaveDomain"
    MAX_TIME = "MaxTime"


@dataclass(frozen=True, eq=False)
class Event:
    kind: EventKind
    time: float
    location: np.ndarray
    residual: float | None = None


@dataclass(frozen=True, eq=False)
class Segment:
    """One mode's worth of trajectory with its accepted-step samples."""

    mode: str  # SmoothX | SmoothY | Slide
    t_start: float
    t_end: float
    times: np.ndarray
    points: np.ndarray


@dataclass(frozen=True, eq=False)
class Trajectory:
    segments: tuple[Segment, ...]
    events: tuple[Event, ...]

    @property
    def t_end(self) -> float:
        return self.segments[-1].t_end if self.segments else 0.0

    @property
    def end_point(self) -> np.ndarray:
        return self.segments[-1].points[-1]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("t,x,y,z,mode\n")
            for seg in self.segments:
                for t, p in zip(seg.times, seg.points):
                    fh.write(
                        f"{t:.17g},{p[0]:.17g},{p[1]:.17g},{p[2]:.17g},{seg.mode}\n"
                    )

    def write_events_json(self, path) -> None:
        payload = [
            {
                "kind": ev.kind.value,
                "time": ev.time,
                "location": [float(c) for c in ev.location],
                "residual": ev.residual,
            }
            for ev in self.events
        ]
        with open(path, "w", newline="") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _crosses(g0: float, g1: float, direction: int) -> bool:
    if direction >= 0 and g0 < 0.0 <= g1:
        return True
    if direction <= 0 and g0 > 0.0 >= g1:
        return True
    return False


class _Monitor:
    """Scalar event function tracked across steps, with near-zero arming.

    A run that starts on the event surface (residual of the previous event)
    must not re-fire on its own start noise, so the monitor stays disarmed
    until |g| clears a threshold scaled to the start magnitude.
    """

    __slots__ = ("name", "g", "direction", "armed", "arm_level", "value")

    def __init__(self, name, g, direction, p0):
        self.name = name
        self.g = g
        self.direction = direction
        self.value = g(*p0)
        mag = abs(self.value)
        self.armed = mag > ARM_TOL
        self.arm_level = max(1e-13, 8.0 * mag)

    def scan(self, samples):
        """samples: [(t, point)] in traversal order, first = step start.
        Returns (bracket or None, annotated samples); updates arming only.
        The caller commits the step-end value once the step is settled."""
        g = self.g
        vals = [(t, p, g(*p)) for t, p in samples]
        vals[0] = (samples[0][0], samples[0][1], self.value)
        hit = None
        prev = vals[0]
        if abs(prev[2]) > self.arm_level:
            self.armed = True
        for cur in vals[1:]:
            if self.armed and _crosses(prev[2], cur[2], self.direction):
                hit = (prev, cur)
                break
            if abs(cur[2]) > self.arm_level:
                self.armed = True
            prev = cur
        return hit, vals

    def needs_escalation(self, vals) -> bool:
        if not self.armed:
            return False
        closest = min(abs(v[2]) for v in vals)
        span = max(
            abs(vals[i + 1][2] - vals[i][2]) for i in range(len(vals) - 1)
        )
        return closest < 2.0 * span


def _refine_event(f, dense, g, t_lo, t_hi, tol=EVENT_TOL):
    """Root of g along the flow inside [t_lo, t_hi] (traversal order).

    Stage 1 solves on the dense interpolant, which is limited by interp
    error; stage 2 polishes with Newton on the true flow using single RK4
    micro-advances, reaching residuals near roundoff.
    """
    lo, hi = (t_lo, t_hi) if t_lo < t_hi else (t_hi, t_lo)
    te = brentq(
        lambda t: g(*dense.eval(t)), lo, hi, xtol=1e-15, rtol=8.9e-16, maxiter=200
    )
    t_cur = te
    p_cur = dense.eval(te)
    gv = g(*p_cur)
    cap = 10.0 * (hi - lo) + 1e-9
    for _ in range(12):
        if abs(gv) <= 0.1 * tol:
            break
        dt_probe = 1e-9 * max(1.0, abs(t_cur))
        gp = g(*rk4_step(f, t_cur, p_cur, dt_probe))
        slope = (gp - gv) / dt_probe
        if slope == 0.0 or not math.isfinite(slope):
            break
        dt = -gv / slope
        if abs(dt) > cap:
            dt = math.copysign(cap, dt)
        p_cur = rk4_step(f, t_cur, p_cur, dt)
        t_cur += dt
        gv = g(*p_cur)
    if abs(gv) > tol:
        raise FlowError(
            f"event root polish stalled: residual {abs(gv):.3e} > {tol:.1e}"
        )
    return t_cur, p_cur, abs(gv)


def _inside_box(p, box: float) -> bool:
    return abs(p[0]) <= box and abs(p[1]) <= box and abs(p[2]) <= box


def _locate_box_exit(dense, box, t_in, t_out):
    # bisection is enough here; the box face is not a differentiable target
    a, b = t_in, t_out
    for _ in range(80):
        m = 0.5 * (a + b)
        if _inside_box(dense.eval(m), box):
            a = m
        else:
            b = m
    return b, dense.eval(b)


def _empty_segment(mode, p0, t0):
    pt = np.asarray(p0, dtype=float).reshape(1, 3)
    return Segment(mode=mode, t_start=t0, t_end=t0, times=np.array([t0]), points=pt.copy())


def _run_monitored(
    f,
    p0,
    t_span,
    monitors,
    *,
    mode,
    rtol,
    atol,
    max_step,
    box,
    t_offset,
    event_tol=EVENT_TOL,
    step_hook=None,
    stall=None,
):
    """Shared monitored-integration loop for one segment.

    Returns (Segment, kind_name, event_t, event_p, residual) where kind_name
    is the firing monitor's name, 'box', 'stall', or 'time'.  Times in the
    returned segment are global (offset applied).
    """
    p0 = tuple(float(c) for c in p0)
    if t_span == 0.0:
        seg = _empty_segment(mode, p0, t_offset)
        return seg, "time", t_offset, p0, None
    try:
        solver = Dopri5(f, 0.0, p0, t_span, rtol, atol, max_step)
    except DenominatorDegenerateError as exc:
        raise FlowError(f"vector field undefined at segment start: {exc}") from exc
    ts = [0.0]
    pts = [p0]
    if stall is not None and stall(p0):
        seg = Segment(
            mode=mode,
            t_start=t_offset,
            t_end=t_offset,
            times=np.array([t_offset]),
            points=np.asarray([p0], dtype=float),
        )
        return seg, "stall", t_offset, p0, None
    outcome = None
    while solver.status == "running":
        try:
            solver.step()
        except StepFailedError as exc:
            raise FlowError(f"{mode} segment at t={t_offset + solver.t:.6g}: {exc}") from exc
        except DenominatorDegenerateError as exc:
            raise FlowError(
                f"{mode} segment hit a sliding-denominator degeneracy: {exc}"
            ) from exc
        if step_hook is not None:
            projected = step_hook(solver.y)
            if projected is not None:
                solver.replace_state(projected)
        dense = solver.dense
        t0, t1 = dense.t0, solver.t
        tm = 0.5 * (t0 + t1)
        samples = [(t0, pts[-1]), (tm, dense.eval(tm)), (t1, solver.y)]
        fired = []
        for mon in monitors:
            hit, vals = mon.scan(samples)
            if hit is None and mon.needs_escalation(vals):
                tgrid = [t0 + (t1 - t0) * k / 8.0 for k in range(9)]
                fine = [(t0, pts[-1])] + [
                    (t, dense.eval(t)) for t in tgrid[1:-1]
                ] + [(t1, solver.y)]
                hit, vals = mon.scan(fine)
            if hit is None:
                mon.value = vals[-1][2]
            if hit is not None:
                (ta, _, _), (tb, _, _) = hit
                te, pe, res = _refine_event(f, dense, mon.g, ta, tb, event_tol)
                fired.append((te, mon.name, pe, res, mon.g))
        if fired:
            fired.sort(key=lambda item: item[0] if t_span > 0 else -item[0])
            te, name, pe, res, gfn = fired[0]
            if step_hook is not None:
                projected = step_hook(pe)
                if projected is not None:
                    pe = projected
                    res = abs(gfn(*pe))
            ts.append(te)
            pts.append(tuple(pe))
            outcome = (name, te, tuple(pe), res)
            break
        if not _inside_box(solver.y, box):
            tb, pb = _locate_box_exit(dense, box, t0, t1)
            ts.append(tb)
            pts.append(tuple(pb))
            outcome = ("box", tb, tuple(pb), None)
            break
        ts.append(t1)
        pts.append(solver.y)
        if stall is not None and stall(solver.y):
            outcome = ("stall", t1, solver.y, None)
            break
    if outcome is None:
        outcome = ("time", solver.t, solver.y, None)
    name, te, pe, res = outcome
    times = np.asarray(ts, dtype=float) + t_offset
    seg = Segment(
        mode=mode,
        t_start=t_offset,
        t_end=t_offset + (ts[-1] if ts else 0.0),
        times=times,
        points=np.asarray(pts, dtype=float),
    )
    return seg, name, t_offset + te, pe, res


def flow_smooth(
    sys: PiecewiseSystem,
    which: str,
    p0,
    t_max: float,
    *,
    rel_tol: float = SMOOTH_RTOL,
    abs_tol: float = SMOOTH_ATOL,
    max_step: float = math.inf,
    box: float = DOMAIN_BOX,
    t_offset: float = 0.0,
) -> tuple[Segment, Event]:
    """Flow one smooth field until it reaches M, the time bound, or the
    domain box.  Negative t_max integrates backward (no events on M are
    meaningful backward across modes; the manifold monitor still applies).
    """
    p0 = np.asarray(p0, dtype=float)
    if which not in ("X", "Y"):
        raise ValueError(f"which must be 'X' or 'Y', got {which!r}")
    hv = sys.sh(*p0)
    if abs(hv) > H_TOL:
        expected = 1.0 if which == "X" else -1.0
        if hv * expected < 0:
            raise ValueError(
                f"field {which} governs h{'>' if which == 'X' else '<'}0 "
                f"but h(p0)={hv:.3e}"
            )
    fld = sys.scalar_field(which)

    def f(t, x, y, z):
        return fld(x, y, z)

    mon = _Monitor("manifold", sys.sh, 0, tuple(p0))
    seg, name, te, pe, res = _run_monitored(
        f,
        p0,
        float(t_max),
        [mon],
        mode=f"Smooth{which}",
        rtol=rel_tol,
        atol=abs_tol,
        max_step=max_step,
        box=box,
        t_offset=t_offset,
    )
    point = np.asarray(pe, dtype=float)
    if name == "manifold":
        ev = Event(EventKind.HIT_MANIFOLD, te, point, residual=res)
    elif name == "box":
        ev = Event(EventKind.LEAVE_DOMAIN, te, point)
    else:
        ev = Event(EventKind.MAX_TIME, te, point)
    return seg, ev


def _projector(sys: PiecewiseSystem, tol: float = EVENT_TOL):
    sh = sys.sh
    sg = sys.sgrad_h

    def project(p):
        x, y, z = p
        for _ in range(5):
            hv = sh(x, y, z)
            if abs(hv) < tol:
                break
            gx, gy, gz = sg(x, y, z)
            n2 = gx * gx + gy * gy + gz * gz
            s = hv / n2
            x, y, z = x - s * gx, y - s * gy, z - s * gz
        return (x, y, z)

    return project


def flow_slide(
    sys: PiecewiseSystem,
    p0,
    t_max: float,
    *,
    rel_tol: float = SLIDE_RTOL,
    abs_tol: float = SLIDE_ATOL,
    max_step: float = SLIDE_MAX_STEP,
    box: float = DOMAIN_BOX,
    stall_tol: float = STALL_TOL,
    t_offset: float = 0.0,
) -> tuple[Segment, Event]:
    """Flow the sliding field inside M^s until a fold boundary is reached.

    The state is re-projected onto M after every accepted step (Newton along
    the gradient), so the manifold residual never accumulates.  Exit events
    root-solve the normal velocity of the tangent side (Xh up through zero,
    or Yh down through zero); the pseudo-equilibrium stop uses a plain
    stall test on the sliding speed.  Negative t_max runs the slide backward
    within M^s, which is well defined as long as no boundary is met.
    """
    p0 = np.asarray(p0, dtype=float)
    if abs(sys.sh(*p0)) > H_TOL:
        raise ValueError(f"slide start is off M: h={sys.sh(*p0):.3e}")
    f = sliding_field_scalar(sys)
    sx, sy_, sg = sys.sx, sys.sy, sys.sgrad_h

    def g_xh(x, y, z):
        gx, gy, gz = sg(x, y, z)
        ax, ay, az = sx(x, y, z)
        return gx * ax + gy * ay + gz * az

    def g_yh(x, y, z):
        gx, gy, gz = sg(x, y, z)
        bx, by, bz = sy_(x, y, z)
        return gx * bx + gy * by + gz * bz

    def stalled(p):
        try:
            w = f(0.0, *p)
        except DenominatorDegenerateError:
            return False
        return math.sqrt(w[0] ** 2 + w[1] ** 2 + w[2] ** 2) < stall_tol

    # interior crossing/escaping starts are not slide states; boundary
    # (tangency) starts are allowed so fold-seeded runs work in both senses
    xh0 = g_xh(*p0)
    yh0 = g_yh(*p0)
    if abs(xh0) > SIGN_TOL and abs(yh0) > SIGN_TOL and not (xh0 < 0.0 < yh0):
        region = "escaping" if xh0 > 0.0 > yh0 else "crossing"
        raise FlowError(
            f"slide start is in the {region} region (Xh={xh0:.3e}, Yh={yh0:.3e})"
        )

    project = _projector(sys)
    monitors = [
        _Monitor("fold_x", g_xh, +1, tuple(p0)),
        _Monitor("fold_y", g_yh, -1, tuple(p0)),
    ]
    seg, name, te, pe, res = _run_monitored(
        f,
        p0,
        float(t_max),
        monitors,
        mode="Slide",
        rtol=rel_tol,
        atol=abs_tol,
        max_step=max_step,
        box=box,
        t_offset=t_offset,
        step_hook=project,
        stall=stalled,
    )
    point = np.asarray(pe, dtype=float)
    if name in ("fold_x", "fold_y"):
        ev = Event(EventKind.EXIT_SLIDE_AT_FOLD, te, point, residual=res)
    elif name == "stall":
        ev = Event(EventKind.REACH_PSEUDO_EQUILIBRIUM, te, point)
    elif name == "box":
        ev = Event(EventKind.LEAVE_DOMAIN, te, point)
    else:
        ev = Event(EventKind.MAX_TIME, te, point)
    return seg, ev


_TERMINAL = frozenset(
    {
        EventKind.MAX_TIME,
        EventKind.LEAVE_DOMAIN,
        EventKind.REACH_PSEUDO_EQUILIBRIUM,
        EventKind.SINGULAR_TANGENCY,
    }
)


def filippov_segments(
    sys: PiecewiseSystem,
    p0,
    t_max: float,
    *,
    box: float = DOMAIN_BOX,
    h_tol: float = H_TOL,
    smooth_rtol: float = SMOOTH_RTOL,
    smooth_atol: float = SMOOTH_ATOL,
    slide_rtol: float = SLIDE_RTOL,
    slide_atol: float = SLIDE_ATOL,
    slide_max_step: float = SLIDE_MAX_STEP,
    stall_tol: float = STALL_TOL,
):
    """Generator of Segment and Event objects in chronological order.

    Drives the full piecewise dynamics from p0 forward until t_max or a
    terminal event.  Consumers that only need a prefix of the trajectory
    (the return-map machinery) can stop iterating early and pay nothing for
    the rest.
    """
    if t_max < 0:
        raise ValueError("forward time only; use flow_smooth/flow_slide for backward runs")
    p = np.asarray(p0, dtype=float)
    t_used = 0.0
    recent = deque(maxlen=CHATTER_COUNT)

    def note(ev: Event):
        recent.append(ev.time)
        if len(recent) == CHATTER_COUNT and recent[-1] - recent[0] < CHATTER_SPAN:
            raise ChatteringError(
                f"{CHATTER_COUNT} events within {recent[-1] - recent[0]:.2e} "
                f"time units near t={ev.time:.6g}"
            )

    while True:
        remaining = t_max - t_used
        if remaining <= 0.0:
            yield Event(EventKind.MAX_TIME, t_max, p.copy())
            return
        hv = sys.sh(*p)
        which = None
        if abs(hv) > h_tol:
            which = "X" if hv > 0 else "Y"
        else:
            cls = classify(sys, p, h_tol=h_tol)
            if cls.tag is RegionTag.CROSSING:
                xh, _ = lie_derivatives(sys, p)
                which = "X" if xh > 0 else "Y"
                ev = Event(EventKind.CROSS_THROUGH, t_used, p.copy(), residual=abs(hv))
                note(ev)
                yield ev
            elif cls.tag is RegionTag.SLIDING:
                ev = Event(EventKind.BEGIN_SLIDE, t_used, p.copy(), residual=abs(hv))
                note(ev)
                yield ev
                seg, ev = flow_slide(
                    sys,
                    p,
                    remaining,
                    rel_tol=slide_rtol,
                    abs_tol=slide_atol,
                    max_step=slide_max_step,
                    box=box,
                    stall_tol=stall_tol,
                    t_offset=t_used,
                )
                note(ev)
                yield seg
                yield ev
                if ev.kind in _TERMINAL:
                    return
                p = ev.location
                t_used = ev.time
                continue
            elif cls.tag is RegionTag.ESCAPING:
                raise EscapingRegionError(
                    f"point {p.tolist()} lies in the escaping region; forward "
                    "flow is not single-valued there"
                )
            else:
                xh, yh = lie_derivatives(sys, p)
                if (
                    cls.tag is RegionTag.TANGENCY_X
                    and cls.fold_kind is FoldKind.VISIBLE
                    and cls.regular_fold
                    and yh > 0
                ):
                    which = "X"
                elif (
                    cls.tag is RegionTag.TANGENCY_Y
                    and cls.fold_kind is FoldKind.VISIBLE
                    and cls.regular_fold
                    and xh < 0
                ):
                    which = "Y"
                else:
                    ev = Event(EventKind.SINGULAR_TANGENCY, t_used, p.copy())
                    note(ev)
                    yield ev
                    return
        seg, ev = flow_smooth(
            sys,
            which,
            p,
            remaining,
            rel_tol=smooth_rtol,
            abs_tol=smooth_atol,
            box=box,
            t_offset=t_used,
        )
        note(ev)
        yield seg
        yield ev
        if ev.kind is not EventKind.HIT_MANIFOLD:
            return
        p = ev.location
        t_used = ev.time


def flow_filippov(sys: PiecewiseSystem, p0, t_max: float, **opts) -> Trajectory:
    """Run the full piecewise flow and collect it into a Trajectory."""
    segments: list[Segment] = []
    events: list[Event] = []
    for item in filippov_segments(sys, p0, t_max, **opts):
        if isinstance(item, Segment):
            segments.append(item)
        else:
            events.append(item)
    return Trajectory(segments=tuple(segments), events=tuple(events))
