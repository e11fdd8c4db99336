"""Dormand-Prince 5(4) embedded pair with dense output, for 3-state systems.

Scalar-tuned: the right-hand side has signature f(t, x, y, z) -> (fx, fy, fz)
over plain floats, which keeps per-step cost low enough for the long sliding
spirals the return-map machinery integrates.  The dense interpolant is the
standard order-4 companion of the pair, so event roots can be bracketed and
solved without re-integration.
"""

from __future__ import annotations

import math

__all__ = ["DenseStep", "Dopri5", "StepFailedError", "rk4_step"]

# Butcher tableau (nodes C, stage coefficients A, 5th-order weights B,
# error weights E against the embedded 4th-order solution).
C2, C3, C4, C5, C6 = 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
B1, B3, B4, B5, B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
E1, E3, E4, E5, E6, E7 = (
    71 / 57600,
    -71 / 16695,
    71 / 1920,
    -17253 / 339200,
    22 / 525,
    -1 / 40,
)

# Dense-output polynomial: y(t0 + u*h) = y0 + h * sum_j u^(j+1) * (K^T P)_j.
P_DENSE = (
    (1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432),
    (0.0, 0.0, 0.0, 0.0),
    (0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799),
    (0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072),
    (0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632),
    (0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844),
    (0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423),
)

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0


class StepFailedError(RuntimeError):
    """Step size collapsed below the resolution limit (stiff or invalid RHS)."""


class DenseStep:
    """Quartic interpolant of a single accepted step."""

    __slots__ = ("t0", "h", "y0", "coef")

    def __init__(self, t0, h, y0, coef):
        self.t0 = t0
        self.h = h
        self.y0 = y0
        self.coef = coef  # 3 components x 4 polynomial coefficients

    def eval(self, t):
        u = (t - self.t0) / self.h
        y0 = self.y0
        out = []
        for c in range(3):
            d = self.coef[c]
            out.append(y0[c] + self.h * u * (d[0] + u * (d[1] + u * (d[2] + u * d[3]))))
        return tuple(out)

    @property
    def t1(self):
        return self.t0 + self.h


def _initial_step(f, t0, y, f0, direction, rtol, atol, max_step):
    # Hairer-style heuristic, simplified.
    scale = tuple(atol + rtol * abs(v) for v in y)
    d0 = math.sqrt(sum((y[i] / scale[i]) ** 2 for i in range(3)) / 3)
    d1 = math.sqrt(sum((f0[i] / scale[i]) ** 2 for i in range(3)) / 3)
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h0 = min(h0, max_step)
    y1 = tuple(y[i] + direction * h0 * f0[i] for i in range(3))
    f1 = f(t0 + direction * h0, *y1)
    d2 = (
        math.sqrt(sum(((f1[i] - f0[i]) / scale[i]) ** 2 for i in range(3)) / 3)
        / h0
    )
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, max_step)


def rk4_step(f, t, y, dt):
    """One classical RK4 step; used for sub-step event polishing where dt is
    far below the adaptive step, so the O(dt^5) local error is negligible."""
    k1 = f(t, y[0], y[1], y[2])
    h2 = 0.5 * dt
    k2 = f(t + h2, y[0] + h2 * k1[0], y[1] + h2 * k1[1], y[2] + h2 * k1[2])
    k3 = f(t + h2, y[0] + h2 * k2[0], y[1] + h2 * k2[1], y[2] + h2 * k2[2])
    k4 = f(t + dt, y[0] + dt * k3[0], y[1] + dt * k3[1], y[2] + dt * k3[2])
    s = dt / 6.0
    return (
        y[0] + s * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]),
        y[1] + s * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]),
        y[2] + s * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2]),
    )


class Dopri5:
    """Adaptive integrator driving one trajectory segment.

    Attributes after each successful ``step()``: ``t_old``, ``t``, ``y_old``,
    ``y`` (3-tuples of floats), ``dense`` (interpolant over the last step).
    ``status`` is 'running' until the time bound is reached ('finished').
    """

    def __init__(
        self,
        f,
        t0: float,
        y0,
        t_bound: float,
        rtol: float,
        atol: float,
        max_step: float = math.inf,
        first_step: float | None = None,
    ):
        self.f = f
        self.t = float(t0)
        self.y = (float(y0[0]), float(y0[1]), float(y0[2]))
        self.t_bound = float(t_bound)
        self.rtol = rtol
        self.atol = atol
        self.max_step = max_step
        self.direction = 1.0 if t_bound >= t0 else -1.0
        self.fy = f(self.t, *self.y)
        self.t_old = self.t
        self.y_old = self.y
        self.dense = None
        self.status = "running" if self.t != self.t_bound else "finished"
        if first_step is not None:
            self.h_abs = min(abs(first_step), max_step)
        else:
            self.h_abs = _initial_step(
                f, self.t, self.y, self.fy, self.direction, rtol, atol, max_step
            )

    def replace_state(self, y_new):
        """Overwrite the current state (projection hook); refreshes the RHS."""
        self.y = (float(y_new[0]), float(y_new[1]), float(y_new[2]))
        self.fy = self.f(self.t, *self.y)

    def step(self):
        if self.status != "running":
            raise RuntimeError("integrator is not running")
        f = self.f
        t = self.t
        x0, y0, z0 = self.y
        f0x, f0y, f0z = self.fy
        rtol, atol = self.rtol, self.atol
        d = self.direction
        min_step = 1e-14 * max(1.0, abs(t))
        h_abs = min(self.h_abs, self.max_step)

        while True:
            if h_abs < min_step:
                raise StepFailedError(
                    f"step size {h_abs:.3e} fell below {min_step:.3e} at t={t:.6g}"
                )
            if h_abs >= abs(self.t_bound - t):
                h_abs = abs(self.t_bound - t)
                t_new = self.t_bound
            else:
                t_new = t + d * h_abs
            h = t_new - t

            k2 = f(t + C2 * h, x0 + h * A21 * f0x, y0 + h * A21 * f0y, z0 + h * A21 * f0z)
            k3 = f(
                t + C3 * h,
                x0 + h * (A31 * f0x + A32 * k2[0]),
                y0 + h * (A31 * f0y + A32 * k2[1]),
                z0 + h * (A31 * f0z + A32 * k2[2]),
            )
            k4 = f(
                t + C4 * h,
                x0 + h * (A41 * f0x + A42 * k2[0] + A43 * k3[0]),
                y0 + h * (A41 * f0y + A42 * k2[1] + A43 * k3[1]),
                z0 + h * (A41 * f0z + A42 * k2[2] + A43 * k3[2]),
            )
            k5 = f(
                t + C5 * h,
                x0 + h * (A51 * f0x + A52 * k2[0] + A53 * k3[0] + A54 * k4[0]),
                y0 + h * (A51 * f0y + A52 * k2[1] + A53 * k3[1] + A54 * k4[1]),
                z0 + h * (A51 * f0z + A52 * k2[2] + A53 * k3[2] + A54 * k4[2]),
            )
            k6 = f(
                t + h,
                x0 + h * (A61 * f0x + A62 * k2[0] + A63 * k3[0] + A64 * k4[0] + A65 * k5[0]),
                y0 + h * (A61 * f0y + A62 * k2[1] + A63 * k3[1] + A64 * k4[1] + A65 * k5[1]),
                z0 + h * (A61 * f0z + A62 * k2[2] + A63 * k3[2] + A64 * k4[2] + A65 * k5[2]),
            )
            xn = x0 + h * (B1 * f0x + B3 * k3[0] + B4 * k4[0] + B5 * k5[0] + B6 * k6[0])
            yn = y0 + h * (B1 * f0y + B3 * k3[1] + B4 * k4[1] + B5 * k5[1] + B6 * k6[1])
            zn = z0 + h * (B1 * f0z + B3 * k3[2] + B4 * k4[2] + B5 * k5[2] + B6 * k6[2])
            k7 = f(t_new, xn, yn, zn)

            ex = h * (E1 * f0x + E3 * k3[0] + E4 * k4[0] + E5 * k5[0] + E6 * k6[0] + E7 * k7[0])
            ey = h * (E1 * f0y + E3 * k3[1] + E4 * k4[1] + E5 * k5[1] + E6 * k6[1] + E7 * k7[1])
            ez = h * (E1 * f0z + E3 * k3[2] + E4 * k4[2] + E5 * k5[2] + E6 * k6[2] + E7 * k7[2])

            finite = (
                math.isfinite(xn)
                and math.isfinite(yn)
                and math.isfinite(zn)
                and math.isfinite(ex)
                and math.isfinite(ey)
                and math.isfinite(ez)
            )
            if not finite:
                h_abs *= 0.25
                continue

            sx = atol + rtol * max(abs(x0), abs(xn))
            sy = atol + rtol * max(abs(y0), abs(yn))
            sz = atol + rtol * max(abs(z0), abs(zn))
            err = math.sqrt(((ex / sx) ** 2 + (ey / sy) ** 2 + (ez / sz) ** 2) / 3.0)

            if err <= 1.0:
                break
            h_abs *= max(MIN_FACTOR, SAFETY * err ** -0.2)

        # dense coefficients: rows of K weighted by the P matrix
        K = ((f0x, f0y, f0z), k2, k3, k4, k5, k6, k7)
        coef = []
        for c in range(3):
            d0 = d1c = d2c = d3c = 0.0
            for s in range(7):
                ksc = K[s][c]
                prow = P_DENSE[s]
                d0 += ksc * prow[0]
                d1c += ksc * prow[1]
                d2c += ksc * prow[2]
                d3c += ksc * prow[3]
            coef.append((d0, d1c, d2c, d3c))
        self.dense = DenseStep(t, h, (x0, y0, z0), tuple(coef))

        self.t_old = t
        self.y_old = (x0, y0, z0)
        self.t = t_new
        self.y = (xn, yn, zn)
        self.fy = k7
        if err == 0.0:
            factor = MAX_FACTOR
        else:
            factor = min(MAX_FACTOR, max(MIN_FACTOR, SAFETY * err ** -0.2))
        self.h_abs = min(h_abs * factor, self.max_step)
        if self.t == self.t_bound:
            self.status = "finished"
        return True
