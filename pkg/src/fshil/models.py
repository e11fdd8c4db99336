"""Built-in model family and system loading.

The built-in family is a two-parameter piecewise-linear/affine system on R^3
switching across {z = 0}:

    upper field  X = (-a, x - b, y - c)
    lower field  Y = ( a, (3a/b) y + b, c)      with  c = 3 b^2 / (8 a)

for parameters a, b > 0.  Its switching plane splits into a crossing half
{y > c} and a sliding half {y < c} with empty escaping region.  The sliding
flow has an unstable-focus pseudo-equilibrium at the origin whose connection
through the fold point (3b/2, c, 0) is the object the rest of the package
analyses.  The upper flow integrates in closed form, which this module
exposes as an oracle for testing the numerical integrator.

Custom systems are loaded from a JSON description with polynomial components
(degree <= 6), differentiated analytically from their monomials.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence, Union

import numpy as np

from .geometry import PiecewiseSystem

__all__ = [
    "DEFAULT_ALPHA",
    "DEFAULT_BETA",
    "SECTION_RADIUS",
    "KnownPoints",
    "Polynomial3",
    "ShilnikovModelParams",
    "SystemSpecError",
    "build_model",
    "load_system",
    "oracle_known_points",
    "oracle_x_flow",
    "system_from_spec",
]

DEFAULT_ALPHA = 1.0
DEFAULT_BETA = 1.0

# Default section half-width for the built-in model at (alpha, beta) = (1, 1).
# The return map sends each returning band onto the whole section, and exits
# reach arc coordinate ~0.45 before razor-edge orbits start grazing the fold
# cusp at x = beta; a radius of 0.45 therefore captures the full sweep while
# staying clear of the cusp, and the measured map is expanding (|pi'| > 1e4)
# on every band interior.
SECTION_RADIUS = 0.45

MAX_POLY_DEGREE = 6


class SystemSpecError(ValueError):
    """Raised for malformed system-description dictionaries or files."""


@dataclass(frozen=True)
class ShilnikovModelParams:
    """Parameters of the built-in model; both must be positive and finite."""

    alpha: float = DEFAULT_ALPHA
    beta: float = DEFAULT_BETA

    def __post_init__(self):
        for name, v in (("alpha", self.alpha), ("beta", self.beta)):
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be a finite positive number, got {v!r}")

    @property
    def fold_level(self) -> float:
        """y-level c of the fold line bounding the sliding half-plane."""
        return 3.0 * self.beta**2 / (8.0 * self.alpha)


@dataclass(frozen=True)
class KnownPoints:
    """Reference geometry of the built-in model.

    pseudo_equilibrium : the sliding-flow focus p0 = (0, 0, 0)
    fold_point         : the visible fold point q0 = (3b/2, c, 0) whose
                         upper-field flight returns exactly to p0
    fold_level         : the y-level c of the fold line
    flight_time        : the flight duration t0 = 3b/(2a) from q0 to p0
    """

    pseudo_equilibrium: np.ndarray
    fold_point: np.ndarray
    fold_level: float
    flight_time: float


def build_model(params: ShilnikovModelParams | None = None) -> PiecewiseSystem:
    """Build the built-in piecewise system for the given parameters."""
    if params is None:
        params = ShilnikovModelParams()
    a = float(params.alpha)
    b = float(params.beta)
    c = params.fold_level
    k = 3.0 * a / b

    def X(p):
        return np.array((-a, p[0] - b, p[1] - c))

    def Y(p):
        return np.array((a, k * p[1] + b, c))

    def h(p):
        return float(p[2])

    def grad_h(p):
        return np.array((0.0, 0.0, 1.0))

    jx = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    jy = np.array([[0.0, 0.0, 0.0], [0.0, k, 0.0], [0.0, 0.0, 0.0]])

    def scalar_x(x, y, z):
        return (-a, x - b, y - c)

    def scalar_y(x, y, z):
        return (a, k * y + b, c)

    def scalar_h(x, y, z):
        return z

    def scalar_grad_h(x, y, z):
        return (0.0, 0.0, 1.0)

    return PiecewiseSystem(
        X=X,
        Y=Y,
        h=h,
        grad_h=grad_h,
        jac_X=lambda p: jx,
        jac_Y=lambda p: jy,
        scalar_x=scalar_x,
        scalar_y=scalar_y,
        scalar_h=scalar_h,
        scalar_grad_h=scalar_grad_h,
        name=f"builtin:shilnikov(alpha={a:g}, beta={b:g})",
    )


def oracle_known_points(params: ShilnikovModelParams | None = None) -> KnownPoints:
    """Closed-form reference points of the built-in model."""
    if params is None:
        params = ShilnikovModelParams()
    a, b = params.alpha, params.beta
    c = params.fold_level
    return KnownPoints(
        pseudo_equilibrium=np.zeros(3),
        fold_point=np.array((1.5 * b, c, 0.0)),
        fold_level=c,
        flight_time=1.5 * b / a,
    )


def oracle_x_flow(params: ShilnikovModelParams, p0, t):
    """Exact upper-field flow of the built-in model from p0.

    The upper field integrates in closed form:

        x(t) = x0 - a t
        y(t) = y0 + (x0 - b) t - (a/2) t^2
        z(t) = z0 + (y0 - c) t + (x0 - b) t^2 / 2 - (a/6) t^3

    Accepts scalar t (returns shape (3,)) or an array of times (returns
    shape (len(t), 3)).
    """
    a, b = params.alpha, params.beta
    c = params.fold_level
    x0, y0, z0 = (float(v) for v in np.asarray(p0, dtype=float))
    t = np.asarray(t, dtype=float)
    x = x0 - a * t
    y = y0 + (x0 - b) * t - 0.5 * a * t * t
    z = z0 + (y0 - c) * t + 0.5 * (x0 - b) * t * t - a * t**3 / 6.0
    out = np.stack([x, y, z], axis=-1)
    return out


# ----------------------------------------------------------------------
# polynomial custom systems
# ----------------------------------------------------------------------


class Polynomial3:
    """Polynomial in three variables stored as a list of monomials.

    Each monomial is a pair (coeff, (i, j, k)) meaning coeff * x^i y^j z^k.
    Differentiation is exact (exponent manipulation), so gradients of custom
    systems carry no finite-difference error.
    """

    __slots__ = ("terms",)

    def __init__(self, terms: Sequence[tuple[float, tuple[int, int, int]]]):
        self.terms = tuple((float(c), (int(i), int(j), int(k))) for c, (i, j, k) in terms)

    @classmethod
    def from_spec(cls, spec, where: str) -> "Polynomial3":
        if not isinstance(spec, list):
            raise SystemSpecError(f"{where}: polynomial must be a list of monomials")
        terms = []
        for n, mono in enumerate(spec):
            ctx = f"{where}[{n}]"
            if not isinstance(mono, Mapping):
                raise SystemSpecError(f"{ctx}: monomial must be an object")
            if set(mono.keys()) != {"coeff", "powers"}:
                raise SystemSpecError(f"{ctx}: monomial needs exactly 'coeff' and 'powers'")
            coeff = mono["coeff"]
            powers = mono["powers"]
            if not isinstance(coeff, (int, float)) or isinstance(coeff, bool):
                raise SystemSpecError(f"{ctx}: coeff must be a number")
            if (
                not isinstance(powers, list)
                or len(powers) != 3
                or not all(isinstance(e, int) and not isinstance(e, bool) and e >= 0 for e in powers)
            ):
                raise SystemSpecError(f"{ctx}: powers must be three non-negative integers")
            if sum(powers) > MAX_POLY_DEGREE:
                raise SystemSpecError(
                    f"{ctx}: total degree {sum(powers)} exceeds the maximum {MAX_POLY_DEGREE}"
                )
            terms.append((float(coeff), tuple(powers)))
        return cls(terms)

    def __call__(self, x: float, y: float, z: float) -> float:
        total = 0.0
        for c, (i, j, k) in self.terms:
            total += c * x**i * y**j * z**k
        return total

    def grad(self) -> tuple["Polynomial3", "Polynomial3", "Polynomial3"]:
        gx, gy, gz = [], [], []
        for c, (i, j, k) in self.terms:
            if i:
                gx.append((c * i, (i - 1, j, k)))
            if j:
                gy.append((c * j, (i, j - 1, k)))
            if k:
                gz.append((c * k, (i, j, k - 1)))
        return Polynomial3(gx), Polynomial3(gy), Polynomial3(gz)

    def to_spec(self) -> list:
        return [{"coeff": c, "powers": list(p)} for c, p in self.terms]


class _PolyField:
    """Callable 3-component polynomial field with its exact Jacobian."""

    def __init__(self, comps: Sequence[Polynomial3]):
        self.comps = tuple(comps)
        self.grads = tuple(c.grad() for c in comps)

    def __call__(self, p):
        x, y, z = float(p[0]), float(p[1]), float(p[2])
        return np.array([c(x, y, z) for c in self.comps])

    def scalar(self, x, y, z):
        c0, c1, c2 = self.comps
        return (c0(x, y, z), c1(x, y, z), c2(x, y, z))

    def jacobian(self, p):
        x, y, z = float(p[0]), float(p[1]), float(p[2])
        return np.array([[g(x, y, z) for g in row] for row in self.grads])


def _poly_system(spec: Mapping) -> PiecewiseSystem:
    for key in ("X", "Y", "h"):
        if key not in spec:
            raise SystemSpecError(f"custom system needs field {key!r}")
    for key in ("X", "Y"):
        if not isinstance(spec[key], list) or len(spec[key]) != 3:
            raise SystemSpecError(f"{key} must be a list of three polynomial components")
    fx = _PolyField([Polynomial3.from_spec(c, f"X[{i}]") for i, c in enumerate(spec["X"])])
    fy = _PolyField([Polynomial3.from_spec(c, f"Y[{i}]") for i, c in enumerate(spec["Y"])])
    hp = Polynomial3.from_spec(spec["h"], "h")
    hg = hp.grad()

    def h(p):
        return hp(float(p[0]), float(p[1]), float(p[2]))

    def grad_h(p):
        x, y, z = float(p[0]), float(p[1]), float(p[2])
        return np.array([g(x, y, z) for g in hg])

    return PiecewiseSystem(
        X=fx,
        Y=fy,
        h=h,
        grad_h=grad_h,
        jac_X=fx.jacobian,
        jac_Y=fy.jacobian,
        scalar_x=fx.scalar,
        scalar_y=fy.scalar,
        scalar_h=hp.__call__,
        scalar_grad_h=lambda x, y, z: (hg[0](x, y, z), hg[1](x, y, z), hg[2](x, y, z)),
        name="custom:polynomial",
    )


def system_from_spec(spec: Mapping) -> tuple[PiecewiseSystem, dict]:
    """Build a system from a description dictionary.

    Two forms are accepted::

        {"model": "builtin:shilnikov", "alpha": 1.0, "beta": 1.0}
        {"model": "custom", "X": [poly, poly, poly], "Y": [...], "h": poly}

    where each polynomial is a list of ``{"coeff": r, "powers": [i, j, k]}``
    monomials of total degree at most 6.  Returns the system and an echo
    dictionary describing it (used by the command-line reports).
    """
    if not isinstance(spec, Mapping):
        raise SystemSpecError("system description must be a JSON object")
    model = spec.get("model")
    if model == "builtin:shilnikov":
        extra = set(spec.keys()) - {"model", "alpha", "beta"}
        if extra:
            raise SystemSpecError(f"unknown keys for builtin model: {sorted(extra)}")
        try:
            params = ShilnikovModelParams(
                alpha=float(spec.get("alpha", DEFAULT_ALPHA)),
                beta=float(spec.get("beta", DEFAULT_BETA)),
            )
        except (TypeError, ValueError) as e:
            raise SystemSpecError(str(e)) from e
        echo = {"model": "builtin:shilnikov", "alpha": params.alpha, "beta": params.beta}
        return build_model(params), echo
    if model == "custom":
        sysm = _poly_system(spec)
        echo = {
            "model": "custom",
            "X": spec["X"],
            "Y": spec["Y"],
            "h": spec["h"],
        }
        return sysm, echo
    raise SystemSpecError(
        f"unknown model {model!r}; expected 'builtin:shilnikov' or 'custom'"
    )


def load_system(source: Union[str, Path, Mapping]) -> tuple[PiecewiseSystem, dict]:
    """Load a system from a JSON file path or an already-parsed mapping."""
    if isinstance(source, Mapping):
        return system_from_spec(source)
    path = Path(source)
    try:
        text = path.read_text()
    except OSError as e:
        raise SystemSpecError(f"cannot read system file {path}: {e}") from e
    try:
        spec = json.loads(text)
    except json.JSONDecodeError as e:
        raise SystemSpecError(f"invalid JSON in {path}: {e}") from e
    return system_from_spec(spec)
