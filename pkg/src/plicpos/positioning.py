"""
Plane positioning: find ``s`` such that the truncated volume fraction equals
a prescribed value.

The iteration starts from the root of a global cubic model of the volume
fraction, evaluates the exact local cubic of the bracket containing the
current iterate after every truncation, and solves that cubic directly once
the target lies inside it. Otherwise the next iterate comes from the
quadratic Taylor model (falling back to Newton). After ``n_max`` iterations
the search continues by bisection.

All root-finding runs on the normalized position ``(s - s_min) / L`` and the
volume fraction, so the tolerances are scale free.
"""
import math
from dataclasses import dataclass
from enum import IntEnum
from typing import Optional

import numpy as np
from numba import njit

from .truncation import (
    LocalCubic,
    StaticCoefficients,
    VolumeSample,
    ZERO_TOL,
    _bracket_index,
    _truncate,
)

TOLERANCE = 1e-12
N_MAX = 100
MAX_BISECTIONS = 200


class Status(IntEnum):
    CONVERGED = 0
    CUBIC_SOLVED = 1
    BISECTION_FALLBACK = 2
    BOUNDARY_CLAMPED = 3


class Step(IntEnum):
    INITIAL = 0
    TAYLOR = 1
    NEWTON = 2
    MIDPOINT = 3
    BISECTION = 4
    LOOP_NEWTON = 5
    NO_PROGRESS = 6


class NoProgress(ArithmeticError):
    pass


class NoSignChange(ArithmeticError):
    pass


@dataclass(frozen=True)
class PositionQuery:
    coeffs: StaticCoefficients
    alpha: float
    eps: float = TOLERANCE
    eps0: float = ZERO_TOL
    n_max: int = N_MAX

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"volume fraction {self.alpha} outside [0, 1]")
        if not self.eps > self.eps0:
            raise ValueError("convergence tolerance must exceed the zero tolerance")
        if self.n_max < 1:
            raise ValueError("n_max must be positive")


@dataclass(frozen=True)
class PositionResult:
    s: float
    alpha: float
    n_trunc: int
    status: Status
    trace: Optional[tuple] = None  # ((s, alpha, Step), ...) per truncation


# --- scalar kernels -------------------------------------------------------


@njit(cache=True, _nrt=False)
def _initial_fraction(alpha):
    # Viete root of 3t^2 - 2t^3 = alpha in [0, 1], written with arcsin so
    # that alpha = 1/2 maps to exactly 1/2
    return 0.5 + math.sin(math.asin(2.0 * alpha - 1.0) / 3.0)


@njit(cache=True, _nrt=False)
def _cubic_eval(c0, c1, c2, c3, t):
    return ((c3 * t + c2) * t + c1) * t + c0


@njit(cache=True, _nrt=False)
def _taylor_step(f, f1, f2, eps0):
    """Normalized step and its kind from deviation ``f`` and derivatives."""
    if f1 <= eps0 and f2 <= eps0:
        return 0.0, 6
    if abs(f2) > eps0:
        D = f1 * f1 - 2.0 * f * f2
        if D >= 0.0:
            den = f1 + math.sqrt(D)
            if den > 0.0:
                # (sqrt(D) - f1) / f2 without cancellation
                return -2.0 * f / den, 1
    if f1 > eps0:
        return -f / f1, 2
    return 0.0, 6


@njit(cache=True, _nrt=False)
def _cubic_root(c0, c1, c2, c3, tl, th, eps, eps0):
    """
    Root of ``c0 + c1 t + c2 t^2 + c3 t^3`` in ``[tl, th]``.

    Returns ``(t, code)`` with code 0 on success, 1 if the interval holds no
    sign change and 2 if the tolerance ``eps`` was not reached.
    """
    gl = _cubic_eval(c0, c1, c2, c3, tl)
    gh = _cubic_eval(c0, c1, c2, c3, th)
    if gl > eps0 or gh < -eps0:
        return math.nan, 1
    if gl >= 0.0:
        return tl, 0 if abs(gl) <= eps else 2
    if gh <= 0.0:
        return th, 0 if abs(gh) <= eps else 2

    if abs(c3) < eps0:
        t = math.nan
        if abs(c2) < eps0:
            if c1 > 0.0:
                t = -c0 / c1
        else:
            disc = c1 * c1 - 4.0 * c2 * c0
            if disc >= 0.0:
                q = -0.5 * (c1 + math.copysign(math.sqrt(disc), c1))
                r1 = q / c2
                r2 = c0 / q if q != 0.0 else math.nan
                w = eps0 * (th - tl)
                if tl - w <= r1 <= th + w:
                    t = r1
                elif tl - w <= r2 <= th + w:
                    t = r2
        if t == t:
            t = min(max(t, tl), th)
            if abs(_cubic_eval(c0, c1, c2, c3, t)) <= eps:
                return t, 0

    # Newton from linear interpolation, bisection whenever it misbehaves
    a = tl
    b = th
    t = tl - gl * (th - tl) / (gh - gl)
    t = min(max(t, tl), th)
    g = _cubic_eval(c0, c1, c2, c3, t)
    for _ in range(100):
        if abs(g) <= eps0:
            break
        if g < 0.0:
            a = t
        else:
            b = t
        dg = (3.0 * c3 * t + 2.0 * c2) * t + c1
        tn = t - g / dg if dg > 0.0 else math.nan
        if not (a < tn < b):
            tn = 0.5 * (a + b)
        if tn == t or b - a <= 4e-16 * max(1.0, abs(t)):
            break
        t = tn
        g = _cubic_eval(c0, c1, c2, c3, t)
    return t, 0 if abs(g) <= eps else 2


@njit(cache=True, _nrt=False)
def _position(co, alpha, eps, eps0, n_max, newton_only, trace):
    """
    Positioning state machine.

    ``trace`` is a (rows, 3) scratch array receiving (s, alpha, step kind)
    per truncation. Returns ``(s, alpha_predicted, n_trunc, status, n_rows)``.
    """
    s_min = co.s_min
    s_max = co.s_max
    L = co.length
    vol = co.volume
    if alpha <= eps0:
        return s_min, 0.0, 0, 3, 0
    if alpha >= 1.0 - eps0:
        return s_max, 1.0, 0, 3, 0

    rows = trace.shape[0]
    lo = s_min
    hi = s_max
    s = s_min + L * _initial_fraction(alpha)
    kind = 0
    s_prev = math.nan
    a0 = 0.0
    n = 0
    while n < n_max:
        V, V1, V2, V3 = _truncate(co, s)
        a0 = V / vol
        f = a0 - alpha
        if n < rows:
            trace[n, 0] = s
            trace[n, 1] = a0
            trace[n, 2] = kind
        n += 1
        if abs(f) <= eps:
            return s, a0, n, 0, n
        if f < 0.0:
            lo = max(lo, s)
        else:
            hi = min(hi, s)
        f1 = V1 / vol * L
        f2 = V2 / vol * L * L

        if newton_only:
            if f1 > eps0:
                dt = -f / f1
                kind = 2
            else:
                dt = 0.0
                kind = 6
        else:
            br = co.brackets
            i = _bracket_index(br, s, eps0)
            tl = (br[i] - s) / L
            th = (br[i + 1] - s) / L
            c2 = 0.5 * f2
            c3 = V3 / vol * L * L * L / 6.0
            glo = _cubic_eval(f, f1, c2, c3, tl)
            ghi = _cubic_eval(f, f1, c2, c3, th)
            if glo <= 0.0 <= ghi:
                t, code = _cubic_root(f, f1, c2, c3, tl, th, eps, eps0)
                if code == 0:
                    return s + t * L, alpha + _cubic_eval(f, f1, c2, c3, t), n, 1, n
            dt, kind = _taylor_step(f, f1, f2, eps0)
            if kind == 1:
                s_new = s + dt * L
                if not (s_min <= s_new <= s_max):
                    dt, kind = (-f / f1, 2) if f1 > eps0 else (0.0, 6)

        s_new = s + dt * L
        if not newton_only and n >= 2 and kind != 6 and abs(s_new - s_prev) < eps0 * L:
            # period-two bounce of the quadratic model; Newton breaks it
            if f1 > eps0:
                s_new = s - f / f1 * L
                kind = 5
        if kind == 6 or not (s_min <= s_new <= s_max):
            s_new = 0.5 * (lo + hi)
            kind = 3
        s_prev = s
        s = s_new

    for _ in range(MAX_BISECTIONS):
        s = 0.5 * (lo + hi)
        V, V1, V2, V3 = _truncate(co, s)
        a0 = V / vol
        f = a0 - alpha
        if n < rows:
            trace[n, 0] = s
            trace[n, 1] = a0
            trace[n, 2] = 4
        n += 1
        if abs(f) <= eps:
            break
        if f < 0.0:
            lo = s
        else:
            hi = s
        if hi - lo <= 4e-16 * max(abs(lo), abs(hi), L):
            break
    return s, a0, n, 2, n


# --- public API -----------------------------------------------------------


def initial_guess(coeffs: StaticCoefficients, alpha: float) -> float:
    """Root of the global cubic model with vanishing boundary derivatives."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("initial guess needs 0 < alpha < 1")
    return coeffs.s_min + coeffs.length * float(_initial_fraction(alpha))


def admissible_boundary_derivatives(d_minus: float, d_plus: float, L: float) -> bool:
    """Whether boundary slopes keep the global cubic model monotone."""
    if d_minus < 0 or d_plus < 0:
        raise ValueError("boundary derivatives must be non-negative")
    ssum = d_minus + d_plus
    ellipse = 3.0 * (ssum - 4.0 / L) ** 2 + (d_minus - d_plus) ** 2 <= 12.0 / L**2
    return bool(ellipse or ssum * L <= 3.0)


def taylor_step(sample: VolumeSample, alpha: float, coeffs: StaticCoefficients, eps0=ZERO_TOL) -> float:
    """
    Step in ``s`` from the local quadratic model, Newton when the model has
    no admissible root. Raises :class:`NoProgress` if neither applies.
    """
    L, vol = coeffs.length, coeffs.volume
    f = sample.V / vol - alpha
    f1 = sample.dV / vol * L
    f2 = sample.d2V / vol * L * L
    dt, kind = _taylor_step(f, f1, f2, eps0)
    if kind == Step.TAYLOR and not coeffs.s_min <= sample.s + dt * L <= coeffs.s_max:
        dt, kind = (-f / f1, Step.NEWTON) if f1 > eps0 else (0.0, Step.NO_PROGRESS)
    if kind == Step.NO_PROGRESS:
        raise NoProgress("vanishing first and second derivative")
    return float(dt * L)


def cubic_root_in_bracket(cubic: LocalCubic, target: float, interval, eps=TOLERANCE, eps0=ZERO_TOL) -> float:
    """Solve ``cubic(z) = target`` for ``z`` in ``interval``."""
    z0, z1 = map(float, interval)
    w = z1 - z0
    if not w > 0:
        raise ValueError("empty interval")
    # rescale to t = (z - center) / w so the leading-coefficient test is scale free
    c0 = cubic.c0 - target
    c1 = cubic.c1 * w
    c2 = cubic.c2 * w * w
    c3 = cubic.c3 * w**3
    t, code = _cubic_root(c0, c1, c2, c3, (z0 - cubic.center) / w, (z1 - cubic.center) / w, eps, eps0)
    if code == 1:
        raise NoSignChange(f"cubic does not cross {target} on [{z0}, {z1}]")
    return float(cubic.center + t * w)


def _run(query: PositionQuery, newton_only: bool, trace: bool) -> PositionResult:
    rows = query.n_max + MAX_BISECTIONS + 1 if trace else 0
    buf = np.zeros((rows, 3))
    s, _, n, status, n_rows = _position(
        query.coeffs, float(query.alpha), query.eps, query.eps0, query.n_max, newton_only, buf
    )
    co = query.coeffs
    if status == Status.BOUNDARY_CLAMPED:
        achieved = 0.0 if s == co.s_min else 1.0
    else:
        achieved = _truncate(co, s)[0] / co.volume
    log = None
    if trace:
        log = tuple((float(r[0]), float(r[1]), Step(int(r[2]))) for r in buf[:n_rows])
    return PositionResult(float(s), float(achieved), int(n), Status(int(status)), log)


def position(query: PositionQuery, trace=False) -> PositionResult:
    """
    Position the plane so the truncated fraction matches ``query.alpha``.

    ``alpha`` of the result is the fraction re-evaluated at the returned
    ``s``; that verification is not counted in ``n_trunc``.
    """
    return _run(query, False, trace)


def position_newton_baseline(query: PositionQuery, trace=False) -> PositionResult:
    """Same loop with plain Newton updates and no in-bracket cubic solve."""
    return _run(query, True, trace)
