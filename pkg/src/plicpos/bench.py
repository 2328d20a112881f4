"""
Benchmark sweep over the (normal, volume fraction) grid.

Each instance is timed from the static-coefficient precompute through the
positioning result. The clock is the CPU cycle counter read inside the
compiled sweep, converted to nanoseconds by a calibration against
``time.perf_counter_ns`` around the sweep.
"""
import csv
import json
import math
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from llvmlite import ir
from numba import njit, types
from numba.extending import intrinsic, overload

from .polytope import Polyhedron
from .positioning import N_MAX, TOLERANCE, Status, _position
from .truncation import ZERO_TOL, _coefficients_view, _truncate, _workspace

COLUMNS = ("shape", "alpha", "phi", "theta", "s_star", "alpha_achieved", "n_trunc", "status", "time_ns")
METHODS = ("proposed", "newton")

_HAVE_TSC = platform.machine().lower() in ("x86_64", "amd64", "i386", "i686")


@intrinsic
def _rdcycle(typingctx):
    def codegen(context, builder, signature, args):
        fnty = ir.FunctionType(ir.IntType(64), [])
        fn = builder.module.declare_intrinsic("llvm.readcyclecounter", fnty=fnty)
        return builder.call(fn, [])

    return types.int64(), codegen


def _ticks():
    """Cycle counter in compiled code, nanoseconds when run as plain Python."""
    return time.perf_counter_ns()


@overload(_ticks, jit_options={"cache": True})
def _ticks_compiled():
    if _HAVE_TSC:
        return lambda: _rdcycle()
    return lambda: 0


@njit(cache=True)
def _read_ticks():
    return _ticks()


@dataclass(frozen=True)
class SampleGrid:
    phi: np.ndarray  # per normal
    theta: np.ndarray
    normals: np.ndarray  # (n, 3)
    fractions: np.ndarray
    m_normal: int
    m_vof: int

    @property
    def n_instances(self):
        return len(self.normals) * len(self.fractions)


def generate_grid(m_normal=80, m_vof=50) -> SampleGrid:
    """
    Spherical normals and volume fractions of the benchmark grid.

    Normals are ``(cos phi sin theta, sin phi sin theta, cos theta)`` for
    ``phi = pi j / (2M)``, ``j = 1..2M`` and ``theta = pi i / M``,
    ``i = 0..M``; poles are repeated for every ``phi``. Fractions combine
    a uniform set on ``[1e-4, 1 - 1e-4]`` with ``1e-k`` and ``1 - 1e-k``
    for ``k = 5..9``.
    """
    if m_normal < 1:
        raise ValueError("m_normal must be at least 1")
    if m_vof < 2:
        raise ValueError("m_vof must be at least 2")
    phi1 = np.pi * np.arange(1, 2 * m_normal + 1) / (2 * m_normal)
    theta1 = np.pi * np.arange(0, m_normal + 1) / m_normal
    phi, theta = (a.ravel() for a in np.meshgrid(phi1, theta1, indexing="ij"))
    normals = np.stack(
        [np.cos(phi) * np.sin(theta), np.sin(phi) * np.sin(theta), np.cos(theta)], axis=1
    )
    # parsed decimals are correctly rounded, unlike numpy's float power
    small = np.array([float(f"1e-{k}") for k in range(5, 10)])
    m = np.arange(1, m_vof + 1)
    mid = 1e-4 + (m - 1) * (1.0 - 2e-4) / (m_vof - 1)
    fractions = np.sort(np.concatenate([small, mid, 1.0 - small]))
    return SampleGrid(phi, theta, normals, fractions, m_normal, m_vof)


@njit(cache=True, _nrt=False)
def _sweep_into(geo, normals, base, volume, fractions, eps, eps0, n_max, newton_only, dedup_tol,
                ws, scratch, s_out, a_out, n_out, st_out, t_out):
    # no reference counting in here: the timed region then contains only
    # the precompute and positioning arithmetic
    nn = normals.shape[0]
    na = fractions.shape[0]
    for j in range(nn):
        n = normals[j]
        for i in range(na):
            t0 = _ticks()
            co = _coefficients_view(geo, n, base, volume, eps0, dedup_tol, ws)
            s, _, cnt, status, _ = _position(co, fractions[i], eps, eps0, n_max, newton_only, scratch)
            t1 = _ticks()
            if status == 3:
                achieved = 0.0 if s == co.s_min else 1.0
            else:
                achieved = _truncate(co, s)[0] / volume
            s_out[i, j] = s
            a_out[i, j] = achieved
            n_out[i, j] = cnt
            st_out[i, j] = status
            t_out[i, j] = t1 - t0


@njit(cache=True)
def _sweep(geo, normals, base, volume, fractions, eps, eps0, n_max, newton_only, dedup_tol):
    nn = normals.shape[0]
    na = fractions.shape[0]
    unit = np.empty((nn, 3))
    for j in range(nn):
        unit[j] = normals[j] / np.sqrt(np.sum(normals[j] ** 2))
    s_out = np.empty((na, nn))
    a_out = np.empty((na, nn))
    n_out = np.empty((na, nn), dtype=np.int64)
    st_out = np.empty((na, nn), dtype=np.int64)
    t_out = np.empty((na, nn), dtype=np.int64)
    ws = _workspace(geo)
    scratch = np.zeros((0, 3))
    _sweep_into(geo, unit, base, volume, fractions, eps, eps0, n_max, newton_only, dedup_tol,
                ws, scratch, s_out, a_out, n_out, st_out, t_out)
    return s_out, a_out, n_out, st_out, t_out


@dataclass
class BenchRecords:
    """Per-instance results, rows ordered by (alpha, phi, theta)."""

    shape: str
    alpha: np.ndarray
    phi: np.ndarray
    theta: np.ndarray
    s_star: np.ndarray
    alpha_achieved: np.ndarray
    n_trunc: np.ndarray
    status: np.ndarray
    time_ns: np.ndarray

    def __len__(self):
        return len(self.alpha)

    @classmethod
    def empty(cls, shape=""):
        f, i = np.empty(0), np.empty(0, dtype=np.int64)
        return cls(shape, f, f, f, f, f, i, i, f)

    def rows(self):
        for r in zip(self.alpha, self.phi, self.theta, self.s_star, self.alpha_achieved,
                     self.n_trunc, self.status, self.time_ns):
            yield (self.shape, *r)


@dataclass
class AggregateRow:
    shape: str
    method: str
    fractions: np.ndarray
    n_av_alpha: np.ndarray  # mean over normals, per fraction
    n_std_alpha: np.ndarray
    t_av_alpha: np.ndarray  # ns
    t_std_alpha: np.ndarray
    n_av: float  # mean over fractions of n_av_alpha
    t_av: float
    n_std: float
    t_std: float
    n_fallback: int
    n_exceeded: int
    heatmap: np.ndarray = field(repr=False)  # per-normal mean of n_trunc over fractions


def _cycles_per_ns():
    if not _HAVE_TSC:
        return 0.0
    _read_ticks()  # make sure the dispatcher is compiled before timing
    t0, c0 = time.perf_counter_ns(), _read_ticks()
    while time.perf_counter_ns() - t0 < 20_000_000:
        pass
    rate = (_read_ticks() - c0) / (time.perf_counter_ns() - t0)
    return rate if rate > 0 else 0.0


def run_benchmark(shape: Polyhedron, grid: SampleGrid, method="proposed", tol=TOLERANCE,
                  name="", eps0=ZERO_TOL, n_max=N_MAX):
    """
    Position the plane for every (normal, fraction) pair of ``grid``.

    Returns
    -------
    records : BenchRecords
    aggregate : AggregateRow
    """
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}")
    geo = shape.geometry
    base = shape.centroid.copy()
    dedup = eps0 * max(1.0, shape.diameter)
    wall = time.perf_counter_ns()
    s, a, n, st, ticks = _sweep(geo, grid.normals, base, shape.volume, grid.fractions, tol, eps0,
                                n_max, method == "newton", dedup)
    wall = time.perf_counter_ns() - wall
    rate = _cycles_per_ns()
    if rate > 0:
        t_ns = ticks / rate
    else:
        t_ns = np.full(ticks.shape, wall / max(ticks.size, 1))

    na, nn = s.shape
    records = BenchRecords(
        name,
        np.repeat(grid.fractions, nn),
        np.tile(grid.phi, na),
        np.tile(grid.theta, na),
        s.ravel(),
        a.ravel(),
        n.ravel(),
        st.ravel(),
        t_ns.ravel(),
    )
    return records, aggregate(records, method, tol, n_normals=nn)


def aggregate(records: BenchRecords, method="proposed", tol=TOLERANCE, n_normals=None) -> AggregateRow:
    """Two-pass aggregation of a complete sweep."""
    if n_normals is None:
        n_normals = int((records.alpha == records.alpha[0]).sum()) if len(records) else 0
    nn = n_normals
    na = len(records) // nn if nn else 0
    n = records.n_trunc.reshape(na, nn).astype(float)
    t = records.time_ns.reshape(na, nn)
    err = np.abs(records.alpha_achieved - records.alpha)
    return AggregateRow(
        records.shape,
        method,
        records.alpha.reshape(na, nn)[:, 0] if na else np.empty(0),
        n.mean(axis=1),
        n.std(axis=1),
        t.mean(axis=1),
        t.std(axis=1),
        float(n.mean(axis=1).mean()) if na else math.nan,
        float(t.mean(axis=1).mean()) if na else math.nan,
        float(n.std()) if na else math.nan,
        float(t.std()) if na else math.nan,
        int((records.status == Status.BISECTION_FALLBACK).sum()),
        int((err > tol).sum()),
        n.mean(axis=0),
    )


class StreamingAggregate:
    """
    Single-pass per-fraction means and deviations (Welford updates).

    Feed records in any order with :meth:`add`; results match
    :func:`aggregate` up to rounding.
    """

    def __init__(self, fractions):
        self.fractions = np.asarray(fractions, dtype=float)
        k = len(self.fractions)
        self.count = np.zeros(k, dtype=np.int64)
        self.mean = np.zeros((k, 2))
        self.m2 = np.zeros((k, 2))
        self.n_fallback = 0

    def add(self, alpha, n_trunc, time_ns, status=0):
        i = int(np.searchsorted(self.fractions, alpha))
        if i == len(self.fractions) or self.fractions[i] != alpha:
            raise KeyError(f"fraction {alpha} is not part of the grid")
        x = np.array([n_trunc, time_ns], dtype=float)
        self.count[i] += 1
        d = x - self.mean[i]
        self.mean[i] += d / self.count[i]
        self.m2[i] += d * (x - self.mean[i])
        self.n_fallback += int(status == Status.BISECTION_FALLBACK)

    @property
    def n_av_alpha(self):
        return self.mean[:, 0]

    @property
    def n_std_alpha(self):
        return np.sqrt(self.m2[:, 0] / self.count)

    @property
    def t_av_alpha(self):
        return self.mean[:, 1]

    @property
    def n_av(self):
        return float(self.mean[:, 0].mean())

    @property
    def t_av(self):
        return float(self.mean[:, 1].mean())


# --- output ----------------------------------------------------------------


def emit(records: BenchRecords, fmt, path):
    """Write per-instance records as CSV or JSON (a list of row objects)."""
    path = Path(path)
    if fmt == "csv":
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(COLUMNS)
            for r in records.rows():
                w.writerow([r[0], *(repr(float(v)) for v in r[1:6]), int(r[6]), int(r[7]), f"{r[8]:.1f}"])
    elif fmt == "json":
        rows = [
            dict(zip(COLUMNS, (r[0], *(float(v) for v in r[1:6]), int(r[6]), int(r[7]), float(r[8]))))
            for r in records.rows()
        ]
        path.write_text(json.dumps(rows))
    else:
        raise ValueError(f"unknown format {fmt!r}")


def read_csv(path) -> BenchRecords:
    with Path(path).open(newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        if tuple(header) != COLUMNS:
            raise ValueError(f"unexpected header {header}")
        rows = list(rd)
    if not rows:
        return BenchRecords.empty()
    cols = list(zip(*rows))
    f = lambda c: np.array(c, dtype=float)  # noqa: E731
    i = lambda c: np.array(c, dtype=np.int64)  # noqa: E731
    return BenchRecords(cols[0][0], f(cols[1]), f(cols[2]), f(cols[3]), f(cols[4]), f(cols[5]),
                        i(cols[6]), i(cols[7]), f(cols[8]))


def emit_aggregates(agg: AggregateRow, grid: SampleGrid, path):
    """
    Write ``<path>.alpha.csv`` (per-fraction averages) and
    ``<path>.heatmap.csv`` (phi, theta, mean truncations over fractions).
    """
    path = Path(path)
    per_alpha = path.with_name(path.name + ".alpha.csv")
    with per_alpha.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["shape", "method", "alpha", "n_av", "n_std", "t_av_ns", "t_std_ns"])
        for row in zip(agg.fractions, agg.n_av_alpha, agg.n_std_alpha, agg.t_av_alpha, agg.t_std_alpha):
            w.writerow([agg.shape, agg.method, *(repr(float(v)) for v in row)])
    heat = path.with_name(path.name + ".heatmap.csv")
    with heat.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["phi", "theta", "n_av"])
        for row in zip(grid.phi, grid.theta, agg.heatmap):
            w.writerow([repr(float(v)) for v in row])
    return per_alpha, heat
