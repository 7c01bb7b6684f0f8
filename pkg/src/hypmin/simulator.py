"""Time integration of the physical system and the canonical explicit solution.

The physical system is integrated by first-order upwind differences with
explicit Euler in time and explicit source terms; component 1 flows in from
x=1 (control), component 2 from x=0 (reflection q*y1(t,0), q=0 by default).
The canonical target system is evaluated exactly through the characteristic
formulas plus a quadrature for the lower component's source integral.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from .coeffs import CoefficientSpec, Grid
from .characteristics import SpeedPair
from .errors import CFLError, DivergenceError, DomainError, UndefinedRateError
from .kernels import FeedbackLaw

__all__ = [
    "SystemSpec",
    "BoundaryReflection",
    "SimResult",
    "simulate",
    "canonical_solution",
    "growth_rate",
    "l2_norm",
    "export_sim_csv",
]


@dataclass(frozen=True)
class SystemSpec:
    """Speeds, internal couplings, and the x=0 reflection coefficient q."""

    speeds: SpeedPair
    a: CoefficientSpec
    b: CoefficientSpec
    c: CoefficientSpec
    d: CoefficientSpec
    q: float = 0.0


@dataclass(frozen=True)
class BoundaryReflection:
    """Static output feedback at x=1: y1(t,1) = k * y2(t,1)."""

    k: float


Control = Union[Callable[[float], float], FeedbackLaw, BoundaryReflection, None]


@dataclass
class SimResult:
    grid: Grid
    times: np.ndarray = field(repr=False)
    snapshots: list = field(repr=False)  # per time: (y1, y2) node arrays
    control_trace: np.ndarray = field(repr=False)
    l2_trace: np.ndarray = field(repr=False)
    linf_trace: np.ndarray = field(repr=False)
    scheme_meta: dict = field(default_factory=dict)


def l2_norm(y1: np.ndarray, y2: np.ndarray, h: float) -> float:
    return float(np.sqrt(np.trapezoid(y1 * y1 + y2 * y2, dx=h)))


def simulate(system: SystemSpec, control: Control, y0, T: float, grid: Grid,
             cfl: float = 0.9) -> SimResult:
    """Run the upwind scheme up to time T from node-sampled initial data y0.

    control is an open-loop signal u(t), a FeedbackLaw (closed loop, gains
    integrated by trapezoid each step), a BoundaryReflection, or None (u=0).
    """
    if not 0.0 < cfl <= 1.0:
        raise CFLError(f"cfl must lie in (0,1], got {cfl}")
    if T <= 0.0:
        raise DomainError(f"horizon must be positive, got {T}")
    n = grid.n
    h = grid.h
    nodes = grid.nodes
    l1 = np.asarray(system.speeds.speed(1, nodes), dtype=float)
    l2 = np.asarray(system.speeds.speed(2, nodes), dtype=float)
    max_speed = float(max(np.max(-l1), np.max(l2)))
    dt = cfl * h / max_speed
    steps = max(1, math.ceil(T / dt - 1e-12))
    dt = T / steps
    if dt * max_speed / h > 1.0 + 1e-9:
        raise CFLError("time step violates the CFL bound")

    a = np.asarray(system.a(nodes), dtype=float)
    b = np.asarray(system.b(nodes), dtype=float)
    c = np.asarray(system.c(nodes), dtype=float)
    d = np.asarray(system.d(nodes), dtype=float)
    q = system.q

    y1 = np.array(y0[0], dtype=float)
    y2 = np.array(y0[1], dtype=float)
    if y1.shape != (n + 1,) or y2.shape != (n + 1,):
        raise DomainError("initial data does not match the grid")

    def boundary_u(t_new, y1_new, y2_new):
        if control is None:
            return 0.0
        if isinstance(control, FeedbackLaw):
            return control.control(y1_new, y2_new)
        if isinstance(control, BoundaryReflection):
            return control.k * y2_new[n]
        return float(control(t_new))

    times = np.linspace(0.0, T, steps + 1)
    snapshots = [(y1.copy(), y2.copy())]
    u0 = boundary_u(0.0, y1, y2)
    control_trace = np.empty(steps + 1)
    control_trace[0] = u0
    l2_trace = np.empty(steps + 1)
    linf_trace = np.empty(steps + 1)
    l2_trace[0] = l2_norm(y1, y2, h)
    linf_trace[0] = float(max(np.max(np.abs(y1)), np.max(np.abs(y2))))

    nu = dt / h
    for m in range(1, steps + 1):
        with np.errstate(invalid="ignore", over="ignore"):
            s1 = a * y1 + b * y2
            s2 = c * y1 + d * y2
            y1n = y1.copy()
            y2n = y2.copy()
            # lambda1 < 0: information comes from the right; x=1 is the inflow.
            y1n[:-1] = y1[:-1] - nu * l1[:-1] * (y1[1:] - y1[:-1]) + dt * s1[:-1]
            # lambda2 > 0: information comes from the left; x=0 is the inflow.
            y2n[1:] = y2[1:] - nu * l2[1:] * (y2[1:] - y2[:-1]) + dt * s2[1:]
            y1n[-1] = y1[-1]  # provisional, lets the feedback quadrature close
            y2n[0] = q * y1n[0]
            u = boundary_u(times[m], y1n, y2n)
            y1n[-1] = u
        if not (np.isfinite(y1n).all() and np.isfinite(y2n).all() and np.isfinite(u)):
            raise DivergenceError(f"non-finite state at step {m}", step=m)
        y1, y2 = y1n, y2n
        control_trace[m] = u
        snapshots.append((y1.copy(), y2.copy()))
        l2_trace[m] = l2_norm(y1, y2, h)
        linf_trace[m] = float(max(np.max(np.abs(y1)), np.max(np.abs(y2))))

    meta = {"cfl": cfl, "dt": dt, "max_speed": max_speed,
            "scheme": "upwind-explicit-euler"}
    return SimResult(grid=grid, times=times, snapshots=snapshots,
                     control_trace=control_trace, l2_trace=l2_trace,
                     linf_trace=linf_trace, scheme_meta=meta)


def _boundary_trace_y1(speeds: SpeedPair, y10: np.ndarray, g_nodes: np.ndarray,
                       uhat, s: np.ndarray) -> np.ndarray:
    """Upper-component trace at x=0: initial data before time T1, control after."""
    T1 = speeds.T1
    out = np.empty_like(s)
    initial = s < T1
    if initial.any():
        xini = speeds.phi_inv_ext(1, s[initial])
        out[initial] = np.interp(xini, g_nodes, y10)
    late = ~initial
    if late.any():
        if uhat is None:
            out[late] = 0.0
        else:
            out[late] = np.asarray(uhat(s[late] - T1), dtype=float)
    return out


def canonical_solution(speeds: SpeedPair, g: np.ndarray, q: float, y0hat,
                       uhat, t: float, x) -> tuple:
    """Evaluate the canonical system at time t and position(s) x.

    g and the initial pair y0hat are node samples on a uniform grid over
    [0,1]; uhat is a control signal (callable, or None for zero).  The upper
    component is pure transport; the lower one adds the quadrature of
    g(chi2(s;t,x)) times the upper trace at x=0, with step at most
    h/max|speeds| along s, plus the q-reflected inflow when q is nonzero.
    """
    if t < 0.0:
        raise DomainError("canonical_solution needs t >= 0")
    g = np.asarray(g, dtype=float)
    npts = g.shape[0]
    g_nodes = np.linspace(0.0, 1.0, npts)
    h = g_nodes[1] - g_nodes[0]
    y10 = np.asarray(y0hat[0], dtype=float)
    y20 = np.asarray(y0hat[1], dtype=float)
    l1max = float(np.max(-np.asarray(speeds.speed(1, g_nodes))))
    l2max = float(np.max(np.asarray(speeds.speed(2, g_nodes))))
    step = h / max(l1max, l2max)

    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(xs < 0.0) or np.any(xs > 1.0):
        raise DomainError("canonical_solution needs x in [0,1]")
    out1 = np.empty_like(xs)
    out2 = np.empty_like(xs)
    T1 = speeds.T1
    for idx, xv in enumerate(xs):
        s1 = t + float(speeds.phi_eval(1, xv)) - T1
        if s1 < 0.0:
            out1[idx] = np.interp(float(speeds.phi_inv_ext(1, speeds.phi_eval(1, xv) + t)),
                                  g_nodes, y10)
        elif uhat is None:
            out1[idx] = 0.0
        else:
            out1[idx] = float(uhat(s1))

        p2x = float(speeds.phi_eval(2, xv))
        s2 = t - p2x
        if s2 <= 0.0:
            base = float(np.interp(float(speeds.phi_inv_ext(2, p2x - t)), g_nodes, y20))
            lo = 0.0
        else:
            lo = s2
            if q != 0.0:
                base = q * float(_boundary_trace_y1(speeds, y10, g_nodes, uhat,
                                                    np.array([s2]))[0])
            else:
                base = 0.0
        if t - lo <= 0.0:
            out2[idx] = base
            continue
        ks = max(2, math.ceil((t - lo) / step))
        ss = np.linspace(lo, t, ks + 1)
        chi = speeds.phi_inv_ext(2, p2x + ss - t)
        integrand = np.interp(chi, g_nodes, g) * _boundary_trace_y1(
            speeds, y10, g_nodes, uhat, ss)
        out2[idx] = base + float(np.trapezoid(integrand, dx=(t - lo) / ks))
    if np.isscalar(x) or np.asarray(x).ndim == 0:
        return float(out1[0]), float(out2[0])
    return out1, out2


def growth_rate(result: SimResult, window) -> float:
    """Least-squares slope of log L2-norm over the given (t0, t1) window."""
    t0, t1 = window
    mask = (result.times >= t0) & (result.times <= t1)
    if int(mask.sum()) < 5:
        raise UndefinedRateError("growth window contains fewer than 5 snapshots")
    norms = result.l2_trace[mask]
    if np.any(norms <= 0.0):
        raise UndefinedRateError("zero norm inside the growth window")
    ts = result.times[mask]
    slope = np.polyfit(ts, np.log(norms), 1)[0]
    return float(slope)


def export_sim_csv(result: SimResult, outdir, max_snapshots: int = 20) -> list:
    """Write a time-series CSV and up to max_snapshots snapshot CSVs.

    Returns the list of written file paths; snapshots.csv maps each snapshot
    file to its time.
    """
    os.makedirs(outdir, exist_ok=True)
    written = []
    ts_path = os.path.join(outdir, "timeseries.csv")
    with open(ts_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "u", "l2_norm", "linf_norm"])
        for k, t in enumerate(result.times):
            w.writerow([f"{t:.12g}", f"{result.control_trace[k]:.12g}",
                        f"{result.l2_trace[k]:.12g}", f"{result.linf_trace[k]:.12g}"])
    written.append(ts_path)

    count = min(max_snapshots, len(result.times))
    picks = np.unique(np.linspace(0, len(result.times) - 1, count).astype(int))
    index_path = os.path.join(outdir, "snapshots.csv")
    with open(index_path, "w", newline="") as fh:
        wI = csv.writer(fh)
        wI.writerow(["file", "t"])
        for k in picks:
            name = f"snapshot_{k:06d}.csv"
            path = os.path.join(outdir, name)
            y1, y2 = result.snapshots[k]
            with open(path, "w", newline="") as fs:
                w = csv.writer(fs)
                w.writerow(["x", "y1", "y2"])
                for i, xv in enumerate(result.grid.nodes):
                    w.writerow([f"{xv:.12g}", f"{y1[i]:.12g}", f"{y2[i]:.12g}"])
            wI.writerow([name, f"{result.times[k]:.12g}"])
            written.append(path)
    written.append(index_path)
    return written
