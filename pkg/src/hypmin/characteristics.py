"""Travel-time maps, characteristic flows, and entry/exit times on [0,1].

A SpeedPair holds one negative speed lambda1 and one positive speed lambda2.
The travel-time maps

    phi1(x) = int_0^x 1/(-lambda1),   phi2(x) = int_0^x 1/lambda2

are strictly increasing, so every flow evaluation reduces to a monotone
table lookup plus bisection.  Outside [0,1] the speeds are extended by
their boundary values, which extends phi1, phi2 linearly and makes the
flow maps total.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .coeffs import CoefficientSpec
from .errors import DomainError, InvalidSpeedsError

__all__ = ["SpeedPair", "phi", "phi_inv", "flow", "entry_exit"]

_BISECT_ITERS = 64


def _bisect_increasing(fun, v, lo: float, hi: float):
    """Solve fun(x) = v for an increasing fun by vectorized bisection."""
    v = np.asarray(v, dtype=float)
    a = np.full_like(v, lo)
    b = np.full_like(v, hi)
    for _ in range(_BISECT_ITERS):
        mid = 0.5 * (a + b)
        below = np.asarray(fun(mid)) < v
        a = np.where(below, mid, a)
        b = np.where(below, b, mid)
    return 0.5 * (a + b)


@dataclass(frozen=True)
class SpeedPair:
    """Speeds (lambda1 < 0 < lambda2) with precomputed travel-time tables."""

    lambda1: CoefficientSpec
    lambda2: CoefficientSpec
    table_nodes: np.ndarray = field(repr=False)
    w1: np.ndarray = field(repr=False)  # 1/(-lambda1) at table nodes
    w2: np.ndarray = field(repr=False)  # 1/lambda2 at table nodes
    phi1_table: np.ndarray = field(repr=False)
    phi2_table: np.ndarray = field(repr=False)
    eps_bound: float

    @staticmethod
    def build(lambda1: CoefficientSpec, lambda2: CoefficientSpec,
              table_n: int = 4096) -> "SpeedPair":
        nodes = np.linspace(0.0, 1.0, table_n + 1)
        l1 = np.asarray(lambda1(nodes), dtype=float)
        l2 = np.asarray(lambda2(nodes), dtype=float)
        if np.any(l1 >= 0.0):
            raise InvalidSpeedsError("lambda1 must be negative on [0,1]")
        if np.any(l2 <= 0.0):
            raise InvalidSpeedsError("lambda2 must be positive on [0,1]")
        w1 = 1.0 / (-l1)
        w2 = 1.0 / l2
        ht = 1.0 / table_n
        phi1 = np.concatenate(([0.0], np.cumsum(0.5 * ht * (w1[1:] + w1[:-1]))))
        phi2 = np.concatenate(([0.0], np.cumsum(0.5 * ht * (w2[1:] + w2[:-1]))))
        return SpeedPair(lambda1, lambda2, nodes, w1, w2, phi1, phi2,
                         eps_bound=float(min((-l1).min(), l2.min())))

    @property
    def T1(self) -> float:
        return float(self.phi1_table[-1])

    @property
    def T2(self) -> float:
        return float(self.phi2_table[-1])

    def speed(self, i: int, x):
        """lambda_i at x, constantly extended outside [0,1]."""
        spec = self.lambda1 if i == 1 else self.lambda2
        return spec(np.clip(np.asarray(x, dtype=float), 0.0, 1.0))

    def _w(self, i: int, x):
        lam = self.speed(i, x)
        return 1.0 / (-lam) if i == 1 else 1.0 / lam

    def phi_eval(self, i: int, x):
        """Travel-time map phi_i at any real x (linear beyond [0,1])."""
        x = np.asarray(x, dtype=float)
        tab = self.phi1_table if i == 1 else self.phi2_table
        wtab = self.w1 if i == 1 else self.w2
        nodes = self.table_nodes
        ht = nodes[1] - nodes[0]
        k = np.clip(((x / ht).astype(int)), 0, len(nodes) - 2)
        base = tab[k] + (x - nodes[k]) * 0.5 * (wtab[k] + self._w(i, x))
        out = np.where(x < 0.0, x * wtab[0],
                       np.where(x > 1.0, tab[-1] + (x - 1.0) * wtab[-1], base))
        return out if out.ndim else float(out)

    def phi_inv_ext(self, i: int, v):
        """Inverse of phi_i on all of R (exact linear branches beyond [0,T_i])."""
        v = np.asarray(v, dtype=float)
        T = self.T1 if i == 1 else self.T2
        wtab = self.w1 if i == 1 else self.w2
        core = _bisect_increasing(lambda x: self.phi_eval(i, x),
                                  np.clip(v, 0.0, T), 0.0, 1.0)
        out = np.where(v < 0.0, v / wtab[0],
                       np.where(v > T, 1.0 + (v - T) / wtab[-1], core))
        return out if out.ndim else float(out)

    def psi_eval(self, x):
        """phi1 + phi2, the round-trip travel time from 0 to x and back."""
        return self.phi_eval(1, x) + self.phi_eval(2, x)

    def psi_inv(self, v):
        """Inverse of psi on [0, T1+T2]."""
        out = _bisect_increasing(self.psi_eval, np.asarray(v, dtype=float), 0.0, 1.0)
        return out if out.ndim else float(out)

    def table_nodes_inverse(self, i: int, v):
        """Fast approximate inverse of phi_i by lookup-table interpolation.

        Accuracy is O(table spacing squared); bulk geometry only, the
        tolerance-guaranteed inverse is phi_inv.
        """
        v = np.asarray(v, dtype=float)
        tab = self.phi1_table if i == 1 else self.phi2_table
        wtab = self.w1 if i == 1 else self.w2
        T = tab[-1]
        core = np.interp(np.clip(v, 0.0, T), tab, self.table_nodes)
        return np.where(v < 0.0, v / wtab[0],
                        np.where(v > T, 1.0 + (v - T) / wtab[-1], core))


def phi(speeds: SpeedPair, i: int, x):
    """phi_i(x) for x in [0,1]; phi_i(1) is the crossing time T_i."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0.0) or np.any(x > 1.0):
        raise DomainError("phi evaluated outside [0,1]")
    return speeds.phi_eval(i, x)


def phi_inv(speeds: SpeedPair, i: int, v):
    """Unique x in [0,1] with phi_i(x) = v, for v in [0, T_i]."""
    v = np.asarray(v, dtype=float)
    T = speeds.T1 if i == 1 else speeds.T2
    slack = 1e-12 * max(T, 1.0)
    if np.any(v < -slack) or np.any(v > T + slack):
        raise DomainError(f"phi_inv argument outside [0, T_{i}]")
    return speeds.phi_inv_ext(i, np.clip(v, 0.0, T))


def flow(speeds: SpeedPair, i: int, s, t, x):
    """Position at time s of the characteristic of lambda_i through (t, x).

    chi2(s;t,x) = phi2^{-1}(phi2(x) + (s-t)) and
    chi1(s;t,x) = phi1^{-1}(phi1(x) - (s-t)); total thanks to the constant
    speed extension.
    """
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if i == 1:
        return speeds.phi_inv_ext(1, speeds.phi_eval(1, x) - (s - t))
    return speeds.phi_inv_ext(2, speeds.phi_eval(2, x) + (s - t))


def entry_exit(speeds: SpeedPair, i: int, t, x):
    """Times at which the characteristic of lambda_i through (t, x) crosses
    the inflow and outflow ends of [0,1].

    Component 1 enters at x=1 and exits at x=0; component 2 enters at x=0
    and exits at x=1.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x < 0.0) or np.any(x > 1.0):
        raise DomainError("entry_exit needs x in [0,1]")
    t = np.asarray(t, dtype=float)
    if i == 1:
        p = speeds.phi_eval(1, x)
        s_in = t + p - speeds.T1
        s_out = t + p
    else:
        p = speeds.phi_eval(2, x)
        s_in = t - p
        s_out = t + speeds.T2 - p
    if s_in.ndim == 0:
        return float(s_in), float(s_out)
    return s_in, s_out
