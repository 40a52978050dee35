"""Exact monomial polynomial algebra and analytic state trajectories.

Every control polynomial lives on a phase-local normalized time s in [0, 1].
States are obtained from the controls by exact antiderivatives, so the
momentum dynamics hold identically on every segment.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from typing import Mapping, NamedTuple, Sequence

import numpy as np
from numpy.polynomial import polynomial as P

from src.centroidal_model import CentroidalState, ModelParams
from src.errors import ScheduleError


@dataclass(frozen=True, eq=False)
class Poly:
    """sum_k coeffs[k] * s**k."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coeffs, dtype=float)).copy()
        if c.size == 0:
            c = np.zeros(1)
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def const(cls, value: float) -> "Poly":
        return cls(np.array([float(value)]))

    @property
    def degree(self) -> int:
        return len(self.trimmed().coeffs) - 1

    def trimmed(self) -> "Poly":
        return Poly(P.polytrim(self.coeffs, tol=0))

    def __call__(self, s):
        return P.polyval(s, self.coeffs)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Poly):
            return NotImplemented
        a, b = self.trimmed().coeffs, other.trimmed().coeffs
        return a.shape == b.shape and bool(np.all(a == b))

    def __hash__(self):
        return hash(tuple(self.trimmed().coeffs))

    def __add__(self, other: "Poly") -> "Poly":
        return Poly(P.polyadd(self.coeffs, other.coeffs))

    def __sub__(self, other: "Poly") -> "Poly":
        return Poly(P.polysub(self.coeffs, other.coeffs))

    def __neg__(self) -> "Poly":
        return Poly(-self.coeffs)

    def __mul__(self, other: "Poly") -> "Poly":
        return multiply(self, other)

    def scale(self, factor: float) -> "Poly":
        return Poly(self.coeffs * factor)

    def derivative(self) -> "Poly":
        return Poly(P.polyder(self.coeffs))

    def antiderivative(self) -> "Poly":
        return antiderivative(self)

    def compose_affine(self, alpha: float, beta: float) -> "Poly":
        """Return q(s) = p(alpha + beta*s)."""
        inner = np.array([alpha, beta], dtype=float)
        out = np.array([self.coeffs[-1]])
        for c in self.coeffs[-2::-1]:
            out = P.polyadd(P.polymul(out, inner), [c])
        return Poly(out)


def eval_poly(p: Poly, s):
    return p(s)


def multiply(p: Poly, q: Poly) -> Poly:
    return Poly(P.polymul(p.coeffs, q.coeffs))


def antiderivative(p: Poly) -> Poly:
    """Antiderivative vanishing at s=0."""
    return Poly(P.polyint(p.coeffs, lbnd=0.0))


@dataclass(frozen=True, eq=False)
class PolyVec3:
    x: Poly
    y: Poly
    z: Poly

    @classmethod
    def from_coeffs(cls, cx, cy, cz) -> "PolyVec3":
        return cls(Poly(cx), Poly(cy), Poly(cz))

    @classmethod
    def const(cls, v) -> "PolyVec3":
        v = np.asarray(v, dtype=float).reshape(3)
        return cls(Poly.const(v[0]), Poly.const(v[1]), Poly.const(v[2]))

    @classmethod
    def zero(cls) -> "PolyVec3":
        return cls.const(np.zeros(3))

    @property
    def components(self) -> tuple[Poly, Poly, Poly]:
        return (self.x, self.y, self.z)

    @property
    def degree(self) -> int:
        return max(c.degree for c in self.components)

    def __call__(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        return np.stack([c(s) for c in self.components], axis=-1)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PolyVec3):
            return NotImplemented
        return all(a == b for a, b in zip(self.components, other.components))

    __hash__ = None

    def __add__(self, other: "PolyVec3") -> "PolyVec3":
        return PolyVec3(*(a + b for a, b in zip(self.components, other.components)))

    def __sub__(self, other: "PolyVec3") -> "PolyVec3":
        return PolyVec3(*(a - b for a, b in zip(self.components, other.components)))

    def scale(self, factor: float) -> "PolyVec3":
        return PolyVec3(*(c.scale(factor) for c in self.components))

    def derivative(self) -> "PolyVec3":
        return PolyVec3(*(c.derivative() for c in self.components))

    def antiderivative(self) -> "PolyVec3":
        return PolyVec3(*(antiderivative(c) for c in self.components))

    def compose_affine(self, alpha: float, beta: float) -> "PolyVec3":
        return PolyVec3(*(c.compose_affine(alpha, beta) for c in self.components))


def cross(a: PolyVec3, b: PolyVec3) -> PolyVec3:
    return PolyVec3(
        a.y * b.z - a.z * b.y,
        a.z * b.x - a.x * b.z,
        a.x * b.y - a.y * b.x,
    )


@dataclass(frozen=True, eq=False)
class PolySegment:
    """Polynomial valid on [t_a, t_b) with s = (t - origin) / span."""

    t_a: float
    t_b: float
    poly: PolyVec3
    origin: float
    span: float

    def local(self, t):
        return (np.asarray(t, dtype=float) - self.origin) / self.span

    def __call__(self, t) -> np.ndarray:
        return self.poly(self.local(t))


class PiecewisePoly:
    """Ordered, non-overlapping polynomial segments; zero outside them.

    Intervals are half-open, except that the end of the last segment is
    included so the trajectory is defined at the horizon end.
    """

    def __init__(self, segments: Sequence[PolySegment]):
        segs = sorted(segments, key=lambda s: s.t_a)
        for seg in segs:
            if not seg.t_b > seg.t_a:
                raise ScheduleError(f"segment [{seg.t_a}, {seg.t_b}) is empty")
        for prev, nxt in zip(segs, segs[1:]):
            if nxt.t_a < prev.t_b - 1e-12:
                raise ScheduleError(
                    f"segments [{prev.t_a}, {prev.t_b}) and [{nxt.t_a}, {nxt.t_b}) overlap"
                )
        self.segments: tuple[PolySegment, ...] = tuple(segs)
        self._starts = [s.t_a for s in segs]

    @property
    def t_start(self) -> float:
        return self.segments[0].t_a

    @property
    def t_end(self) -> float:
        return self.segments[-1].t_b

    def segment_at(self, t: float) -> PolySegment | None:
        i = bisect.bisect_right(self._starts, t) - 1
        if i < 0:
            return None
        seg = self.segments[i]
        if t < seg.t_b or (i == len(self.segments) - 1 and t == seg.t_b):
            return seg
        return None

    def __call__(self, t: float) -> np.ndarray:
        seg = self.segment_at(float(t))
        if seg is None:
            return np.zeros(3)
        return seg(t)

    def sample(self, times) -> np.ndarray:
        return np.array([self(t) for t in np.asarray(times, dtype=float)])

    def derivative(self) -> "PiecewisePoly":
        return PiecewisePoly([
            PolySegment(s.t_a, s.t_b, s.poly.derivative().scale(1.0 / s.span), s.origin, s.span)
            for s in self.segments
        ])

    def restrict(self, t0: float, t1: float) -> "PiecewisePoly":
        """Keep only the part of the trajectory inside [t0, t1]."""
        out = []
        for s in self.segments:
            a, b = max(s.t_a, t0), min(s.t_b, t1)
            if b > a:
                out.append(PolySegment(a, b, s.poly, s.origin, s.span))
        return PiecewisePoly(out)


@dataclass(frozen=True, eq=False)
class PhaseControl:
    """Phase-local control polynomials over s in [0, 1] on [t_start, t_end]."""

    t_start: float
    t_end: float
    force: PolyVec3
    torque: PolyVec3
    point: PolyVec3


class StatePolys(NamedTuple):
    l: PiecewisePoly
    r: PiecewisePoly
    k: PiecewisePoly
    l_dot: PiecewisePoly
    k_dot: PiecewisePoly


def partition_times(intervals: Sequence[tuple[float, float]], t0: float, t1: float) -> np.ndarray:
    """Sorted boundaries splitting [t0, t1] so every piece has a fixed active set."""
    pts = {t0, t1}
    for a, b in intervals:
        for t in (a, b):
            if t0 < t < t1:
                pts.add(t)
    return np.array(sorted(pts))


def build_state_polys(
    phases: Sequence,
    controls: Mapping[int, PhaseControl],
    x0: CentroidalState,
    params: ModelParams,
    t0: float | None = None,
    t1: float | None = None,
) -> StatePolys:
    """Integrate the momentum dynamics analytically over the phase controls.

    `phases` are objects with t_start/t_end (or (t_start, t_end) tuples);
    `controls[i]` holds the polynomials of phase i.
    """
    intervals = [
        (p.t_start, p.t_end) if hasattr(p, "t_start") else (float(p[0]), float(p[1]))
        for p in phases
    ]
    for i in range(len(intervals)):
        if i not in controls:
            raise ScheduleError(f"no control polynomials for phase {i}")
    if t0 is None:
        t0 = min(a for a, _ in intervals) if intervals else 0.0
    if t1 is None:
        t1 = max(b for _, b in intervals) if intervals else 0.0
    bounds = partition_times(intervals, t0, t1)

    mass = params.mass
    weight = PolyVec3.const(params.weight)
    l_a, r_a, k_a = x0.l.copy(), x0.r.copy(), x0.k.copy()
    segs = {name: [] for name in StatePolys._fields}

    for a, b in zip(bounds[:-1], bounds[1:]):
        span = b - a
        mid = 0.5 * (a + b)
        f_sum = weight
        k_rate = PolyVec3.zero()
        active = [i for i, (ta, tb) in enumerate(intervals) if ta <= mid < tb]
        local = []
        for i in active:
            ctl = controls[i]
            ph_span = ctl.t_end - ctl.t_start
            alpha, beta = (a - ctl.t_start) / ph_span, span / ph_span
            local.append((
                ctl.force.compose_affine(alpha, beta),
                ctl.torque.compose_affine(alpha, beta),
                ctl.point.compose_affine(alpha, beta),
            ))
        for f, _, _ in local:
            f_sum = f_sum + f
        l_poly = PolyVec3.const(l_a) + f_sum.antiderivative().scale(span)
        r_poly = PolyVec3.const(r_a) + l_poly.antiderivative().scale(span / mass)
        for f, tau, p in local:
            k_rate = k_rate + tau + cross(p - r_poly, f)
        k_poly = PolyVec3.const(k_a) + k_rate.antiderivative().scale(span)

        for name, poly in (("l", l_poly), ("r", r_poly), ("k", k_poly),
                           ("l_dot", f_sum), ("k_dot", k_rate)):
            segs[name].append(PolySegment(a, b, poly, a, span))
        l_a, r_a, k_a = l_poly(1.0), r_poly(1.0), k_poly(1.0)

    return StatePolys(**{name: PiecewisePoly(s) for name, s in segs.items()})
