"""Assembly of the momentum-tracking NLP over one time window.

The objective is evaluated in closed form: linear momentum and CoM at any
time are affine in the force coefficients, and angular momentum at the knots
is accumulated with Gauss-Legendre quadrature that is exact for the
polynomial degree of its rate. The gradient is back-propagated through the
same expressions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from src.centroidal_model import CentroidalState
from src.contact_plan import TIME_TOL
from src.errors import InvalidArgumentError
from src.logger import logger
from src.momentum_opt.layout import N_CHANNELS, DecisionLayout, WindowPhase, layout_for
from src.scenario import WEIGHT_KEYS, Scenario

# Knot times are merged after rounding to this many decimals
KNOT_DECIMALS = 12


@dataclass(frozen=True, eq=False)
class ReferenceTrajectory:
    """Desired CoM and momenta, linearly interpolated between samples."""

    times: np.ndarray
    r: np.ndarray
    l: np.ndarray
    k: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float).reshape(-1)
        if times.size < 1 or np.any(np.diff(times) <= 0):
            raise InvalidArgumentError("reference times must be strictly increasing")
        object.__setattr__(self, "times", times)
        for name in ("r", "l", "k"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (times.size, 3):
                raise InvalidArgumentError(
                    f"reference {name} has shape {arr.shape}, expected ({times.size}, 3)"
                )
            object.__setattr__(self, name, arr)

    @classmethod
    def hold(cls, state: CentroidalState, t0: float, t1: float) -> "ReferenceTrajectory":
        """Constant reference equal to state over [t0, t1]."""
        times = np.array([t0, t1]) if t1 > t0 else np.array([t0])
        n = times.size
        return cls(times, np.tile(state.r, (n, 1)), np.tile(state.l, (n, 1)), np.tile(state.k, (n, 1)))

    def covers(self, t0: float, t1: float) -> bool:
        return self.times[0] <= t0 + 1e-9 and self.times[-1] >= t1 - 1e-9

    def sample(self, times) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        times = np.asarray(times, dtype=float)
        out = []
        for arr in (self.r, self.l, self.k):
            out.append(np.column_stack([np.interp(times, self.times, arr[:, a]) for a in range(3)]))
        return tuple(out)

    def to_document(self) -> dict:
        return {"times": self.times, "com": self.r, "linear_momentum": self.l,
                "angular_momentum": self.k}

    @classmethod
    def from_document(cls, doc: dict) -> "ReferenceTrajectory":
        return cls(doc["times"], doc["com"], doc["linear_momentum"], doc["angular_momentum"])


def knot_grid(phases: list[WindowPhase], t0: float, t1: float, knots_per_phase: int) -> np.ndarray:
    """Uniform knots inside every phase plus the phase and window boundaries."""
    pts = [np.array([t0, t1])]
    for wp in phases:
        pts.append(np.linspace(wp.t_a, wp.t_b, knots_per_phase + 2))
    grid = np.concatenate(pts)
    grid = grid[(grid >= t0) & (grid <= t1)]
    _, keep = np.unique(np.round(grid, KNOT_DECIMALS), return_index=True)
    return np.sort(grid[keep])


class RowLabel(NamedTuple):
    kind: str
    phase: int
    time: float
    detail: str


class _Samples:
    """Sample times with their (sample, active phase) pairs and integral rows."""

    def __init__(self, layout: DecisionLayout, times: np.ndarray, t_close: float, mass: float):
        n_phases, n = layout.n_phases, layout.n_coeffs
        self.times = times
        pairs = [
            (i, p)
            for i, t in enumerate(times)
            for p, wp in enumerate(layout.phases)
            if wp.t_a <= t < wp.t_b or (t == t_close and wp.t_b == t_close)
        ]
        self.sample = np.array([i for i, _ in pairs], dtype=int)
        self.pos = np.array([p for _, p in pairs], dtype=int)
        t_a = np.array([wp.t_a for wp in layout.phases])
        span = np.array([wp.span for wp in layout.phases])
        s = np.clip((times[self.sample] - t_a[self.pos]) / span[self.pos], 0.0, 1.0)
        self.phi = s[:, None] ** np.arange(n)

        k = np.arange(n)
        g1 = np.zeros((times.size, n_phases, n))
        g2 = np.zeros((times.size, n_phases, n))
        for p, wp in enumerate(layout.phases):
            d = wp.span
            sp = np.clip((times - wp.t_a) / d, 0.0, 1.0)[:, None]
            g1[:, p, :] = d * sp ** (k + 1) / (k + 1)
            inside = d * d * sp ** (k + 2) / ((k + 1) * (k + 2))
            after = d * d / ((k + 1) * (k + 2)) + (times - wp.t_b)[:, None] * d / (k + 1)
            g2[:, p, :] = np.where((times > wp.t_b)[:, None], after, inside)
        self.g1 = g1.reshape(times.size, -1)
        self.g2 = g2.reshape(times.size, -1) / mass


class NlpProblem:
    """Momentum tracking NLP with linear inequality and equality rows."""

    def __init__(self, scenario: Scenario, layout: DecisionLayout, refs: ReferenceTrajectory,
                 x0: CentroidalState, t0: float, t1: float):
        self.scenario = scenario
        self.layout = layout
        self.x0 = x0
        self.t0, self.t1 = float(t0), float(t1)
        opt = scenario.optimizer
        self.knots = knot_grid(list(layout.phases), self.t0, self.t1, opt.knots_per_phase)
        if not refs.covers(self.t0, self.t1):
            raise InvalidArgumentError(
                f"reference grid mismatch: samples span [{refs.times[0]}, {refs.times[-1]}], "
                f"window needs [{self.t0}, {self.t1}]"
            )
        self.refs = refs
        self.r_des, self.l_des, self.k_des = refs.sample(self.knots)

        params = scenario.params
        self.mass = params.mass
        self.weight = params.weight
        self.reg = opt.regularization
        self.w = scenario.weights.as_dict()
        self.scale = layout.scales(float(np.linalg.norm(params.weight)) or 1.0)

        phases = [wp.phase for wp in layout.phases]
        self.centers = np.array([p.center for p in phases])
        self.normals = np.array([p.normal for p in phases])
        self.tx = np.array([p.tangent_x for p in phases])
        self.ty = np.array([p.tangent_y for p in phases])

        self.knot_samples = self._affine(_Samples(layout, self.knots, self.t1, self.mass))
        nodes, weights = np.polynomial.legendre.leggauss(layout.n_coeffs + 1)
        lo, hi = self.knots[:-1], self.knots[1:]
        half, mid = 0.5 * (hi - lo), 0.5 * (hi + lo)
        q_times = (mid[:, None] + half[:, None] * nodes[None, :]).reshape(-1)
        q_weights = (half[:, None] * weights[None, :]).reshape(-1)
        self.quad_samples = self._affine(_Samples(layout, q_times, self.t1, self.mass))
        n_int, n_g = self.knots.size - 1, nodes.size
        below = (np.arange(self.knots.size)[:, None] > np.arange(n_int)[None, :]).astype(float)
        self.cumulative = np.repeat(below, n_g, axis=1) * q_weights[None, :]

        self.A_ub, self.b_ub, self.ub_labels = self._inequalities()
        self.A_eq, self.b_eq, self.eq_labels = self._equalities()
        logger.debug(
            f"NLP [{self.t0:.3f}, {self.t1:.3f}]: {layout.dim} variables, {self.knots.size} knots, "
            f"{len(self.ub_labels)} inequality rows, {len(self.eq_labels)} equality rows"
        )

    def _affine(self, s: _Samples) -> _Samples:
        dt = s.times - self.t0
        s.l_aff = self.x0.l[None, :] + dt[:, None] * self.weight[None, :]
        s.r_aff = (self.x0.r[None, :] + dt[:, None] * self.x0.l[None, :] / self.mass
                   + 0.5 * dt[:, None] ** 2 * (self.weight / self.mass)[None, :])
        return s

    # -- evaluation -------------------------------------------------------

    def _split(self, x):
        c = self.layout.coeffs(x)
        return c[:, 0:3], c[:, 3], c[:, 4:6], self.layout.offsets(x)

    def _rates(self, s: _Samples, W, V, U, O, r):
        pp, phi = s.pos, s.phi
        f = np.einsum("jan,jn->ja", W[pp], phi)
        v = np.einsum("jn,jn->j", V[pp], phi)
        u = np.einsum("jcn,jn->jc", U[pp], phi) + O[pp]
        p = self.centers[pp] + self.tx[pp] * u[:, :1] + self.ty[pp] * u[:, 1:]
        a = p - r[s.sample]
        kd_pair = self.normals[pp] * v[:, None] + np.cross(a, f)
        kd = np.zeros((s.times.size, 3))
        np.add.at(kd, s.sample, kd_pair)
        fsum = np.zeros((s.times.size, 3))
        np.add.at(fsum, s.sample, f)
        return f, a, kd, fsum

    def _forward(self, x):
        W, V, U, O = self._split(x)
        wm = W.transpose(1, 0, 2).reshape(3, -1)
        kn, qd = self.knot_samples, self.quad_samples
        r_k = kn.r_aff + kn.g2 @ wm.T
        l_k = kn.l_aff + kn.g1 @ wm.T
        f_k, a_k, kd_k, fsum_k = self._rates(kn, W, V, U, O, r_k)
        r_q = qd.r_aff + qd.g2 @ wm.T
        f_q, a_q, kd_q, _ = self._rates(qd, W, V, U, O, r_q)
        k_k = self.x0.k[None, :] + self.cumulative @ kd_q
        states = {
            "r": r_k, "l": l_k, "k": k_k,
            "l_dot": self.weight[None, :] + fsum_k, "k_dot": kd_k,
        }
        cache = (W, f_k, a_k, f_q, a_q)
        return states, cache

    def residuals(self, x) -> dict[str, np.ndarray]:
        states, _ = self._forward(np.asarray(x, dtype=float))
        return self._residuals(states)

    def _residuals(self, states) -> dict[str, np.ndarray]:
        return {
            "lin_rate": states["l_dot"],
            "lin_momentum": states["l"] - self.l_des,
            "com": states["r"] - self.r_des,
            "ang_rate": states["k_dot"],
            "ang_momentum": states["k"] - self.k_des,
        }

    def objective_terms(self, x) -> dict[str, float]:
        x = np.asarray(x, dtype=float)
        res = self.residuals(x)
        terms = {k: float(np.sum(self.w[k] * res[k] ** 2)) for k in WEIGHT_KEYS}
        z = x / self.scale
        terms["regularization"] = float(self.reg * z @ z)
        return terms

    def objective(self, x) -> float:
        return float(sum(self.objective_terms(x).values()))

    def knot_states(self, x) -> dict[str, np.ndarray]:
        states, _ = self._forward(np.asarray(x, dtype=float))
        return {"times": self.knots.copy(), **states}

    def objective_and_gradient(self, x) -> tuple[float, np.ndarray]:
        x = np.asarray(x, dtype=float)
        states, (W, f_k, a_k, f_q, a_q) = self._forward(x)
        res = self._residuals(states)
        z = x / self.scale
        value = float(sum(np.sum(self.w[k] * res[k] ** 2) for k in WEIGHT_KEYS) + self.reg * z @ z)

        e = {k: 2.0 * self.w[k] * res[k] for k in WEIGHT_KEYS}
        kn, qd = self.knot_samples, self.quad_samples
        n_phases, n = self.layout.n_phases, self.layout.n_coeffs
        gW = np.zeros((n_phases, 3, n))
        gV = np.zeros((n_phases, n))
        gU = np.zeros((n_phases, 2, n))
        gO = np.zeros((n_phases, 2))

        g_r_k = e["com"] + self._backward(kn, e["ang_rate"], e["lin_rate"], f_k, a_k, gW, gV, gU, gO)
        e_kd_q = self.cumulative.T @ e["ang_momentum"]
        g_r_q = self._backward(qd, e_kd_q, None, f_q, a_q, gW, gV, gU, gO)
        g_wm = e["lin_momentum"].T @ kn.g1 + g_r_k.T @ kn.g2 + g_r_q.T @ qd.g2
        gW += g_wm.reshape(3, n_phases, n).transpose(1, 0, 2)

        gc = np.empty((n_phases, N_CHANNELS, n))
        gc[:, 0:3] = gW
        gc[:, 3] = gV
        gc[:, 4:6] = gU
        grad = self.layout.pack(gc, gO)
        grad += 2.0 * self.reg * z / self.scale
        return value, grad

    def _backward(self, s: _Samples, e_kd, e_fsum, f, a, gW, gV, gU, gO) -> np.ndarray:
        pp, phi = s.pos, s.phi
        e_pair = e_kd[s.sample]
        g_f = np.cross(e_pair, a)
        if e_fsum is not None:
            g_f += e_fsum[s.sample]
        g_p = np.cross(f, e_pair)
        g_r = np.zeros((s.times.size, 3))
        np.add.at(g_r, s.sample, -g_p)
        g_v = np.sum(self.normals[pp] * e_pair, axis=1)
        g_u = np.column_stack([np.sum(self.tx[pp] * g_p, axis=1), np.sum(self.ty[pp] * g_p, axis=1)])
        np.add.at(gW, pp, g_f[:, :, None] * phi[:, None, :])
        np.add.at(gV, pp, g_v[:, None] * phi)
        np.add.at(gU, pp, g_u[:, :, None] * phi[:, None, :])
        np.add.at(gO, pp, g_u)
        return g_r

    def gradient(self, x) -> np.ndarray:
        return self.objective_and_gradient(x)[1]

    # -- constraints ------------------------------------------------------

    def _inequalities(self):
        lay, kn = self.layout, self.knot_samples
        n = lay.n_coeffs
        rows, rhs, labels = [], [], []

        def add(row, b, label):
            rows.append(row)
            rhs.append(b)
            labels.append(label)

        for j in range(kn.pos.size):
            p, t, phi = kn.pos[j], float(kn.times[kn.sample[j]]), kn.phi[j]
            wp = lay.phases[p]
            ph = wp.phase
            base = p * N_CHANNELS * n

            def channel_row(c, sign):
                row = np.zeros(lay.dim)
                row[base + c * n: base + (c + 1) * n] = sign * phi
                return row

            def force_row(d):
                row = np.zeros(lay.dim)
                for ax in range(3):
                    row[base + ax * n: base + (ax + 1) * n] = d[ax] * phi
                return row

            # zero-width bounds are pinned by equality rows instead
            for c, axis in ((4, "x"), (5, "y")):
                if ph.cop_half_extents[c - 4] > 0:
                    for sign, side in ((1.0, "upper"), (-1.0, "lower")):
                        add(channel_row(c, sign), ph.cop_half_extents[c - 4],
                            RowLabel("cop", wp.index, t, f"{axis}_{side}"))
            if ph.torque_bound > 0:
                for sign, side in ((1.0, "upper"), (-1.0, "lower")):
                    add(channel_row(3, sign), ph.torque_bound, RowLabel("torque", wp.index, t, side))
            for tangent, axis in ((ph.tangent_x, "x"), (ph.tangent_y, "y")):
                for sign, side in ((1.0, "upper"), (-1.0, "lower")):
                    add(force_row(sign * tangent - ph.friction * ph.normal), 0.0,
                        RowLabel("friction", wp.index, t, f"{axis}_{side}"))
            add(force_row(ph.normal), ph.force_cap, RowLabel("normal_force", wp.index, t, "cap"))
            add(force_row(-ph.normal), 0.0, RowLabel("normal_force", wp.index, t, "unilateral"))

        opt = self.scenario.optimizer
        if opt.com_lower is not None and opt.com_upper is not None:
            lower, upper = np.asarray(opt.com_lower), np.asarray(opt.com_upper)
            for i, t in enumerate(kn.times):
                for ax in range(3):
                    row = np.zeros(lay.dim)
                    for p in range(lay.n_phases):
                        start = (p * N_CHANNELS + ax) * n
                        row[start: start + n] = kn.g2[i, p * n: (p + 1) * n]
                    add(row, upper[ax] - kn.r_aff[i, ax], RowLabel("com_box", -1, float(t), f"{'xyz'[ax]}_upper"))
                    add(-row, kn.r_aff[i, ax] - lower[ax], RowLabel("com_box", -1, float(t), f"{'xyz'[ax]}_lower"))

        if lay.sole_offsets:
            for p, wp in enumerate(lay.phases):
                for ax in range(2):
                    for sign, side in ((1.0, "upper"), (-1.0, "lower")):
                        row = np.zeros(lay.dim)
                        row[lay.offset_index(p, ax)] = sign
                        add(row, opt.sole_offset_bound,
                            RowLabel("sole_offset", wp.index, wp.t_a, f"{'xy'[ax]}_{side}"))

        return _stack(rows, lay.dim), np.array(rhs, dtype=float), labels

    def _equalities(self):
        lay = self.layout
        n = lay.n_coeffs
        schedule = self.scenario.schedule
        rows, labels = [], []
        ones = np.ones(n)
        first = np.zeros(n)
        first[0] = 1.0

        for p, wp in enumerate(lay.phases):
            for c in _pinned_channels(wp):
                for k in range(n):
                    row = np.zeros(lay.dim)
                    row[lay.index(p, c, k)] = 1.0
                    rows.append(row)
                    labels.append(RowLabel("pinned", wp.index, wp.t_a, f"channel_{c}_{k}"))

        for p, wp in enumerate(lay.phases):
            nxt = schedule.continuation(wp.index)
            q = lay.position_of(nxt) if nxt is not None else None
            if q is not None:
                for c in range(N_CHANNELS):
                    if c in _pinned_channels(wp):
                        continue
                    row = np.zeros(lay.dim)
                    row[lay.index(p, c, 0): lay.index(p, c, 0) + n] = ones
                    row[lay.index(q, c, 0): lay.index(q, c, 0) + n] -= first
                    rows.append(row)
                    labels.append(RowLabel("continuity", wp.index, wp.t_b, f"channel_{c}"))
                if lay.sole_offsets:
                    for ax in range(2):
                        row = np.zeros(lay.dim)
                        row[lay.offset_index(p, ax)] = 1.0
                        row[lay.offset_index(q, ax)] = -1.0
                        rows.append(row)
                        labels.append(RowLabel("continuity", wp.index, wp.t_b, f"offset_{ax}"))
            elif (self.scenario.optimizer.terminal_zero_wrench and nxt is None
                  and wp.t_b < self.t1 - TIME_TOL):
                for c in range(4):
                    if c in _pinned_channels(wp):
                        continue
                    row = np.zeros(lay.dim)
                    row[lay.index(p, c, 0): lay.index(p, c, 0) + n] = ones
                    rows.append(row)
                    labels.append(RowLabel("terminal", wp.index, wp.t_b, f"channel_{c}"))
        return _stack(rows, lay.dim), np.zeros(len(rows)), labels

    def inequality_residual(self, x) -> np.ndarray:
        return self.A_ub @ x - self.b_ub

    def equality_residual(self, x) -> np.ndarray:
        return self.A_eq @ x - self.b_eq

    def max_violation(self, x) -> float:
        x = np.asarray(x, dtype=float)
        worst = 0.0
        if self.b_ub.size:
            worst = max(worst, float(np.max(self.inequality_residual(x))))
        if self.b_eq.size:
            worst = max(worst, float(np.max(np.abs(self.equality_residual(x)))))
        return worst

    def violated_rows(self, x, tol: float = 0.0) -> list[RowLabel]:
        x = np.asarray(x, dtype=float)
        out = [self.ub_labels[i] for i in np.flatnonzero(self.inequality_residual(x) > tol)]
        out += [self.eq_labels[i] for i in np.flatnonzero(np.abs(self.equality_residual(x)) > tol)]
        return out


def _pinned_channels(wp: WindowPhase) -> list[int]:
    """Torque and CoP channels whose bound is zero."""
    ph = wp.phase
    bounds = ((3, ph.torque_bound), (4, ph.cop_half_extents[0]), (5, ph.cop_half_extents[1]))
    return [c for c, bound in bounds if bound == 0]


def _stack(rows: list[np.ndarray], dim: int) -> np.ndarray:
    return np.vstack(rows) if rows else np.zeros((0, dim))


def assemble(
    scenario: Scenario,
    refs: ReferenceTrajectory,
    t0: float = 0.0,
    t1: float | None = None,
    x0: CentroidalState | None = None,
    layout: DecisionLayout | None = None,
) -> NlpProblem:
    """Build the NLP for the window [t0, t1] (whole horizon by default)."""
    t1 = scenario.horizon if t1 is None else t1
    if not t1 > t0:
        raise InvalidArgumentError(f"empty window [{t0}, {t1}]")
    opt = scenario.optimizer
    if layout is None:
        layout = layout_for(scenario.schedule, t0, t1, opt.n_coeffs, opt.sole_offsets)
    return NlpProblem(scenario, layout, refs, x0 or scenario.initial_state, t0, t1)


def objective_gradient(problem: NlpProblem, x) -> tuple[float, np.ndarray]:
    return problem.objective_and_gradient(x)
