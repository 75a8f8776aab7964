"""Deterministic and stochastic development, and the Carnot-group lift.

All simulators are vectorized over paths; randomness comes from a
counter-based Philox stream keyed by (seed, step), with path p consuming
row p of each step's draw, so every increment is a pure function of
(seed, path index, step index) regardless of batch size or execution order.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, MalformedSpec, NonFinite, StepTooLarge

# Dynkin coefficients of the group law through step 4:
# x.y = x + y + [x,y]/2 + ([x,[x,y]] + [y,[y,x]])/12 - [y,[x,[x,y]]]/24
MAX_STEP = 4


@dataclass
class SDEConfig:
    dt: float = 1e-3
    T: float = 1.0
    seed: int = 0
    paths: int = 1
    scheme: str = "heun"
    projection: str = "polar"

    def __post_init__(self):
        if not (self.dt > 0 and self.T >= self.dt):
            raise MalformedSpec(f"need 0 < dt <= T, got dt={self.dt}, T={self.T}")
        if self.scheme not in ("heun", "euler"):
            raise MalformedSpec(f"unknown scheme {self.scheme!r}")
        if self.projection not in ("polar", "none"):
            raise MalformedSpec(f"unknown projection {self.projection!r}")

    @property
    def steps(self):
        return int(round(self.T / self.dt))


@dataclass
class Path:
    """Simulation output: recorded times and per-path states.

    points has shape (len(times), paths, d); frames, when present, has shape
    (len(times), paths, k1, k1). left_chart marks paths that exited the
    chart's sampling box at some step (reported, not fatal).
    """

    times: np.ndarray
    points: np.ndarray
    frames: np.ndarray = None
    left_chart: np.ndarray = None
    ortho_defect: float = 0.0

    def endpoints(self):
        return self.points[-1]

    def write_csv(self, f, path_index=0):
        """One path as CSV rows t,q1,...,qd[,h11,...,hkk]."""
        w = csv.writer(f)
        d = self.points.shape[2]
        header = ["t"] + [f"q{i + 1}" for i in range(d)]
        if self.frames is not None:
            k = self.frames.shape[2]
            header += [f"h{i + 1}{j + 1}" for i in range(k) for j in range(k)]
        w.writerow(header)
        for s, t in enumerate(self.times):
            row = [f"{t:.10g}"] + [f"{v:.12g}" for v in self.points[s, path_index]]
            if self.frames is not None:
                row += [f"{v:.12g}" for v in self.frames[s, path_index].ravel()]
            w.writerow(row)

    def write_endpoints_csv(self, f):
        """Summary CSV: one row per path's endpoint."""
        w = csv.writer(f)
        d = self.points.shape[2]
        w.writerow(["path"] + [f"q{i + 1}" for i in range(d)])
        for p, q in enumerate(self.points[-1]):
            w.writerow([p] + [f"{v:.12g}" for v in q])


def increments(seed, step, paths, width, dt):
    """Gaussian increments of one time step: shape (paths, width), sd sqrt(dt).

    Row p depends only on (seed, step, p, width): the Philox counter encodes
    the step and the generator fills rows in order.
    """
    bits = np.random.Generator(np.random.Philox(key=seed, counter=[0, 0, step, 0]))
    return bits.standard_normal((paths, width)) * np.sqrt(dt)


def record_times(config, record):
    if record == "full":
        return list(range(config.steps + 1))
    return [0, config.steps]


# ---------------------------------------------------------------------------
# Carnot group law
# ---------------------------------------------------------------------------

def _structure_tensor(alg):
    n = alg.dim
    t = np.zeros((n, n, n))
    for (i, j), row in alg.brackets.items():
        for k, v in row.items():
            t[i, j, k] = float(v)
            t[j, i, k] = -float(v)
    return t


class CarnotGroup:
    """Exponential coordinates of the first kind with the truncated group law."""

    def __init__(self, alg):
        if alg.step > MAX_STEP:
            raise StepTooLarge(
                f"group-law operations support step <= {MAX_STEP}, "
                f"algebra has step {alg.step}")
        self.alg = alg
        self.tensor = _structure_tensor(alg)
        # sparse bracket terms (i < j): [x, y]_k += v (x_i y_j - x_j y_i)
        self._terms = [(i, j, k, float(v))
                       for (i, j), row in alg.brackets.items()
                       for k, v in row.items()]

    def bracket(self, x, y):
        out = np.zeros(np.broadcast_shapes(np.shape(x), np.shape(y)))
        for i, j, k, v in self._terms:
            out[..., k] += v * (x[..., i] * y[..., j] - x[..., j] * y[..., i])
        return out

    def bch(self, x, y):
        """Truncated group product in the Lie algebra coordinates."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if x.shape[-1] != self.alg.dim or y.shape[-1] != self.alg.dim:
            raise DimensionMismatch(
                f"expected vectors of length {self.alg.dim}")
        b = self.bracket
        xy = b(x, y)
        out = x + y + xy / 2.0
        if self.alg.step >= 3:
            out = out + (b(x, xy) + b(y, b(y, x))) / 12.0
        if self.alg.step >= 4:
            out = out - b(y, b(x, xy)) / 24.0
        return out

    def left_invariant_field(self, x, e):
        """V(x, e): the left-invariant extension of e in these coordinates.

        V(x, e) = e + [x, e]/2 + [x, [x, e]]/12; the step-4 term of the
        differential of left translation vanishes in this direction.
        """
        b = self.bracket
        xe = b(x, e)
        out = np.asarray(e, dtype=float) + xe / 2.0
        if self.alg.step >= 3:
            out = out + b(x, xe) / 12.0
        return out

    def embed(self, w):
        """Pad a horizontal k1-vector (or batch) with zeros to full dimension."""
        w = np.asarray(w, dtype=float)
        k1 = self.alg.growth[0]
        out = np.zeros(w.shape[:-1] + (self.alg.dim,))
        out[..., :k1] = w
        return out


def bch(alg, x, y):
    return CarnotGroup(alg).bch(x, y)


def left_invariant_field(alg, x, e):
    return CarnotGroup(alg).left_invariant_field(x, e)


def simulate_carnot_lift(alg, config, record="endpoints"):
    """Lift of Brownian motion on R^{k1} to the Carnot group (Heun scheme)."""
    group = CarnotGroup(alg)
    n, k1 = alg.dim, alg.growth[0]
    g = np.zeros((config.paths, n))
    recorded = record_times(config, record)
    out = np.empty((len(recorded), config.paths, n))
    if 0 in recorded:
        out[0] = g
    pos = int(0 in recorded)
    for s in range(config.steps):
        dw = group.embed(increments(config.seed, s, config.paths, k1, config.dt))
        v1 = group.left_invariant_field(g, dw)
        if config.scheme == "heun":
            v2 = group.left_invariant_field(g + v1, dw)
            g = g + 0.5 * (v1 + v2)
        else:
            g = g + v1
        if s + 1 in recorded:
            out[pos] = g
            pos += 1
    times = np.array(recorded, dtype=float) * config.dt
    return Path(times=times, points=out)


# ---------------------------------------------------------------------------
# Development on a chart
# ---------------------------------------------------------------------------

def polar_project(h):
    """Nearest orthogonal matrix via Newton iteration h <- (h + h^-T)/2."""
    for _ in range(3):
        h = 0.5 * (h + np.linalg.inv(np.swapaxes(h, -1, -2)))
    return h


def ortho_defect(h):
    k = h.shape[-1]
    hth = np.swapaxes(h, -1, -2) @ h
    return float(np.abs(hth - np.eye(k)).max())


class _DevelopSystem:
    """Right-hand sides of the coupled (q, h~) development system."""

    def __init__(self, frame, structure, gamma):
        self.frame = frame
        self.structure = structure
        self.gamma = gamma
        sym = gamma.sym
        self.k1 = frame.k1
        if sym.dimH:
            self.blocks = np.array(
                [[[float(v) for v in row] for row in a] for a in sym.layer1_blocks()])
        else:
            self.blocks = np.zeros((0, self.k1, self.k1))

    def flow(self, q, h, u):
        """Increments (dq, dh) for control increment u of shape (P, k1).

        dq = (u^T h~ X)(q): move along sum_i (h~^T u)_i X_i;
        dh~ = sum_alpha (u^T h~ Gamma^alpha(q)) h~ A_alpha.
        """
        v = np.einsum("pji,pj->pi", h, u)                 # h~^T u
        x = self.frame.matrix(q)[:, :, :self.k1]
        dq = np.einsum("pdi,pi->pd", x, v)
        if len(self.blocks):
            gam = self.gamma.at(q)                        # (P, dimH, k1)
            s = np.einsum("pai,pi->pa", gam, v)           # scalar per generator
            dh = np.einsum("pa,pjk,akl->pjl", s, h, self.blocks)
        else:
            dh = np.zeros_like(h)
        return dq, dh


def _chart_mask(chart, q, mask):
    b = np.array(chart.bounds())
    for i, name in enumerate(chart.coords):
        if name in chart.periodic:
            continue
        mask |= (q[:, i] < b[i, 0]) | (q[:, i] > b[i, 1])
    return mask


def _prepare_h0(h0, k1, paths):
    if h0 is None:
        h0 = np.eye(k1)
    h0 = np.asarray(h0, dtype=float)
    if h0.shape != (k1, k1):
        raise MalformedSpec(f"h0 must be a {k1}x{k1} matrix, got {h0.shape}")
    if ortho_defect(h0[None]) > 1e-8:
        raise MalformedSpec("h0 must be orthogonal")
    return np.broadcast_to(h0, (paths, k1, k1)).copy()


def develop_sde(frame, structure, gamma, q0, config, h0=None, record="endpoints"):
    """Stochastic development: Stratonovich-Heun for the (q, h~) system."""
    sys = _DevelopSystem(frame, structure, gamma)
    k1 = frame.k1
    q = np.tile(np.asarray(q0, dtype=float), (config.paths, 1))
    h = _prepare_h0(h0, k1, config.paths)
    recorded = record_times(config, record)
    out_q = np.empty((len(recorded), config.paths, frame.chart.dim))
    out_h = np.empty((len(recorded), config.paths, k1, k1))
    left = np.zeros(config.paths, dtype=bool)
    defect = 0.0
    pos = 0
    if 0 in recorded:
        out_q[0], out_h[0] = q, h
        pos = 1
    for s in range(config.steps):
        dw = increments(config.seed, s, config.paths, k1, config.dt)
        dq1, dh1 = sys.flow(q, h, dw)
        if config.scheme == "heun":
            dq2, dh2 = sys.flow(q + dq1, h + dh1, dw)
            q = q + 0.5 * (dq1 + dq2)
            h = h + 0.5 * (dh1 + dh2)
        else:
            q, h = q + dq1, h + dh1
        if config.projection == "polar" and sys.blocks.size:
            h = polar_project(h)
        q = frame.chart.wrap(q)
        left = _chart_mask(frame.chart, q, left)
        defect = max(defect, ortho_defect(h))
        if s + 1 in recorded:
            out_q[pos], out_h[pos] = q, h
            pos += 1
    times = np.array(recorded, dtype=float) * config.dt
    return Path(times=times, points=out_q, frames=out_h,
                left_chart=left, ortho_defect=defect)


def develop_curve(frame, structure, gamma, u, q0, dt, T, h0=None,
                  record="full", projection="polar"):
    """Deterministic development of a model curve with control u(t).

    u is a sequence of k1 expressions in the single variable t; integration
    is classical RK4 on the coupled (q, h~) system.
    """
    from . import expr as ex

    sys = _DevelopSystem(frame, structure, gamma)
    k1 = frame.k1
    u = [ex.parse(c) if isinstance(c, str) else c for c in u]
    if len(u) != k1:
        raise MalformedSpec(f"need {k1} control components, got {len(u)}")
    q = np.asarray(q0, dtype=float)[None, :].copy()
    h = _prepare_h0(h0, k1, 1)
    steps = int(round(T / dt))
    recorded = record_times(SDEConfig(dt=dt, T=max(T, dt), paths=1), record)
    out_q = np.empty((len(recorded), 1, frame.chart.dim))
    out_h = np.empty((len(recorded), 1, k1, k1))
    left = np.zeros(1, dtype=bool)
    defect, pos = 0.0, 0
    if 0 in recorded:
        out_q[0], out_h[0] = q, h
        pos = 1

    def uval(t):
        env = {"t": t}
        return np.array([[float(c(env)) for c in u]])

    for s in range(steps):
        t = s * dt

        def rhs(qq, hh, tt):
            dq, dh = sys.flow(qq, hh, uval(tt))
            return dq, dh

        k1q, k1h = rhs(q, h, t)
        k2q, k2h = rhs(q + 0.5 * dt * k1q, h + 0.5 * dt * k1h, t + 0.5 * dt)
        k3q, k3h = rhs(q + 0.5 * dt * k2q, h + 0.5 * dt * k2h, t + 0.5 * dt)
        k4q, k4h = rhs(q + dt * k3q, h + dt * k3h, t + dt)
        q = q + dt * (k1q + 2 * k2q + 2 * k3q + k4q) / 6.0
        h = h + dt * (k1h + 2 * k2h + 2 * k3h + k4h) / 6.0
        if projection == "polar" and sys.blocks.size:
            h = polar_project(h)
        q = frame.chart.wrap(q)
        left = _chart_mask(frame.chart, q, left)
        defect = max(defect, ortho_defect(h))
        if s + 1 in recorded:
            out_q[pos], out_h[pos] = q, h
            pos += 1
    times = np.array(recorded, dtype=float) * dt
    return Path(times=times, points=out_q, frames=out_h,
                left_chart=left, ortho_defect=defect)


def simulate_popp(frame, structure, q0, config, record="endpoints"):
    """Direct diffusion with generator half the Popp sub-Laplacian.

    Stratonovich dq = sum_i X_i(q) o db^i + (1/2) sum_i d_i(q) X_i(q) dt
    with drift coefficients d_i = -sum_l c_il^l.
    """
    k1 = frame.k1
    q = np.tile(np.asarray(q0, dtype=float), (config.paths, 1))
    recorded = record_times(config, record)
    out = np.empty((len(recorded), config.paths, frame.chart.dim))
    left = np.zeros(config.paths, dtype=bool)
    pos = 0
    if 0 in recorded:
        out[0] = q
        pos = 1

    def flow(qq, dw):
        x = frame.matrix(qq)[:, :, :k1]
        d = structure.divergence(qq)
        return np.einsum("pdi,pi->pd", x, dw + 0.5 * d * config.dt)

    for s in range(config.steps):
        dw = increments(config.seed, s, config.paths, k1, config.dt)
        v1 = flow(q, dw)
        if config.scheme == "heun":
            v2 = flow(q + v1, dw)
            q = q + 0.5 * (v1 + v2)
        else:
            q = q + v1
        q = frame.chart.wrap(q)
        left = _chart_mask(frame.chart, q, left)
        if s + 1 in recorded:
            out[pos] = q
            pos += 1
    times = np.array(recorded, dtype=float) * config.dt
    return Path(times=times, points=out, left_chart=left)


def check_finite(path):
    if not np.all(np.isfinite(path.points)):
        raise NonFinite("simulation produced non-finite states")
    return path
