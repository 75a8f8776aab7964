"""Monte Carlo estimators and statistical tests for the generator claims."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import develop as dv
from . import manifold as mf
from .errors import NonFinite


@dataclass
class MCEstimate:
    mean: float
    stderr: float
    paths: int
    dt: float
    t: float

    def to_dict(self):
        return {"mean": self.mean, "stderr": self.stderr, "paths": self.paths,
                "dt": self.dt, "t": self.t}


def _evaluate(f, chart, points):
    env = chart.env(points)
    vals = np.broadcast_to(f(env), (len(points),))
    if not np.all(np.isfinite(vals)):
        raise NonFinite("test function evaluated to a non-finite sample")
    return vals


def summarize(samples, config):
    samples = np.asarray(samples, dtype=float)
    if not np.all(np.isfinite(samples)):
        raise NonFinite("non-finite Monte Carlo samples")
    n = len(samples)
    return MCEstimate(mean=float(samples.mean()),
                      stderr=float(samples.std(ddof=1) / np.sqrt(n)),
                      paths=n, dt=config.dt, t=config.T)


def estimate_expectation(path, f, chart, config):
    """Mean and stderr of f at the endpoint time of a simulated Path."""
    return summarize(_evaluate(f, chart, path.endpoints()), config)


def run_process(kind, frame, structure, gamma, q0, config, h0=None):
    if kind == "develop":
        return dv.develop_sde(frame, structure, gamma, q0, config, h0=h0)
    if kind == "popp":
        return dv.simulate_popp(frame, structure, q0, config)
    raise ValueError(f"unknown process kind {kind!r}")


def default_test_functions(chart, squares=True, products=False):
    """The fixed comparison family: coordinates, squares, pairwise products."""
    from . import expr as ex

    out = [(name, ex.Var(name)) for name in chart.coords]
    if squares:
        out += [(f"{name}^2", ex.Pow(ex.Var(name), 2)) for name in chart.coords]
    if products:
        names = chart.coords
        out += [(f"{a}*{b}", ex.Mul(ex.Var(a), ex.Var(b)))
                for i, a in enumerate(names) for b in names[i + 1:]]
    return out


def _connection_generator_value(frame, structure, gamma, sym, f, q0):
    """(Delta f)(q0) for Delta = sum X_i^2 + sum_i (defect_i + d_i) X_i.

    Assembled as the Popp operator plus the generator defect of gamma, which
    reduces to the Popp sub-Laplacian exactly when gamma solves the
    divergence system.
    """
    q0 = np.atleast_2d(np.asarray(q0, dtype=float))
    pop = mf.popp_sublaplacian(frame, structure)
    base = pop.apply(f, q0)
    defect = mf.generator_defect(structure, sym, gamma, q0)
    chart = frame.chart
    env = chart.env(q0)
    extra = 0.0
    for i in range(frame.k1):
        xf = mf.apply_field(frame.fields[i], f, chart)
        extra += defect[:, i] * np.broadcast_to(xf(env), (1,))
    return float((base + extra)[0])


def generator_test(frame, structure, gamma, sym, f, q0, config, process="develop",
                   h0=None, bias_factor=2.0):
    """Compare (E f(q_t) - f(q0)) / t against (1/2) Delta f(q0).

    Runs at t and t/2; passes when the t-run discrepancy is within
    3 stderr/t plus an empirical O(t) bias allowance extrapolated from the
    two runs, and the bias estimate shrinks with t.
    """
    chart = frame.chart
    q0v = np.asarray(q0, dtype=float)
    f0 = float(_evaluate(f, chart, q0v[None])[0])
    symbolic = 0.5 * _connection_generator_value(frame, structure, gamma, sym, f, q0)

    runs = {}
    for t in (config.T, config.T / 2.0):
        cfg = dv.SDEConfig(dt=config.dt, T=t, seed=config.seed,
                           paths=config.paths, scheme=config.scheme,
                           projection=config.projection)
        path = run_process(process, frame, structure, gamma, q0v, cfg, h0=h0)
        est = estimate_expectation(path, f, chart, cfg)
        runs[t] = {"mc_value": (est.mean - f0) / t,
                   "stderr": est.stderr / t,
                   "estimate": est}
    t1, t2 = config.T, config.T / 2.0
    gap1 = runs[t1]["mc_value"] - symbolic
    gap2 = runs[t2]["mc_value"] - symbolic
    # O(t) weak bias: model gap ~ C t, estimate C from the coarse run
    bias1 = abs(gap2 - gap1) + 3.0 * (runs[t1]["stderr"] + runs[t2]["stderr"])
    tol1 = 3.0 * runs[t1]["stderr"] + bias_factor * bias1
    ok = abs(gap1) <= tol1
    bias_shrinks = (abs(gap2) <= abs(gap1)
                    + 3.0 * (runs[t1]["stderr"] + runs[t2]["stderr"]))
    return {
        "test": "generator",
        "t": t1,
        "dt": config.dt,
        "paths": config.paths,
        "mc_value": runs[t1]["mc_value"],
        "mc_value_half_t": runs[t2]["mc_value"],
        "symbolic_value": symbolic,
        "stderr": runs[t1]["stderr"],
        "stderr_half_t": runs[t2]["stderr"],
        "z": gap1 / runs[t1]["stderr"] if runs[t1]["stderr"] else 0.0,
        "tolerance": tol1,
        "bias_shrinks": bool(bias_shrinks),
        "pass": bool(ok),
    }


def generator_family_test(frame, structure, gamma, sym, fs, q0, config,
                          process="develop", h0=None, bias_factor=2.0):
    """generator_test over a family of functions with shared simulations.

    fs is a list of (label, Expr); the two runs (t and t/2) are simulated
    once and every function is evaluated on the same endpoints.
    """
    chart = frame.chart
    q0v = np.asarray(q0, dtype=float)
    endpoints = {}
    for t in (config.T, config.T / 2.0):
        cfg = dv.SDEConfig(dt=config.dt, T=t, seed=config.seed,
                           paths=config.paths, scheme=config.scheme,
                           projection=config.projection)
        endpoints[t] = run_process(process, frame, structure, gamma, q0v, cfg,
                                   h0=h0).endpoints()
    reports = []
    for label, f in fs:
        f0 = float(_evaluate(f, chart, q0v[None])[0])
        symbolic = 0.5 * _connection_generator_value(frame, structure, gamma,
                                                     sym, f, q0v)
        runs = {}
        for t, end in endpoints.items():
            vals = _evaluate(f, chart, end)
            runs[t] = {"mc_value": (vals.mean() - f0) / t,
                       "stderr": vals.std(ddof=1) / np.sqrt(len(vals)) / t}
        t1, t2 = config.T, config.T / 2.0
        gap1 = runs[t1]["mc_value"] - symbolic
        gap2 = runs[t2]["mc_value"] - symbolic
        bias1 = abs(gap2 - gap1) + 3.0 * (runs[t1]["stderr"] + runs[t2]["stderr"])
        tol1 = 3.0 * runs[t1]["stderr"] + bias_factor * bias1
        reports.append({
            "f": label,
            "mc_value": float(runs[t1]["mc_value"]),
            "mc_value_half_t": float(runs[t2]["mc_value"]),
            "symbolic_value": symbolic,
            "stderr": float(runs[t1]["stderr"]),
            "tolerance": float(tol1),
            "bias_shrinks": bool(abs(gap2) <= abs(gap1)
                                 + 3.0 * (runs[t1]["stderr"] + runs[t2]["stderr"])),
            "pass": bool(abs(gap1) <= tol1),
        })
    return {
        "test": "generator-family",
        "t": config.T,
        "dt": config.dt,
        "paths": config.paths,
        "functions": reports,
        "pass": bool(all(r["pass"] for r in reports)),
    }


def equivalence_test(frame, structure, gamma, q0, config, h0=None,
                     threshold=3.0):
    """Developed process vs direct Popp diffusion: moment z-scores.

    Compares first and second empirical moments of every chart coordinate at
    the endpoint time; passes iff all |z| <= threshold.
    """
    q0v = np.asarray(q0, dtype=float)
    dev = dv.develop_sde(frame, structure, gamma, q0v, config, h0=h0)
    pop = dv.simulate_popp(frame, structure, q0v, config)
    a, b = dev.endpoints(), pop.endpoints()
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise NonFinite("non-finite endpoints in the equivalence test")
    rows = []
    worst = 0.0
    for i, name in enumerate(frame.chart.coords):
        for label, xa, xb in ((name, a[:, i], b[:, i]),
                              (f"{name}^2", a[:, i] ** 2, b[:, i] ** 2)):
            se = np.hypot(xa.std(ddof=1) / np.sqrt(len(xa)),
                          xb.std(ddof=1) / np.sqrt(len(xb)))
            z = float((xa.mean() - xb.mean()) / se) if se else 0.0
            worst = max(worst, abs(z))
            rows.append({"moment": label, "developed": float(xa.mean()),
                         "direct": float(xb.mean()), "stderr": float(se),
                         "z": z})
    return {
        "test": "equivalence",
        "t": config.T,
        "dt": config.dt,
        "paths": config.paths,
        "moments": rows,
        "max_abs_z": worst,
        "pass": bool(worst <= threshold),
    }
