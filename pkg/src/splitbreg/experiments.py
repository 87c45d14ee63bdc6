"""Experiment harness: instances, noise models, certification and runners.

Everything here is deterministic given the configuration and seed; trace and
summary CSVs contain no wall-clock columns (timings go into a separate file),
so identical configurations produce bit-identical outputs.
"""

import csv
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import comparator, solver
from .linops import (
    BlockRow,
    DenseMatrix,
    Grad2D,
    PartialDCT,
    ScaledIdentity,
    ZeroOperator,
    build_parallel_projector,
)
from .objectives import ElasticNet, GroupElasticNet, ProductObjective, SquaredNorm
from .projections import Hyperplane, NonnegCone, NormBall, Point


class CertificationFailed(RuntimeError):
    """No candidate weight reproduced the planted vector via the oracle run."""


# ---------------------------------------------------------------------------
# instances
# ---------------------------------------------------------------------------


@dataclass
class InstanceSpec:
    m: int
    n: int
    kind: str = "gaussian"  # "gaussian" | "bernoulli" | "partial_dct"
    sparsity: int = 0
    amplitude: str = "gaussian"  # "gaussian" | "pm_one" | "dynamic_range"
    seed: int = 0


@dataclass
class Instance:
    op: object
    x_true: np.ndarray
    b: np.ndarray
    spec: InstanceSpec


def generate_instance(spec):
    """Sampled sensing matrix plus a planted sparse vector and exact data.

    Matrix kinds: iid standard normal, iid +-1, or distinct rows of the
    orthonormal DCT sampled without replacement. Amplitudes: standard normal,
    +-1, or "dynamic_range" (random signs, magnitudes log-uniform in [1, 1e5]).
    """
    rng = np.random.default_rng(spec.seed)
    m, n = int(spec.m), int(spec.n)
    if spec.kind == "gaussian":
        op = DenseMatrix(rng.standard_normal((m, n)))
    elif spec.kind == "bernoulli":
        op = DenseMatrix(rng.choice([-1.0, 1.0], size=(m, n)))
    elif spec.kind == "partial_dct":
        rows = rng.choice(n, size=m, replace=False)
        op = PartialDCT(n, rows)
    else:
        raise ValueError(f"unknown matrix kind {spec.kind!r}")
    x = np.zeros(n)
    s = int(spec.sparsity)
    if s > 0:
        support = rng.choice(n, size=s, replace=False)
        if spec.amplitude == "gaussian":
            amps = rng.standard_normal(s)
        elif spec.amplitude == "pm_one":
            amps = rng.choice([-1.0, 1.0], size=s)
        elif spec.amplitude == "dynamic_range":
            amps = rng.choice([-1.0, 1.0], size=s) * 10.0 ** rng.uniform(0.0, 5.0, size=s)
        else:
            raise ValueError(f"unknown amplitude kind {spec.amplitude!r}")
        x[support] = amps
    return Instance(op=op, x_true=x, b=op.apply(x), spec=spec)


# ---------------------------------------------------------------------------
# noise models
# ---------------------------------------------------------------------------


@dataclass
class ImpulsiveNoise:
    """Replace ``count`` entries by the data maximum or minimum (equal odds).
    The matching discrepancy is the 1-norm of the perturbation."""

    count: int
    p = 1


@dataclass
class UniformNoise:
    """Add iid uniform noise from [-amplitude, amplitude]; discrepancy is the
    max-norm of the perturbation."""

    amplitude: float = 1.0
    p = np.inf


@dataclass
class GaussianNoise:
    """Add Gaussian noise rescaled to ``level * ||b||_2``; discrepancy is the
    2-norm of the perturbation."""

    level: float = 0.05
    p = 2


def inject_noise(b, model, seed):
    """Apply a noise model. Returns (noisy data, discrepancy delta)."""
    rng = np.random.default_rng(seed)
    b = np.asarray(b, dtype=float)
    noisy = b.copy()
    if isinstance(model, ImpulsiveNoise):
        idx = rng.choice(b.size, size=int(model.count), replace=False)
        noisy[idx] = rng.choice([b.max(), b.min()], size=idx.size)
        delta = float(np.abs(noisy - b).sum())
    elif isinstance(model, UniformNoise):
        noisy = b + rng.uniform(-model.amplitude, model.amplitude, size=b.size)
        delta = float(np.abs(noisy - b).max())
    elif isinstance(model, GaussianNoise):
        e = rng.standard_normal(b.size)
        e *= model.level * np.linalg.norm(b) / np.linalg.norm(e)
        noisy = b + e
        delta = float(np.linalg.norm(e))
    else:
        raise TypeError(f"unknown noise model {model!r}")
    return noisy, delta


# ---------------------------------------------------------------------------
# weight certification
# ---------------------------------------------------------------------------


def certify_lambda(op, x_true, b, candidates=None, iterations=50000):
    """Smallest candidate weight whose regularized solution is the planted
    vector, decided by a long primal-dual oracle run on the exact data.

    Acceptance is ||x - x_true||_inf <= 1e-5 * (1 + ||x_true||_inf). Raises
    CertificationFailed when no candidate passes.
    """
    x_true = np.asarray(x_true, dtype=float)
    if candidates is None:
        scale = float(np.abs(x_true).max()) or 1.0
        candidates = [scale, 10.0 * scale, 100.0 * scale]
    tol = 1e-5 * (1.0 + float(np.abs(x_true).max()))
    for lam in sorted(candidates):
        result = comparator.run_pd(
            comparator.PDConfig(
                lam=lam, op=op, b=b, delta=0.0, max_iterations=iterations, record_every=0
            )
        )
        if float(np.abs(result.x - x_true).max()) <= tol:
            return float(lam)
    raise CertificationFailed("no candidate weight reproduced the planted vector")


# ---------------------------------------------------------------------------
# phantoms and images
# ---------------------------------------------------------------------------


@dataclass
class Ellipse:
    cx: float
    cy: float
    rx: float
    ry: float
    angle_deg: float = 0.0
    intensity: float = 1.0


DEFAULT_PHANTOM = (
    Ellipse(0.0, 0.0, 0.72, 0.9, 0.0, 1.0),
    Ellipse(0.0, 0.05, 0.55, 0.75, 0.0, -0.55),
    Ellipse(-0.22, -0.25, 0.16, 0.3, 18.0, 0.7),
    Ellipse(0.25, -0.2, 0.12, 0.22, -12.0, 0.55),
    Ellipse(0.0, 0.45, 0.2, 0.12, 0.0, 0.45),
)


def render_phantom(height, width, ellipses=DEFAULT_PHANTOM):
    """Additive ellipse phantom on pixel centers, clipped to be nonnegative.

    Ellipse coordinates live in [-1, 1]^2 regardless of the resolution.
    """
    ys = (np.arange(height) + 0.5) / height * 2.0 - 1.0
    xs = (np.arange(width) + 0.5) / width * 2.0 - 1.0
    gx, gy = np.meshgrid(xs, ys)
    img = np.zeros((height, width))
    for e in ellipses:
        th = np.deg2rad(e.angle_deg)
        dx, dy = gx - e.cx, gy - e.cy
        u = np.cos(th) * dx + np.sin(th) * dy
        v = -np.sin(th) * dx + np.cos(th) * dy
        img[(u / e.rx) ** 2 + (v / e.ry) ** 2 <= 1.0] += e.intensity
    return np.maximum(img, 0.0).ravel()


def write_pgm(path, image, height, width, lo=None, hi=None):
    """8-bit binary PGM (P5, max value 255), row-major."""
    img = np.asarray(image, dtype=float).reshape(height, width)
    lo = float(img.min()) if lo is None else float(lo)
    hi = float(img.max()) if hi is None else float(hi)
    span = hi - lo if hi > lo else 1.0
    scaled = np.clip((img - lo) / span * 255.0, 0.0, 255.0).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
        fh.write(scaled.tobytes())


def projection_mass_estimate(projector, values):
    """Estimate the 1-norm of a nonnegative image from its projection data:
    mean over angles of the per-angle data sums scaled by the ray spacing."""
    values = np.asarray(values, dtype=float)
    sums = np.bincount(projector.row_angle, weights=values, minlength=projector.angles_deg.size)
    return float(projector.ray_spacing * sums.mean())


# ---------------------------------------------------------------------------
# experiment configuration
# ---------------------------------------------------------------------------


@dataclass
class TomoSpec:
    height: int = 32
    width: int = 32
    n_angles: int = 12
    rays_per_angle: int = 46
    noise_level: float = 0.05
    lam: float = 0.7
    iterations: int = 3000  # constraint steps, not full passes
    data_tolerance: float = 1e-3
    coupling_tolerance: float = 1e-2
    variants: tuple = ("plain", "nonneg", "one")


@dataclass
class ExperimentConfig:
    experiment: str = "bench-stepsizes"
    seed: int = 0
    out: str = "."
    instance: InstanceSpec = None
    noise: object = None
    lam: float = None  # None: bench picks a scale heuristic, recovery certifies
    rules: tuple = ("constant", "dynamic", "exact", "inexact")
    max_iterations: int = 20000
    tolerance: float = 1e-6
    pd_iterations: int = 20000
    tomo: TomoSpec = field(default_factory=TomoSpec)
    preset: str = "linearized_bregman"  # for the generic solve runner

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        if "instance" in data and data["instance"] is not None:
            data["instance"] = InstanceSpec(**data["instance"])
        if "noise" in data and data["noise"] is not None:
            noise = dict(data["noise"])
            kind = noise.pop("kind")
            models = {
                "impulsive": ImpulsiveNoise,
                "uniform": UniformNoise,
                "gaussian": GaussianNoise,
            }
            data["noise"] = models[kind](**noise)
        if "tomo" in data and data["tomo"] is not None:
            data["tomo"] = TomoSpec(**data["tomo"])
        if "rules" in data:
            data["rules"] = tuple(data["rules"])
        return cls(**data)

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


_RULES = {
    "constant": solver.Constant,
    "dynamic": solver.Dynamic,
    "exact": solver.Exact,
    "inexact": solver.Inexact,
}


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _fmt(v):
    return f"{v:.17g}"


def _pad(columns):
    """Pad trace columns to a common length by repeating the last value."""
    length = max(len(c) for c in columns)
    return [c + [c[-1]] * (length - len(c)) for c in columns], length


# ---------------------------------------------------------------------------
# runners
# ---------------------------------------------------------------------------


def run_stepsize_benchmark(config):
    """Residual traces of the regularized equality solver under each step rule.

    Writes residuals.csv with one column per rule (same row count, shorter runs
    padded with their final residual). Returns the trace dict and terminations.
    """
    inst = generate_instance(config.instance)
    lam = config.lam if config.lam is not None else 10.0 * (np.abs(inst.x_true).max() or 1.0)
    b_norm = np.linalg.norm(inst.b)
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)

    traces = {}
    terminations = {}
    for rule_name in config.rules:
        cfg = solver.preset(
            "linearized_bregman",
            inst.op,
            inst.b,
            lam=lam,
            step_rule=_RULES[rule_name](),
            max_iterations=config.max_iterations,
            residual_tolerance=config.tolerance * b_norm,
        )
        result = solver.run(cfg)
        # single constraint: every step is a pass boundary with a fresh violation
        traces[rule_name] = [float(rec.violations[0]) for rec in result.records]
        terminations[rule_name] = result.termination

    columns, length = _pad([traces[r] for r in config.rules])
    rows = [[k] + [_fmt(c[k]) for c in columns] for k in range(length)]
    _write_csv(out / "residuals.csv", ["k"] + list(config.rules), rows)
    return {"traces": traces, "terminations": terminations, "lam": lam, "instance": inst}


def _pnorm(v, p):
    if p == 1:
        return float(np.abs(v).sum())
    if p == 2:
        return float(np.linalg.norm(v))
    return float(np.abs(v).max())


def run_noisy_recovery(config):
    """Noise-ball recovery: dynamic and exact split-feasibility runs against the
    primal-dual comparator, on the noise model's matching ball constraint.

    Writes trace.csv (objective and p-norm feasibility gap per iteration per
    method) and summary.csv (relative reconstruction errors). The weight is
    certified on the exact data unless the configuration pins one.
    """
    inst = generate_instance(config.instance)
    noisy, delta = inject_noise(inst.b, config.noise, config.seed)
    p = config.noise.p
    lam = config.lam if config.lam is not None else certify_lambda(inst.op, inst.x_true, inst.b)
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)

    # a 2-norm distance below tol/sqrt(m) forces a p-norm gap below tol
    m = inst.op.shape[0]
    solver_tol = config.tolerance / np.sqrt(m) if p == 1 else config.tolerance
    ball = NormBall(noisy, delta, p)
    x_norm = np.linalg.norm(inst.x_true)

    traces = {}
    terminations = {}
    summary = []
    for rule_name in ("dynamic", "exact"):
        cfg = solver.SolverConfig(
            objective=ElasticNet(lam, inst.op.shape[1]),
            constraints=[solver.Difficult(inst.op, ball)],
            step_rule=_RULES[rule_name](),
            max_iterations=config.max_iterations,
            residual_tolerance=solver_tol,
        )
        objective_trace = []
        gap_trace = []

        def track(pair, record):
            objective_trace.append(record.objective_value)
            gap_trace.append(_pnorm(inst.op.apply(pair.x) - noisy, p) - delta)

        result = solver.run(cfg, callback=track)
        traces[rule_name] = {"objective": objective_trace, "gap": gap_trace}
        terminations[rule_name] = result.termination
        summary.append(
            (rule_name, float(np.linalg.norm(result.x - inst.x_true)) / x_norm,
             len(result.records), result.termination)
        )

    pd_result = comparator.run_pd(
        comparator.PDConfig(
            lam=lam, op=inst.op, b=noisy, delta=delta, noise_norm=p,
            max_iterations=config.pd_iterations,
        )
    )
    traces["pd"] = {
        "objective": [r.objective_value for r in pd_result.records],
        "gap": [r.feasibility_gap for r in pd_result.records],
    }
    summary.append(
        ("pd", float(np.linalg.norm(pd_result.x - inst.x_true)) / x_norm,
         len(pd_result.records), "budget")
    )

    methods = ("dynamic", "exact", "pd")
    columns, length = _pad(
        [traces[m_]["objective"] for m_ in methods] + [traces[m_]["gap"] for m_ in methods]
    )
    header = ["k"] + [f"objective_{m_}" for m_ in methods] + [f"gap_{m_}" for m_ in methods]
    rows = [[k] + [_fmt(c[k]) for c in columns] for k in range(length)]
    _write_csv(out / "trace.csv", header, rows)
    _write_csv(
        out / "summary.csv",
        ["method", "err_rel", "iterations", "termination"],
        [[name, _fmt(err), its, term] for name, err, its, term in summary],
    )
    return {
        "traces": traces,
        "terminations": terminations,
        "summary": summary,
        "lam": lam,
        "delta": delta,
        "instance": inst,
        "noisy": noisy,
        "pd": pd_result,
    }


def _tomo_constraints(variant, a_u, grad_op, coupling_op, ball, hw, c_value, spec):
    constraints = [
        solver.Difficult(a_u, ball),
        solver.Difficult(coupling_op, Point(np.zeros(coupling_op.shape[0]))),
    ]
    tols = [spec.data_tolerance, spec.coupling_tolerance]
    if variant in ("nonneg", "one"):
        constraints.append(solver.Simple(NonnegCone(np.arange(hw))))
        tols.append(1e12)
    if variant == "one":
        normal = np.concatenate([np.ones(hw), np.zeros(2 * hw)])
        constraints.append(solver.Simple(Hyperplane(normal, c_value)))
        tols.append(1e12)
    return constraints, np.asarray(tols)


def run_tomography(config):
    """Total-variation constrained tomography at three constraint levels.

    Variables are (image, gradient-field) blocks tied by a coupling constraint;
    the data enters through a 2-norm noise ball. Variants add nonnegativity and
    the projection-estimated sum constraint. Dynamic steps, cyclic control; an
    iteration treats one constraint, and traces are recorded once per full
    pass over the variant's constraint list.

    Writes trace.csv (per-pass data gap and coupling residual per variant),
    summary.csv (final errors), timings.csv (ms per iteration) and PGM images.
    """
    spec = config.tomo
    h, w = spec.height, spec.width
    hw = h * w
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)

    u_true = render_phantom(h, w)
    angles = np.arange(spec.n_angles) * (180.0 / spec.n_angles)
    projector = build_parallel_projector(h, w, angles, spec.rays_per_angle)
    b = projector.apply(u_true)
    noisy, delta = inject_noise(b, GaussianNoise(spec.noise_level), config.seed)
    c_value = projection_mass_estimate(projector, noisy)

    m = projector.shape[0]
    a_u = BlockRow([projector, ZeroOperator(m, 2 * hw)])
    grad_op = Grad2D(h, w)
    coupling_op = BlockRow([grad_op, ScaledIdentity(2 * hw, -1.0)])
    objective = ProductObjective(
        [SquaredNorm(hw), GroupElasticNet(spec.lam, grad_op.pair_groups())]
    )
    ball = NormBall(noisy, delta, 2)

    results = {}
    traces = {}
    timings = {}
    terminations = {}
    errors = {}
    for variant in spec.variants:
        constraints, tols = _tomo_constraints(
            variant, a_u, grad_op, coupling_op, ball, hw, c_value, spec
        )
        cfg = solver.SolverConfig(
            objective=objective,
            constraints=constraints,
            step_rule=solver.Dynamic(),
            max_iterations=spec.iterations,
            residual_tolerance=tols,
        )
        data_gap = []
        coupling_res = []

        def track(pair, record):
            if record.violations is not None:  # pass boundary
                u = pair.x[:hw]
                data_gap.append(float(np.linalg.norm(projector.apply(u) - noisy)) - delta)
                coupling_res.append(float(record.violations[1]))

        start = time.perf_counter()
        result = solver.run(cfg, callback=track)
        elapsed = time.perf_counter() - start
        results[variant] = result
        traces[variant] = {"data_gap": data_gap, "coupling": coupling_res}
        timings[variant] = elapsed * 1e3 / max(1, len(result.records))
        terminations[variant] = result.termination
        errors[variant] = float(np.linalg.norm(result.x[:hw] - u_true))
        write_pgm(out / f"reconstruction_{variant}.pgm", result.x[:hw], h, w)

    write_pgm(out / "phantom.pgm", u_true, h, w)
    variants = list(spec.variants)
    columns, length = _pad(
        [traces[v]["data_gap"] for v in variants] + [traces[v]["coupling"] for v in variants]
    )
    header = (
        ["sweep"]
        + [f"data_gap_{v}" for v in variants]
        + [f"coupling_{v}" for v in variants]
    )
    rows = [[k] + [_fmt(c[k]) for c in columns] for k in range(length)]
    _write_csv(out / "trace.csv", header, rows)
    _write_csv(
        out / "summary.csv",
        ["variant", "final_error", "iterations", "termination"],
        [
            [v, _fmt(errors[v]), len(results[v].records), terminations[v]]
            for v in variants
        ],
    )
    _write_csv(
        out / "timings.csv",
        ["variant", "ms_per_iteration"],
        [[v, _fmt(timings[v])] for v in variants],
    )
    return {
        "results": results,
        "traces": traces,
        "timings": timings,
        "terminations": terminations,
        "errors": errors,
        "u_true": u_true,
        "delta": delta,
        "c_value": c_value,
        "projector": projector,
        "noisy": noisy,
    }


def run_solve(config):
    """Generic single run of a preset; writes the solver history CSV."""
    inst = generate_instance(config.instance)
    lam = config.lam
    if lam is None and config.preset in ("linearized_bregman", "sparse_kaczmarz"):
        lam = 10.0 * (np.abs(inst.x_true).max() or 1.0)
    rule = None
    if config.rules:
        rule = _RULES[config.rules[0]]()
    cfg = solver.preset(
        config.preset,
        inst.op,
        inst.b,
        lam=lam,
        step_rule=rule,
        max_iterations=config.max_iterations,
        residual_tolerance=config.tolerance * np.linalg.norm(inst.b),
    )
    result = solver.run(cfg)
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    solver.history_to_csv(result, out / "history.csv")
    return {"result": result, "terminations": {"solve": result.termination}, "instance": inst}
