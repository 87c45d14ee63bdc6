"""First-order primal-dual reference solver.

Solves min lam * ||x||_1 + ||x||_2^2 / 2 subject to ||A x - b||_p <= delta
with the classical primal-dual hybrid gradient iteration. The dual proximal
step only needs the orthogonal projection onto the constraint ball, obtained
through the Moreau decomposition, so the same code covers p in {1, 2, inf}
and the exact-data case delta = 0 (a point constraint). Used as an
independent check on the split-feasibility solver, and as the certification
oracle for the regularization weight.
"""

import csv
import time
from dataclasses import dataclass

import numpy as np

from .linops import DenseMatrix, LinearOperator
from .objectives import soft_shrink
from .projections import NormBall, Point


class StepSizeViolation(ValueError):
    """tau * sigma * ||A||^2 must stay strictly below 1."""


@dataclass
class PDConfig:
    lam: float
    op: object
    b: np.ndarray
    delta: float = 0.0
    noise_norm: float = 2  # p of the constraint ball: 1, 2 or inf
    tau: float = None  # default 0.99 / ||A||
    sigma: float = None
    max_iterations: int = 1000
    record_every: int = 1  # 0 records only the final state


@dataclass
class PDRecord:
    k: int
    objective_value: float
    feasibility_gap: float  # ||A x - b||_p - delta, may be negative
    set_distance: float  # Euclidean distance of A x to the constraint ball
    elapsed_ms: float


@dataclass
class PDResult:
    x: np.ndarray
    records: list
    tau: float
    sigma: float


def prox_f(z, tau, lam):
    """prox of tau * (lam ||x||_1 + ||x||_2^2 / 2): shrink, then scale down."""
    return soft_shrink(z, tau * lam) / (1.0 + tau)


def prox_g(y, sigma, b, delta, p=2):
    """prox of sigma * G for G(y) = delta * ||y||_{p*} + <b, y>.

    G is the conjugate of the indicator of the p-ball of radius delta around b,
    so by Moreau the prox is y - sigma * P_ball(y / sigma). delta = 0 collapses
    the ball to {b}.
    """
    y = np.asarray(y, dtype=float)
    ball = _ball(b, delta, p)
    return y - sigma * ball.project(y / sigma)


def _ball(b, delta, p):
    if delta == 0.0:
        return Point(b)
    return NormBall(b, delta, p)


def _pnorm(v, p):
    if p == 1:
        return float(np.abs(v).sum())
    if p == 2:
        return float(np.linalg.norm(v))
    return float(np.abs(v).max())


def run_pd(config):
    """Run the primal-dual iteration for the configured budget."""
    op = config.op if isinstance(config.op, LinearOperator) else DenseMatrix(config.op)
    b = np.atleast_1d(np.asarray(config.b, dtype=float))
    m, n = op.shape
    norm = op.norm_estimate()
    tau = 0.99 / norm if config.tau is None else float(config.tau)
    sigma = 0.99 / norm if config.sigma is None else float(config.sigma)
    if tau * sigma * norm * norm >= 1.0:
        raise StepSizeViolation("tau * sigma * ||A||^2 must be < 1")
    p = config.noise_norm
    lam = float(config.lam)
    delta = float(config.delta)
    ball = _ball(b, delta, p)

    x = np.zeros(n)
    y = np.zeros(m)
    records = []
    start = time.perf_counter()

    def record(k, xk):
        ax = op.apply(xk)
        records.append(
            PDRecord(
                k=k,
                objective_value=float(lam * np.abs(xk).sum() + 0.5 * np.dot(xk, xk)),
                feasibility_gap=_pnorm(ax - b, p) - delta,
                set_distance=float(np.linalg.norm(ax - ball.project(ax))),
                elapsed_ms=(time.perf_counter() - start) * 1e3,
            )
        )

    for k in range(config.max_iterations):
        x_new = prox_f(x - tau * op.apply_adjoint(y), tau, lam)
        y = prox_g(y + sigma * op.apply(2.0 * x_new - x), sigma, b, delta, p)
        x = x_new
        if config.record_every and (k + 1) % config.record_every == 0:
            record(k, x)
    if config.max_iterations > 0 and (not records or records[-1].k != config.max_iterations - 1):
        record(config.max_iterations - 1, x)
    return PDResult(x=x, records=records, tau=tau, sigma=sigma)


def history_to_csv(result, path):
    """Write the run history in the solver's CSV schema (one constraint, the
    fixed primal step in step_size, set distance as the violation)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ("k", "constraint_index", "step_size", "w_norm", "max_violation",
             "objective_value", "elapsed_ms")
        )
        for rec in result.records:
            writer.writerow(
                [
                    rec.k,
                    0,
                    f"{result.tau:.17g}",
                    "nan",
                    f"{rec.set_distance:.17g}",
                    f"{rec.objective_value:.17g}",
                    f"{rec.elapsed_ms:.17g}",
                ]
            )
