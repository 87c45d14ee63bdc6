"""Orthogonal and Bregman projections onto the solver's constraint sets.

The orthogonal projectors are what the separating-halfspace construction needs
for "difficult" constraints; the Bregman projectors update a primal-dual pair
for the "simple" ones. Every Bregman projector returns a new consistent pair
(primal point plus admissible subgradient).
"""

import numpy as np
from scipy.optimize import brentq

from .objectives import PrimalDualPair, pair_from_dual, soft_shrink


class FeasiblePoint(ValueError):
    """A separating halfspace was requested at a point that is already feasible."""


class ZeroNormal(ValueError):
    """Hyperplane or halfspace with an all-zero normal vector."""


class ZeroDirection(ValueError):
    """A linesearch direction is identically zero."""


class BoxWithoutZero(ValueError):
    """The Bregman box projection needs a box containing the origin."""


class NoConvergence(RuntimeError):
    """An iterative inner solve hit its cap before reaching its tolerance."""


# ---------------------------------------------------------------------------
# target sets and orthogonal projections
# ---------------------------------------------------------------------------


class RangeSet:
    """A closed convex set with an orthogonal projector."""

    def project(self, y):
        raise NotImplementedError

    def distance(self, y):
        """Euclidean distance from y to the set."""
        y = np.asarray(y, dtype=float)
        return float(np.linalg.norm(y - self.project(y)))

    def contains(self, y, tol=1e-12):
        return self.distance(y) <= tol


class Point(RangeSet):
    """The singleton {b}."""

    def __init__(self, b):
        self.b = np.atleast_1d(np.asarray(b, dtype=float))

    def project(self, y):
        return self.b.copy()

    def distance(self, y):
        return float(np.linalg.norm(np.asarray(y, dtype=float) - self.b))


class NormBall(RangeSet):
    """{y : ||y - center||_p <= radius} for p in {1, 2, inf}."""

    def __init__(self, center, radius, p=2):
        if radius < 0:
            raise ValueError("radius must be nonnegative")
        if p not in (1, 2, np.inf):
            raise ValueError("p must be 1, 2 or inf")
        self.center = np.atleast_1d(np.asarray(center, dtype=float))
        self.radius = float(radius)
        self.p = p

    def project(self, y):
        v = np.asarray(y, dtype=float) - self.center
        if self.p == 2:
            nv = np.linalg.norm(v)
            if nv > self.radius:
                v = v * (self.radius / nv)
        elif self.p == np.inf:
            v = np.clip(v, -self.radius, self.radius)
        else:
            v = project_l1_ball(v, self.radius)
        return self.center + v


class Box(RangeSet):
    """{y : lower <= y <= upper} componentwise."""

    def __init__(self, lower, upper):
        self.lower = np.atleast_1d(np.asarray(lower, dtype=float))
        self.upper = np.atleast_1d(np.asarray(upper, dtype=float))
        if np.any(self.lower > self.upper):
            raise ValueError("lower bound exceeds upper bound")

    def project(self, y):
        return np.clip(np.asarray(y, dtype=float), self.lower, self.upper)


class NonnegCone(RangeSet):
    """{y : y_j >= 0 for j in indices}; all coordinates when indices is None."""

    def __init__(self, indices=None):
        self.indices = None if indices is None else np.asarray(indices, dtype=int)

    def project(self, y):
        y = np.array(y, dtype=float, copy=True)
        if self.indices is None:
            np.maximum(y, 0.0, out=y)
        else:
            y[self.indices] = np.maximum(y[self.indices], 0.0)
        return y


class Hyperplane(RangeSet):
    """{y : <a, y> = beta}."""

    def __init__(self, normal, offset):
        self.normal = np.atleast_1d(np.asarray(normal, dtype=float))
        self.norm_sq = float(np.dot(self.normal, self.normal))
        if self.norm_sq == 0.0:
            raise ZeroNormal("hyperplane normal is zero")
        self.offset = float(offset)

    def project(self, y):
        y = np.asarray(y, dtype=float)
        return y - ((np.dot(self.normal, y) - self.offset) / self.norm_sq) * self.normal

    def distance(self, y):
        y = np.asarray(y, dtype=float)
        return abs(np.dot(self.normal, y) - self.offset) / np.sqrt(self.norm_sq)


class Halfspace(RangeSet):
    """{y : <a, y> <= beta}."""

    def __init__(self, normal, offset):
        self.normal = np.atleast_1d(np.asarray(normal, dtype=float))
        self.norm_sq = float(np.dot(self.normal, self.normal))
        if self.norm_sq == 0.0:
            raise ZeroNormal("halfspace normal is zero")
        self.offset = float(offset)

    def project(self, y):
        y = np.asarray(y, dtype=float)
        excess = np.dot(self.normal, y) - self.offset
        if excess <= 0.0:
            return y.copy()
        return y - (excess / self.norm_sq) * self.normal

    def distance(self, y):
        y = np.asarray(y, dtype=float)
        return max(0.0, np.dot(self.normal, y) - self.offset) / np.sqrt(self.norm_sq)


class AffineSubspace(RangeSet):
    """{y : A y = b} for a full-row-rank A (dense at the scales used here)."""

    def __init__(self, op, b):
        from .linops import LinearOperator, DenseMatrix

        if not isinstance(op, LinearOperator):
            op = DenseMatrix(op)
        self.op = op
        self.b = np.atleast_1d(np.asarray(b, dtype=float))
        if self.b.shape[0] != op.shape[0]:
            raise ValueError("right-hand side does not match the operator")

    def project(self, y):
        y = np.asarray(y, dtype=float)
        a = self.op.to_dense()
        gram = a @ a.T
        w = np.linalg.solve(gram, a @ y - self.b)
        return y - a.T @ w


def project_orthogonal(target, y):
    """Orthogonal projection of y onto the target set."""
    return target.project(y)


# ---------------------------------------------------------------------------
# simplex and l1-ball projections
# ---------------------------------------------------------------------------


def project_simplex(y, total=1.0):
    """Euclidean projection onto {z : z >= 0, sum(z) = total}, O(n log n).

    Sort-and-threshold: the largest k with u_k - (cumsum_k - total)/k > 0 fixes
    the active support, and the common shift follows from the sum constraint.
    """
    if total < 0:
        raise ValueError("total must be nonnegative")
    y = np.asarray(y, dtype=float)
    if total == 0.0:
        return np.zeros_like(y)
    u = np.sort(y)[::-1]
    css = np.cumsum(u) - total
    ks = np.arange(1, y.size + 1)
    k = ks[u - css / ks > 0][-1]
    theta = css[k - 1] / k
    return np.maximum(y - theta, 0.0)


def project_l1_ball(y, radius):
    """Euclidean projection onto {z : ||z||_1 <= radius}.

    Interior points are returned unchanged; otherwise project |y| onto the
    simplex of size ``radius`` and restore the signs.
    """
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    y = np.asarray(y, dtype=float)
    a = np.abs(y)
    if a.sum() <= radius:
        return y.copy()
    return np.sign(y) * project_simplex(a, radius)


# ---------------------------------------------------------------------------
# separating halfspaces for difficult constraints
# ---------------------------------------------------------------------------


class SeparatingHalfspace:
    """A halfspace H = {x : <normal, x> <= offset} separating a point from a
    constraint preimage, with the range-space residual that induced it."""

    __slots__ = ("normal", "offset", "w", "w_norm")

    def __init__(self, normal, offset, w, w_norm):
        self.normal = normal
        self.offset = float(offset)
        self.w = w
        self.w_norm = float(w_norm)

    def as_halfspace(self):
        return Halfspace(self.normal, self.offset)


def separating_halfspace(op, target, x, tol=1e-12):
    """Halfspace separating x from {z : A z in target} when x is infeasible.

    The normal is A^T w with w = A x - P_target(A x) and the offset is
    <A^T w, x> - ||w||^2; every feasible point lies inside, x lies strictly
    outside. Raises FeasiblePoint when ||w|| <= tol * (1 + ||A x||).
    """
    x = np.asarray(x, dtype=float)
    y = op.apply(x)
    w = y - target.project(y)
    w_norm = float(np.linalg.norm(w))
    if w_norm <= tol * (1.0 + float(np.linalg.norm(y))):
        raise FeasiblePoint("point already satisfies the constraint to tolerance")
    normal = op.apply_adjoint(w)
    offset = float(np.dot(normal, x)) - w_norm * w_norm
    return SeparatingHalfspace(normal, offset, w, w_norm)


# ---------------------------------------------------------------------------
# exact linesearch for hyperplane / halfspace Bregman projections
# ---------------------------------------------------------------------------


def _shrink_linesearch(x_star, a, beta, weights, nonneg, gp0=None):
    """Exact minimizer of g(t) = f*(x_star - t a) + t beta when f is a sum of
    coordinatewise ``w_j |x_j| + x_j^2 / 2`` terms.

    g' is piecewise linear and nondecreasing; walk its kinks in increasing |t|
    and return the first root (the left endpoint on flat stretches). All
    derivative values are expressed relative to g'(0), so callers that know
    g'(0) exactly (the solver knows it equals -||w||^2) keep full precision
    even when beta and the intercepts cancel almost completely. ``gp0``
    overrides the computed g'(0).
    """
    supp = np.nonzero(a)[0]
    if supp.size == 0:
        raise ZeroDirection("linesearch direction is zero")
    u = x_star[supp]
    av = a[supp]
    wv = weights[supp]

    def walk(u, av, gp0):
        # one-sided walk for t >= 0 assuming g'(0) < 0; g'(t) is tracked as
        # gp0 + rel + slope * t with rel the intercept change since t = 0
        s0 = soft_shrink(u, wv)

        def coeffs(pos, neg):
            # exact slope of g' on the active set, and the intercept change
            # against t = 0; unchanged coordinates contribute exact zeros, so
            # no large dot products cancel
            act = pos | neg
            r = np.where(pos, u - wv, np.where(neg, u + wv, 0.0))
            s = float(np.dot(av[act], av[act]))
            delta = float(np.dot(av, s0 - r))
            return s, delta

        act_pos = (u > wv) | ((u == wv) & (av < 0))
        act_neg = (u < -wv) | ((u == -wv) & (av > 0))
        slope, _ = coeffs(act_pos, act_neg)  # the intercept change at 0 is 0
        rel = 0.0

        # crossing events of u_j - t a_j through +w_j / -w_j; coordinates with
        # w_j = 0 never change their contribution and need no events
        ev_t = []
        ev_ds = []
        ev_dc = []
        for j in np.nonzero(wv > 0.0)[0]:
            aj, uj, wj = av[j], u[j], wv[j]
            tm = (uj - wj) / aj  # where u_j(t) = +w_j
            tp = (uj + wj) / aj  # where u_j(t) = -w_j
            if aj > 0:
                if tm > 0:  # leaves the positive active zone
                    ev_t.append(tm)
                    ev_ds.append(-aj * aj)
                    ev_dc.append(aj * (uj - wj))
                if tp > 0:  # enters the negative active zone
                    ev_t.append(tp)
                    ev_ds.append(aj * aj)
                    ev_dc.append(-aj * (uj + wj))
            else:
                if tp > 0:  # leaves the negative active zone
                    ev_t.append(tp)
                    ev_ds.append(-aj * aj)
                    ev_dc.append(aj * (uj + wj))
                if tm > 0:  # enters the positive active zone
                    ev_t.append(tm)
                    ev_ds.append(aj * aj)
                    ev_dc.append(-aj * (uj - wj))
        order = np.argsort(np.asarray(ev_t)) if ev_t else []

        def refined_root(t_lo, t_hi):
            # rebuild g' coefficients from scratch inside the root interval to
            # avoid accumulated drift from the incremental updates
            shifted = u - (0.5 * (t_lo + t_hi)) * av
            s, delta = coeffs(shifted > wv, shifted < -wv)
            if s == 0.0:
                return t_lo
            return min(max(-(gp0 + delta) / s, t_lo), t_hi)

        t_prev = 0.0
        for idx in order:
            t_ev = ev_t[idx]
            gp_ev = gp0 + rel + slope * t_ev
            if gp_ev >= 0.0:
                return t_ev if gp_ev == 0.0 else refined_root(t_prev, t_ev)
            slope += ev_ds[idx]
            rel += ev_dc[idx]
            t_prev = t_ev
        # past the last kink every supported coordinate is active: positively
        # when its value grows with t (a_j < 0), negatively otherwise
        s, delta = coeffs(av < 0, av > 0)
        return max(-(gp0 + delta) / s, t_prev)

    if gp0 is None:
        gp0 = beta - float(np.dot(av, soft_shrink(u, wv)))
    if gp0 == 0.0 or (nonneg and gp0 >= 0.0):
        return 0.0
    if gp0 < 0.0:
        return walk(u, av, float(gp0))
    return -walk(u, -av, -float(gp0))  # mirror: minimize g(-t) over t >= 0


def exact_linesearch(obj, x_star, a, beta, nonneg=False, gp0=None):
    """Exact minimizer of g(t) = f*(x_star - t a) + t beta.

    Uses the piecewise-linear kink walk whenever the objective exposes finite
    per-coordinate shrink weights on the support of ``a``, and a bracketed root
    find on the monotone derivative otherwise. With ``nonneg`` the minimization
    is over t >= 0 (halfspace targets); otherwise over all of R. ``gp0``
    supplies an exactly-known g'(0) (see _shrink_linesearch).
    """
    x_star = np.asarray(x_star, dtype=float)
    a = np.asarray(a, dtype=float)
    a_sq = float(np.dot(a, a))
    if a_sq == 0.0:
        raise ZeroDirection("linesearch direction is zero")
    weights = obj.shrink_weights()
    if weights is not None:
        supp = a != 0.0
        if np.all(np.isfinite(weights[supp])):
            w = np.where(np.isfinite(weights), weights, 0.0)
            return _shrink_linesearch(x_star, a, beta, w, nonneg, gp0=gp0)

    def gp(t):
        return beta - float(np.dot(a, obj.grad_conjugate(x_star - t * a)))

    g0 = gp(0.0) if gp0 is None else float(gp0)
    if g0 == 0.0 or (nonneg and g0 >= 0.0):
        return 0.0
    # |g'| grows at most like ||a||^2 / alpha, so the root is at least this far out
    first = obj.alpha * abs(g0) / a_sq
    if g0 < 0.0:
        lo, hi = 0.0, first
        for _ in range(200):
            if gp(hi) >= 0.0:
                break
            lo, hi = hi, 2.0 * hi
        else:
            raise NoConvergence("linesearch bracket expansion failed")
    else:
        lo, hi = -first, 0.0
        for _ in range(200):
            if gp(lo) <= 0.0:
                break
            lo, hi = 2.0 * lo, lo
        else:
            raise NoConvergence("linesearch bracket expansion failed")
    return float(brentq(gp, lo, hi, maxiter=200))


def exact_linesearch_elasticnet(x_star, a, beta, lam, nonneg=False):
    """Kink-walk linesearch for f(x) = lam ||x||_1 + ||x||_2^2 / 2.

    Returns argmin_t f*(x_star - t a) + t beta, over t >= 0 when ``nonneg``.
    """
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    x_star = np.asarray(x_star, dtype=float)
    a = np.asarray(a, dtype=float)
    if not np.any(a):
        raise ZeroDirection("linesearch direction is zero")
    return _shrink_linesearch(x_star, a, beta, np.full(x_star.shape, float(lam)), nonneg)


# ---------------------------------------------------------------------------
# Bregman projections
# ---------------------------------------------------------------------------


def bregman_project_hyperplane(obj, pair, normal, offset):
    """Bregman projection of a pair onto {x : <a, x> = beta} (exact linesearch,
    step over all of R). Returns the updated consistent pair."""
    normal = np.asarray(normal, dtype=float)
    if not np.any(normal):
        raise ZeroNormal("hyperplane normal is zero")
    t = exact_linesearch(obj, pair.x_star, normal, float(offset), nonneg=False)
    if t == 0.0:
        return pair
    return _shifted_pair(obj, pair, t, normal)


def bregman_project_halfspace(obj, pair, normal, offset):
    """Bregman projection onto {x : <a, x> <= beta}; identity on interior points,
    otherwise equal to the hyperplane projection (the step stays positive)."""
    normal = np.asarray(normal, dtype=float)
    if not np.any(normal):
        raise ZeroNormal("halfspace normal is zero")
    if float(np.dot(normal, pair.x)) <= float(offset):
        return pair
    t = exact_linesearch(obj, pair.x_star, normal, float(offset), nonneg=True)
    if t == 0.0:
        return pair
    return _shifted_pair(obj, pair, t, normal)


def _shifted_pair(obj, pair, t, direction):
    """Pair at the dual point x_star - t * direction, touching only the primal
    coordinates that can change (coordinate-separable coordinates off the
    direction's support keep their value)."""
    z_star = pair.x_star - t * direction
    weights = obj.shrink_weights()
    if weights is not None:
        supp = np.nonzero(direction)[0]
        if np.all(np.isfinite(weights[supp])):
            z = pair.x.copy()
            z[supp] = soft_shrink(z_star[supp], weights[supp])
            return PrimalDualPair(z, z_star)
    return pair_from_dual(obj, z_star)


def bregman_project_nonneg(obj, pair, indices=None):
    """Closed-form Bregman projection onto {x : x_j >= 0 on indices}.

    Valid when the objective is coordinatewise "w_j |x_j| + x_j^2/2" on the
    constrained coordinates: the admissible subgradient clamps the dual to the
    nonnegative orthant there and the primal is its shrinkage.
    """
    weights = obj.shrink_weights()
    idx = slice(None) if indices is None else np.asarray(indices, dtype=int)
    if weights is None or not np.all(np.isfinite(np.atleast_1d(weights[idx]))):
        raise TypeError(
            "nonnegativity projection needs coordinatewise l1 + squared structure "
            "on the constrained coordinates"
        )
    z_star = pair.x_star.copy()
    z_star[idx] = np.maximum(z_star[idx], 0.0)
    z = pair.x.copy()
    z[idx] = soft_shrink(z_star[idx], weights[idx])
    return PrimalDualPair(z, z_star)


def bregman_project_box(obj, pair, lower, upper):
    """Closed-form Bregman projection onto a box containing the origin, for
    coordinatewise l1 + squared objectives.

    The primal is the clipped shrinkage; the admissible subgradient keeps the
    dual value inside the box, shifts by +-w at active bounds, and is zeroed on
    coordinates pinned to a zero bound from outside.
    """
    weights = obj.shrink_weights()
    if weights is None or not np.all(np.isfinite(weights)):
        raise TypeError("box projection needs coordinatewise l1 + squared structure")
    lower = np.broadcast_to(np.asarray(lower, dtype=float), pair.x_star.shape)
    upper = np.broadcast_to(np.asarray(upper, dtype=float), pair.x_star.shape)
    if np.any(lower > 0.0) or np.any(upper < 0.0):
        raise BoxWithoutZero("box must contain the origin componentwise")
    s = soft_shrink(pair.x_star, weights)
    z = np.clip(s, lower, upper)
    z_star = np.where(s > upper, upper + weights, np.where(s < lower, lower - weights, pair.x_star))
    pinned = (z == 0.0) & (
        ((lower == 0.0) & (pair.x_star < 0.0)) | ((upper == 0.0) & (pair.x_star > 0.0))
    )
    z_star = np.where(pinned, 0.0, z_star)
    return PrimalDualPair(z, z_star)


def bregman_project_affine(obj, pair, op, b, grad_tol=1e-10, max_iter=10000):
    """Bregman projection onto {x : A x = b} by gradient descent on the dual
    w -> f*(x_star - A^T w) + <w, b> with the 1/Lipschitz step alpha / ||A||^2.

    Raises NoConvergence when the gradient norm has not reached ``grad_tol``
    within ``max_iter`` sweeps.
    """
    b = np.asarray(b, dtype=float)
    step = obj.alpha / op.norm_estimate() ** 2
    w = np.zeros(op.shape[0])
    z_star = pair.x_star
    for _ in range(max_iter):
        z_star = pair.x_star - op.apply_adjoint(w)
        grad = b - op.apply(obj.grad_conjugate(z_star))
        if np.linalg.norm(grad) <= grad_tol:
            return pair_from_dual(obj, z_star)
        w = w - step * grad
    raise NoConvergence("affine Bregman projection hit its iteration cap")


def has_bregman_projector(obj, target):
    """Whether ``bregman_project`` can handle this (objective, set) pairing."""
    weights = obj.shrink_weights()
    if isinstance(target, (Hyperplane, Halfspace, AffineSubspace)):
        return True
    if isinstance(target, NonnegCone):
        idx = slice(None) if target.indices is None else target.indices
        return weights is not None and np.all(np.isfinite(np.atleast_1d(weights[idx])))
    if isinstance(target, Box):
        return weights is not None and np.all(np.isfinite(weights))
    # pure quadratic objectives reduce every Bregman projection to the orthogonal one
    return weights is not None and not np.any(weights)


def bregman_project(obj, pair, target):
    """Bregman projection of a pair onto a simple constraint set.

    Dispatches to the closed-form and linesearch projectors; for purely
    quadratic objectives any set with an orthogonal projector works, since the
    Bregman projection then coincides with the orthogonal projection.
    """
    if isinstance(target, Hyperplane):
        return bregman_project_hyperplane(obj, pair, target.normal, target.offset)
    if isinstance(target, Halfspace):
        return bregman_project_halfspace(obj, pair, target.normal, target.offset)
    if isinstance(target, NonnegCone):
        return bregman_project_nonneg(obj, pair, target.indices)
    if isinstance(target, Box):
        return bregman_project_box(obj, pair, target.lower, target.upper)
    if isinstance(target, AffineSubspace):
        return bregman_project_affine(obj, pair, target.op, target.b)
    weights = obj.shrink_weights()
    if weights is not None and not np.any(weights):
        z = target.project(pair.x)
        return PrimalDualPair(z, z.copy())
    raise TypeError(
        f"no Bregman projector for {type(target).__name__} under {type(obj).__name__}"
    )
