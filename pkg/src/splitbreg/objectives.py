"""Strongly convex objectives with computable conjugates.

Every objective here is of the form "nonsmooth part + squared 2-norm / 2", which
makes the convex conjugate smooth with a Lipschitz gradient and makes the
gradient of the conjugate a proximal map. The solver only ever talks to an
objective through ``value``, ``conjugate`` and ``grad_conjugate``, plus the
optional per-coordinate shrink weights that enable closed-form linesearches.
"""

import numpy as np


class InvalidSubgradient(ValueError):
    """The supplied dual vector is not a subgradient at the supplied point."""


def soft_shrink(x, lam):
    """Componentwise soft shrinkage ``sign(x) * max(|x| - lam, 0)``.

    ``lam`` may be a scalar or a per-coordinate array of nonnegative weights.
    """
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.maximum(np.abs(x) - lam, 0.0)


def _check_dim(v, dimension, name):
    v = np.asarray(v, dtype=float)
    if v.shape != (dimension,):
        raise ValueError(f"{name} has shape {v.shape}, expected ({dimension},)")
    return v


class Objective:
    """A strongly convex function f with explicit conjugate machinery.

    Attributes
    ----------
    alpha : float
        Modulus of strong convexity; grad_conjugate is (1/alpha)-Lipschitz.
    dimension : int
        Length of the primal (and dual) vectors.
    """

    alpha = 1.0
    dimension = 0

    def value(self, x):
        raise NotImplementedError

    def conjugate(self, x_star):
        # The supremum in f* is attained at grad f*(x_star), so evaluate there.
        z = self.grad_conjugate(x_star)
        x_star = np.asarray(x_star, dtype=float)
        return float(np.dot(x_star, z) - self.value(z))

    def grad_conjugate(self, x_star):
        raise NotImplementedError

    def shrink_weights(self):
        """Per-coordinate l1 weight when f splits into ``w_j |x_j| + x_j^2 / 2``
        terms on each coordinate; entries are NaN on coordinates without that
        structure, and the result is None when no coordinate has it. Used to
        pick the closed-form kink-walk linesearch over the root-finding
        fallback."""
        return None


class SquaredNorm(Objective):
    """f(x) = ||x||_2^2 / 2. Self-conjugate; grad f* is the identity."""

    def __init__(self, dimension):
        self.dimension = int(dimension)
        self.alpha = 1.0

    def value(self, x):
        x = _check_dim(x, self.dimension, "x")
        return float(0.5 * np.dot(x, x))

    def conjugate(self, x_star):
        x_star = _check_dim(x_star, self.dimension, "x_star")
        return float(0.5 * np.dot(x_star, x_star))

    def grad_conjugate(self, x_star):
        return _check_dim(x_star, self.dimension, "x_star").copy()

    def shrink_weights(self):
        return np.zeros(self.dimension)


class ElasticNet(Objective):
    """f(x) = lam * ||x||_1 + ||x||_2^2 / 2 with lam >= 0.

    grad f* is soft shrinkage by lam and f*(x*) = ||soft_shrink(x*, lam)||^2 / 2.
    """

    def __init__(self, lam, dimension):
        if lam < 0:
            raise ValueError("lam must be nonnegative")
        self.lam = float(lam)
        self.dimension = int(dimension)
        self.alpha = 1.0

    def value(self, x):
        x = _check_dim(x, self.dimension, "x")
        return float(self.lam * np.abs(x).sum() + 0.5 * np.dot(x, x))

    def conjugate(self, x_star):
        x_star = _check_dim(x_star, self.dimension, "x_star")
        z = soft_shrink(x_star, self.lam)
        return float(0.5 * np.dot(z, z))

    def grad_conjugate(self, x_star):
        x_star = _check_dim(x_star, self.dimension, "x_star")
        return soft_shrink(x_star, self.lam)

    def shrink_weights(self):
        return np.full(self.dimension, self.lam)


def _validate_partition(groups, dimension):
    """Groups must partition range(dimension); returns a label array."""
    labels = np.full(dimension, -1, dtype=int)
    for g_id, g in enumerate(groups):
        g = np.asarray(g, dtype=int)
        if g.size == 0:
            raise ValueError("empty group")
        if np.any(g < 0) or np.any(g >= dimension):
            raise ValueError("group index out of range")
        if np.any(labels[g] != -1):
            raise ValueError("groups overlap")
        labels[g] = g_id
    if np.any(labels == -1):
        raise ValueError("groups do not cover every coordinate")
    return labels


class GroupElasticNet(Objective):
    """f(x) = lam * sum_g ||x_g||_2 + ||x||_2^2 / 2 over a partition of groups.

    grad f* applies blockwise shrinkage max(1 - lam/||z_g||, 0) * z_g, which for
    size-2 groups is exactly the isotropic total-variation proximal map used by
    the tomography experiment.
    """

    def __init__(self, lam, groups):
        if lam < 0:
            raise ValueError("lam must be nonnegative")
        self.lam = float(lam)
        self.groups = [np.asarray(g, dtype=int) for g in groups]
        self.dimension = int(sum(g.size for g in self.groups))
        self.labels = _validate_partition(self.groups, self.dimension)
        self.n_groups = len(self.groups)
        self.alpha = 1.0

    def _group_norms(self, v):
        sq = np.bincount(self.labels, weights=v * v, minlength=self.n_groups)
        return np.sqrt(sq)

    def value(self, x):
        x = _check_dim(x, self.dimension, "x")
        return float(self.lam * self._group_norms(x).sum() + 0.5 * np.dot(x, x))

    def grad_conjugate(self, x_star):
        x_star = _check_dim(x_star, self.dimension, "x_star")
        norms = self._group_norms(x_star)
        scale = np.zeros(self.n_groups)
        nz = norms > 0.0
        scale[nz] = np.maximum(1.0 - self.lam / norms[nz], 0.0)
        return x_star * scale[self.labels]


class GroupedMax(Objective):
    """f(x) = lam * sum_l |G_l| * max_{j in G_l} |x_j| + ||x||_2^2 / 2.

    The group weight is the group size. grad f* subtracts, blockwise, the
    projection onto the l1 ball of radius lam * |G_l| (Moreau decomposition of
    the weighted max-norm proximal map).
    """

    def __init__(self, lam, groups):
        if lam < 0:
            raise ValueError("lam must be nonnegative")
        self.lam = float(lam)
        self.groups = [np.asarray(g, dtype=int) for g in groups]
        self.dimension = int(sum(g.size for g in self.groups))
        _validate_partition(self.groups, self.dimension)
        self.alpha = 1.0

    def value(self, x):
        x = _check_dim(x, self.dimension, "x")
        total = sum(g.size * np.abs(x[g]).max() for g in self.groups)
        return float(self.lam * total + 0.5 * np.dot(x, x))

    def grad_conjugate(self, x_star):
        from .projections import project_l1_ball  # deferred: avoids an import cycle

        x_star = _check_dim(x_star, self.dimension, "x_star")
        out = np.empty_like(x_star)
        for g in self.groups:
            block = x_star[g]
            out[g] = block - project_l1_ball(block, self.lam * g.size)
        return out


class ProductObjective(Objective):
    """Separable sum of objectives over consecutive coordinate blocks."""

    def __init__(self, parts):
        self.parts = list(parts)
        if not self.parts:
            raise ValueError("need at least one part")
        offsets = np.cumsum([0] + [p.dimension for p in self.parts])
        self.slices = [slice(int(a), int(b)) for a, b in zip(offsets[:-1], offsets[1:])]
        self.dimension = int(offsets[-1])
        self.alpha = float(min(p.alpha for p in self.parts))

    def value(self, x):
        x = _check_dim(x, self.dimension, "x")
        return float(sum(p.value(x[s]) for p, s in zip(self.parts, self.slices)))

    def conjugate(self, x_star):
        x_star = _check_dim(x_star, self.dimension, "x_star")
        return float(sum(p.conjugate(x_star[s]) for p, s in zip(self.parts, self.slices)))

    def grad_conjugate(self, x_star):
        x_star = _check_dim(x_star, self.dimension, "x_star")
        out = np.empty_like(x_star)
        for p, s in zip(self.parts, self.slices):
            out[s] = p.grad_conjugate(x_star[s])
        return out

    def shrink_weights(self):
        parts = [p.shrink_weights() for p in self.parts]
        if all(w is None for w in parts):
            return None
        out = np.full(self.dimension, np.nan)
        for w, s in zip(parts, self.slices):
            if w is not None:
                out[s] = w
        return out


class PrimalDualPair:
    """A primal point together with an admissible subgradient.

    The pair is consistent by construction: ``x == grad_conjugate(x_star)``,
    equivalently ``x_star`` is a subgradient of the objective at ``x``.
    """

    __slots__ = ("x", "x_star")

    def __init__(self, x, x_star):
        self.x = np.asarray(x, dtype=float)
        self.x_star = np.asarray(x_star, dtype=float)

    def __repr__(self):
        return f"PrimalDualPair(x={self.x!r}, x_star={self.x_star!r})"


def pair_from_dual(obj, x_star):
    """Build a consistent pair from a dual vector: x = grad f*(x_star)."""
    x_star = np.asarray(x_star, dtype=float)
    return PrimalDualPair(obj.grad_conjugate(x_star), x_star)


def fenchel_gap(obj, x_star, x):
    """Fenchel-Young gap f*(x*) - <x*, x> + f(x).

    Nonnegative for every pair; zero exactly when x_star is a subgradient of the
    objective at x (equivalently x = grad f*(x_star)).
    """
    x = np.asarray(x, dtype=float)
    x_star = np.asarray(x_star, dtype=float)
    return float(obj.conjugate(x_star) - np.dot(x_star, x) + obj.value(x))


def bregman_distance(obj, x, x_star, y):
    """Bregman distance f(y) - f(x) - <x_star, y - x> for an admissible pair.

    Raises InvalidSubgradient when the Fenchel-Young gap of (x, x_star) exceeds
    1e-8 * (1 + |f(x)|); with an admissible pair the result is nonnegative and
    bounded below by alpha/2 * ||x - y||^2.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    x_star = np.asarray(x_star, dtype=float)
    fx = obj.value(x)
    gap = fenchel_gap(obj, x_star, x)
    if abs(gap) > 1e-8 * (1.0 + abs(fx)):
        raise InvalidSubgradient(
            f"dual vector is not a subgradient at x (Fenchel-Young gap {gap:.3e})"
        )
    return float(obj.value(y) - fx - np.dot(x_star, y - x))
