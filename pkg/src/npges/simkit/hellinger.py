"""Hellinger distances between SEM-derived densities and the separation diagnostic.

Distances use the convention ``rho^2 = int (sqrt p - sqrt q)^2``, so
``0 <= rho <= sqrt(2)``.  Quadrature is a Gauss-Legendre tensor grid over
each handle's bounding box; Monte Carlo samples from the even mixture of
the two densities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.special import logsumexp

from npges.bayes.lecam import LeCamConfig, solve_epsilon
from npges.graphs import Dag, add_edge, descendants
from npges.simkit.sem import LinearGaussian, SemSpec, sample

__all__ = [
    "DensityHandle",
    "gaussian",
    "hellinger",
    "integrated_hellinger",
    "sem_joint",
    "sem_marginal",
    "sem_conditional",
    "separation_diagnostic",
    "separation_report",
]

MAX_QUAD_DIM = 3
_CHUNK = 1 << 18


@dataclass(frozen=True)
class DensityHandle:
    """A log-density over variables ``args``, optionally conditional on ``given``.

    ``logpdf(x)`` takes ``x`` of shape ``(m, len(args))``; conditional
    handles take ``logpdf(x, y)`` with ``y`` of shape ``(m, len(given))``.
    ``bounds`` is a box per variable in ``args`` outside which the mass is
    negligible.  ``sampler(rng, m)``, when present, draws from a joint handle.
    """

    logpdf: Callable[..., np.ndarray]
    args: tuple[int, ...]
    bounds: tuple[tuple[float, float], ...]
    given: tuple[int, ...] = ()
    sampler: Callable[[np.random.Generator, int], np.ndarray] | None = None

    def __post_init__(self):
        if len(self.bounds) != len(self.args):
            raise ValueError("need one bounding interval per argument")
        if set(self.args) & set(self.given):
            raise ValueError("argument and conditioning sets overlap")

    @property
    def dim(self) -> int:
        return len(self.args)


def gaussian(mean: Sequence[float], cov, args: Sequence[int] | None = None,
             tail: float = 12.0) -> DensityHandle:
    """Multivariate normal handle with exact sampler."""
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    k = mean.size
    chol = np.linalg.cholesky(cov)
    log_norm = -0.5 * k * math.log(2 * math.pi) - np.log(np.diag(chol)).sum()

    def logpdf(x, y=None):
        x = np.asarray(x, dtype=float).reshape(-1, k)
        u = np.linalg.solve(chol, (x - mean).T)
        return log_norm - 0.5 * (u * u).sum(axis=0)

    def sampler(rng, m):
        return mean + rng.standard_normal((m, k)) @ chol.T

    sd = np.sqrt(np.diag(cov))
    bounds = tuple((float(mu - tail * s), float(mu + tail * s)) for mu, s in zip(mean, sd))
    return DensityHandle(logpdf, tuple(range(k)) if args is None else tuple(args), bounds,
                         sampler=sampler)


def _gl_grid(bounds: Sequence[tuple[float, float]], budget: int) -> tuple[np.ndarray, np.ndarray]:
    nodes, weights = np.polynomial.legendre.leggauss(budget)
    axes, ws = [], []
    for lo, hi in bounds:
        half = 0.5 * (hi - lo)
        axes.append(lo + half * (nodes + 1.0))
        ws.append(half * weights)
    pts = np.stack([a.ravel() for a in np.meshgrid(*axes, indexing="ij")], axis=1)
    w = np.ones(len(pts))
    for wi in np.meshgrid(*ws, indexing="ij"):
        w = w * wi.ravel()
    return pts, w


def _union(a, b):
    return tuple((min(x[0], y[0]), max(x[1], y[1])) for x, y in zip(a, b))


def hellinger(p: DensityHandle, q: DensityHandle, method: str = "quadrature",
              budget: int | None = None, seed: int = 0) -> float:
    """Hellinger distance between two joint densities on the same variables.

    ``budget`` is points per axis for quadrature (default 200) and the
    number of draws for Monte Carlo (default ``10**6``).
    """
    if p.args != q.args:
        raise ValueError(f"argument sets differ: {p.args} vs {q.args}")
    if p.given or q.given:
        raise ValueError("hellinger compares joint densities; use integrated_hellinger")
    if method == "quadrature":
        if p.dim > MAX_QUAD_DIM:
            raise ValueError(f"quadrature supports at most {MAX_QUAD_DIM} dimensions")
        pts, w = _gl_grid(_union(p.bounds, q.bounds), budget or 200)
        total = 0.0
        for s in range(0, len(pts), _CHUNK):
            x = pts[s:s + _CHUNK]
            diff = np.exp(0.5 * p.logpdf(x)) - np.exp(0.5 * q.logpdf(x))
            total += float(np.dot(w[s:s + _CHUNK], diff * diff))
    elif method == "monte-carlo":
        if p.sampler is None or q.sampler is None:
            raise ValueError("Monte Carlo needs samplers on both handles")
        m = budget or 10 ** 6
        rng = np.random.default_rng(seed)
        n_p = int(rng.binomial(m, 0.5))
        x = np.concatenate([p.sampler(rng, n_p), q.sampler(rng, m - n_p)])
        lp, lq = p.logpdf(x), q.logpdf(x)
        half_lr = 0.5 * (np.logaddexp(lp, lq) - math.log(2.0))
        diff = np.exp(0.5 * lp - half_lr) - np.exp(0.5 * lq - half_lr)
        total = float(np.mean(diff * diff))
    else:
        raise ValueError(f"unknown method {method!r}")
    return math.sqrt(min(max(total, 0.0), 2.0))


def _completed(h: DensityHandle, over: tuple[int, ...]) -> Callable:
    """``h`` as a function of ``(x, y_over)``, constant in variables it ignores."""
    missing = set(h.given) - set(over)
    if missing:
        raise ValueError(f"weight does not cover conditioning variables {sorted(missing)}")
    cols = [over.index(v) for v in h.given]
    return lambda x, y: h.logpdf(x, y[:, cols])


def integrated_hellinger(f: DensityHandle, g: DensityHandle, weight: DensityHandle,
                         budget: int = 64, squared: bool = False) -> float:
    """Weighted Hellinger distance between two conditionals of the same variables.

    The squared distance ``int w(y) int (sqrt f(x|y) - sqrt g(x|y))^2 dx dy``
    is computed by quadrature with ``y`` ranging over ``weight.args``; a
    conditional that ignores some of these is extended as constant in them.
    Returns its square root unless ``squared``.
    """
    if f.args != g.args:
        raise ValueError(f"child variables differ: {f.args} vs {g.args}")
    over = weight.args
    if weight.given:
        raise ValueError("weight must be a joint density")
    if f.dim + weight.dim > MAX_QUAD_DIM:
        raise ValueError(f"quadrature supports at most {MAX_QUAD_DIM} dimensions")
    lf, lg = _completed(f, over), _completed(g, over)
    pts, w = _gl_grid(_union(f.bounds, g.bounds) + weight.bounds, budget)
    x, y = pts[:, :f.dim], pts[:, f.dim:]
    if weight.dim:
        lw = weight.logpdf(y)
    else:
        lw = np.zeros(len(pts))
    diff = np.exp(0.5 * lf(x, y)) - np.exp(0.5 * lg(x, y))
    total = float(np.dot(w * np.exp(lw), diff * diff))
    total = min(max(total, 0.0), 2.0)
    return total if squared else math.sqrt(total)


# -- densities implied by a SEM --------------------------------------------

def _linear(spec: SemSpec) -> bool:
    return all(isinstance(m, LinearGaussian) for m in spec.mechanisms)


def _gaussian_moments(spec: SemSpec) -> tuple[np.ndarray, np.ndarray]:
    d = spec.d
    coef = np.zeros((d, d))
    for j, m in enumerate(spec.mechanisms):
        for k, b in m.coefficients:
            coef[j, k] = b
    a = np.linalg.inv(np.eye(d) - coef)
    mean = a @ np.array([m.intercept for m in spec.mechanisms])
    cov = a @ np.diag([m.noise_var for m in spec.mechanisms]) @ a.T
    return mean, cov


def sem_joint(spec: SemSpec) -> DensityHandle:
    """Joint density of all vertices, with the SEM sampler attached."""
    def logpdf(x, y=None):
        return spec.joint_logpdf(x)

    def sampler(rng, m):
        return sample(spec, m, int(rng.integers(2 ** 63))).values

    return DensityHandle(logpdf, tuple(range(spec.d)), tuple(spec.supports()), sampler=sampler)


def sem_marginal(spec: SemSpec, variables: Sequence[int], budget: int = 64) -> DensityHandle:
    """Marginal density of ``variables``; other vertices are integrated out by quadrature."""
    a = tuple(variables)
    if _linear(spec):
        mean, cov = _gaussian_moments(spec)
        h = gaussian(mean[list(a)], cov[np.ix_(a, a)], a)
        return DensityHandle(h.logpdf, a, tuple(spec.supports()[v] for v in a), sampler=h.sampler)
    rest = [v for v in range(spec.d) if v not in a]
    if len(rest) > MAX_QUAD_DIM:
        raise ValueError(f"cannot integrate out {len(rest)} variables by quadrature")
    sup = spec.supports()
    if rest:
        r_pts, r_w = _gl_grid([sup[v] for v in rest], budget)
        log_rw = np.log(r_w)

    def logpdf(x, y=None):
        x = np.asarray(x, dtype=float).reshape(-1, len(a))
        if not rest:
            full = np.empty((len(x), spec.d))
            full[:, list(a)] = x
            return spec.joint_logpdf(full)
        # grids repeat values along ignored axes; integrate each distinct point once
        x, back = np.unique(x, axis=0, return_inverse=True)
        out = np.empty(len(x))
        step = max(1, _CHUNK // len(r_pts))
        for s in range(0, len(x), step):
            xs = x[s:s + step]
            full = np.empty((len(xs) * len(r_pts), spec.d))
            full[:, list(a)] = np.repeat(xs, len(r_pts), axis=0)
            full[:, rest] = np.tile(r_pts, (len(xs), 1))
            lp = spec.joint_logpdf(full).reshape(len(xs), len(r_pts)) + log_rw
            out[s:s + step] = logsumexp(lp, axis=1)
        return out[back.reshape(-1)]

    return DensityHandle(logpdf, a, tuple(sup[v] for v in a))


def sem_conditional(spec: SemSpec, j: int, given: Sequence[int], budget: int = 64) -> DensityHandle:
    """Density of vertex ``j`` given ``given`` under the SEM.

    When ``given`` holds every parent of ``j`` and no descendant, this is
    the mechanism itself; otherwise it is a ratio of marginals.
    """
    given = tuple(given)
    if j in given:
        raise ValueError("vertex cannot condition on itself")
    pa = spec.dag.parents[j]
    bounds = (spec.supports()[j],)
    if pa <= set(given) and not (descendants(spec.dag, j) & set(given)):
        cols = [given.index(k) for k in spec.parent_order(j)]

        def logpdf(x, y):
            x = np.asarray(x, dtype=float).reshape(-1)
            return spec.cond_logpdf(j, x, np.asarray(y, dtype=float)[:, cols])

        return DensityHandle(logpdf, (j,), bounds, given)
    if _linear(spec):
        mean, cov = _gaussian_moments(spec)
        g = list(given)
        if g:
            beta = np.linalg.solve(cov[np.ix_(g, g)], cov[g, j])
            var = float(cov[j, j] - cov[j, g] @ beta)
        else:
            beta, var = np.zeros(0), float(cov[j, j])
        mu_g = mean[g]

        def logpdf(x, y):
            m = mean[j] + (np.asarray(y, dtype=float).reshape(len(x), -1) - mu_g) @ beta
            z = np.asarray(x, dtype=float).reshape(-1) - m
            return -0.5 * math.log(2 * math.pi * var) - 0.5 * z * z / var

        return DensityHandle(logpdf, (j,), bounds, given)
    top = sem_marginal(spec, (j,) + given, budget)
    bottom = sem_marginal(spec, given, budget) if given else None

    def logpdf(x, y):
        x = np.asarray(x, dtype=float).reshape(-1, 1)
        y = np.asarray(y, dtype=float).reshape(len(x), -1)
        out = top.logpdf(np.hstack([x, y]))
        return out - bottom.logpdf(y) if bottom is not None else out

    return DensityHandle(logpdf, (j,), bounds, given)


def _gaussian_separation(spec: SemSpec, j: int, a: tuple[int, ...], s: tuple[int, ...]) -> float:
    mean, cov = _gaussian_moments(spec)

    def regress(cols):
        c = list(cols)
        if not c:
            return np.zeros(0), float(cov[j, j])
        beta = np.linalg.solve(cov[np.ix_(c, c)], cov[c, j])
        return beta, float(cov[j, j] - cov[j, c] @ beta)

    b1, v1 = regress(a)
    b2, v2 = regress(s)
    # conditional-mean gap c^T (x_A - mu_A) has mean zero under the true law
    c = b1.copy()
    for i, v in enumerate(a):
        if v in s:
            c[i] -= b2[s.index(v)]
    spread = float(c @ cov[np.ix_(a, a)] @ c) if len(a) else 0.0
    v_sum = v1 + v2
    bc = math.sqrt(2.0 * math.sqrt(v1 * v2) / v_sum) / math.sqrt(1.0 + spread / (2.0 * v_sum))
    return math.sqrt(min(max(2.0 * (1.0 - bc), 0.0), 2.0))


def separation_diagnostic(spec: SemSpec, g: Dag, edge: tuple[int, int], budget: int = 64) -> float:
    """Plug-in signal strength for the edge ``k -> j`` missing from ``g``.

    Integrated Hellinger distance, weighted by the true law of
    ``pa_g(j) + k``, between the true conditional of ``j`` given
    ``pa_g(j) + k`` and the true conditional given ``pa_g(j)`` alone.
    """
    k, j = edge
    if g.d != spec.d:
        raise ValueError("graph and SEM have different vertex counts")
    if g.adjacent(k, j):
        raise ValueError(f"edge {k + 1} -> {j + 1} is already present in g")
    s = tuple(sorted(g.parents[j]))
    a = tuple(sorted(s + (k,)))
    if _linear(spec):
        return _gaussian_separation(spec, j, a, s)
    if len(a) + 1 > MAX_QUAD_DIM:
        raise ValueError(f"quadrature supports at most {MAX_QUAD_DIM} dimensions")
    f = sem_conditional(spec, j, a, budget)
    h = sem_conditional(spec, j, s, budget)
    return integrated_hellinger(f, h, sem_marginal(spec, a, budget), budget)


def separation_report(spec: SemSpec, g: Dag, edge: tuple[int, int], n_grid: Sequence[int],
                      gamma: float = 1.0, budget: int = 64) -> list[dict]:
    """The diagnostic next to ``eps_n`` of ``g`` plus the edge, for each ``n``."""
    delta = separation_diagnostic(spec, g, edge, budget)
    bigger = add_edge(g, *edge)
    return [{"n": int(n), "delta": delta,
             "epsilon": solve_epsilon(LeCamConfig(int(n), g.d, gamma), bigger.sparsity)}
            for n in n_grid]
