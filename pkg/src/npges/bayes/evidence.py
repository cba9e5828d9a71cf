"""Local marginal evidence of one column given a set of parent columns.

Every backend returns a natural-log evidence for the key
``(node, parent_set)`` that depends on nothing else, which is what makes
posterior odds decomposable.
"""

from __future__ import annotations

import json
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np
from numba import njit
from scipy.linalg import solve_triangular
from scipy.special import gammaln, logsumexp

from npges.simkit.data import Dataset

__all__ = [
    "EvidenceKey",
    "DegenerateDataError",
    "EvidenceBackend",
    "ConjugateGaussian",
    "BicScore",
    "DpmMonteCarlo",
    "EvidenceCache",
    "log_evidence",
    "make_backend",
]


class DegenerateDataError(ValueError):
    """A column has zero variance, or there are too few rows."""


@dataclass(frozen=True, order=True)
class EvidenceKey:
    node: int
    parent_set: tuple[int, ...] = ()

    def __post_init__(self):
        ps = tuple(sorted(set(int(k) for k in self.parent_set)))
        if self.node in ps:
            raise ValueError(f"node {self.node} cannot be its own parent")
        object.__setattr__(self, "parent_set", ps)


def _check(data: Dataset, key: EvidenceKey) -> None:
    if data.n < 2:
        raise DegenerateDataError("need at least two rows")
    cols = (key.node,) + key.parent_set
    if max(cols) >= data.d or min(cols) < 0:
        raise ValueError(f"key {key} refers to a column outside 0..{data.d - 1}")
    _, sd = data.column_stats()
    bad = [data.names[c] for c in cols if not sd[c] > 0]
    if bad:
        raise DegenerateDataError(f"zero-variance column(s): {', '.join(bad)}")


class EvidenceBackend(ABC):
    name: str = "abstract"

    @abstractmethod
    def log_evidence(self, data: Dataset, key: EvidenceKey) -> float:
        ...

    def config(self) -> dict:
        return {"backend": self.name}


@dataclass(frozen=True)
class ConjugateGaussian(EvidenceBackend):
    """Exact marginal likelihood of a Bayesian linear regression.

    ``x_j = b0 + b.x_S + e`` with ``e ~ N(0, s2)``, coefficients (intercept
    included) ``~ N(0, s2 * prior_scale^2 * I)`` and ``s2 ~ InvGamma(a0, b0)``.
    With ``standardize`` the regression runs on standardized columns and
    the Jacobian of the child's scaling is added back, so the value is a
    density of the raw child column.
    """

    prior_scale: float = 1.0
    a0: float = 1.0
    b0: float = 1.0
    standardize: bool = True
    name: str = "conjugate"

    def log_evidence(self, data: Dataset, key: EvidenceKey) -> float:
        _check(data, key)
        z = data.standardized() if self.standardize else data.values
        y = z[:, key.node]
        X = np.column_stack([np.ones(data.n), z[:, list(key.parent_set)]])
        val = conjugate_log_marginal(X, y, self.prior_scale, self.a0, self.b0)
        if self.standardize:
            val -= data.n * math.log(data.column_stats()[1][key.node])
        return val

    def config(self) -> dict:
        return {"backend": self.name, "prior_scale": self.prior_scale, "a0": self.a0,
                "b0": self.b0, "standardize": self.standardize}


def conjugate_log_marginal(X: np.ndarray, y: np.ndarray, prior_scale: float,
                           a0: float, b0: float) -> float:
    n, p = X.shape
    prec0 = 1.0 / prior_scale**2
    A = X.T @ X + prec0 * np.eye(p)
    L = np.linalg.cholesky(A)
    m = np.linalg.solve(A, X.T @ y)
    resid = y - X @ m
    bn = b0 + 0.5 * (resid @ resid + prec0 * (m @ m))
    an = a0 + 0.5 * n
    logdet_ratio = p * math.log(prec0) - 2.0 * np.log(np.diag(L)).sum()
    return float(-0.5 * n * math.log(2 * math.pi) + 0.5 * logdet_ratio
                 + a0 * math.log(b0) - an * math.log(bn) + gammaln(an) - gammaln(a0))


@dataclass(frozen=True)
class BicScore(EvidenceBackend):
    """Maximised Gaussian log-likelihood minus ``(|S| + 2)/2 * log n``."""

    name: str = "bic"

    def log_evidence(self, data: Dataset, key: EvidenceKey) -> float:
        _check(data, key)
        n = data.n
        y = data.values[:, key.node]
        X = np.column_stack([np.ones(n), data.values[:, list(key.parent_set)]])
        coef, *_ = np.linalg.lstsq(X, y, rcond=None)
        rss = float(np.sum((y - X @ coef) ** 2))
        if not rss > 0:
            raise DegenerateDataError(f"column {data.names[key.node]} is fitted exactly")
        loglik = -0.5 * n * (math.log(2 * math.pi * rss / n) + 1.0)
        return loglik - 0.5 * (len(key.parent_set) + 2) * math.log(n)


@dataclass(frozen=True)
class DpmMonteCarlo(EvidenceBackend):
    """Monte Carlo evidence under a truncated Dirichlet-process location mixture.

    Each of the ``M`` prior draws is a ``K``-component Gaussian mixture on
    all standardized columns: stick-breaking weights with concentration
    ``alpha``, component centres from the base measure, and kernels
    ``N(centre, sigma^2 R)`` where ``R`` is the sample correlation matrix
    and ``sigma^2 ~ InvGamma(ig_shape, ig_scale)``.  The base measure
    ``"empirical"`` centres components on randomly chosen data rows plus
    ``N(0, base_scale^2)`` jitter; ``"gaussian"`` draws them from
    ``N(0, base_scale^2 I)``.

    The evidence of column ``j`` given ``S`` is the ratio
    ``m(x_j, x_S) / m(x_S)`` of Monte Carlo averages of the mixture
    marginals, both taken over the same draws.  Draws depend on
    ``(seed, n, d)`` only, so every key is scored against one prior.

    With ``n`` in the thousands the average is carried by a handful of
    draws.  Unless ``screen_rows`` is ``None``, draws are ranked on a fixed
    subsample of ``screen_rows`` rows and only the ``keep`` leaders of each
    average are summed over all rows; the others are treated as
    negligible.
    """

    K: int = 10
    M: int = 2000
    seed: int = 0
    alpha: float = 10.0
    base: str = "empirical"
    base_scale: float = 0.05
    ig_shape: float = 3.0
    ig_scale: float = 0.2
    screen_rows: int | None = 256
    keep: int = 64
    name: str = "dpm"

    def __post_init__(self):
        if self.K < 1 or self.M < 1:
            raise ValueError("K and M must be positive")
        if self.base not in ("empirical", "gaussian"):
            raise ValueError(f"unknown base measure {self.base!r}")

    def config(self) -> dict:
        return {"backend": self.name, "K": self.K, "M": self.M, "seed": self.seed,
                "alpha": self.alpha, "base": self.base, "base_scale": self.base_scale,
                "ig_shape": self.ig_shape, "ig_scale": self.ig_scale,
                "screen_rows": self.screen_rows, "keep": self.keep}

    def draws(self, n: int, dim: int):
        """Mixture draws ``(log_weights, locations or row indices, jitter, variances)``."""
        rng = np.random.default_rng([self.seed, n, dim])
        K, M = self.K, self.M
        v = rng.beta(1.0, self.alpha, size=(M, K - 1))
        logw = np.empty((M, K))
        log_rest = np.zeros(M)
        for k in range(K - 1):
            logw[:, k] = log_rest + np.log(v[:, k])
            log_rest = log_rest + np.log1p(-v[:, k])
        logw[:, K - 1] = log_rest
        rows = rng.integers(0, n, size=(M, K))
        jitter = rng.normal(scale=self.base_scale, size=(M, K, dim))
        var = 1.0 / rng.gamma(self.ig_shape, 1.0 / self.ig_scale, size=M)
        return logw, rows, jitter, var

    def log_evidence(self, data: Dataset, key: EvidenceKey) -> float:
        _check(data, key)
        cols = [*key.parent_set, key.node]
        zall = data.standardized()
        n = data.n
        logw, rows, jitter, var = self.draws(n, data.d)
        centers = zall[rows] + jitter if self.base == "empirical" else jitter
        z, centers, log_det = _whiten(data, cols, zall, centers)
        log_joint, log_par = self._log_averages(z, centers, logw, var)
        log_m = log_joint - log_par - n * log_det
        return float(log_m - n * math.log(data.column_stats()[1][key.node]))

    def _log_averages(self, z, centers, logw, var) -> tuple[float, float]:
        n, dim = z.shape
        log_m = math.log(self.M)
        if self.screen_rows is None or self.screen_rows >= n or self.keep >= self.M:
            ll_joint, ll_par = _mixture_logliks(z, centers, logw, var)
            return logsumexp(ll_joint) - log_m, (logsumexp(ll_par) - log_m if dim > 1 else 0.0)
        # rank draws on a fixed row subsample, then score the leaders on every row
        sub = np.random.default_rng([self.seed, n]).choice(n, self.screen_rows, replace=False)
        sub.sort()
        est_joint, est_par = _mixture_logliks(z, centers, logw, var, rows=sub)
        lead = np.argsort(-est_joint, kind="stable")[: self.keep]
        if dim > 1:
            lead = np.union1d(lead, np.argsort(-est_par, kind="stable")[: self.keep])
        ll_joint, ll_par = _mixture_logliks(z, centers, logw, var, draws=lead)
        return logsumexp(ll_joint) - log_m, (logsumexp(ll_par) - log_m if dim > 1 else 0.0)


def _whiten(data: Dataset, cols: list[int], zall: np.ndarray, centers: np.ndarray):
    """Map columns ``cols`` to coordinates where the kernel ``sigma^2 R`` is isotropic.

    Returns the whitened data, whitened centres and ``log L[-1, -1]``, the
    log-Jacobian gap between the full and the leading sub-block.
    """
    corr = data._cache.get("corr")
    if corr is None:
        corr = data._cache.setdefault("corr", zall.T @ zall / data.n)
    sub = corr[np.ix_(cols, cols)]
    try:
        chol = np.linalg.cholesky(sub)
    except np.linalg.LinAlgError:
        raise DegenerateDataError(
            f"columns {[data.names[c] for c in cols]} are collinear") from None
    if not chol[-1, -1] > 1e-12:
        raise DegenerateDataError(f"columns {[data.names[c] for c in cols]} are collinear")
    z = solve_triangular(chol, zall[:, cols].T, lower=True).T
    M, K, _ = centers.shape
    c = solve_triangular(chol, centers[:, :, cols].reshape(M * K, -1).T, lower=True).T
    return np.ascontiguousarray(z), np.ascontiguousarray(c.reshape(M, K, len(cols))), math.log(chol[-1, -1])


@njit(cache=True)
def _mixture_logliks_kernel(z, rows, draws, centers, logw, var, ll_joint, ll_par):
    dim = z.shape[1]
    K = centers.shape[1]
    n = rows.shape[0]
    tj = np.empty(K)
    tp = np.empty(K)
    for q in range(draws.shape[0]):
        m = draws[q]
        inv = 0.5 / var[m]
        acc_j = 0.0
        acc_p = 0.0
        for ii in range(n):
            i = rows[ii]
            mj = -np.inf
            mp = -np.inf
            for k in range(K):
                r = 0.0
                for t in range(dim - 1):
                    e = z[i, t] - centers[m, k, t]
                    r += e * e
                e0 = z[i, dim - 1] - centers[m, k, dim - 1]
                bp = logw[m, k] - r * inv
                bj = bp - e0 * e0 * inv
                tp[k] = bp
                tj[k] = bj
                if bj > mj:
                    mj = bj
                if bp > mp:
                    mp = bp
            sj = 0.0
            sp = 0.0
            for k in range(K):
                sj += np.exp(tj[k] - mj)
                if dim > 1:
                    sp += np.exp(tp[k] - mp)
            acc_j += mj + np.log(sj)
            if dim > 1:
                acc_p += mp + np.log(sp)
        lv = np.log(2.0 * np.pi * var[m])
        ll_joint[q] = acc_j - 0.5 * dim * n * lv
        ll_par[q] = acc_p - 0.5 * (dim - 1) * n * lv


def _mixture_logliks(z, centers, logw, var, rows=None, draws=None):
    """Per-draw log-likelihoods over ``rows``: all columns, and without the last one."""
    rows = np.arange(z.shape[0]) if rows is None else np.asarray(rows)
    draws = np.arange(centers.shape[0]) if draws is None else np.asarray(draws)
    ll_joint = np.empty(len(draws))
    ll_par = np.empty(len(draws))
    _mixture_logliks_kernel(np.ascontiguousarray(z), rows.astype(np.int64),
                            draws.astype(np.int64), np.ascontiguousarray(centers),
                            np.ascontiguousarray(logw), np.ascontiguousarray(var),
                            ll_joint, ll_par)
    return ll_joint, ll_par


def make_backend(name: str, **params) -> EvidenceBackend:
    """Backend from a config name: ``conjugate``, ``bic`` or ``dpm``."""
    table = {"conjugate": ConjugateGaussian, "bic": BicScore, "dpm": DpmMonteCarlo}
    try:
        cls = table[name]
    except KeyError:
        raise ValueError(f"unknown backend {name!r}; choose from {sorted(table)}") from None
    return cls(**params)


def log_evidence(backend: EvidenceBackend, data: Dataset, key: EvidenceKey) -> float:
    return backend.log_evidence(data, key)


class EvidenceCache:
    """Per-dataset store of local evidences keyed by :class:`EvidenceKey`.

    Insertion uses ``dict.setdefault`` so concurrent readers always see one
    stored value per key.
    """

    def __init__(self, backend: EvidenceBackend, data: Dataset):
        self.backend = backend
        self.data = data
        self._store: dict[EvidenceKey, float] = {}

    def __len__(self) -> int:
        return len(self._store)

    def __contains__(self, key: EvidenceKey) -> bool:
        return key in self._store

    def get(self, key: EvidenceKey) -> float:
        try:
            return self._store[key]
        except KeyError:
            return self._store.setdefault(key, self.backend.log_evidence(self.data, key))

    def records(self) -> Iterable[dict]:
        for key in sorted(self._store):
            yield {"node": key.node + 1, "parents": [k + 1 for k in key.parent_set],
                   "backend": self.backend.name, "value": self._store[key]}

    def dump_jsonl(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            for rec in self.records():
                fh.write(json.dumps(rec) + "\n")

    def load_jsonl(self, path: str | Path) -> int:
        """Warm the cache from a previous dump; returns the number of records loaded."""
        count = 0
        with open(path) as fh:
            for line in fh:
                if not line.strip():
                    continue
                rec = json.loads(line)
                if rec.get("backend") != self.backend.name:
                    continue
                key = EvidenceKey(rec["node"] - 1, tuple(k - 1 for k in rec["parents"]))
                self._store.setdefault(key, float(rec["value"]))
                count += 1
        return count
