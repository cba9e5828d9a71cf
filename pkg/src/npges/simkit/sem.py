"""Structural equation models: mechanisms, ancestral sampling, JSON I/O.

Each vertex carries one mechanism giving its conditional law given its
parents.  Mechanism parameters are keyed by parent index, so a mechanism
is meaningful only together with the DAG it is attached to.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Union

import numpy as np
from scipy.special import log_ndtr, ndtr, ndtri

from npges.graphs import Dag, format_dag, parse_dag
from npges.simkit.data import Dataset

__all__ = [
    "SemError",
    "LinearGaussian",
    "AdditiveNonlinear",
    "PostNonlinear",
    "MixtureCpd",
    "Mechanism",
    "SemSpec",
    "sample",
    "random_dag",
    "random_linear_sem",
    "load_sem",
    "save_sem",
]

_HALF_LOG_2PI = 0.5 * math.log(2 * math.pi)
_TAIL = 9.0  # support padding in noise standard deviations


class SemError(ValueError):
    """Invalid mechanism or mechanism/DAG mismatch."""


def _quadratic(x):
    return x * x


INNER: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "sin": np.sin,
    "tanh": np.tanh,
    "quadratic": _quadratic,
    "identity": lambda x: x,
}

# outer maps of post-nonlinear models: (forward, inverse, log |d inverse / dx|)
OUTER = {
    "identity": (lambda u: u, lambda x: x, lambda x: np.zeros_like(x)),
    "tanh": (np.tanh, np.arctanh, lambda x: -np.log1p(-x * x)),
    "cube": (lambda u: u ** 3, np.cbrt, lambda x: -math.log(3.0) - (2.0 / 3.0) * np.log(np.abs(x))),
}


def _image(fn: str, lo: float, hi: float) -> tuple[float, float]:
    """Range of ``INNER[fn]`` over ``[lo, hi]``."""
    if fn == "sin":
        if hi - lo >= 2 * math.pi:
            return -1.0, 1.0
        xs = np.concatenate([[lo, hi], np.arange(math.ceil(lo / (math.pi / 2) - 0.5),
                                                 math.floor(hi / (math.pi / 2) - 0.5) + 1)
                             * math.pi + math.pi / 2])
        xs = xs[(xs >= lo) & (xs <= hi)]
        v = np.sin(xs)
        return float(v.min()), float(v.max())
    if fn == "quadratic":
        cands = [lo * lo, hi * hi]
        return (0.0 if lo <= 0 <= hi else min(cands)), max(cands)
    f = INNER[fn]
    return float(f(lo)), float(f(hi))


def _gauss_logpdf(x, mean, var):
    return -_HALF_LOG_2PI - 0.5 * math.log(var) - 0.5 * (x - mean) ** 2 / var


def _check_var(v: float) -> float:
    v = float(v)
    if not v > 0:
        raise SemError(f"noise variance must be positive, got {v}")
    return v


def _sorted_items(m: Mapping[int, float]) -> tuple[tuple[int, float], ...]:
    return tuple(sorted((int(k), float(v)) for k, v in m.items()))


@dataclass(frozen=True)
class LinearGaussian:
    """``x_j = intercept + sum_k b_k x_k + N(0, noise_var)``."""

    coefficients: tuple[tuple[int, float], ...] = ()
    noise_var: float = 1.0
    intercept: float = 0.0
    kind = "linear_gaussian"

    def __post_init__(self):
        if isinstance(self.coefficients, Mapping):
            object.__setattr__(self, "coefficients", _sorted_items(self.coefficients))
        object.__setattr__(self, "noise_var", _check_var(self.noise_var))

    @property
    def parents(self) -> frozenset[int]:
        return frozenset(k for k, _ in self.coefficients)

    def _mean(self, pa: np.ndarray) -> np.ndarray:
        b = np.array([v for _, v in self.coefficients])
        return self.intercept + (pa @ b if b.size else np.zeros(pa.shape[0]))

    def sample(self, pa: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        return self._mean(pa) + math.sqrt(self.noise_var) * rng.standard_normal(pa.shape[0])

    def logpdf(self, x: np.ndarray, pa: np.ndarray) -> np.ndarray:
        return _gauss_logpdf(x, self._mean(pa), self.noise_var)

    def support(self, boxes: list[tuple[float, float]]) -> tuple[float, float]:
        lo = hi = self.intercept
        for (_, b), (a, c) in zip(self.coefficients, boxes):
            lo += min(b * a, b * c)
            hi += max(b * a, b * c)
        pad = _TAIL * math.sqrt(self.noise_var)
        return lo - pad, hi + pad

    def to_json(self) -> dict:
        return {"type": self.kind, "coefficients": {str(k + 1): v for k, v in self.coefficients},
                "noise_var": self.noise_var, "intercept": self.intercept}


@dataclass(frozen=True)
class AdditiveNonlinear:
    """``x_j = sum_k a_k f(x_k) + N(0, noise_var)`` with ``f`` one of sin, tanh, quadratic."""

    func: str
    amplitudes: tuple[tuple[int, float], ...] = ()
    noise_var: float = 1.0
    kind = "additive_nonlinear"

    def __post_init__(self):
        if self.func not in ("sin", "tanh", "quadratic"):
            raise SemError(f"unknown function tag {self.func!r}")
        if isinstance(self.amplitudes, Mapping):
            object.__setattr__(self, "amplitudes", _sorted_items(self.amplitudes))
        object.__setattr__(self, "noise_var", _check_var(self.noise_var))

    @property
    def parents(self) -> frozenset[int]:
        return frozenset(k for k, _ in self.amplitudes)

    def _mean(self, pa: np.ndarray) -> np.ndarray:
        a = np.array([v for _, v in self.amplitudes])
        if not a.size:
            return np.zeros(pa.shape[0])
        return INNER[self.func](pa) @ a

    def sample(self, pa, rng):
        return self._mean(pa) + math.sqrt(self.noise_var) * rng.standard_normal(pa.shape[0])

    def logpdf(self, x, pa):
        return _gauss_logpdf(x, self._mean(pa), self.noise_var)

    def support(self, boxes):
        lo = hi = 0.0
        for (_, a), box in zip(self.amplitudes, boxes):
            f_lo, f_hi = _image(self.func, *box)
            lo += min(a * f_lo, a * f_hi)
            hi += max(a * f_lo, a * f_hi)
        pad = _TAIL * math.sqrt(self.noise_var)
        return lo - pad, hi + pad

    def to_json(self):
        return {"type": self.kind, "func": self.func,
                "amplitudes": {str(k + 1): v for k, v in self.amplitudes},
                "noise_var": self.noise_var}


@dataclass(frozen=True)
class PostNonlinear:
    """``x_j = outer(sum_{k in parents} inner(x_k) + N(0, noise_var))``."""

    inner: str
    outer: str
    parent_set: frozenset[int] = frozenset()
    noise_var: float = 1.0
    kind = "post_nonlinear"

    def __post_init__(self):
        if self.inner not in INNER:
            raise SemError(f"unknown inner function {self.inner!r}")
        if self.outer not in OUTER:
            raise SemError(f"unknown outer function {self.outer!r}")
        object.__setattr__(self, "parent_set", frozenset(int(k) for k in self.parent_set))
        object.__setattr__(self, "noise_var", _check_var(self.noise_var))

    @property
    def parents(self) -> frozenset[int]:
        return self.parent_set

    def _inner_sum(self, pa):
        return INNER[self.inner](pa).sum(axis=1)

    def sample(self, pa, rng):
        u = self._inner_sum(pa) + math.sqrt(self.noise_var) * rng.standard_normal(pa.shape[0])
        return OUTER[self.outer][0](u)

    def logpdf(self, x, pa):
        _, inv, log_jac = OUTER[self.outer]
        with np.errstate(divide="ignore", invalid="ignore"):
            out = _gauss_logpdf(inv(x), self._inner_sum(pa), self.noise_var) + log_jac(x)
        return np.where(np.isfinite(out), out, -np.inf)

    def support(self, boxes):
        lo = hi = 0.0
        for box in boxes:
            a, b = _image(self.inner, *box)
            lo, hi = lo + a, hi + b
        pad = _TAIL * math.sqrt(self.noise_var)
        f = OUTER[self.outer][0]
        return float(f(lo - pad)), float(f(hi + pad))

    def to_json(self):
        return {"type": self.kind, "inner": self.inner, "outer": self.outer,
                "parents": sorted(k + 1 for k in self.parent_set), "noise_var": self.noise_var}


@dataclass(frozen=True)
class MixtureCpd:
    """Mixture of Gaussian bumps truncated to ``[0, 1]``.

    Component ``m`` is centred at ``locations[m] + sum_k c_k (x_k - 1/2)``
    and renormalised on the unit interval, so the conditional density is
    strictly positive and Lipschitz whenever the parents live in the unit
    cube.
    """

    weights: tuple[float, ...]
    locations: tuple[float, ...]
    scales: tuple[float, ...]
    shifts: tuple[tuple[int, float], ...] = ()
    kind = "mixture_cpd"

    def __post_init__(self):
        w = tuple(float(v) for v in self.weights)
        if not (len(w) == len(self.locations) == len(self.scales)) or not w:
            raise SemError("weights, locations and scales need one entry per component")
        if min(w) <= 0 or abs(sum(w) - 1.0) > 1e-9:
            raise SemError("mixture weights must be positive and sum to 1")
        if min(self.scales) <= 0:
            raise SemError("mixture scales must be positive")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "locations", tuple(float(v) for v in self.locations))
        object.__setattr__(self, "scales", tuple(float(v) for v in self.scales))
        if isinstance(self.shifts, Mapping):
            object.__setattr__(self, "shifts", _sorted_items(self.shifts))

    @property
    def parents(self) -> frozenset[int]:
        return frozenset(k for k, _ in self.shifts)

    def _centres(self, pa):
        c = np.array([v for _, v in self.shifts])
        shift = (pa - 0.5) @ c if c.size else np.zeros(pa.shape[0])
        return shift[:, None] + np.array(self.locations)[None, :]

    def sample(self, pa, rng):
        n = pa.shape[0]
        mu = self._centres(pa)
        comp = rng.choice(len(self.weights), size=n, p=np.array(self.weights))
        u = rng.random(n)
        rows = np.arange(n)
        m, s = mu[rows, comp], np.array(self.scales)[comp]
        lo, hi = ndtr(-m / s), ndtr((1 - m) / s)
        x = m + s * ndtri(lo + u * (hi - lo))
        return np.clip(x, 0.0, 1.0)

    def logpdf(self, x, pa):
        mu = self._centres(pa)
        s = np.array(self.scales)[None, :]
        z = (np.asarray(x)[:, None] - mu) / s
        mass = ndtr((1 - mu) / s) - ndtr(-mu / s)
        comp = -_HALF_LOG_2PI - np.log(s) - 0.5 * z * z - np.log(mass)
        out = np.logaddexp.reduce(comp + np.log(np.array(self.weights))[None, :], axis=1)
        inside = (np.asarray(x) >= 0) & (np.asarray(x) <= 1)
        return np.where(inside, out, -np.inf)

    def support(self, boxes):
        return 0.0, 1.0

    def to_json(self):
        return {"type": self.kind, "weights": list(self.weights), "locations": list(self.locations),
                "scales": list(self.scales), "shifts": {str(k + 1): v for k, v in self.shifts}}


Mechanism = Union[LinearGaussian, AdditiveNonlinear, PostNonlinear, MixtureCpd]


def _mechanism_from_json(obj: dict) -> Mechanism:
    kind = obj.get("type")

    def idx(m):
        return {int(k) - 1: float(v) for k, v in (m or {}).items()}

    try:
        if kind == "linear_gaussian":
            return LinearGaussian(idx(obj.get("coefficients")), obj.get("noise_var", 1.0),
                                  obj.get("intercept", 0.0))
        if kind == "additive_nonlinear":
            return AdditiveNonlinear(obj["func"], idx(obj.get("amplitudes")), obj.get("noise_var", 1.0))
        if kind == "post_nonlinear":
            return PostNonlinear(obj["inner"], obj["outer"],
                                 frozenset(int(k) - 1 for k in obj.get("parents", [])),
                                 obj.get("noise_var", 1.0))
        if kind == "mixture_cpd":
            return MixtureCpd(tuple(obj["weights"]), tuple(obj["locations"]), tuple(obj["scales"]),
                              idx(obj.get("shifts")))
    except KeyError as exc:
        raise SemError(f"mechanism {kind!r} is missing field {exc}") from None
    raise SemError(f"unknown mechanism type {kind!r}")


@dataclass(frozen=True)
class SemSpec:
    """A DAG with one mechanism per vertex."""

    dag: Dag
    mechanisms: tuple[Mechanism, ...]
    _supports: list = field(default_factory=list, compare=False, hash=False, repr=False)

    def __post_init__(self):
        mechs = tuple(self.mechanisms)
        object.__setattr__(self, "mechanisms", mechs)
        if len(mechs) != self.dag.d:
            raise SemError(f"{len(mechs)} mechanisms for {self.dag.d} vertices")
        for j, m in enumerate(mechs):
            if m.parents != self.dag.parents[j]:
                raise SemError(
                    f"vertex {j + 1}: mechanism parents {sorted(k + 1 for k in m.parents)} "
                    f"differ from DAG parents {sorted(k + 1 for k in self.dag.parents[j])}")
        unit = [isinstance(m, MixtureCpd) for m in mechs]
        for j, m in enumerate(mechs):
            if unit[j] and not all(unit[k] for k in self.dag.parents[j]):
                raise SemError(f"vertex {j + 1}: mixture-cpd parents must be mixture-cpd vertices")

    @property
    def d(self) -> int:
        return self.dag.d

    @property
    def domain(self) -> str:
        return "unit" if all(isinstance(m, MixtureCpd) for m in self.mechanisms) else "real"

    def parent_order(self, j: int) -> list[int]:
        return sorted(self.dag.parents[j])

    def supports(self) -> list[tuple[float, float]]:
        """Per-vertex interval holding all but a negligible share of the mass."""
        if not self._supports:
            box: list = [None] * self.d
            for j in self.dag._order:
                box[j] = self.mechanisms[j].support([box[k] for k in self.parent_order(j)])
            self._supports.extend(box)
        return list(self._supports)

    def cond_logpdf(self, j: int, x: np.ndarray, pa: np.ndarray) -> np.ndarray:
        """``log f_j(x | pa)``; columns of ``pa`` follow ``parent_order(j)``."""
        pa = np.asarray(pa, dtype=float).reshape(len(x), -1)
        return self.mechanisms[j].logpdf(np.asarray(x, dtype=float), pa)

    def joint_logpdf(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return sum(self.cond_logpdf(j, x[:, j], x[:, self.parent_order(j)]) for j in range(self.d))

    def to_json(self) -> dict:
        return {"d": self.d, "dag": format_dag(self.dag),
                "nodes": [m.to_json() for m in self.mechanisms]}

    @classmethod
    def from_json(cls, obj: dict) -> SemSpec:
        try:
            dag = parse_dag(obj["dag"])
            nodes = obj["nodes"]
        except (KeyError, TypeError) as exc:
            raise SemError(f"SEM spec needs 'dag' and 'nodes': {exc}") from None
        if "d" in obj and obj["d"] != dag.d:
            raise SemError(f"declared d={obj['d']} but the DAG has {dag.d} vertices")
        return cls(dag, tuple(_mechanism_from_json(m) for m in nodes))


def sample(spec: SemSpec, n: int, seed: int) -> Dataset:
    """``n`` rows drawn ancestrally.

    Vertex ``j`` draws from its own stream ``SeedSequence(seed, spawn_key=(j,))``,
    so the columns do not depend on the order in which vertices are visited
    beyond the parent values they receive.
    """
    if n < 1:
        raise ValueError("n must be positive")
    x = np.empty((n, spec.d))
    for j in spec.dag._order:
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(j,)))
        x[:, j] = spec.mechanisms[j].sample(x[:, spec.parent_order(j)], rng)
    return Dataset(x, domain=spec.domain)


def random_dag(d: int, edge_prob: float, seed: int) -> Dag:
    """Random ordering, then each ordered pair gets an edge with probability ``edge_prob``."""
    if not 0 <= edge_prob <= 1:
        raise ValueError("edge_prob must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    order = rng.permutation(d)
    coins = rng.random((d, d))
    edges = [(int(order[a]), int(order[b])) for a in range(d) for b in range(a + 1, d)
             if coins[a, b] < edge_prob]
    return Dag.from_edges(d, edges)


def random_linear_sem(dag: Dag, seed: int, coef_range: tuple[float, float] = (0.5, 1.5),
                      noise_var: float = 1.0) -> SemSpec:
    """Linear-Gaussian SEM with coefficients ``±U(coef_range)`` on the edges of ``dag``."""
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(dag.d, 1)))
    mechs = []
    for j in range(dag.d):
        pa = sorted(dag.parents[j])
        mag = rng.uniform(*coef_range, size=len(pa))
        sign = rng.choice([-1.0, 1.0], size=len(pa))
        mechs.append(LinearGaussian(dict(zip(pa, mag * sign)), noise_var))
    return SemSpec(dag, tuple(mechs))


def load_sem(path: str | Path) -> SemSpec:
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SemError(f"{path}: {exc}") from None
    return SemSpec.from_json(obj)


def save_sem(spec: SemSpec, path: str | Path) -> None:
    Path(path).write_text(json.dumps(spec.to_json(), indent=2, ensure_ascii=False) + "\n")
