"""Posterior odds of two DAGs and the thresholded comparison test."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from npges.bayes.evidence import EvidenceBackend, EvidenceCache, EvidenceKey
from npges.bayes.lecam import LeCamConfig, ModelPriorConfig, penalty
from npges.graphs import Dag
from npges.oracle import Decision
from npges.simkit.data import Dataset

__all__ = ["OddsTest", "BoundOddsTest", "log_posterior_odds", "phi_lambda"]


@dataclass(frozen=True)
class OddsTest:
    """Threshold ``lam`` on posterior odds built from a local evidence backend.

    ``lecam`` may be left as ``None``; ``n`` and ``d`` are then read from
    the data with ``gamma = 1``.
    """

    backend: EvidenceBackend
    prior: ModelPriorConfig = field(default_factory=ModelPriorConfig)
    lecam: LeCamConfig | None = None
    lam: float = 1.0

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lambda must be positive")

    def lecam_for(self, data: Dataset) -> LeCamConfig:
        if self.lecam is None:
            return LeCamConfig(n=data.n, d=data.d)
        if (self.lecam.n, self.lecam.d) != (data.n, data.d):
            raise ValueError(
                f"LeCam config (n={self.lecam.n}, d={self.lecam.d}) does not match "
                f"data (n={data.n}, d={data.d})")
        return self.lecam

    def bind(self, data: Dataset, cache: EvidenceCache | None = None) -> BoundOddsTest:
        if cache is None:
            cache = EvidenceCache(self.backend, data)
        elif cache.data is not data or cache.backend != self.backend:
            raise ValueError("cache belongs to a different dataset or backend")
        return BoundOddsTest(replace(self, lecam=self.lecam_for(data)), data, cache)


@dataclass
class BoundOddsTest:
    """An :class:`OddsTest` tied to one dataset and its evidence cache."""

    test: OddsTest
    data: Dataset
    cache: EvidenceCache

    @property
    def d(self) -> int:
        return self.data.d

    def _node_prior(self, s: int) -> float:
        # per-vertex share of the factorised penalty
        lc = self.test.lecam
        return -self.test.prior.Gamma * penalty(lc, (s,) * lc.d, "global") / lc.d

    def log_odds(self, g: Dag, h: Dag) -> float:
        if g.d != h.d or g.d != self.data.d:
            raise ValueError("graphs and data must share a vertex set")
        total = 0.0
        for j in range(g.d):
            pg, ph = g.parents[j], h.parents[j]
            if pg == ph:
                continue
            total += self.cache.get(EvidenceKey(j, tuple(pg))) - self.cache.get(EvidenceKey(j, tuple(ph)))
            if self.test.prior.form == "nodewise":
                total += self._node_prior(len(pg)) - self._node_prior(len(ph))
        if self.test.prior.form == "global":
            lc, gam = self.test.lecam, self.test.prior.Gamma
            total += gam * (penalty(lc, h.sparsity, "global") - penalty(lc, g.sparsity, "global"))
        return total

    def compare(self, g: Dag, h: Dag) -> Decision:
        return Decision.PREFER_G if self.log_odds(g, h) > math.log(self.test.lam) else Decision.PREFER_H


def log_posterior_odds(t: OddsTest, data: Dataset, g: Dag, h: Dag) -> float:
    """``log P(g | X) - log P(h | X)``; vertices with equal parent sets contribute nothing."""
    return t.bind(data).log_odds(g, h)


def phi_lambda(t: OddsTest, data: Dataset, g: Dag, h: Dag) -> Decision:
    return t.bind(data).compare(g, h)
