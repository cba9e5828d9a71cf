"""How the structural prior scales with sample size and graph density.

For each graph the Le Cam rate eps_n shrinks with n while n * eps_n^2
grows; denser graphs always get a larger rate and so a heavier penalty.
The log prior column uses the default per-vertex form, which matches
-n eps^2 only when every vertex has the same in-degree (the empty graph).
"""

from npges.bayes import LeCamConfig, ModelPriorConfig, log_model_prior, solve_epsilon
from npges.graphs import parse_dag

graphs = {
    "empty": parse_dag("[∅|∅|∅|∅]"),
    "chain": parse_dag("[∅|1|2|3]"),
    "star into 4": parse_dag("[∅|∅|∅|123]"),
    "complete": parse_dag("[∅|1|12|123]"),
}
print(f"{'graph':12s} {'n':>8s} {'eps_n':>9s} {'n eps^2':>10s} {'log prior':>11s}")
for name, g in graphs.items():
    for n in (10 ** 2, 10 ** 4, 10 ** 6):
        lc = LeCamConfig(n=n, d=g.d)
        eps = solve_epsilon(lc, g.sparsity)
        prior = log_model_prior(g, ModelPriorConfig(), lc)
        print(f"{name:12s} {n:8d} {eps:9.4f} {n * eps * eps:10.1f} {prior:11.1f}")
