"""Recovering a random linear-Gaussian DAG from data.

Draw a DAG and coefficients, simulate, and run the search with the
conjugate-Gaussian evidence at a few sample sizes.  SHD counts vertex
pairs whose edge status differs between learned and true CPDAGs.  At
moderate n the forward phase can overshoot into a wrong class that the
backward phase does not undo; larger samples settle on the truth.
"""

from npges.bayes import ConjugateGaussian, OddsTest
from npges.graphs import cpdag_of, format_dag
from npges.search import ges
from npges.simkit.metrics import shd_cpdag
from npges.simkit.sem import random_dag, random_linear_sem, sample

seed = 11
dag = random_dag(5, 0.4, seed)
spec = random_linear_sem(dag, seed)
truth = cpdag_of(dag)
print("truth", format_dag(dag))
for n in (200, 2000, 20000):
    data = sample(spec, n, seed)
    learned, trace = ges(OddsTest(ConjugateGaussian()).bind(data))
    print(f"n={n:6d}  edges={learned.n_edges}  shd={shd_cpdag(learned, truth)}  moves={trace.r}")
