"""Greedy equivalence search with a perfect independence oracle.

A diamond 1 -> {2, 3} -> 4 is used as the truth.  The forward phase keeps
adding edges while the oracle says the endpoints are still dependent; the
backward phase then prunes back to the true equivalence class.
"""

from npges.graphs import cpdag_of, format_dag, parse_dag
from npges.oracle import DsepOracle, PopulationTest
from npges.search import ges

truth = parse_dag("[∅|1|1|23]")
print("truth DAG      ", format_dag(truth))
print("truth CPDAG    ", cpdag_of(truth).dumps())

cpdag, trace = ges(PopulationTest(DsepOracle(truth)))
for t, g, phase in trace.iterates:
    print(f"  step {t:2d} {phase:8s} {format_dag(g)}")
print("learned CPDAG  ", cpdag.dumps())
print("comparisons made:", len(trace.comparisons))
