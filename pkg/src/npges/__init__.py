"""Greedy equivalence search driven by two-model comparison tests."""

from npges.graphs import (
    Cpdag,
    Dag,
    Pdag,
    cpdag_of,
    d_separated,
    format_dag,
    markov_equivalent,
    mec_members,
    nb_minus,
    nb_plus,
    parse_dag,
)
from npges.oracle import DsepOracle, PopulationTest
from npges.search import SearchTrace, backward_phase, forward_phase, ges

__version__ = "0.1.0"
