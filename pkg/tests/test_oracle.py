import itertools

from hypothesis import given

from conftest import dags
from npges.graphs import Dag, add_edge, all_dags, cpdag_of, d_separated, markov_equivalent, parse_dag
from npges.oracle import (
    Decision,
    DsepOracle,
    PopulationTest,
    ci_statements,
    is_markov,
    is_perfect_map,
    population_test,
)

CHAIN = parse_dag("[∅|1|2]")
VSTRUCT = parse_dag("[∅|13|∅]")
COMPLETE = parse_dag("[∅|1|12]")


def global_markov(g, oracle):
    """Every pairwise d-separation of g holds in the oracle."""
    return all(oracle.indep({i}, {j}, c) for i, j, c in ci_statements(g.d) if d_separated(g, {i}, {j}, c))


def test_markov_examples():
    o = DsepOracle(CHAIN)
    assert is_markov(COMPLETE, o)
    assert not is_markov(Dag.empty(3), o)
    assert is_markov(CHAIN, o)


def test_perfect_map_examples():
    o = DsepOracle(CHAIN)
    assert is_perfect_map(CHAIN, o)
    assert not is_perfect_map(COMPLETE, o)
    assert not is_perfect_map(VSTRUCT, o)


def test_ci_statement_count():
    # pairs times subsets of the remaining vertices
    assert len(list(ci_statements(4))) == 6 * 4


def test_local_markov_equals_global_on_three_nodes():
    for truth in all_dags(3):
        o = DsepOracle(truth)
        for g in all_dags(3):
            assert is_markov(g, o) == global_markov(g, o)


def test_perfect_map_iff_equivalent():
    for truth in all_dags(3):
        o = DsepOracle(truth)
        for g in all_dags(3):
            assert is_perfect_map(g, o) == markov_equivalent(g, truth)


def test_population_examples():
    pt = PopulationTest(DsepOracle(CHAIN))
    assert pt.compare(CHAIN, Dag.empty(3)) == Decision.PREFER_G
    assert pt.compare(CHAIN, COMPLETE) == Decision.PREFER_G
    assert pt.compare(VSTRUCT, CHAIN) == Decision.PREFER_H
    assert population_test(pt, CHAIN, CHAIN) == Decision.PREFER_H


def test_global_rule_without_edge_shortcut():
    pt = PopulationTest(DsepOracle(CHAIN), local=False)
    assert pt.compare(CHAIN, Dag.empty(3)) == Decision.PREFER_G
    assert pt.compare(CHAIN, COMPLETE) == Decision.PREFER_G
    assert pt.compare(VSTRUCT, CHAIN) == Decision.PREFER_H
    # neither model Markov: keep the incumbent
    assert pt.compare(Dag.from_edges(3, [(0, 1)]), Dag.from_edges(3, [(1, 2)])) == Decision.PREFER_H


def test_decision_depends_only_on_child_parents():
    """Edge decisions on four vertices are a function of (truth, j, k, pa(j))."""
    graphs = list(all_dags(4))
    for truth in graphs[::17]:
        pt = PopulationTest(DsepOracle(truth))
        seen = {}
        for g in graphs:
            for k, j in itertools.permutations(range(4), 2):
                if g.adjacent(k, j):
                    continue
                try:
                    big = add_edge(g, k, j)
                except ValueError:
                    continue
                key = (k, j, g.parents[j])
                dec = (pt.compare(big, g), pt.compare(g, big))
                assert seen.setdefault(key, dec) == dec


@given(dags(min_d=2, max_d=4))
def test_global_consistency_on_neighbours(truth):
    """Rules (G1) and (G2) hold for pairs one edge apart."""
    pt = PopulationTest(DsepOracle(truth))
    o = pt.oracle
    g = truth
    for h in [add_edge(g, k, j) for k, j in itertools.permutations(range(g.d), 2)
              if not g.adjacent(k, j) and _acyclic_add(g, k, j)]:
        g_ok, h_ok = is_markov(g, o), is_markov(h, o)
        if g_ok and not h_ok:
            assert pt.compare(g, h) == Decision.PREFER_G
        if g_ok and h_ok and g.n_edges < h.n_edges:
            assert pt.compare(g, h) == Decision.PREFER_G


def _acyclic_add(g, k, j):
    try:
        add_edge(g, k, j)
        return True
    except ValueError:
        return False


def test_oracle_cache_is_symmetric():
    o = DsepOracle(VSTRUCT)
    assert o.indep({0}, {2}) and o.indep({2}, {0})
    assert not o.indep({2}, {0}, {1})
    assert cpdag_of(o.truth) == cpdag_of(VSTRUCT)
