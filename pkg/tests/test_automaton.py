import math

import numpy as np
import pytest

from hyperwalk.automaton import (Automaton, builtin_automaton, format_automaton, growth_rate,
                                 load_automaton, parse_automaton, path_counts, perron_root,
                                 scc_decompose, sphere_paths, validate)
from hyperwalk.config import _data_file
from hyperwalk.errors import ModelError, ParseError
from hyperwalk.group_model import cayley_ball_bfs, load_model


def test_builtin_f2_shape(f2_aut):
    assert len(f2_aut.states) == 5
    assert len(f2_aut.edges) == 4 + 4 * 3


def test_builtin_z2z3_forbidden_pairs(z2z3_aut):
    pairs = {(s, lab) for s, lab, _ in z2z3_aut.edges if s != "*"}
    for bad in [("s", "s"), ("t", "T"), ("T", "t"), ("t", "t"), ("T", "T")]:
        assert bad not in pairs
    assert {("s", "t"), ("s", "T"), ("t", "s"), ("T", "s")} == pairs


def test_label_outside_generators(f2):
    text = "states * x\ninitial *\n* q x\n"
    aut = parse_automaton(text)
    with pytest.raises(ModelError):
        aut.check_labels(f2)
    assert not validate(aut, f2, 2).passed


def test_parse_errors():
    with pytest.raises(ParseError):
        parse_automaton("states * a\ninitial *\n* a\n")
    with pytest.raises(ParseError, match="unreachable"):
        parse_automaton("states * a\ninitial *\n")


def test_file_round_trip(f2, f2_aut):
    again = parse_automaton(format_automaton(f2_aut), model=f2)
    assert validate(again, f2, 6).passed
    shipped = load_automaton(_data_file("F2.aut"), f2)
    assert validate(shipped, f2, 8).passed


def test_validate_f2(f2, f2_aut):
    rep = validate(f2_aut, f2, 8)
    assert rep.passed
    assert rep.path_counts == [1] + [4 * 3 ** (n - 1) for n in range(1, 9)]


def test_validate_z2z3(z2z3, z2z3_aut):
    assert validate(z2z3_aut, z2z3, 10).passed


def test_missing_edge_detected(f2, f2_aut):
    edges = tuple(e for e in f2_aut.edges if e != ("a", "b", "b"))
    broken = Automaton(f2_aut.states, f2_aut.initial, edges)
    rep = validate(broken, f2, 4)
    assert not rep.passed
    assert rep.missing[0] == (2, "ab")
    assert "missing" in str(rep)


def test_backtracking_edge_detected(f2, f2_aut):
    broken = Automaton(f2_aut.states, f2_aut.initial, f2_aut.edges + (("a", "A", "A"),))
    rep = validate(broken, f2, 3)
    assert rep.non_geodesic and not rep.passed


def test_duplicate_path_detected(f2, f2_aut):
    states = f2_aut.states + ("a2",)
    edges = f2_aut.edges + (("*", "a", "a2"),)
    rep = validate(Automaton(states, "*", edges), f2, 2)
    assert rep.duplicates


def test_sphere_paths(f2, z2z3_aut, z2z3):
    assert sphere_paths(z2z3_aut, 0) == [""]
    assert len(sphere_paths(builtin_automaton(f2), 2)) == 12
    assert len(sphere_paths(z2z3_aut, 3)) == len(cayley_ball_bfs(z2z3, 3)[3])


def test_scc_f2(f2_aut):
    dec = scc_decompose(f2_aut)
    (comp,) = dec.nontrivial
    assert set(comp.states) == {"a", "A", "b", "B"}
    assert comp.period == 1


def test_scc_z2z3(z2z3_aut):
    (comp,) = scc_decompose(z2z3_aut).nontrivial
    assert set(comp.states) == {"s", "t", "T"}
    assert comp.period == 2
    assert sorted(map(sorted, comp.classes)) == [["T", "t"], ["s"]]


def test_scc_linear_chain():
    chain = Automaton(("*", "p", "q"), "*", (("*", "a", "p"), ("p", "b", "q")))
    dec = scc_decompose(chain)
    assert not dec.nontrivial
    assert all(c.period == 0 for c in dec.components)


def test_growth_rates(f2_aut, z2z3_aut, f3):
    assert growth_rate(f2_aut) == pytest.approx(math.log(3), abs=1e-12)
    assert growth_rate(builtin_automaton(f3)) == pytest.approx(math.log(5), abs=1e-12)
    assert growth_rate(z2z3_aut) == pytest.approx(0.5 * math.log(2), abs=1e-12)


def test_z2z3_growth_against_brute_force(z2z3, z2z3_aut):
    sizes = [len(s) for s in cayley_ball_bfs(z2z3, 14)]
    assert path_counts(z2z3_aut, 14) == sizes
    # |S_{2n}| = 2^(n+1) exactly
    assert sizes[14] == 2 ** 8
    assert math.log(sizes[14] / sizes[12]) / 2 == pytest.approx(0.5 * math.log(2))


def test_perron_root_matches_eigvals():
    rng = np.random.default_rng(7)
    for _ in range(20):
        M = rng.random((6, 6)) * (rng.random((6, 6)) < 0.5)
        M += np.eye(6, k=1) + np.eye(6, k=-5)  # irreducible
        assert perron_root(M) == pytest.approx(max(abs(np.linalg.eigvals(M))), rel=1e-9)


def test_rewriting_automaton_validates():
    m = load_model(_data_file("Z2xZ3_rewriting.model"))
    aut = builtin_automaton(m)
    assert validate(aut, m, 10).passed
    assert growth_rate(aut) == pytest.approx(0.5 * math.log(2), abs=1e-10)
