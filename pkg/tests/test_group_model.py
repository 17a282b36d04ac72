import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hyperwalk.errors import ModelError, ParseError
from hyperwalk.group_model import (ShadowSpec, ball_enumerate, busemann_along, cayley_ball_bfs,
                                   distance, format_model, free_product, geodesic_prefixes,
                                   gromov_product, load_model, parse_model, rewriting_model,
                                   shadow_contains, sphere_words)
from hyperwalk.config import _data_file

words = st.text(alphabet="aAbB", max_size=14)


def test_reduce_examples(f2, z2z3):
    assert f2.reduce("aA") == f2.identity
    assert f2.reduce("abBa").word == "aa"
    assert z2z3.reduce("ss") == z2z3.identity
    assert z2z3.reduce("tt").word == "T"
    assert z2z3.reduce("ttt").word == ""


def test_distance_examples(f2):
    e = f2.element
    x = e("ab")
    assert distance(x, x) == 0
    assert distance(f2.identity, x) == 2
    assert distance(e("ab"), e("aB")) == 2


def test_gromov_product_examples(f2):
    e = f2.element
    assert gromov_product(e("ab"), e("ab")) == 2
    assert gromov_product(e("ab"), e("aB")) == 1
    assert gromov_product(e("ab"), e("ba")) == 0


def test_geodesic_prefixes(f2, z2z3):
    assert [str(p) for p in geodesic_prefixes(f2.identity)] == ["1"]
    assert [str(p) for p in geodesic_prefixes(f2.element("ab"))] == ["1", "a", "ab"]
    assert [str(p) for p in geodesic_prefixes(z2z3.element("st"))] == ["1", "s", "st"]


def test_shadow_contains(f2):
    spec = ShadowSpec(f2.element("a"), 0)
    assert shadow_contains(spec, f2.element("ab"))
    assert not shadow_contains(spec, f2.element("ba"))
    with pytest.raises(ValueError):
        shadow_contains(ShadowSpec(f2.element("ab"), 1), f2.element("a"))


def test_shadow_radius_below_four_delta():
    m = load_model(_data_file("Z2xZ3_rewriting.model"))
    with pytest.raises(ValueError):
        ShadowSpec(m.element("s"), 2)


def test_busemann(f2):
    ray = geodesic_prefixes(f2.element("aaaa"))
    assert all(busemann_along(ray, f2.identity, n) == 0 for n in range(4))
    assert busemann_along(ray, f2.element("a"), 3) == -1
    assert busemann_along(ray, f2.element("b"), 3) == 1
    with pytest.raises(IndexError):
        busemann_along(ray, f2.identity, 5)


def test_busemann_stationary_on_tree(f2):
    ray = geodesic_prefixes(f2.element("abbaab" * 2))
    g = f2.element("aBa")
    vals = [busemann_along(ray, g, n) for n in range(6, 12)]
    assert len(set(vals)) == 1


def test_sphere_sizes(f2, z2z3):
    assert [len(s) for _, s in ball_enumerate(f2, 1)] == [1, 4]
    assert len(sphere_words(f2, 3)) == 36
    assert sorted(sphere_words(z2z3, 2)) == ["Ts", "sT", "st", "ts"]
    for n in range(1, 8):
        assert len(sphere_words(f2, n)) == 4 * 3 ** (n - 1)


@pytest.mark.parametrize("name", ["F2", "F3", "Z2*Z3"])
def test_enumeration_matches_bfs(name):
    from hyperwalk.group_model import builtin_model
    m = builtin_model(name)
    bfs = cayley_ball_bfs(m, 6)
    for k, elems in ball_enumerate(m, 6):
        assert sorted(e.word for e in elems) == sorted(bfs[k])


def test_rewriting_model_matches_free_product(z2z3):
    m = load_model(_data_file("Z2xZ3_rewriting.model"))
    assert not m.is_tree_like
    for n in range(7):
        assert len(sphere_words(m, n)) == len(sphere_words(z2z3, n))


def test_rewriting_f2_matches_builtin(f2):
    m = load_model(_data_file("F2_rewriting.model"))
    for n in range(6):
        assert sorted(sphere_words(m, n)) == sorted(sphere_words(f2, n))


def test_non_confluent_rules_rejected():
    inv = {"a": "A", "A": "a", "b": "B", "B": "b"}
    with pytest.raises(ModelError, match="non-confluent"):
        rewriting_model("aAbB", inv, [("ab", ""), ("ba", "a")], 1)


def test_non_decreasing_rule_rejected():
    with pytest.raises(ModelError):
        rewriting_model("ab", {"a": "a", "b": "b"}, [("ab", "ba")], 1)


def test_unsupported_order():
    with pytest.raises(ModelError):
        free_product([("a", 5)])


def test_parse_error_has_line_number():
    text = "kind free_product\nfactor a inf\nbogus line here\n"
    with pytest.raises(ParseError) as info:
        parse_model(text, "x.model")
    assert info.value.lineno == 3


def test_model_format_round_trip(f2, z2z3):
    for m in (f2, z2z3):
        again = parse_model(format_model(m))
        for n in range(5):
            assert sorted(sphere_words(again, n)) == sorted(sphere_words(m, n))


@settings(max_examples=200, deadline=None)
@given(words, words)
def test_metric_axioms(f2, u, v):
    x, y = f2.reduce(u), f2.reduce(v)
    d = distance(x, y)
    assert d == distance(y, x)
    assert (d == 0) == (x == y)
    assert d == len((x.inverse() * y).word)
    z = f2.reduce(u + v)
    assert distance(x, z) <= distance(x, y) + distance(y, z)


@settings(max_examples=200, deadline=None)
@given(words, words, words)
def test_four_point_condition_on_tree(f2, u, v, w):
    x, y, z = (f2.reduce(s) for s in (u, v, w))
    # delta = 0 for the tree
    assert gromov_product(x, z) >= min(gromov_product(x, y), gromov_product(y, z))


@settings(max_examples=200, deadline=None)
@given(st.text(alphabet="stT", max_size=14))
def test_reduction_idempotent_and_inverse(z2z3, u):
    x = z2z3.reduce(u)
    assert z2z3.reduce(x.word) == x
    assert (x * x.inverse()) == z2z3.identity
