import random

import pytest
from hypothesis import given, settings, strategies as st

from gwtaut.cli import BUILTINS
from gwtaut.dsl import ParseError, load_builtin, parse, print_equation
from termgen import mutate, random_source, seeds

EXTRA = ("rm_golden", "type1_golden", "type2_golden")


@pytest.mark.parametrize("name", BUILTINS + EXTRA)
def test_builtin_round_trip(name):
    eq = load_builtin(name)
    assert parse(print_equation(eq)) == eq
    assert print_equation(parse(print_equation(eq))) == print_equation(eq)


def test_builtin_headers():
    eq = load_builtin("mumford")
    assert eq.name == "mumford" and eq.genus == 2


def test_unknown_builtin():
    with pytest.raises(KeyError):
        load_builtin("nonesuch")


@settings(max_examples=300, deadline=None)
@given(seeds)
def test_generated_round_trip(seed):
    eq = parse(random_source(random.Random(seed)))
    text = print_equation(eq)
    assert parse(text) == eq
    assert print_equation(parse(text)) == text


def test_thousand_sources_round_trip():
    rng = random.Random(2024)
    for _ in range(1000):
        eq = parse(random_source(rng))
        assert parse(print_equation(eq)) == eq


@pytest.mark.parametrize("src,msg", [
    ("1 <m m m> = 0", "occurs 3 times"),
    ("1 <x> + 1 <y> = 0", "free indices differ"),
    ("1 <x> = 1", "right-hand side"),
    ("1 <x_{k}> = 0", "unknown level symbol"),
])
def test_diagnostics(src, msg):
    with pytest.raises(ParseError) as info:
        parse(src)
    assert msg in str(info.value)


def test_contracted_pair_is_accepted():
    assert parse("1 <m m x> = 0").lhs.terms


def test_error_position():
    with pytest.raises(ParseError) as info:
        parse("1 <x>\n + 2 <x y = 0")
    assert info.value.line == 2


@settings(max_examples=2000, deadline=None)
@given(seeds)
def test_mutations_only_raise_parse_error(seed):
    rng = random.Random(seed)
    src = mutate(rng, random_source(rng))
    try:
        eq = parse(src)
    except ParseError:
        return
    assert parse(print_equation(eq)) == eq


@settings(max_examples=500, deadline=None)
@given(st.text(max_size=60))
def test_arbitrary_text(src):
    try:
        parse(src)
    except ParseError:
        pass
