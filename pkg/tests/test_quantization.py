import random
from fractions import Fraction as F

import pytest

from gwtaut import oracle as O
from gwtaut.dsl import parse
from gwtaut.quantization import (LoopGenerator, NotSymplecticError, apply_r,
                                 apply_s, check_inf_symplectic,
                                 quad_hamiltonian, quantize)


def test_cse_hamiltonian():
    # -q0^2/2 - sum q_{m+1} p_m for the generator 1/z at rank one
    for gen in ({-1: [[1]]}, LoopGenerator("lower", 1, {1: [[1]]})):
        h = quad_hamiltonian(gen, truncation=5)
        assert h.pp == {}
        assert h.qq == {((0, 0), (0, 0)): F(-1, 2)}
        assert h.pq == {((0, m), (0, m + 1)): F(-1) for m in range(5)}


def test_parity_enforced():
    assert check_inf_symplectic({1: [[0, 1], [1, 0]]})
    assert not check_inf_symplectic({2: [[0, 1], [1, 0]]})
    with pytest.raises(NotSymplecticError):
        quad_hamiltonian(LoopGenerator("upper", 2, {2: [[1, 0], [0, 1]]}))


def test_upper_generator_has_pp_part():
    h = quad_hamiltonian(LoopGenerator("upper", 1, {1: [[1]]}), truncation=3)
    assert h.pp and not h.qq


def _sym(rng, l, n=2):
    a = [[F(rng.randint(-5, 5), rng.randint(1, 4)) for _ in range(n)]
         for _ in range(n)]
    sg = 1 if l % 2 else -1
    return tuple(tuple(a[i][j] + sg * a[j][i] for j in range(n))
                 for i in range(n))


CASES = [
    ("1 <x_1 y z> = 0", {"x": (0, 0), "y": (0, 0), "z": (0, 0)}),
    ("1 <x y z w> = 0", {"x": (0, 0), "y": (1, 0), "z": (0, 0), "w": (1, 0)}),
    ("1 <x_2>_1 = 0", {"x": (1, 0)}),
    ("1 <x y>_1 = 0", {"x": (0, 0), "y": (1, 0)}),
    ("1 <x_1>_2 = 0", {"x": (0, 0)}),
    ("1 <x y> = 0", {"x": (0, 0), "y": (1, 0)}),
]


@pytest.mark.parametrize("src,binding", CASES)
@pytest.mark.parametrize("side", ["upper", "lower"])
@pytest.mark.parametrize("l", [1, 2])
def test_symbolic_action_matches_flow(src, binding, side, l):
    """The symbolic derivation agrees with differentiating the partition
    function along the quantized flow, up to the sign convention of P."""
    rng = random.Random(f"{src}|{side}|{l}")
    point = O.random_jet(2, "descendent", 5, 3, rng)
    M = _sym(rng, l)
    gen = LoopGenerator(side, l, {l: M}, 2)
    op = quantize(quad_hamiltonian(gen, 2, truncation=10))
    e = parse(src).lhs
    flow = O.flow_derivative(op, e.terms[0].factors[0], point, binding)
    if side == "upper":
        sym = apply_r(gen, e, l)
    else:
        sym = apply_s(gen, e, range(l, l + 1))
    val = O.Evaluator(point).evaluate(sym, binding, {(gen.kind, l): M}, l)
    assert flow == O._trim(tuple(-x for x in val))
