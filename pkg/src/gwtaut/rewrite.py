"""Rewriting with the universal relations and vanishing at ``q_0 = 0``.

The rules act term by term on canonical expressions.  Vanishing uses the
dimension bound for ancestors (a genus ``g`` correlator with ``n`` insertions
vanishes when the total level exceeds ``3g-3+n``) and the vanishing of
genus-zero correlators with fewer than three insertions at ``q_0 = 0``.
Floating levels count with their lower bound.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction

from .expr import (Correlator, Equation, Expression, Insertion, Level, Lin,
                   Mat, Term, canonicalize, dummy, fresh, substitute)

L_CAP = 64


@dataclass(frozen=True)
class Constraint:
    """``lin <= bound`` over the symbols ``l`` and ``m``."""

    lin: Lin
    bound: int

    def holds(self, l: int, m: int) -> bool:
        return self.lin.c + self.lin.l * l + self.lin.m * m <= self.bound


def correlator_unstable(c: Correlator) -> bool:
    return c.genus == 0 and c.arity < 3


def jet_constraint(c: Correlator) -> Constraint:
    total = Lin()
    for x in c.insertions:
        total = total + x.level.lin
    return Constraint(total, 3 * c.genus - 3 + c.arity)


def term_constraints(t: Term) -> list[Constraint]:
    out = [jet_constraint(c) for c in t.factors]
    for c in t.factors:
        for x in c.insertions:
            # every level is a nonnegative integer
            out.append(Constraint(-x.level.lin, 0))
    for a in t.atoms:
        if isinstance(a, Mat):
            out.append(Constraint(-a.level, -1))
    return out


def _domain(t: Term, l_fixed: int | None = None):
    """Integer points ``(l, m)`` allowed by the binders of ``t``."""
    uses_l = any("l" in c.lin.symbols() for c in term_constraints(t)) or \
        "l" in t.sign.symbols()
    ls = [l_fixed] if l_fixed is not None else \
        (range(1, L_CAP + 1) if uses_l else [1])
    for l in ls:
        ms = range(l) if "m" in t.binders else [0]
        for m in ms:
            yield l, m


def feasible_points(t: Term) -> list[tuple[int, int]]:
    cons = term_constraints(t)
    return [(l, m) for l, m in _domain(t) if all(c.holds(l, m) for c in cons)]


def max_feasible_l(t: Term) -> int | None:
    """Largest generator level with a non-vanishing summand (``None`` if the
    term vanishes identically, ``L_CAP`` if unbounded)."""
    pts = feasible_points(t)
    return max(l for l, _ in pts) if pts else None


def vanishes(t: Term) -> bool:
    if any(correlator_unstable(c) for c in t.factors):
        return True
    return not feasible_points(t)


def collapse(t: Term) -> Term:
    """Fix ``l`` or ``m`` when the constraints force a single value."""
    uses_l = any(a.level.symbols() for a in t.atoms if isinstance(a, Mat))
    pts = feasible_points(t)
    if uses_l:
        ls = {l for l, _ in pts}
        if len(ls) == 1:
            t = substitute(t, "l", ls.pop())
            pts = feasible_points(t)
    if "m" in t.binders and pts:
        by_l: dict[int, set] = {}
        for l, m in pts:
            by_l.setdefault(l, set()).add(m)
        if all(len(v) == 1 for v in by_l.values()):
            pairs = sorted((l, v.pop()) for l, v in by_l.items())
            for form in (Lin(pairs[0][1]), Lin(-1, 1)):
                if all(form.c + form.l * l == m for l, m in pairs):
                    t = substitute(t, "m", form if form.l else form.c)
                    t = replace(t, binders=t.binders - {"m"})
                    break
    return t


def rule_jet_vanish(e: Expression) -> Expression:
    """Drop terms vanishing at ``q_0 = 0`` and collapse forced levels."""
    out = [collapse(t) for t in e.terms if not vanishes(t)]
    return canonicalize(Expression(tuple(out)))


def prove_vanishing_threshold(e: Expression) -> int | None:
    """Smallest ``L`` with every summand vanishing for all ``l >= L``.

    Returns ``None`` when some term survives for arbitrarily large ``l``.
    """
    best = 0
    for t in e.terms:
        if any(correlator_unstable(c) for c in t.factors):
            continue
        top = max_feasible_l(t)
        if top is None:
            continue
        if top >= L_CAP:
            return None
        best = max(best, top)
    return best + 1


# ------------------------------------------------------------------ rules

def _const_level(x: Insertion) -> int | None:
    lin = x.level.lin
    return lin.c if lin.is_const else None


def _pick_descendant(c: Correlator, floating: bool = True) -> int | None:
    """Position of the insertion to reduce: explicit descendants first, then
    the highest constant level."""
    best = None
    for a, x in enumerate(c.insertions):
        k = _const_level(x)
        if k is None or k < 1 or (x.level.floating and not floating):
            continue
        key = (not x.level.floating, k)
        if best is None or key > best[0]:
            best = (key, a)
    return None if best is None else best[1]


def _split(items):
    n = len(items)
    for mask in range(1 << n):
        yield (tuple(items[i] for i in range(n) if mask >> i & 1),
               tuple(items[i] for i in range(n) if not mask >> i & 1))


@dataclass(frozen=True)
class Piece:
    """One summand of a rule's right-hand side, before it is spliced into the
    surrounding term: coefficient, replacement factors and extra atoms."""

    coeff: Fraction
    factors: tuple
    atoms: tuple = ()
    sign: Lin = Lin()
    binders: frozenset = frozenset()


def trr0_pieces(c: Correlator, pos: int | None = None,
                floating: bool = True) -> list[Piece] | None:
    if c.genus != 0 or c.arity < 3:
        return None
    pos = _pick_descendant(c, floating) if pos is None else pos
    if pos is None:
        return None
    alpha = c.insertions[pos]
    others = c.insertions[:pos] + c.insertions[pos + 1:]
    beta, gamma, rest = others[0], others[1], others[2:]
    mu = dummy(fresh())
    low = Insertion(alpha.idx, alpha.level - 1)
    out = []
    for s1, s2 in _split(rest):
        out.append(Piece(Fraction(1), (
            Correlator(0, (low, Insertion(mu, Level(Lin()))) + s1),
            Correlator(0, (Insertion(mu, Level(Lin())), beta, gamma) + s2))))
    return out


def trr1_pieces(c: Correlator, pos: int | None = None,
                floating: bool = True) -> list[Piece] | None:
    if c.genus != 1 or c.arity < 1:
        return None
    pos = _pick_descendant(c, floating) if pos is None else pos
    if pos is None:
        return None
    alpha = c.insertions[pos]
    rest = c.insertions[:pos] + c.insertions[pos + 1:]
    low = Insertion(alpha.idx, alpha.level - 1)
    out = []
    for s1, s2 in _split(rest):
        mu = dummy(fresh())
        out.append(Piece(Fraction(1), (
            Correlator(0, (low, Insertion(mu, Level(Lin()))) + s1),
            Correlator(1, (Insertion(mu, Level(Lin())),) + s2))))
    mu = dummy(fresh())
    z = Insertion(mu, Level(Lin()))
    out.append(Piece(Fraction(1, 24), (Correlator(0, (low, z, z) + rest),)))
    return out


def string_pieces(c: Correlator) -> list[Piece] | None:
    """``<1_0 S>_g`` in terms of lowered insertions, the ``t``-linear term and
    the genus-zero quadratic term."""
    from .expr import UNIT, Eta, QVar
    pos = next((a for a, x in enumerate(c.insertions) if x.idx == UNIT and
                x.level.lin == Lin() and not x.level.floating), None)
    if pos is None:
        return None
    rest = c.insertions[:pos] + c.insertions[pos + 1:]
    out = []
    for a, x in enumerate(rest):
        k = _const_level(x)
        if k is None or (x.level.floating and k == 0):
            return None
        if k == 0:
            continue
        new = rest[:a] + (Insertion(x.idx, x.level - 1),) + rest[a + 1:]
        out.append(Piece(Fraction(1), (Correlator(c.genus, new),)))
    nu = dummy(fresh())
    out.append(Piece(Fraction(1), (Correlator(c.genus, (Insertion(
        nu, Level(Lin(n=1))),) + rest),), (QVar(Lin(1, n=1), nu, True),),
        binders=frozenset({"n"})))
    if c.genus == 0 and all(_const_level(x) == 0 and not x.level.floating
                            for x in rest):
        if len(rest) == 2:
            out.append(Piece(Fraction(1), (), (Eta(rest[0].idx, rest[1].idx),)))
        elif len(rest) == 1:
            out.append(Piece(Fraction(1), (), (QVar(Lin(), rest[0].idx, True),)))
    return out


def dilaton_pieces(c: Correlator) -> list[Piece] | None:
    """``<1_1 S>_g = sum t^nu_n <nu_n S>_g + (2g-2+|S|) <S>_g`` (+ the genus one
    constant)."""
    from .expr import UNIT, Eta, QVar
    pos = next((a for a, x in enumerate(c.insertions) if x.idx == UNIT and
                x.level.lin == Lin(1) and not x.level.floating), None)
    if pos is None:
        return None
    rest = c.insertions[:pos] + c.insertions[pos + 1:]
    nu = dummy(fresh())
    out = [Piece(Fraction(1), (Correlator(c.genus, (Insertion(
        nu, Level(Lin(n=1))),) + rest),), (QVar(Lin(n=1), nu, True),),
        binders=frozenset({"n"}))]
    w = 2 * c.genus - 2 + len(rest)
    if w and (rest or c.genus >= 2):
        out.append(Piece(Fraction(w), (Correlator(c.genus, rest),)))
    if c.genus == 1 and not rest:
        from .expr import UNIT as U
        out.append(Piece(Fraction(1, 24), (), (Eta(U, U),)))
    return out


def _pieces_expr(pieces: list[Piece]) -> Expression:
    return Expression(tuple(Term(p.coeff, p.factors, p.atoms, p.sign,
                                 p.binders) for p in pieces))


def rule_trr0(c: Correlator) -> Expression | None:
    p = trr0_pieces(c)
    return None if p is None else _pieces_expr(p)


def rule_trr1(c: Correlator) -> Expression | None:
    p = trr1_pieces(c)
    return None if p is None else _pieces_expr(p)


def rule_string(c: Correlator) -> Expression | None:
    p = string_pieces(c)
    return None if p is None else _pieces_expr(p)


def rule_dilaton(c: Correlator) -> Expression | None:
    p = dilaton_pieces(c)
    return None if p is None else _pieces_expr(p)


@dataclass(frozen=True)
class Rule:
    name: str
    pieces: object
    regime: str = "both"

    def applies(self, c: Correlator) -> bool:
        return self.pieces(c) is not None

    def rewrite(self, c: Correlator) -> Expression | None:
        p = self.pieces(c)
        return None if p is None else _pieces_expr(p)


RULES = {
    "string": Rule("string", string_pieces, "descendent"),
    "dilaton": Rule("dilaton", dilaton_pieces, "descendent"),
    "trr0": Rule("trr0", trr0_pieces),
    "trr1": Rule("trr1", trr1_pieces),
}


def splice(t: Term, k: int, pieces: list[Piece]) -> list[Term]:
    """Replace factor ``k`` of ``t`` by each piece."""
    out = []
    for p in pieces:
        out.append(Term(t.coeff * p.coeff,
                        t.factors[:k] + p.factors + t.factors[k + 1:],
                        t.atoms + p.atoms, t.sign + p.sign,
                        t.binders | p.binders))
    return out


def exhaust(e: Expression, pieces_fn, ancestor: bool = True,
            max_steps: int = 10_000) -> Expression:
    """Apply a rule until no factor of any term is reducible."""
    todo = list(e.terms)
    done = []
    steps = 0
    while todo:
        t = todo.pop()
        for k, c in enumerate(t.factors):
            p = pieces_fn(c)
            if p is not None:
                new = splice(t, k, p)
                if ancestor:
                    new = [x for x in new if not vanishes(x)]
                todo.extend(new)
                steps += 1
                if steps > max_steps:
                    raise RuntimeError("rewrite did not terminate")
                break
        else:
            done.append(t)
    return canonicalize(Expression(tuple(done)))


# ------------------------------------------------------------ translation

def translate_desc_to_anc(c: Correlator, pos: int, lbar: int) -> Expression:
    """Rewrite a correlator whose insertion ``pos`` carries ``psi^k psibar^l``
    (``k`` its level, ``l = lbar``) in pure descendent correlators."""
    if lbar < 0:
        raise ValueError("ancestor level must be nonnegative")
    return canonicalize(Expression(tuple(_translate(c, pos, lbar, 1))))


def _translate(c: Correlator, pos: int, lbar: int, coeff) -> list[Term]:
    if lbar == 0:
        return [Term(Fraction(coeff), (c,))]
    x = c.insertions[pos]
    up = Correlator(c.genus, c.insertions[:pos] +
                    (Insertion(x.idx, x.level + 1),) + c.insertions[pos + 1:])
    out = _translate(up, pos, lbar - 1, coeff)
    mu = dummy(fresh())
    moved = Correlator(c.genus, c.insertions[:pos] +
                       (Insertion(mu, Level(Lin())),) + c.insertions[pos + 1:])
    two = Correlator(0, (x, Insertion(mu, Level(Lin()))))
    for t in _translate(moved, pos, lbar - 1, -coeff):
        out.append(Term(t.coeff, (two,) + t.factors, t.atoms))
    return out


# ---------------------------------------------------------- certificates

def wdvv_instance(a, b, c, d, rest=(), genus_rest=()) -> Expression:
    """``sum <a b mu S1><mu c d S2> - <a c mu S1><mu b d S2>`` over splittings
    of ``rest``; the returned terms carry no context."""
    return Expression(tuple(_wdvv_terms(a, b, c, d, rest)))


def _wdvv_terms(a, b, c, d, rest, coeff=Fraction(1)):
    out = []
    for (p, q, r, s), sg in (((a, b, c, d), 1), ((a, c, b, d), -1)):
        for s1, s2 in _split(rest):
            mu = Insertion(dummy(fresh()), Level(Lin()))
            out.append(Term(coeff * sg, (Correlator(0, (p, q, mu) + s1),
                                         Correlator(0, (mu, r, s) + s2))))
    return out


def _with_context(terms, t: Term, skip: tuple[int, int]):
    ctx = tuple(f for k, f in enumerate(t.factors) if k not in skip)
    return [Term(x.coeff, x.factors + ctx, t.atoms + x.atoms, t.sign,
                 t.binders) for x in terms]


def _pairs(t: Term):
    """Genus-zero factor pairs joined by a level-zero dummy ``mu``."""
    for k1, f1 in enumerate(t.factors):
        if f1.genus:
            continue
        for k2 in range(k1 + 1, len(t.factors)):
            f2 = t.factors[k2]
            if f2.genus:
                continue
            for x in f1.insertions:
                if x.idx.kind != "d" or x.level.lin != Lin() or \
                        x.level.floating:
                    continue
                ys = [y for y in f2.insertions if y.idx == x.idx]
                if len(ys) != 1 or ys[0].level != x.level:
                    continue
                a1 = list(f1.insertions)
                a1.remove(x)
                a2 = list(f2.insertions)
                a2.remove(ys[0])
                if len(a1) >= 2 and len(a2) >= 2:
                    yield (k1, k2), a1, a2
                break


def wdvv_instances_for(t: Term) -> list[Expression]:
    """All WDVV instances (with the term's context) containing ``t``."""
    from itertools import combinations
    out = []
    for skip, a1, a2 in _pairs(t):
        for i1, j1 in combinations(range(len(a1)), 2):
            for i2, j2 in combinations(range(len(a2)), 2):
                rest = tuple(x for k, x in enumerate(a1) if k not in (i1, j1)) \
                    + tuple(x for k, x in enumerate(a2) if k not in (i2, j2))
                terms = _wdvv_terms(a1[i1], a1[j1], a2[i2], a2[j2], rest)
                out.append(canonicalize(Expression(
                    tuple(_with_context(terms, t, skip)))))
    return out


@dataclass
class Certificate:
    residual: Expression
    identities: list
    coefficients: list
    ok: bool
    remainder: Expression | None = None

    def check(self) -> bool:
        """Re-expand ``residual - sum c_i identity_i`` independently."""
        acc = list(self.residual.terms)
        for c, ident in zip(self.coefficients, self.identities):
            acc.extend(Term(-c * t.coeff, t.factors, t.atoms, t.sign,
                            t.binders) for t in ident.terms)
        return canonicalize(Expression(tuple(acc))).is_zero()


def _vec(e: Expression, index: dict) -> dict:
    from .expr import term_key
    v = {}
    for t in e.terms:
        k = index.setdefault(term_key(t), len(index))
        v[k] = v.get(k, 0) + t.coeff
    return {k: c for k, c in v.items() if c}


def solve_span(target: dict, gens: list[dict]):
    """Exact ``lambda`` with ``sum lambda_i gens_i == target`` or ``None``."""
    pivots: dict[int, tuple[dict, dict]] = {}

    def reduce(v, combo):
        v, combo = dict(v), dict(combo)
        changed = True
        while changed:
            changed = False
            for k in sorted(v):
                if k in pivots and v.get(k):
                    pv, pc = pivots[k]
                    f = v[k]
                    for kk, c in pv.items():
                        nv = v.get(kk, 0) - f * c
                        if nv:
                            v[kk] = nv
                        else:
                            v.pop(kk, None)
                    for kk, c in pc.items():
                        nc = combo.get(kk, 0) - f * c
                        if nc:
                            combo[kk] = nc
                        else:
                            combo.pop(kk, None)
                    changed = True
                    break
        return v, combo

    for i, g in enumerate(gens):
        v, combo = reduce(g, {i: Fraction(1)})
        if v:
            k = min(v)
            f = v[k]
            pivots[k] = ({kk: c / f for kk, c in v.items()},
                         {kk: c / f for kk, c in combo.items()})
    v, combo = reduce(target, {})
    if v:
        return None
    return {k: -c for k, c in combo.items()}


def wdvv_closure(residual: Expression, max_instances: int = 5000
                 ) -> list[Expression]:
    from .expr import term_key
    seen = set()
    queue = list(residual.terms)
    inst_keys = set()
    out = []
    while queue:
        t = queue.pop()
        k = term_key(t)
        if k in seen:
            continue
        seen.add(k)
        for w in wdvv_instances_for(t):
            if w.is_zero():
                continue
            wk = tuple(sorted(map(repr, (term_key(x) for x in w.terms))))
            if wk in inst_keys:
                continue
            inst_keys.add(wk)
            out.append(w)
            if len(out) > max_instances:
                raise RuntimeError("certificate search exceeded its budget")
            queue.extend(w.terms)
    return out


def reduce_modulo_certificate(residual: Expression, jetcap: int | None = None
                              ) -> Certificate:
    """Express ``residual`` as an exact combination of WDVV instances."""
    residual = canonicalize(residual)
    if residual.is_zero():
        return Certificate(residual, [], [], True)
    from .expr import max_arity
    cap = (max_arity(residual) + 2) if jetcap is None else jetcap
    gens = [w for w in wdvv_closure(residual)
            if max_arity(w) <= cap]
    index: dict = {}
    target = _vec(residual, index)
    vecs = [_vec(w, index) for w in gens]
    lam = solve_span(target, vecs)
    if lam is None:
        return Certificate(residual, [], [], False, residual)
    used = sorted(lam)
    cert = Certificate(residual, [gens[i] for i in used],
                       [lam[i] for i in used], True)
    cert.ok = cert.check()
    return cert
