"""Correlator expressions with exact rational coefficients.

An expression is a finite sum of terms.  A term is a rational coefficient
times a product of matrix atoms ``(s_l)_{ij}``, ``(r_l)_{ij}``, coordinate
atoms ``q^j_n`` and correlator brackets ``<d^{i1}_{k1} ... >_g``.  Repeated
index names inside a term are summed (Einstein convention); dummy names are
local to the term.

Levels are affine integer forms in the symbols ``l`` (loop generator level),
``m`` and ``n`` (summation variables).  A term may bind ``m`` (ranging over
``0..l-1``) and ``n`` (ranging over ``0..oo``) and may carry a symbolic sign
``(-1)^(a*l + b*m + c*n)``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Iterator

SYMBOLS = ("l", "m", "n")

# canonical dummy names, in order of first use
DUMMY_NAMES = ("m", "n", "p", "a", "b", "c", "d", "e", "f", "g", "h", "k",
               "u", "v", "o", "j")
FREE_NAMES = ("x", "y", "z", "w")


class ExpressionError(ValueError):
    """Structural problem in an expression (bad dummy pairing etc.)."""


@dataclass(frozen=True, order=True)
class Lin:
    """Affine form ``c + l*L + m*M + n*N`` with integer coefficients."""

    c: int = 0
    l: int = 0
    m: int = 0
    n: int = 0

    @staticmethod
    def of(x: "Lin | int") -> "Lin":
        return x if isinstance(x, Lin) else Lin(int(x))

    def __add__(self, o: "Lin | int") -> "Lin":
        o = Lin.of(o)
        return Lin(self.c + o.c, self.l + o.l, self.m + o.m, self.n + o.n)

    __radd__ = __add__

    def __neg__(self) -> "Lin":
        return Lin(-self.c, -self.l, -self.m, -self.n)

    def __sub__(self, o: "Lin | int") -> "Lin":
        return self + (-Lin.of(o))

    def __rsub__(self, o: "Lin | int") -> "Lin":
        return Lin.of(o) - self

    def scale(self, k: int) -> "Lin":
        return Lin(self.c * k, self.l * k, self.m * k, self.n * k)

    def coeff(self, sym: str) -> int:
        return getattr(self, sym)

    @property
    def is_const(self) -> bool:
        return self.l == 0 and self.m == 0 and self.n == 0

    def symbols(self) -> set[str]:
        return {s for s in SYMBOLS if getattr(self, s)}

    def subs(self, sym: str, value: "Lin | int") -> "Lin":
        k = getattr(self, sym)
        if not k:
            return self
        return replace(self, **{sym: 0}) + Lin.of(value).scale(k)

    def evaluate(self, env: dict[str, int]) -> int:
        return self.c + sum(getattr(self, s) * env[s] for s in self.symbols())

    def mod2(self) -> "Lin":
        return Lin(self.c % 2, self.l % 2, self.m % 2, self.n % 2)

    def __str__(self) -> str:
        parts = []
        for s in SYMBOLS:
            k = getattr(self, s)
            if k:
                parts.append((k, s))
        out = ""
        for k, s in parts:
            mag = "" if abs(k) == 1 else str(abs(k))
            if not out:
                out = ("-" if k < 0 else "") + mag + s
            else:
                out += ("-" if k < 0 else "+") + mag + s
        if self.c or not out:
            if not out:
                out = str(self.c)
            else:
                out += ("-" if self.c < 0 else "+") + str(abs(self.c))
        return out


ZERO = Lin()
L_SYM = Lin(l=1)


@dataclass(frozen=True)
class Idx:
    """Index symbol: kind ``f`` (free), ``d`` (dummy) or ``u`` (the unit)."""

    kind: str
    name: str

    def __str__(self) -> str:
        return self.name


UNIT = Idx("u", "one")


def free(name: str) -> Idx:
    return Idx("f", name)


def dummy(name: str) -> Idx:
    return Idx("d", name)


@dataclass(frozen=True)
class Level:
    """Descendant level; ``floating`` means "at least this" (free slots)."""

    lin: Lin = ZERO
    floating: bool = False

    @staticmethod
    def of(x: "Level | Lin | int", floating: bool = False) -> "Level":
        if isinstance(x, Level):
            return x
        return Level(Lin.of(x), floating)

    def __add__(self, k: "Lin | int") -> "Level":
        return Level(self.lin + k, self.floating)

    def __sub__(self, k: "Lin | int") -> "Level":
        return Level(self.lin - k, self.floating)

    def key(self):
        return (self.floating, astuple_lin(self.lin))


def astuple_lin(x: Lin) -> tuple[int, int, int, int]:
    return (x.c, x.l, x.m, x.n)


@dataclass(frozen=True)
class Insertion:
    idx: Idx
    level: Level = Level()


@dataclass(frozen=True)
class Correlator:
    genus: int
    insertions: tuple[Insertion, ...]

    def __post_init__(self):
        if self.genus < 0:
            raise ExpressionError("negative genus")

    @property
    def arity(self) -> int:
        return len(self.insertions)


@dataclass(frozen=True)
class Mat:
    """Matrix entry ``(A_level)_{i j}``; kind is ``s`` or ``r``."""

    kind: str
    level: Lin
    i: Idx
    j: Idx


@dataclass(frozen=True)
class Eta:
    """Metric entry; the identity in an orthonormal basis."""

    i: Idx
    j: Idx


@dataclass(frozen=True)
class QVar:
    """Coordinate ``q^idx_level`` (or the dilaton-shifted ``t`` if shifted)."""

    level: Lin
    idx: Idx
    shifted: bool = False


Atom = Mat | Eta | QVar


def atom_indices(a: Atom) -> tuple[Idx, ...]:
    if isinstance(a, QVar):
        return (a.idx,)
    return (a.i, a.j)


@dataclass(frozen=True)
class Term:
    coeff: Fraction
    factors: tuple[Correlator, ...] = ()
    atoms: tuple[Atom, ...] = ()
    sign: Lin = ZERO
    binders: frozenset = frozenset()

    def indices(self) -> Iterator[Idx]:
        for a in self.atoms:
            yield from atom_indices(a)
        for c in self.factors:
            for ins in c.insertions:
                yield ins.idx

    def lins(self) -> Iterator[Lin]:
        for a in self.atoms:
            if isinstance(a, (Mat, QVar)):
                yield a.level
        for c in self.factors:
            for ins in c.insertions:
                yield ins.level.lin

    def with_coeff(self, c) -> "Term":
        return replace(self, coeff=Fraction(c))

    def has_qvar(self) -> bool:
        return any(isinstance(a, QVar) for a in self.atoms)


@dataclass(frozen=True)
class Expression:
    terms: tuple[Term, ...] = ()

    def __add__(self, other: "Expression") -> "Expression":
        return add(self, other)

    def __sub__(self, other: "Expression") -> "Expression":
        return add(self, scale(other, -1))

    def __mul__(self, other: "Expression") -> "Expression":
        return multiply(self, other)

    def __neg__(self) -> "Expression":
        return scale(self, -1)

    def __len__(self) -> int:
        return len(self.terms)

    def __iter__(self):
        return iter(self.terms)

    def is_zero(self) -> bool:
        return not canonicalize(self).terms


@dataclass(frozen=True)
class Equation:
    """An expression asserted to vanish, with moduli metadata."""

    lhs: Expression
    name: str = ""
    genus: int | None = None
    codim: int | None = None
    meta: tuple = field(default=(), compare=False)


def expr(*terms: Term) -> Expression:
    return Expression(tuple(terms))


def bracket(genus: int, *ins: Insertion | tuple) -> Correlator:
    out = []
    for x in ins:
        if isinstance(x, Insertion):
            out.append(x)
        else:
            idx, lev = x[0], x[1] if len(x) > 1 else 0
            out.append(Insertion(idx, Level.of(lev)))
    return Correlator(genus, tuple(out))


# ---------------------------------------------------------------- validation

def check_term(t: Term) -> None:
    counts: dict[Idx, int] = {}
    for i in t.indices():
        counts[i] = counts.get(i, 0) + 1
    for i, k in counts.items():
        if i.kind == "d" and k != 2:
            raise ExpressionError(
                f"dummy index {i.name} occurs {k} times in a term")
        if i.kind == "f" and k != 1:
            raise ExpressionError(
                f"free index {i.name} occurs {k} times in a term")
    for c in t.factors:
        if not c.insertions:
            raise ExpressionError("correlator without insertions")
    for s in ("m", "n"):
        if s not in t.binders and any(x.coeff(s) for x in t.lins()):
            raise ExpressionError(f"symbol {s} used but not summed")


def free_indices(t: Term) -> frozenset[Idx]:
    return frozenset(i for i in t.indices() if i.kind == "f")


# ---------------------------------------------------------- canonical form

def _idx_key(i: Idx, order: dict[str, int]):
    if i.kind == "f":
        return (0, i.name)
    if i.kind == "u":
        return (1, "")
    return (2, order[i.name])


def _ins_key(ins: Insertion, order):
    return (ins.level.key(), _idx_key(ins.idx, order))


def _lin_key(x: Lin):
    return astuple_lin(x)


def _signature(t: Term) -> dict[str, tuple]:
    """Renaming-invariant description of each dummy's two occurrences."""
    sig: dict[str, list] = {}
    for a in t.atoms:
        if isinstance(a, Mat):
            for pos, i in ((0, a.i), (1, a.j)):
                if i.kind == "d":
                    sig.setdefault(i.name, []).append(
                        ("M", a.kind, _lin_key(a.level)))
        elif isinstance(a, Eta):
            for i in (a.i, a.j):
                if i.kind == "d":
                    sig.setdefault(i.name, []).append(("E",))
        else:
            if a.idx.kind == "d":
                sig.setdefault(a.idx.name, []).append(
                    ("Q", a.shifted, _lin_key(a.level)))
    for c in t.factors:
        for ins in c.insertions:
            if ins.idx.kind == "d":
                sig.setdefault(ins.idx.name, []).append(
                    ("C", -c.genus, c.arity, ins.level.key()))
    return {k: tuple(sorted(v)) for k, v in sig.items()}


def _render(t: Term, order: dict[str, int]):
    """Representation of ``t`` under a dummy ordering; returns (key, sign)."""
    sign = t.sign
    atoms = []
    for a in t.atoms:
        if isinstance(a, Mat):
            ki, kj = _idx_key(a.i, order), _idx_key(a.j, order)
            if kj < ki:
                ki, kj = kj, ki
                sign = sign + a.level + 1
            atoms.append((0, a.kind, _lin_key(a.level), ki, kj))
        elif isinstance(a, Eta):
            ki, kj = sorted((_idx_key(a.i, order), _idx_key(a.j, order)))
            atoms.append((1, "", (), ki, kj))
        else:
            atoms.append((2, "t" if a.shifted else "q", _lin_key(a.level),
                          _idx_key(a.idx, order), ()))
    atoms.sort()
    facs = []
    for c in t.factors:
        ins = tuple(sorted(_ins_key(x, order) for x in c.insertions))
        facs.append((-c.genus, c.arity, tuple(x[0] for x in ins),
                     tuple(x[1] for x in ins)))
    facs.sort()
    return (tuple(atoms), tuple(facs), tuple(sorted(t.binders))), sign.mod2()


def _orderings(t: Term) -> Iterator[dict[str, int]]:
    sig = _signature(t)
    classes: dict[tuple, list[str]] = {}
    for name, s in sig.items():
        classes.setdefault(s, []).append(name)
    groups = [sorted(classes[k]) for k in sorted(classes)]
    for perms in itertools.product(*(itertools.permutations(g)
                                     for g in groups)):
        order = {}
        pos = 0
        for p in perms:
            for name in p:
                order[name] = pos
                pos += 1
        yield order


def reflect_m(t: Term) -> Term:
    """Substitute ``m -> l-1-m`` (the summation range is symmetric)."""
    return substitute(t, "m", Lin(-1, 1, -1, 0))


def _best(t: Term):
    best = None
    zero = False
    seen: dict[tuple, Lin] = {}
    for order in _orderings(t):
        key, sign = _render(t, order)
        fsign = Lin(0, sign.l, sign.m, sign.n)
        if key in seen:
            prev = seen[key]
            if (prev - sign).mod2() == Lin(1):
                zero = True
        else:
            seen[key] = sign
        cand = (key, astuple_lin(fsign), sign.c, order)
        if best is None or cand[:2] < best[:2]:
            best = cand
    return best, zero


def _rebuild(t: Term, key, sign: Lin) -> Term:
    names = {}

    def idx_of(k):
        if k[0] == 0:
            return Idx("f", k[1])
        if k[0] == 1:
            return UNIT
        if k[1] not in names:
            names[k[1]] = Idx("d", DUMMY_NAMES[k[1]] if k[1] < len(DUMMY_NAMES)
                              else f"d{k[1]}")
        return names[k[1]]

    atoms_k, facs_k, binders = key
    atoms: list[Atom] = []
    for kind, name, lv, ki, kj in atoms_k:
        if kind == 0:
            atoms.append(Mat(name, Lin(*lv), idx_of(ki), idx_of(kj)))
        elif kind == 1:
            atoms.append(Eta(idx_of(ki), idx_of(kj)))
        else:
            atoms.append(QVar(Lin(*lv), idx_of(ki), name == "t"))
    facs = []
    for g, _, levels, idxs in facs_k:
        ins = tuple(Insertion(idx_of(k), Level(Lin(*lv[1]), lv[0]))
                    for lv, k in zip(levels, idxs))
        facs.append(Correlator(-g, ins))
    coeff = t.coeff * (-1 if sign.c % 2 else 1)
    return Term(coeff, tuple(facs), tuple(atoms),
                Lin(0, sign.l, sign.m, sign.n), frozenset(binders))


@lru_cache(maxsize=200_000)
def canonical_term(t: Term) -> Term | None:
    """Canonical representative of a single term (``None`` if it is zero)."""
    if t.coeff == 0:
        return None
    check_term(t)
    cands = [t]
    if "m" in t.binders:
        r = reflect_m(t)
        if r.coeff != t.coeff:
            # keep the folded sign visible to the comparison below
            r = replace(r, coeff=t.coeff, sign=r.sign + Lin(1))
        cands.append(r)
    best = None
    for c in cands:
        b, zero = _best(c)
        if zero:
            return None
        if best is None or b[:2] < best[:2]:
            best = b
    # reflection may map the term to minus itself
    if len(cands) == 2:
        k0, _ = _best(cands[0])
        k1, _ = _best(cands[1])
        if k0[0] == k1[0]:
            s0 = Lin(k0[2], *k0[1][1:])
            s1 = Lin(k1[2], *k1[1][1:])
            if (s0 - s1).mod2() == Lin(1):
                return None
    key, fs, c, _ = best
    return _rebuild(t, key, Lin(c, *fs[1:]))


def term_key(t: Term):
    """Merge key of a canonical term (everything but the coefficient)."""
    return (t.atoms, t.factors, t.sign, tuple(sorted(t.binders)))


def _sort_key(t: Term):
    order = {name: i for i, name in enumerate(DUMMY_NAMES)}
    key, sign = _render(t, order)
    return (key[1], key[0], key[2], astuple_lin(sign))


def canonicalize(e: Expression) -> Expression:
    """Deterministic normal form: renamed dummies, sorted, merged, no zeros."""
    acc: dict = {}
    firsts: dict = {}
    for t in e.terms:
        c = canonical_term(t)
        if c is None:
            continue
        k = term_key(c)
        if k in acc:
            acc[k] += c.coeff
        else:
            acc[k] = c.coeff
            firsts[k] = c
    out = [firsts[k].with_coeff(v) for k, v in acc.items() if v != 0]
    out.sort(key=_sort_key)
    return Expression(tuple(out))


def is_canonical(e: Expression) -> bool:
    return canonicalize(e) == e


# ------------------------------------------------------------ ring operations

def add(*es: Expression) -> Expression:
    return canonicalize(Expression(tuple(t for e in es for t in e.terms)))


def scale(e: Expression, k) -> Expression:
    k = Fraction(k)
    if k == 0:
        return Expression()
    return Expression(tuple(t.with_coeff(t.coeff * k) for t in e.terms))


def rename_dummies(t: Term, mapping: dict[str, str]) -> Term:
    def f(i: Idx) -> Idx:
        if i.kind == "d" and i.name in mapping:
            return Idx("d", mapping[i.name])
        return i
    return map_indices(t, f)


def map_indices(t: Term, f) -> Term:
    atoms = []
    for a in t.atoms:
        if isinstance(a, Mat):
            atoms.append(Mat(a.kind, a.level, f(a.i), f(a.j)))
        elif isinstance(a, Eta):
            atoms.append(Eta(f(a.i), f(a.j)))
        else:
            atoms.append(QVar(a.level, f(a.idx), a.shifted))
    facs = tuple(Correlator(c.genus, tuple(Insertion(f(x.idx), x.level)
                                            for x in c.insertions))
                 for c in t.factors)
    return replace(t, atoms=tuple(atoms), factors=facs)


def dummy_names(t: Term) -> set[str]:
    return {i.name for i in t.indices() if i.kind == "d"}


_fresh_counter = itertools.count()


def fresh(prefix: str = "_") -> str:
    return f"{prefix}{next(_fresh_counter)}"


def freshen(t: Term) -> Term:
    """Rename every dummy of ``t`` to a globally fresh name."""
    return rename_dummies(t, {n: fresh() for n in dummy_names(t)})


def multiply_terms(a: Term, b: Term) -> Term:
    b = freshen(b)
    if a.binders & b.binders:
        raise ExpressionError("cannot multiply terms sharing a bound symbol")
    return Term(a.coeff * b.coeff, a.factors + b.factors, a.atoms + b.atoms,
                a.sign + b.sign, a.binders | b.binders)


def multiply(a: Expression, b: Expression) -> Expression:
    return canonicalize(Expression(tuple(multiply_terms(x, y)
                                         for x in a.terms for y in b.terms)))


def substitute(t: Term, sym: str, value: "Lin | int") -> Term:
    """Substitute a symbol in every level, matrix label and sign."""
    def lv(x: Lin) -> Lin:
        return x.subs(sym, value)
    atoms = []
    for a in t.atoms:
        if isinstance(a, Mat):
            atoms.append(replace(a, level=lv(a.level)))
        elif isinstance(a, QVar):
            atoms.append(replace(a, level=lv(a.level)))
        else:
            atoms.append(a)
    facs = tuple(Correlator(c.genus, tuple(
        Insertion(x.idx, Level(lv(x.level.lin), x.level.floating))
        for x in c.insertions)) for c in t.factors)
    sign = lv(t.sign)
    binders = t.binders
    if isinstance(value, int) or Lin.of(value).is_const:
        binders = binders - {sym}
    coeff = t.coeff * (-1 if sign.c % 2 else 1)
    return Term(coeff, facs, tuple(atoms), Lin(0, sign.l, sign.m, sign.n),
                binders)


def has_negative_level(t: Term) -> bool:
    """True if some concrete (non-floating) level or matrix label is invalid."""
    for a in t.atoms:
        if isinstance(a, Mat) and a.level.is_const and a.level.c < 1:
            return True
        if isinstance(a, QVar) and a.level.is_const and a.level.c < 0:
            return True
    for c in t.factors:
        for x in c.insertions:
            if x.level.lin.is_const and x.level.lin.c < 0:
                return True
    return False


def specialize_l(e: Expression, l: int) -> Expression:
    """Set the generator level to ``l`` and expand the ``m`` sums."""
    out = []
    for t in e.terms:
        # terms without l belong to the slice named by their matrix label
        if any(isinstance(a, Mat) and a.kind == "r" and a.level.is_const and
               a.level.c != l for a in t.atoms):
            continue
        t = substitute(t, "l", l)
        if "m" in t.binders:
            for mv in range(l):
                s = substitute(t, "m", mv)
                if not has_negative_level(s):
                    out.append(s)
        elif not has_negative_level(t):
            out.append(t)
    return canonicalize(Expression(tuple(out)))


# --------------------------------------------------------------- derivatives

def differentiate_q(e: Expression, q: QVar, canonical: bool = True
                   ) -> Expression:
    """Derivative with respect to the coordinate ``q`` (a fresh-index QVar).

    Each correlator gains the insertion ``d^{q.idx}_{q.level}`` (product rule)
    and each matching coordinate atom is replaced by a metric contraction.
    """
    out = []
    for t in e.terms:
        for k, c in enumerate(t.factors):
            nc = Correlator(c.genus, c.insertions + (Insertion(q.idx,
                                                               Level(q.level)),))
            out.append(replace(t, factors=t.factors[:k] + (nc,) +
                               t.factors[k + 1:]))
        for k, a in enumerate(t.atoms):
            if isinstance(a, QVar) and a.level == q.level and \
                    a.shifted == q.shifted:
                rest = replace(t, atoms=t.atoms[:k] + t.atoms[k + 1:])
                if a.idx == q.idx:
                    out.append(rest)
                elif a.idx.kind == "d":
                    # contracted coordinate: its partner takes q's index
                    out.append(map_indices(
                        rest, lambda i, a=a: q.idx if i == a.idx else i))
                elif q.idx.kind == "d" or "u" in (a.idx.kind, q.idx.kind):
                    out.append(replace(rest, atoms=rest.atoms +
                                       (Eta(a.idx, q.idx),)))
    ex = Expression(tuple(out))
    return canonicalize(ex) if canonical else ex


def qvar_count(e: Expression) -> int:
    return sum(1 for t in e.terms if t.has_qvar())


def terms_of(e: Expression, pred) -> Expression:
    return Expression(tuple(t for t in e.terms if pred(t)))


def const(c) -> Expression:
    return Expression((Term(Fraction(c)),)) if c else Expression()


def correlator_expr(c: Correlator, coeff=1) -> Expression:
    return canonicalize(Expression((Term(Fraction(coeff), (c,)),)))


def max_arity(e: Expression) -> int:
    return max((c.arity for t in e.terms for c in t.factors), default=0)


def iter_factors(e: Expression) -> Iterable[Correlator]:
    for t in e.terms:
        yield from t.factors
