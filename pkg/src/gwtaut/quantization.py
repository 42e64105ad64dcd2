"""Loop-group generators, their quadratic hamiltonians and derivations.

A lower triangular generator ``s(1/z) = sum_l s_l z^-l`` and an upper
triangular one ``r(z) = sum_l r_l z^l`` act on correlators through the Weyl
quantization of their quadratic hamiltonians.  :func:`apply_s` and
:func:`apply_r` implement these actions on symbolic expressions, with the
matrix entries kept as atoms ``(s_l)_{ij}`` / ``(r_l)_{ij}``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations

from .expr import (ZERO, Correlator, Equation, Expression, ExpressionError,
                   Idx, Insertion, Level, Lin, Mat, QVar, Term, canonicalize,
                   differentiate_q, dummy, fresh, has_negative_level, scale)

Matrix = tuple[tuple[Fraction, ...], ...]


class NotSymplecticError(ValueError):
    pass


def as_matrix(rows) -> Matrix:
    return tuple(tuple(Fraction(x) for x in row) for row in rows)


def transpose(a: Matrix) -> Matrix:
    return tuple(zip(*a)) if a else a


@dataclass(frozen=True)
class LoopGenerator:
    """Infinitesimal generator ``sum_k A_k z^k`` of a triangular subgroup.

    ``side`` is ``"lower"`` (powers ``z^-l``) or ``"upper"`` (powers
    ``z^l``).  ``entries`` maps ``l >= 1`` to a concrete matrix; when it is
    empty the generator is symbolic and only its levels are known.
    """

    side: str
    max_level: int = 1
    entries: dict = field(default_factory=dict, hash=False, compare=False)
    rank: int | None = None

    def __post_init__(self):
        if self.side not in ("lower", "upper"):
            raise ValueError(f"unknown side {self.side!r}")
        if self.max_level < 1:
            raise ValueError("max_level must be positive")

    @property
    def kind(self) -> str:
        return "s" if self.side == "lower" else "r"

    @property
    def symbolic(self) -> bool:
        return not self.entries

    def series(self) -> dict[int, Matrix]:
        """Concrete coefficients keyed by the power of ``z``."""
        sgn = -1 if self.side == "lower" else 1
        return {sgn * l: as_matrix(m) for l, m in self.entries.items()}

    def matrix(self, l: int) -> Matrix:
        n = self.rank or len(next(iter(self.entries.values())))
        if l in self.entries:
            return as_matrix(self.entries[l])
        return tuple((Fraction(0),) * n for _ in range(n))


def check_inf_symplectic(a) -> bool:
    """Parity test ``(A_k)^T == (-1)^(k+1) A_k`` for every stored power."""
    series = a.series() if isinstance(a, LoopGenerator) else \
        {k: as_matrix(m) for k, m in a.items()}
    for k, m in series.items():
        sgn = -1 if k % 2 == 0 else 1
        t = transpose(m)
        if any(t[i][j] != sgn * m[i][j] for i in range(len(m))
               for j in range(len(m))):
            return False
    return True


# ----------------------------------------------------- quadratic hamiltonians

@dataclass(frozen=True)
class QuadHamiltonian:
    """``P(A) = pp + pq + qq`` with coefficients keyed by coordinates.

    Keys of ``pp`` and ``qq`` are sorted pairs of ``(basis, level)``; keys of
    ``pq`` are ``((p-coordinate), (q-coordinate))``.
    """

    pp: dict
    pq: dict
    qq: dict
    truncation: int

    def __eq__(self, other):
        return (isinstance(other, QuadHamiltonian) and self.pp == other.pp and
                self.pq == other.pq and self.qq == other.qq)


def quad_hamiltonian(a, rank: int | None = None,
                     truncation: int = 6) -> QuadHamiltonian:
    """Quadratic hamiltonian ``1/2 Omega(A f, f)`` in Darboux coordinates.

    ``f(z) = sum_k q_k z^k + sum_k p_k (-z)^(-k-1)``; the symplectic form is
    the residue of ``(f(-z), g(z))``.  Coefficients are exact for all
    monomials in coordinates of level ``<= truncation``.
    """
    if not check_inf_symplectic(a):
        raise NotSymplecticError("generator is not infinitesimally symplectic")
    series = a.series() if isinstance(a, LoopGenerator) else \
        {k: as_matrix(m) for k, m in a.items()}
    if rank is None:
        rank = len(next(iter(series.values()))) if series else 1
    # vector-valued Laurent series: power -> list over basis of {var: coeff}
    f: dict[int, list[dict]] = {}

    def put(power, mu, var, c):
        f.setdefault(power, [dict() for _ in range(rank)])
        d = f[power][mu]
        d[var] = d.get(var, 0) + c

    for k in range(truncation + 1):
        for mu in range(rank):
            put(k, mu, ("q", mu, k), Fraction(1))
            put(-k - 1, mu, ("p", mu, k), Fraction((-1) ** (k + 1)))
    af: dict[int, list[dict]] = {}
    for power, vec in f.items():
        for kp, m in series.items():
            out = af.setdefault(power + kp, [dict() for _ in range(rank)])
            for i in range(rank):
                for j in range(rank):
                    if m[i][j]:
                        for var, c in vec[j].items():
                            out[i][var] = out[i].get(var, 0) + m[i][j] * c
    # residue of (Af(-z), f(z)): pair power a with power -a-1
    quad: dict = {}
    for pa, va in af.items():
        pb = -pa - 1
        if pb not in f:
            continue
        sgn = (-1) ** (pa % 2)
        for mu in range(rank):
            for v1, c1 in va[mu].items():
                for v2, c2 in f[pb][mu].items():
                    key = tuple(sorted((v1, v2)))
                    quad[key] = quad.get(key, 0) + Fraction(1, 2) * sgn * c1 * c2
    pp, pq, qq = {}, {}, {}
    for (v1, v2), c in quad.items():
        if c == 0:
            continue
        if v1[0] == "p" and v2[0] == "p":
            pp[(v1[1:], v2[1:])] = c
        elif v1[0] == "q" and v2[0] == "q":
            qq[(v1[1:], v2[1:])] = c
        else:
            p, q = (v1, v2) if v1[0] == "p" else (v2, v1)
            pq[(p[1:], q[1:])] = pq.get((p[1:], q[1:]), 0) + c
    return QuadHamiltonian(pp, pq, qq, truncation)


@dataclass(frozen=True)
class Operator:
    """Second order differential operator from the Weyl quantization.

    ``second``: ``hbar * c * d/dq_a d/dq_b``; ``first``: ``c * q_b d/dq_a``;
    ``mult``: ``c * q_a q_b / hbar``.  Coordinates are ``(basis, level)``.
    """

    second: tuple
    first: tuple
    mult: tuple


def quantize(h: QuadHamiltonian) -> Operator:
    return Operator(tuple(sorted(h.pp.items())), tuple(sorted(h.pq.items())),
                    tuple(sorted(h.qq.items())))


# ------------------------------------------------------------ derivations

def _lev(x) -> Lin:
    return Lin.of(x)


def _replace_factor(t: Term, k: int, new: list[Correlator], atoms=(),
                    coeff=1, sign=ZERO, binders=frozenset()) -> Term:
    return Term(t.coeff * Fraction(coeff),
                t.factors[:k] + tuple(new) + t.factors[k + 1:],
                t.atoms + tuple(atoms), t.sign + sign, t.binders | binders)


def _splittings(items):
    n = len(items)
    for r in range(n + 1):
        for sub in combinations(range(n), r):
            s1 = tuple(items[i] for i in sub)
            s2 = tuple(items[i] for i in range(n) if i not in sub)
            yield s1, s2


def _r_parts(t: Term, k: int, l: Lin, parts: dict):
    c = t.factors[k]
    g = c.genus
    I, J = dummy(fresh()), dummy(fresh())
    # q-linear term
    n = Lin(n=1)
    parts["q"].append(_replace_factor(
        t, k, [Correlator(g, (Insertion(I, Level(n + l)),) + c.insertions)],
        atoms=(Mat("r", l, I, J), QVar(n, J)), binders=frozenset({"n"})))
    # index raising on each slot
    for a, ins in enumerate(c.insertions):
        I = dummy(fresh())
        new = list(c.insertions)
        new[a] = Insertion(I, ins.level + l)
        part = "raise_free" if ins.idx.kind == "f" else "raise"
        parts[part].append(_replace_factor(
            t, k, [Correlator(g, tuple(new))], atoms=(Mat("r", l, I, ins.idx),)))
    m = Lin(m=1)
    lo, hi = l - 1 - m, m
    half = Fraction(1, 2)
    sign = Lin(1, 0, 1, 0)
    bm = frozenset({"m"})
    if g >= 1:
        I, J = dummy(fresh()), dummy(fresh())
        parts["genus"].append(_replace_factor(
            t, k, [Correlator(g - 1, (Insertion(I, Level(lo)),
                                      Insertion(J, Level(hi))) + c.insertions)],
            atoms=(Mat("r", l, I, J),), coeff=half, sign=sign, binders=bm))
    for g1 in range(g + 1):
        for s1, s2 in _splittings(c.insertions):
            I, J = dummy(fresh()), dummy(fresh())
            f1 = Correlator(g1, (Insertion(I, Level(lo)),) + s1)
            f2 = Correlator(g - g1, (Insertion(J, Level(hi)),) + s2)
            onepoint0 = (g1 == 0 and not s1) or (g - g1 == 0 and not s2)
            parts["split0" if onepoint0 else "split"].append(_replace_factor(
                t, k, [f1, f2], atoms=(Mat("r", l, I, J),), coeff=half,
                sign=sign, binders=bm))


def _s_parts(t: Term, k: int, l: int, parts: dict):
    c = t.factors[k]
    g = c.genus
    I, J = dummy(fresh()), dummy(fresh())
    n = Lin(n=1)
    parts["q"].append(_replace_factor(
        t, k, [Correlator(g, (Insertion(I, Level(n)),) + c.insertions)],
        atoms=(Mat("s", _lev(l), I, J), QVar(n + l, J)),
        binders=frozenset({"n"})))
    for a, ins in enumerate(c.insertions):
        I = dummy(fresh())
        new = list(c.insertions)
        new[a] = Insertion(I, ins.level - l)
        nt = _replace_factor(t, k, [Correlator(g, tuple(new))],
                             atoms=(Mat("s", _lev(l), I, ins.idx),))
        if has_negative_level(nt):
            continue
        part = "lower_free" if ins.idx.kind == "f" else "lower"
        parts[part].append(nt)


def _s_delta(t: Term, k: int, parts: dict, levels: range):
    c = t.factors[k]
    if c.genus != 0 or c.arity != 2:
        return
    (a, b) = c.insertions
    if not (a.level.lin.is_const and b.level.lin.is_const):
        return
    k1, k2 = a.level.lin.c, b.level.lin.c
    lv = k1 + k2 + 1
    if lv not in levels:
        return
    rest = t.factors[:k] + t.factors[k + 1:]
    for (i1, e1), (i2, _) in (((a.idx, k1), (b.idx, k2)),
                              ((b.idx, k2), (a.idx, k1))):
        parts["delta"].append(Term(t.coeff * Fraction((-1) ** e1, 2), rest,
                                   t.atoms + (Mat("s", Lin(lv), i1, i2),),
                                   t.sign, t.binders))


S_PARTS = ("q", "lower", "lower_free", "delta")
R_PARTS = ("q", "raise", "raise_free", "genus", "split", "split0")


def _terms(e) -> tuple[Term, ...]:
    if isinstance(e, Equation):
        e = e.lhs
    return e.terms


def s_parts(gen: LoopGenerator, e, levels=None) -> dict[str, Expression]:
    """Contributions of ``s_hat`` to ``e`` sorted by their origin."""
    levels = range(1, gen.max_level + 1) if levels is None else levels
    parts = {p: [] for p in S_PARTS}
    for t in _terms(e):
        for k in range(len(t.factors)):
            for l in levels:
                _s_parts(t, k, l, parts)
            _s_delta(t, k, parts, levels)
    return {p: canonicalize(Expression(tuple(v))) for p, v in parts.items()}


def r_parts(gen: LoopGenerator | None, e, l: int | str = "sym"
            ) -> dict[str, Expression]:
    """Contributions of ``(r_l z^l)^`` to ``e`` sorted by their origin."""
    lv = Lin(l=1) if l == "sym" else Lin(int(l))
    if not lv.symbols() and lv.c < 1:
        raise ValueError("generator level must be positive")
    parts = {p: [] for p in R_PARTS}
    for t in _terms(e):
        if "m" in t.binders or "n" in t.binders:
            raise ExpressionError("apply_r expects an expression without "
                                  "summation binders")
        for k in range(len(t.factors)):
            _r_parts(t, k, lv, parts)
    out = {}
    for p, v in parts.items():
        ex = canonicalize(Expression(tuple(v)))
        if l != "sym":
            from .expr import specialize_l
            ex = specialize_l(ex, int(l))
        out[p] = ex
    return out


def _sum(parts: dict) -> Expression:
    return canonicalize(Expression(tuple(t for v in parts.values()
                                         for t in v.terms)))


def apply_s(gen: LoopGenerator, e, levels=None) -> Expression:
    """Action of the quantized lower triangular generator on ``e``.

    Sums ``l = 1..gen.max_level``; q-linear terms keep a bound ``n``.
    """
    return _sum(s_parts(gen, e, levels))


def apply_r(gen: LoopGenerator | None, e, l: int | str = "sym") -> Expression:
    """Action of ``(r_l z^l)^`` on ``e`` for one level ``l`` (or symbolic)."""
    return _sum(r_parts(gen, e, l))


# ------------------------------------------------------- derivative matching

def q_derivative_family(kind: str, e, l) -> Expression:
    """``sum (A_l)_{IJ} q^J_. d/dq^I_. E`` for the generator kind."""
    lv = Lin(l=1) if l == "sym" else Lin(int(l))
    ex = e.lhs if isinstance(e, Equation) else e
    out = []
    I, J = dummy(fresh()), dummy(fresh())
    n = Lin(n=1)
    if kind == "r":
        d = differentiate_q(ex, QVar(n + lv, I), canonical=False)
        extra = (Mat("r", lv, I, J), QVar(n, J))
    else:
        d = differentiate_q(ex, QVar(n, I), canonical=False)
        extra = (Mat("s", lv, I, J), QVar(n + lv, J))
    for t in d.terms:
        out.append(Term(t.coeff, t.factors, t.atoms + extra, t.sign,
                        t.binders | {"n"}))
    res = canonicalize(Expression(tuple(out)))
    if kind == "r" and l != "sym":
        from .expr import specialize_l
        res = specialize_l(res, int(l))
    return res


def onepoint_family(e, l) -> Expression:
    """Split terms with a bare genus-zero one-point factor: ``<I>_0 dE/dq^J``."""
    lv = Lin(l=1) if l == "sym" else Lin(int(l))
    ex = e.lhs if isinstance(e, Equation) else e
    m = Lin(m=1)
    out = []
    for lo, hi, swap in ((lv - 1 - m, m, False), (m, lv - 1 - m, True)):
        I, J = dummy(fresh()), dummy(fresh())
        mat = Mat("r", lv, J, I) if swap else Mat("r", lv, I, J)
        d = differentiate_q(ex, QVar(hi, J), canonical=False)
        for t in d.terms:
            if "m" in t.binders:
                raise ExpressionError("nested m sums")
            out.append(Term(t.coeff / 2, t.factors +
                            (Correlator(0, (Insertion(I, Level(lo)),)),),
                            t.atoms + (mat,),
                            t.sign + Lin(1, 0, 1, 0), t.binders | {"m"}))
    res = canonicalize(Expression(tuple(out)))
    if l != "sym":
        from .expr import specialize_l
        res = specialize_l(res, int(l))
    return res


def _fit(expr: Expression, cand: Expression):
    """Scalar ``c`` with every term of ``c*cand`` present in ``expr``."""
    if not cand.terms:
        return Fraction(0)
    have = {(_k(t)): t.coeff for t in expr.terms}
    first = cand.terms[0]
    if _k(first) not in have:
        return None
    lam = have[_k(first)] / first.coeff
    for t in cand.terms:
        if have.get(_k(t)) != lam * t.coeff:
            return None
    return lam


def _k(t: Term):
    from .expr import term_key
    return term_key(t)


def match_derivative_of_E(expr: Expression, E, kind: str = "r", l="sym"
                          ) -> tuple[Expression, Expression]:
    """Split ``expr`` into a part that is a q-derivative of ``E`` and the rest.

    The matched span is generated by the q-linear family
    ``(A_l)_{IJ} q^J d/dq^I E`` and, for upper triangular generators, by the
    family ``<I>_0 dE/dq^J`` of bare genus-zero one-point factors.  Returns
    ``(matched, residual)``.
    """
    expr = canonicalize(expr)
    matched = Expression()
    fams = [q_derivative_family(kind, E, l)]
    if kind == "r":
        fams.append(onepoint_family(E, l))
    for cand in fams:
        lam = _fit(expr, cand)
        if lam:
            part = scale(cand, lam)
            matched = canonicalize(Expression(matched.terms + part.terms))
            expr = canonicalize(Expression(expr.terms +
                                           scale(part, -1).terms))
    return matched, expr


def substitute_free(e, x: Idx, shift: Lin | int, kind: str,
                    level: Lin) -> Expression:
    """``(A_level)_{new x} * E`` with the free slot ``x`` moved to ``new``.

    This is ``E`` evaluated at another flat vector field, hence zero modulo
    ``E``.
    """
    ex = e.lhs if isinstance(e, Equation) else e
    out = []
    for t in ex.terms:
        new = dummy(fresh())
        facs = []
        for c in t.factors:
            facs.append(Correlator(c.genus, tuple(
                Insertion(new, x_.level + shift) if x_.idx == x else x_
                for x_ in c.insertions)))
        nt = Term(t.coeff, tuple(facs), t.atoms + (Mat(kind, level, new, x),),
                  t.sign, t.binders)
        if not has_negative_level(nt):
            out.append(nt)
    return canonicalize(Expression(tuple(out)))
