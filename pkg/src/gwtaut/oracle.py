"""Exact numeric ground truth for symbolic identities.

Intersection numbers of psi classes on the moduli of curves come from the
Dijkgraaf-Verlinde-Verlinde recursion.  Expressions are evaluated for the
rank ``N`` diagonal theory (``N`` copies of the point, orthonormal basis,
unit ``sum_mu phi_mu``) at exact rational jets in one of two regimes:

``descendent``
    ``t = eps * v`` as a formal jet; values are polynomials in ``eps``
    truncated at ``order``.
``ancestor``
    ``q_0 = 0``, ``t_1 = q_1 + 1`` and ``q_k = 0`` above the jet height; the
    sums are finite and values are exact rationals.
"""
from __future__ import annotations

import itertools
import math
import os
import random
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

from .expr import (UNIT, Correlator, Equation, Eta, Expression, Idx, Mat,
                   QVar, Term)


class OracleError(ValueError):
    pass


class CacheError(OracleError):
    pass


class FrozenTableError(RuntimeError):
    pass


def _dfact(n: int) -> int:
    """Double factorial with ``(-1)!! = 1``."""
    out = 1
    while n > 1:
        out *= n
        n -= 2
    return out


def stable(g: int, n: int) -> bool:
    return 2 * g - 2 + n > 0


class PointTheory:
    """Memoized table ``(g, sorted levels) -> <tau_k1 ... tau_kn>_g``.

    Values are computed on demand while the table is open; after
    :meth:`freeze` a missing entry raises :class:`FrozenTableError`, so the
    table can be shared between threads without locking.
    """

    def __init__(self, gmax: int = 4):
        self.gmax = gmax
        self.table: dict[tuple[int, tuple[int, ...]], Fraction] = {}
        self.frozen = False
        self._lock = threading.RLock()

    def __call__(self, g: int, levels) -> Fraction:
        return self.value(g, levels)

    def value(self, g: int, levels) -> Fraction:
        key = (g, tuple(sorted(levels, reverse=True)))
        v = self.table.get(key)
        if v is not None:
            return v
        if g < 0 or any(k < 0 for k in key[1]):
            return Fraction(0)
        if sum(key[1]) != 3 * g - 3 + len(key[1]) or not stable(g, len(key[1])):
            return Fraction(0)
        if g > self.gmax:
            raise OracleError(f"genus {g} exceeds gmax={self.gmax}")
        if self.frozen:
            raise FrozenTableError(f"entry {key} missing from frozen table")
        with self._lock:
            v = self._dvv(g, key[1])
            self.table[key] = v
        return v

    def _dvv(self, g: int, ks: tuple[int, ...]) -> Fraction:
        if g == 0 and ks == (0, 0, 0):
            return Fraction(1)
        if g == 1 and ks == (1,):
            return Fraction(1, 24)
        k = ks[0] - 1
        rest = ks[1:]
        acc = Fraction(0)
        for j, d in enumerate(rest):
            new = rest[:j] + (d + k,) + rest[j + 1:]
            acc += Fraction(_dfact(2 * k + 2 * d + 1),
                            _dfact(2 * d - 1)) * self.value(g, new)
        for r in range(k):
            s = k - 1 - r
            w = Fraction(_dfact(2 * r + 1) * _dfact(2 * s + 1), 2)
            acc += w * self.value(g - 1, (r, s) + rest)
            n = len(rest)
            for g1 in range(g + 1):
                for mask in range(1 << n):
                    i1 = tuple(rest[i] for i in range(n) if mask >> i & 1)
                    i2 = tuple(rest[i] for i in range(n) if not mask >> i & 1)
                    acc += w * self.value(g1, (r,) + i1) * \
                        self.value(g - g1, (s,) + i2)
        return acc / _dfact(2 * k + 3)

    def build(self, nmax: int = 6) -> "PointTheory":
        """Fill every stable entry with ``g <= gmax`` and ``n <= nmax``."""
        for g in range(self.gmax + 1):
            for n in range(1, nmax + 1):
                if not stable(g, n):
                    continue
                dim = 3 * g - 3 + n
                for ks in _partitions(dim, n):
                    self.value(g, ks)
        return self

    def freeze(self) -> "PointTheory":
        self.frozen = True
        return self

    # -------------------------------------------------------------- cache
    def dump(self, path: str) -> None:
        with open(path, "w") as fh:
            for (g, ks), v in sorted(self.table.items()):
                fh.write(f"{g} {' '.join(map(str, ks))} "
                         f"{v.numerator}/{v.denominator}\n")

    @classmethod
    def load(cls, path: str, gmax: int = 4) -> "PointTheory":
        pt = cls(gmax)
        with open(path) as fh:
            for no, line in enumerate(fh, 1):
                parts = line.split()
                if not parts:
                    continue
                try:
                    g = int(parts[0])
                    ks = tuple(int(x) for x in parts[1:-1])
                    num, den = parts[-1].split("/")
                    v = Fraction(int(num), int(den))
                except (ValueError, ZeroDivisionError) as exc:
                    raise CacheError(f"{path}:{no}: malformed record") from exc
                if len(parts) < 3 or g < 0 or any(k < 0 for k in ks):
                    raise CacheError(f"{path}:{no}: malformed record")
                pt.table[(g, tuple(sorted(ks, reverse=True)))] = v
        bad = check_consistency(pt)
        if bad:
            raise CacheError(f"{path}: inconsistent entry {bad[0]}")
        return pt


def _partitions(total: int, n: int, top: int | None = None):
    """Nonincreasing ``n``-tuples of nonnegative integers summing to total."""
    top = total if top is None else top
    if n == 0:
        if total == 0:
            yield ()
        return
    for first in range(min(total, top), -1, -1):
        if first * n < total:
            break
        for rest in _partitions(total - first, n - 1, first):
            yield (first,) + rest


def check_consistency(pt: PointTheory) -> list:
    """Dimension, string and dilaton checks over every stored entry."""
    bad = []
    for (g, ks), v in list(pt.table.items()):
        n = len(ks)
        if sum(ks) != 3 * g - 3 + n and v != 0:
            bad.append(("dimension", g, ks))
            continue
        if 0 in ks and stable(g, n - 1):
            rest = list(ks)
            rest.remove(0)
            s = Fraction(0)
            for a in range(len(rest)):
                if rest[a] > 0:
                    new = rest[:a] + [rest[a] - 1] + rest[a + 1:]
                    s += _peek(pt, g, new)
            if s != v:
                bad.append(("string", g, ks))
        if 1 in ks and stable(g, n - 1):
            rest = list(ks)
            rest.remove(1)
            if v != (2 * g - 2 + n - 1) * _peek(pt, g, rest):
                bad.append(("dilaton", g, ks))
    return bad


def _peek(pt: PointTheory, g: int, ks) -> Fraction:
    key = (g, tuple(sorted(ks, reverse=True)))
    if key in pt.table:
        return pt.table[key]
    if pt.frozen:
        return PointTheory(pt.gmax).value(g, ks)
    return pt.value(g, ks)


_DEFAULT = PointTheory(gmax=4)


def point_intersection(g: int, levels) -> Fraction:
    """``<tau_k1 ... tau_kn>_g`` (zero for unstable or off-dimension input)."""
    return _DEFAULT.value(g, levels)


def default_table() -> PointTheory:
    return _DEFAULT


def cache_dir() -> str:
    return os.environ.get("GWTAUT_CACHE_DIR",
                          os.path.join(os.path.expanduser("~"), ".cache",
                                       "gwtaut"))


# ----------------------------------------------------------------- jets

Poly = tuple  # truncated power series in eps, coefficients Fraction


def _padd(a: Poly, b: Poly) -> Poly:
    n = max(len(a), len(b))
    return tuple((a[i] if i < len(a) else 0) + (b[i] if i < len(b) else 0)
                 for i in range(n))


def _pmul(a: Poly, b: Poly, order: int) -> Poly:
    out = [Fraction(0)] * min(order + 1, len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if not x:
            continue
        for j, y in enumerate(b):
            if i + j < len(out) and y:
                out[i + j] += x * y
    return tuple(out)


def _pscale(a: Poly, c) -> Poly:
    return tuple(c * x for x in a)


@dataclass(frozen=True)
class JetPoint:
    """Values ``v[(mu, k)]`` of the jet coordinates, ``0 <= k <= height``.

    In the descendent regime ``t^mu_k = eps * v``; in the ancestor regime
    ``q^mu_k = v`` with ``q_0 = 0`` and ``t^mu_1 = q^mu_1 + 1``.
    """

    rank: int
    values: tuple
    regime: str = "descendent"
    order: int = 8
    height: int = 4

    def __post_init__(self):
        if self.regime not in ("descendent", "ancestor"):
            raise ValueError(f"unknown regime {self.regime!r}")
        if self.regime == "ancestor":
            for (mu, k), v in self.values:
                if k == 0 and v:
                    raise ValueError("ancestor jets need q_0 = 0")
            for mu in range(self.rank):
                if self.get(mu, 1) == 0:
                    raise ValueError("ancestor jets need q_1 != 0")

    def get(self, mu: int, k: int) -> Fraction:
        return dict(self.values).get((mu, k), Fraction(0))

    def one(self) -> Poly:
        return (Fraction(1),)

    def q(self, mu: int, k: int) -> Poly:
        """The Darboux coordinate ``q^mu_k`` as a series."""
        v = self.get(mu, k) if k <= self.height else Fraction(0)
        if self.regime == "ancestor":
            return (v,)
        return (-Fraction(int(k == 1)), v)

    def t(self, mu: int, k: int) -> Poly:
        """The shifted coordinate ``t = q + delta``."""
        return _padd(self.q(mu, k), (Fraction(int(k == 1)),))


def random_jet(rank: int = 1, regime: str = "descendent", order: int = 8,
               height: int = 4, seed: int | random.Random = 0,
               bound: int = 13) -> JetPoint:
    """Jet with small-height rational entries (numerator, denominator <= 13)."""
    rng = seed if isinstance(seed, random.Random) else random.Random(seed)

    def rat():
        return Fraction(rng.randint(-bound, bound), rng.randint(1, bound))

    vals = {}
    for mu in range(rank):
        for k in range(height + 1):
            if regime == "ancestor" and k == 0:
                continue
            v = rat()
            if regime == "ancestor" and k == 1:
                while v == 0:
                    v = rat()
            vals[(mu, k)] = v
    return JetPoint(rank, tuple(sorted(vals.items())), regime, order, height)


class Evaluator:
    """Evaluates expressions at a jet point for the rank ``N`` diagonal theory."""

    def __init__(self, point: JetPoint, table: PointTheory | None = None):
        self.p = point
        self.pt = table or _DEFAULT
        self._cache: dict = {}

    # correlators ------------------------------------------------------
    def correlator(self, g: int, levels: tuple[int, ...], mu: int) -> Poly:
        key = (g, tuple(sorted(levels)), mu)
        v = self._cache.get(key)
        if v is None:
            v = (self._anc if self.p.regime == "ancestor" else self._desc)(
                g, key[1], mu)
            self._cache[key] = v
        return v

    def _desc(self, g, ks, mu) -> Poly:
        p = self.p
        d = 3 * g - 3 + len(ks) - sum(ks)
        out = [Fraction(0)] * (p.order + 1)
        levels = range(p.height + 1)
        for size in range(p.order + 1):
            for ys in itertools.combinations_with_replacement(levels, size):
                if sum(y - 1 for y in ys) != d:
                    continue
                w = Fraction(1)
                for y, c in _counts(ys):
                    w *= Fraction(p.get(mu, y) ** c, math.factorial(c))
                if w:
                    out[size] += w * self.pt.value(g, ks + ys)
        return tuple(out)

    def _anc(self, g, ks, mu) -> Poly:
        p = self.p
        d = 3 * g - 3 + len(ks) - sum(ks)
        if d < 0:
            return (Fraction(0),)
        q1 = p.get(mu, 1)
        acc = Fraction(0)
        for ys in _level_multisets(d, p.height):
            n = len(ks) + len(ys)
            if not stable(g, n):
                continue
            w = Fraction(1)
            for y, c in _counts(ys):
                w *= Fraction(p.get(mu, y) ** c, math.factorial(c))
            if w:
                acc += w * self.pt.value(g, ks + ys) * \
                    Fraction(-q1) ** (-(2 * g - 2 + n))
        return (acc,)

    # expressions ------------------------------------------------------
    def evaluate(self, e, bindings: dict | None = None,
                 matrices: dict | None = None, l: int | None = None) -> Poly:
        """Value of ``e``; ``bindings`` maps free names to ``(mu, level)``,
        ``matrices`` maps ``(kind, level)`` to ``N x N`` rational matrices."""
        if isinstance(e, Equation):
            e = e.lhs
        bindings = bindings or {}
        matrices = matrices or {}
        total: Poly = (Fraction(0),)
        for t in e.terms:
            total = _padd(total, self.term(t, bindings, matrices, l))
        return _trim(total)

    def term(self, t: Term, bindings, matrices, l) -> Poly:
        p = self.p
        t = _split_units(t)
        names = sorted({i.name for i in _indices(t) if i.kind in "du"})
        frees = {i.name for i in _indices(t) if i.kind == "f"}
        missing = frees - set(bindings)
        if missing:
            raise OracleError(f"unbound free index {sorted(missing)[0]}")
        syms = {}
        if l is not None:
            syms["l"] = l
        elif _uses(t, "l"):
            raise OracleError("generator level l is unbound")
        m_range = range(syms.get("l", 0)) if "m" in t.binders else [0]
        n_range = range(self._n_bound(t)) if "n" in t.binders else [0]
        acc: Poly = (Fraction(0),)
        for mv in m_range:
            for nv in n_range:
                env = dict(syms, m=mv, n=nv)
                for vals in itertools.product(range(p.rank), repeat=len(names)):
                    asg = dict(zip(names, vals))
                    v = self._assigned(t, env, asg, bindings, matrices)
                    if any(v):
                        acc = _padd(acc, v)
        return _pscale(acc, t.coeff)

    def _n_bound(self, t: Term) -> int:
        """Exclusive bound on ``n``: a coordinate above the jet height is
        zero (up to the dilaton shift at level one) and correlator levels
        stay within the truncation order."""
        bound = self.p.order + 1
        for a in t.atoms:
            if isinstance(a, QVar) and a.level.n > 0 and \
                    not (a.level.l or a.level.m):
                top = max(self.p.height, 1)
                bound = min(bound, (top - a.level.c) // a.level.n + 1)
        for c in t.factors:
            for x in c.insertions:
                lin = x.level.lin
                if lin.n > 0 and not (lin.l or lin.m):
                    bound = min(bound, (self.p.order - lin.c) // lin.n + 1)
        return max(bound, 0)

    def _level(self, lin, env) -> int:
        return lin.c + lin.l * env.get("l", 0) + lin.m * env["m"] + \
            lin.n * env["n"]

    def _assigned(self, t: Term, env, asg, bindings, matrices) -> Poly:
        p = self.p

        def basis(i: Idx):
            if i.kind == "f":
                return bindings[i.name][0]
            return asg[i.name]

        sign = self._level(t.sign, env)
        val: Poly = (Fraction(-1) ** sign,)
        for a in t.atoms:
            if isinstance(a, Mat):
                lev = self._level(a.level, env)
                m = matrices.get((a.kind, lev))
                if m is None:
                    if lev < 1:
                        return (Fraction(0),)
                    raise OracleError(f"matrix {a.kind}_{lev} is unbound")
                c = Fraction(m[basis(a.i)][basis(a.j)])
                if not c:
                    return (Fraction(0),)
                val = _pscale(val, c)
            elif isinstance(a, Eta):
                if basis(a.i) != basis(a.j):
                    return (Fraction(0),)
            elif isinstance(a, QVar):
                lev = self._level(a.level, env)
                if lev < 0:
                    return (Fraction(0),)
                mu = basis(a.idx)
                x = p.t(mu, lev) if a.shifted else p.q(mu, lev)
                val = _pmul(val, x, p.order)
            if not any(val):
                return (Fraction(0),)
        for c in t.factors:
            mus = set()
            levels = []
            for x in c.insertions:
                mus.add(basis(x.idx))
                lev = self._level(x.level.lin, env)
                if x.idx.kind == "f" and x.level.floating:
                    lev += bindings[x.idx.name][1]
                if lev < 0:
                    return (Fraction(0),)
                if lev > p.order:
                    raise OracleError(f"truncation order {p.order} is below "
                                      f"level {lev}")
                levels.append(lev)
            if len(mus) > 1:
                return (Fraction(0),)
            if not mus:
                # the free energy: one copy of the point per direction
                if c.genus < 2:
                    raise OracleError("unstable correlator without insertions")
                f: Poly = (Fraction(0),)
                for mu in range(p.rank):
                    f = _padd(f, self.correlator(c.genus, (), mu))
                val = _pmul(val, f, p.order)
            else:
                val = _pmul(val, self.correlator(c.genus, tuple(levels),
                                                 mus.pop()), p.order)
            if not any(val):
                return (Fraction(0),)
        return val


def _trim(a: Poly) -> Poly:
    a = list(a)
    while len(a) > 1 and a[-1] == 0:
        a.pop()
    return tuple(a)


def _counts(ys):
    out = {}
    for y in ys:
        out[y] = out.get(y, 0) + 1
    return out.items()


@lru_cache(maxsize=None)
def _level_multisets(d: int, height: int) -> tuple:
    """Multisets of levels ``2..height`` with ``sum(y - 1) == d``."""
    out = []

    def rec(rem, lo, acc):
        if rem == 0:
            out.append(tuple(acc))
            return
        for y in range(lo, height + 1):
            if y - 1 > rem:
                break
            rec(rem - (y - 1), y, acc + [y])

    rec(d, 2, [])
    return tuple(out)


def _indices(t: Term):
    for a in t.atoms:
        if isinstance(a, (Mat, Eta)):
            yield a.i
            yield a.j
        else:
            yield a.idx
    for c in t.factors:
        for x in c.insertions:
            yield x.idx


def _uses(t: Term, sym: str) -> bool:
    return any(sym in lin.symbols() for lin in t.lins())


def _split_units(t: Term) -> Term:
    """Give each unit occurrence its own summation index (unit = sum phi_mu)."""
    from dataclasses import replace as _r
    from .expr import Insertion
    counter = itertools.count()

    def sub(i: Idx) -> Idx:
        return Idx("u", f"one#{next(counter)}") if i == UNIT else i

    atoms = []
    for a in t.atoms:
        if isinstance(a, (Mat, Eta)):
            atoms.append(_r(a, i=sub(a.i), j=sub(a.j)))
        else:
            atoms.append(_r(a, idx=sub(a.idx)))
    facs = tuple(Correlator(c.genus, tuple(Insertion(sub(x.idx), x.level)
                                           for x in c.insertions))
                 for c in t.factors)
    return Term(t.coeff, facs, tuple(atoms), t.sign, t.binders)


def evaluate(e, point: JetPoint, bindings: dict | None = None,
             matrices: dict | None = None, l: int | None = None,
             table: PointTheory | None = None) -> Poly:
    return Evaluator(point, table).evaluate(e, bindings, matrices, l)


def is_zero(v: Poly) -> bool:
    return not any(v)


# ----------------------------------------------------------- validation

@dataclass
class RuleReport:
    rule: str
    trials: int
    regime: str
    rank: int
    counterexamples: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.counterexamples


def _random_correlator(name: str, rng: random.Random):
    from .expr import FREE_NAMES, Insertion, Level, Lin

    def free(i, k):
        return Insertion(Idx("f", FREE_NAMES[i]), Level(Lin(k)))

    if name in ("trr0", "trr0-corrupt"):
        # keep the level sum near the dimension so most values are nonzero
        n = rng.randint(3, 4)
        ks = [0] * n
        for _ in range(rng.randint(1, n - 2)):
            ks[rng.randrange(n)] += 1
        return Correlator(0, tuple(free(i, k) for i, k in enumerate(ks)))
    if name in ("trr1", "trr1-corrupt"):
        n = rng.randint(1, 3)
        ks = [rng.randint(0, 2) for _ in range(n)]
        ks[rng.randrange(n)] = rng.randint(1, 3)
        return Correlator(1, tuple(free(i, k) for i, k in enumerate(ks)))
    from .expr import Insertion as Ins
    g = rng.randint(0, 2)
    n = rng.randint(2 if g == 0 else 0, 3)
    unit = Ins(UNIT, Level(Lin(0 if name == "string" else 1)))
    return Correlator(g, (unit,) + tuple(free(i, rng.randint(0, 2))
                                         for i in range(n)))


def validate_rule(rule, trials: int = 100, rank: int = 1,
                  regime: str = "descendent", seed: int = 0, order: int = 6,
                  height: int = 4, table: PointTheory | None = None
                  ) -> RuleReport:
    """Compare both sides of ``rule`` on random correlators and jets."""
    from .rewrite import _pieces_expr
    rng = random.Random(seed)
    rep = RuleReport(rule.name, trials, regime, rank)
    for _ in range(trials):
        for _attempt in range(50):
            c = _random_correlator(rule.name, rng)
            pieces = rule.pieces(c)
            if pieces is not None:
                break
        else:
            continue
        p = random_jet(rank, regime, order, height, rng)
        # mixed directions vanish in a diagonal theory; mostly share one
        mu = rng.randrange(rank)
        binds = {x.idx.name: (mu if rng.random() < 0.75 else
                              rng.randrange(rank), 0)
                 for x in c.insertions if x.idx.kind == "f"}
        ev = Evaluator(p, table)
        lhs = ev.evaluate(Expression((Term(Fraction(1), (c,)),)), binds)
        rhs = ev.evaluate(_pieces_expr(pieces), binds)
        if _trim(lhs) != _trim(rhs):
            rep.counterexamples.append((c, p, binds))
    return rep


def corrupted_trr1():
    """Genus one TRR with ``1/23`` in place of ``1/24`` (a negative control)."""
    from .rewrite import Piece, Rule, trr1_pieces

    def pieces(c):
        out = trr1_pieces(c)
        if out is None:
            return None
        return [Piece(Fraction(1, 23), p.factors, p.atoms)
                if p.coeff == Fraction(1, 24) else p for p in out]

    return Rule("trr1-corrupt", pieces)


# ------------------------------------------------ flow derivative route

def flow_derivative(op, c: Correlator, point: JetPoint, bindings: dict,
                    table: PointTheory | None = None) -> Poly:
    """First order change of ``<S>_g`` along the flow of a quantized
    quadratic hamiltonian, from ``tau^-1 O tau`` with ``tau = exp(sum
    hbar^(g-1) F_g)``.  Independent of the symbolic derivation code."""
    ev = Evaluator(point, table)
    order = point.order
    g = c.genus
    S = []
    for x in c.insertions:
        mu, k = bindings[x.idx.name]
        S.append((mu, x.level.lin.c + (k if x.level.floating else 0)))

    def corr(gg, ins):
        if gg < 0 or not ins:
            return (Fraction(0),)
        mus = {m for m, _ in ins}
        if len(mus) > 1:
            return (Fraction(0),)
        return ev.correlator(gg, tuple(k for _, k in ins), mus.pop())

    def q(a):
        return point.q(a[0], a[1])

    total: Poly = (Fraction(0),)
    for (a, b), coef in op.first:       # coef * q_b d/dq_a
        v = _pmul(q(b), corr(g, [a] + S), order)
        for i, s in enumerate(S):
            if s == b:
                v = _padd(v, corr(g, [a] + S[:i] + S[i + 1:]))
        total = _padd(total, _pscale(v, coef))
    n = len(S)
    for (a, b), coef in op.second:      # hbar * coef * d/dq_a d/dq_b
        v = corr(g - 1, [a, b] + S)
        for g1 in range(g + 1):
            for mask in range(1 << n):
                s1 = [S[i] for i in range(n) if mask >> i & 1]
                s2 = [S[i] for i in range(n) if not mask >> i & 1]
                v = _padd(v, _pmul(corr(g1, [a] + s1), corr(g - g1, [b] + s2),
                                   order))
        total = _padd(total, _pscale(v, coef))
    if g == 0:
        for (a, b), coef in op.mult:    # coef * q_a q_b / hbar
            if n == 0:
                v = _pmul(q(a), q(b), order)
            elif n == 1:
                v = _padd(q(b) if S[0] == a else (Fraction(0),),
                          q(a) if S[0] == b else (Fraction(0),))
            elif n == 2:
                v = (Fraction(int(S[0] == a and S[1] == b) +
                              int(S[0] == b and S[1] == a)),)
            else:
                v = (Fraction(0),)
            total = _padd(total, _pscale(v, coef))
    return _trim(total)


def mumford_forced_genus2(k: int, point: JetPoint | None = None,
                          table: PointTheory | None = None) -> Fraction:
    """``<tau_k>_2`` at ``t = 0`` solved from the genus two equation, whose
    remaining terms only involve genus zero and genus one numbers there."""
    from .dsl import load_builtin
    if k < 2:
        raise ValueError("the solitary genus two term carries level >= 2")
    E = load_builtin("mumford").lhs
    head = [t for t in E.terms if len(t.factors) == 1 and
            t.factors[0].genus == 2]
    rest = Expression(tuple(t for t in E.terms if t not in head))
    point = point or JetPoint(1, (), "descendent", order=k, height=0)
    val = Evaluator(point, table).evaluate(rest, {"x": (0, k - 2)})
    return val[0] / -head[0].coeff


# ---------------------------------------------------------------- battery

def _check(name, trials, failures, example=None) -> dict:
    d = {"name": name, "trials": trials, "failures": failures,
         "status": "passed" if failures == 0 else "failed"}
    if example is not None:
        d["counterexample"] = example
    return d


def mumford_battery(trials: int = 100, rank: int = 1, seed: int = 0,
                    order: int = 8, E=None, table=None) -> tuple[int, str]:
    """Evaluate Mumford's equation on random descendent jets; returns the
    number of nonzero values and the first offending jet."""
    from .dsl import load_builtin
    E = E if E is not None else load_builtin("mumford")
    rng = random.Random(seed)
    bad, first = 0, None
    for _ in range(trials):
        p = random_jet(rank, "descendent", order, 4, rng)
        b = {"x": (rng.randrange(rank), rng.randint(0, 2))}
        if any(Evaluator(p, table).evaluate(E, b)):
            bad += 1
            first = first or f"{b} {dict(p.values)}"
    return bad, first


def run_battery(rank: int = 1, gmax: int = 4, trials: int = 100,
                seed: int = 7, order: int = 8, table=None) -> dict:
    """Everything ``gwtaut oracle`` checks, as a JSON-ready report."""
    from .rewrite import RULES
    table = table or default_table()
    checks = []
    table.build(6)
    for name, rule in RULES.items():
        for regime in ("descendent", "ancestor"):
            if rule.regime not in ("both", regime):
                continue
            rep = validate_rule(rule, trials, rank, regime, seed,
                                order=min(order, 6), table=table)
            ex = None
            if rep.counterexamples:
                c, p, b = rep.counterexamples[0]
                ex = f"{c} {b} {dict(p.values)}"
            checks.append(_check(f"rule {name} ({regime})", trials,
                                 len(rep.counterexamples), ex))
    nbad, first = mumford_battery(trials, rank, seed, order, table=table)
    checks.append(_check("mumford", trials, nbad, first))
    if gmax >= 2:
        forced = mumford_forced_genus2(4, table=table)
        direct = table.value(2, (4,))
        checks.append(_check("genus two one-point paths", 1,
                             int(forced != direct),
                             None if forced == direct else
                             f"{forced} != {direct}"))
    # last, so entries filled in by the evaluations above are covered too
    bad = check_consistency(table)
    checks.append(_check("table consistency", len(table.table), len(bad),
                         str(bad[0]) if bad else None))
    ok = all(c["status"] == "passed" for c in checks)
    return {"command": "oracle", "rank": rank, "gmax": gmax, "seed": seed,
            "checks": checks, "status": "passed" if ok else "failed"}
