"""Random well-formed terms, produced as DSL source."""
from __future__ import annotations

import random
from fractions import Fraction

from hypothesis import strategies as st

DUMMIES = ("m", "n", "p", "a")


def _level(rng: random.Random, free: bool) -> str:
    k = rng.randint(0, 2)
    s = f"_{k}" if (k or free) else ""
    if free and rng.random() < 0.5:
        s = f"_{k}+"
    return s


def random_term(rng: random.Random, frees=("x",), max_dummies: int = 3,
                matrix: bool | None = None) -> str:
    """Source of one term: each dummy twice, each free index once."""
    nd = rng.randint(0, max_dummies)
    slots = [(f, True) for f in frees]
    for d in DUMMIES[:nd]:
        slots += [(d, False), (d, False)]
    rng.shuffle(slots)
    parts = []
    if matrix is None:
        matrix = rng.random() < 0.4
    if matrix and len(slots) >= 3 and not slots[0][1] and not slots[1][1]:
        (i, _), (j, _) = slots[0], slots[1]
        slots = slots[2:]
        parts.append(f"r[{rng.randint(1, 2)}]({i},{j})")
    if not slots:
        slots = [("x", True)]
    nf = rng.randint(1, min(3, len(slots)))
    cuts = sorted(rng.sample(range(1, len(slots)), nf - 1)) if nf > 1 else []
    bounds = [0] + cuts + [len(slots)]
    for a, b in zip(bounds, bounds[1:]):
        ins = " ".join(name + _level(rng, free) for name, free in slots[a:b])
        g = rng.randint(0, 2)
        parts.append(f"<{ins}>" + (f"_{g}" if g else ""))
    num = rng.randint(1, 30) * rng.choice((1, -1))
    den = rng.randint(1, 30)
    c = Fraction(num, den)
    return f"{c} " + " ".join(parts)


def random_source(rng: random.Random, nterms: int | None = None) -> str:
    n = nterms or rng.randint(1, 4)
    terms = [random_term(rng) for _ in range(n)]
    out = terms[0]
    for t in terms[1:]:
        out += (" - " + t[1:]) if t.startswith("-") else (" + " + t)
    return out + " = 0"


seeds = st.integers(min_value=0, max_value=2**32 - 1)


ALPHABET = "<>_+-/=[](),{}^ xyzmnl0123456789rq#"


def mutate(rng: random.Random, src: str) -> str:
    """Corrupt a source with a few random edits."""
    s = list(src)
    for _ in range(rng.randint(1, 4)):
        op = rng.random()
        k = rng.randrange(len(s) + 1)
        if op < 0.4 or not s:
            s.insert(k, rng.choice(ALPHABET))
        elif op < 0.7:
            del s[min(k, len(s) - 1)]
        else:
            s[min(k, len(s) - 1)] = rng.choice(ALPHABET)
    return "".join(s)
