"""Random well-formed plans, as hypothesis strategies and as a seeded generator."""

from __future__ import annotations

import random
import string

from hypothesis import strategies as st

from agentnav.workflow.grammar import (
    KEYWORDS,
    Answer,
    Call,
    CellLit,
    Cond,
    If,
    MemRef,
    PlanStep,
    While,
)

_IDENT_START = string.ascii_letters + "_"
_IDENT_REST = _IDENT_START + string.digits

idents = st.text(_IDENT_START, min_size=1, max_size=1).flatmap(
    lambda h: st.text(_IDENT_REST, max_size=10).map(lambda t: h + t)
).filter(lambda s: s not in KEYWORDS)

texts = st.text(
    st.characters(blacklist_categories=("Cs",), blacklist_characters="\x00"),
    max_size=20,
)

args = st.one_of(
    texts,
    st.integers(-(10**6), 10**6),
    st.floats(allow_nan=False, allow_infinity=False, width=64),
    st.booleans(),
    st.builds(CellLit, st.integers(0, 99), st.integers(0, 99)),
    st.builds(MemRef, idents),
    st.lists(texts, max_size=3).map(tuple),
)

calls = st.builds(Call, idents, st.lists(args, max_size=3).map(tuple))
conds = st.builds(Cond, calls, st.booleans())


def _stmts(depth: int):
    leaf = st.one_of(calls, st.builds(Answer, texts))
    if depth >= 3:
        return st.lists(leaf, min_size=1, max_size=3).map(tuple)
    inner = _stmts(depth + 1)
    bound = st.integers(1, 50) if depth == 0 else st.integers(1, 4)
    compound = st.one_of(
        st.builds(If, conds, inner, st.one_of(st.just(()), inner)),
        st.builds(While, conds, bound, inner),
    )
    return st.lists(st.one_of(leaf, leaf, compound), min_size=1, max_size=3).map(tuple)


@st.composite
def plans(draw, max_steps=4):
    n = draw(st.integers(1, max_steps))
    ids = draw(st.lists(st.integers(0, 999), min_size=n, max_size=n, unique=True))
    return [PlanStep(i, draw(texts), draw(_stmts(0))) for i in ids]


# The same shape without hypothesis, for bulk loops with a fixed seed.


def _r_ident(rng: random.Random) -> str:
    while True:
        s = rng.choice(_IDENT_START) + "".join(rng.choice(_IDENT_REST) for _ in range(rng.randint(0, 8)))
        if s not in KEYWORDS:
            return s


def _r_text(rng: random.Random) -> str:
    pool = string.printable + "éü→ß☃"
    return "".join(rng.choice(pool) for _ in range(rng.randint(0, 12)))


def _r_arg(rng: random.Random):
    k = rng.randrange(7)
    if k == 0:
        return _r_text(rng)
    if k == 1:
        return rng.randint(-1000, 1000)
    if k == 2:
        return rng.uniform(-1e3, 1e3)
    if k == 3:
        return rng.random() < 0.5
    if k == 4:
        return CellLit(rng.randint(0, 40), rng.randint(0, 40))
    if k == 5:
        return MemRef(_r_ident(rng))
    return tuple(_r_text(rng) for _ in range(rng.randint(0, 3)))


def _r_call(rng: random.Random) -> Call:
    return Call(_r_ident(rng), tuple(_r_arg(rng) for _ in range(rng.randint(0, 3))))


def _r_stmts(rng: random.Random, depth: int) -> tuple:
    out = []
    for _ in range(rng.randint(1, 3)):
        k = rng.randrange(5) if depth < 3 else rng.randrange(2)
        if k == 0:
            out.append(_r_call(rng))
        elif k == 1:
            out.append(Answer(_r_text(rng)) if rng.random() < 0.3 else _r_call(rng))
        elif k == 2:
            out.append(_r_call(rng))
        elif k == 3:
            orelse = _r_stmts(rng, depth + 1) if rng.random() < 0.5 else ()
            out.append(If(Cond(_r_call(rng), rng.random() < 0.3), _r_stmts(rng, depth + 1), orelse))
        else:
            bound = rng.randint(1, 50) if depth == 0 else rng.randint(1, 4)
            out.append(While(Cond(_r_call(rng), rng.random() < 0.3), bound, _r_stmts(rng, depth + 1)))
    return tuple(out)


def random_plan(rng: random.Random) -> list[PlanStep]:
    ids = rng.sample(range(1000), rng.randint(1, 4))
    return [PlanStep(i, _r_text(rng), _r_stmts(rng, 0)) for i in ids]
