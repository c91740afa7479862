"""Plan statement language: lexer, recursive-descent parser, serializer.

Grammar::

    plan   := step+
    step   := "step" INT STRING ":" stmts
    stmts  := stmt+
    stmt   := call
            | "if" cond "then" stmts ["else" stmts] "end"
            | "while" cond "max" INT "do" stmts "end"
            | "answer" "(" STRING ")"
    cond   := ["not"] call
    call   := IDENT "(" [arg ("," arg)*] ")"
    arg    := STRING | NUMBER | "true" | "false" | "(" INT "," INT ")"
            | "[" [STRING ("," STRING)*] "]" | "mem" "." IDENT

``#`` starts a comment running to the end of the line.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Any, Union

MAX_LOOP_BOUND = 50
MAX_DEPTH = 3
STATIC_LIMIT = 100_000
KEYWORDS = frozenset(
    {"step", "if", "then", "else", "end", "while", "max", "do", "answer", "not", "true", "false"}
)


@dataclass(frozen=True)
class MemRef:
    name: str


@dataclass(frozen=True)
class CellLit:
    row: int
    col: int


Arg = Union[str, int, float, bool, tuple, CellLit, MemRef]


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple = ()


@dataclass(frozen=True)
class Cond:
    call: Call
    negated: bool = False


@dataclass(frozen=True)
class If:
    cond: Cond
    then: tuple
    orelse: tuple = ()


@dataclass(frozen=True)
class While:
    cond: Cond
    bound: int
    body: tuple


@dataclass(frozen=True)
class Answer:
    choice: str


Stmt = Union[Call, If, While, Answer]


@dataclass(frozen=True)
class PlanStep:
    id: int
    title: str
    body: tuple


@dataclass(frozen=True)
class Diagnostic:
    line: int
    col: int
    message: str
    expected: tuple[str, ...] = ()

    def __str__(self) -> str:
        exp = f" (expected {', '.join(self.expected)})" if self.expected else ""
        return f"line {self.line}, column {self.col}: {self.message}{exp}"


@dataclass
class ParseResult:
    steps: list[PlanStep] = field(default_factory=list)
    diagnostics: list[Diagnostic] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.diagnostics


@dataclass(frozen=True)
class _Tok:
    kind: str  # STRING INT FLOAT IDENT KW PUNCT EOF
    value: Any
    line: int
    col: int


class _SyntaxError(Exception):
    def __init__(self, diag: Diagnostic):
        super().__init__(str(diag))
        self.diag = diag


_NUMBER = re.compile(r"-?\d+(\.\d+)?([eE][+-]?\d+)?")
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_ESCAPES = {'"': '"', "\\": "\\", "n": "\n", "t": "\t", "r": "\r"}


def _lex(text: str) -> list[_Tok]:
    toks: list[_Tok] = []
    i, line, col = 0, 1, 1
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            i, line, col = i + 1, line + 1, 1
            continue
        if ch in " \t\r":
            i, col = i + 1, col + 1
            continue
        if ch == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if ch == '"':
            j, buf, c0 = i + 1, [], col
            while True:
                if j >= n or text[j] == "\n":
                    raise _SyntaxError(Diagnostic(line, c0, "unterminated string", ('"',)))
                cj = text[j]
                if cj == '"':
                    break
                if cj == "\\":
                    if j + 1 >= n or text[j + 1] not in _ESCAPES:
                        raise _SyntaxError(Diagnostic(line, col + (j - i), "invalid escape sequence"))
                    buf.append(_ESCAPES[text[j + 1]])
                    j += 2
                    continue
                buf.append(cj)
                j += 1
            toks.append(_Tok("STRING", "".join(buf), line, c0))
            col += j + 1 - i
            i = j + 1
            continue
        m = _NUMBER.match(text, i)
        if m and (ch != "-" or (i + 1 < n and text[i + 1].isdigit())):
            s = m.group()
            if m.group(1) or m.group(2):
                toks.append(_Tok("FLOAT", float(s), line, col))
            else:
                toks.append(_Tok("INT", int(s), line, col))
            col += len(s)
            i = m.end()
            continue
        m = _IDENT.match(text, i)
        if m:
            s = m.group()
            toks.append(_Tok("KW" if s in KEYWORDS else "IDENT", s, line, col))
            col += len(s)
            i = m.end()
            continue
        if ch in "(),:[].":
            toks.append(_Tok("PUNCT", ch, line, col))
            i, col = i + 1, col + 1
            continue
        raise _SyntaxError(Diagnostic(line, col, f"unexpected character {ch!r}"))
    toks.append(_Tok("EOF", None, line, col))
    return toks


_STMT_START = ("IDENT", "if", "while", "answer")


class _Parser:
    def __init__(self, text: str):
        self.toks = _lex(text)
        self.pos = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.pos]

    def _fail(self, message: str, expected: tuple[str, ...] = ()) -> None:
        t = self.tok
        raise _SyntaxError(Diagnostic(t.line, t.col, message, expected))

    def _describe(self, t: _Tok) -> str:
        if t.kind == "EOF":
            return "end of input"
        return repr(t.value) if t.kind != "STRING" else "string"

    def at(self, kind: str, value: Any = None) -> bool:
        t = self.tok
        return t.kind == kind and (value is None or t.value == value)

    def at_kw(self, *words: str) -> bool:
        return self.tok.kind == "KW" and self.tok.value in words

    def expect(self, kind: str, value: Any = None) -> _Tok:
        if not self.at(kind, value):
            label = value if value is not None else kind
            self._fail(f"unexpected {self._describe(self.tok)}", (str(label),))
        t = self.tok
        self.pos += 1
        return t

    def plan(self) -> list[PlanStep]:
        steps = []
        if not self.at_kw("step"):
            self._fail(f"unexpected {self._describe(self.tok)}", ("step",))
        while self.at_kw("step"):
            steps.append(self.step())
        if not self.at("EOF"):
            self._fail(f"unexpected {self._describe(self.tok)}", ("step", "end of input") + _STMT_START)
        return steps

    def step(self) -> PlanStep:
        self.expect("KW", "step")
        sid = self.expect("INT").value
        title = self.expect("STRING").value
        self.expect("PUNCT", ":")
        body = self.stmts(("step", "EOF"), depth=0)
        return PlanStep(sid, title, body)

    def _at_terminator(self, terms: tuple[str, ...]) -> bool:
        return ("EOF" in terms and self.at("EOF")) or (self.tok.kind == "KW" and self.tok.value in terms)

    def stmts(self, terms: tuple[str, ...], depth: int) -> tuple:
        out = []
        while not self._at_terminator(terms):
            out.append(self.stmt(depth, terms))
        if not out:
            self._fail(f"unexpected {self._describe(self.tok)}; a statement is required", _STMT_START)
        return tuple(out)

    def stmt(self, depth: int, terms: tuple[str, ...]) -> Stmt:
        t = self.tok
        if t.kind == "IDENT":
            return self.call()
        if self.at_kw("answer"):
            self.pos += 1
            self.expect("PUNCT", "(")
            choice = self.expect("STRING").value
            self.expect("PUNCT", ")")
            return Answer(choice)
        if self.at_kw("if", "while"):
            if depth >= MAX_DEPTH:
                self._fail(f"nesting depth exceeds {MAX_DEPTH}")
            return self.if_stmt(depth + 1) if t.value == "if" else self.while_stmt(depth + 1)
        self._fail(f"unexpected {self._describe(t)}", _STMT_START + tuple(terms))
        raise AssertionError  # unreachable

    def cond(self) -> Cond:
        neg = False
        if self.at_kw("not"):
            neg = True
            self.pos += 1
        if not self.at("IDENT"):
            self._fail(f"unexpected {self._describe(self.tok)}; condition must be a call", ("IDENT",))
        return Cond(self.call(), neg)

    def if_stmt(self, depth: int) -> If:
        self.expect("KW", "if")
        cond = self.cond()
        self.expect("KW", "then")
        then = self.stmts(("else", "end"), depth)
        orelse: tuple = ()
        if self.at_kw("else"):
            self.pos += 1
            orelse = self.stmts(("end",), depth)
        self.expect("KW", "end")
        return If(cond, then, orelse)

    def while_stmt(self, depth: int) -> While:
        self.expect("KW", "while")
        cond = self.cond()
        if not self.at_kw("max"):
            self._fail("loop bound required", ("max",))
        self.pos += 1
        bt = self.tok
        bound = self.expect("INT").value
        if not 1 <= bound <= MAX_LOOP_BOUND:
            raise _SyntaxError(Diagnostic(bt.line, bt.col, f"loop bound must be in 1..{MAX_LOOP_BOUND}"))
        self.expect("KW", "do")
        body = self.stmts(("end",), depth)
        self.expect("KW", "end")
        return While(cond, bound, body)

    def call(self) -> Call:
        name = self.expect("IDENT").value
        self.expect("PUNCT", "(")
        args = []
        if not self.at("PUNCT", ")"):
            args.append(self.arg())
            while self.at("PUNCT", ","):
                self.pos += 1
                args.append(self.arg())
        self.expect("PUNCT", ")")
        return Call(name, tuple(args))

    def arg(self) -> Arg:
        t = self.tok
        if t.kind in ("STRING", "INT", "FLOAT"):
            self.pos += 1
            return t.value
        if self.at_kw("true", "false"):
            self.pos += 1
            return t.value == "true"
        if self.at("PUNCT", "("):
            self.pos += 1
            r = self.expect("INT").value
            self.expect("PUNCT", ",")
            c = self.expect("INT").value
            self.expect("PUNCT", ")")
            return CellLit(r, c)
        if self.at("PUNCT", "["):
            self.pos += 1
            items = []
            if not self.at("PUNCT", "]"):
                items.append(self.expect("STRING").value)
                while self.at("PUNCT", ","):
                    self.pos += 1
                    items.append(self.expect("STRING").value)
            self.expect("PUNCT", "]")
            return tuple(items)
        if t.kind == "IDENT" and t.value == "mem":
            self.pos += 1
            self.expect("PUNCT", ".")
            return MemRef(self.expect("IDENT").value)
        self._fail(f"unexpected {self._describe(t)}", ("STRING", "NUMBER", "true", "false", "(", "[", "mem"))
        raise AssertionError  # unreachable


def static_cost(stmts: tuple) -> int:
    """Upper bound on statement executions for a statement sequence."""
    total = 0
    for s in stmts:
        if isinstance(s, (Call, Answer)):
            total += 1
        elif isinstance(s, If):
            total += 1 + max(static_cost(s.then), static_cost(s.orelse))
        elif isinstance(s, While):
            total += s.bound * (1 + static_cost(s.body)) + 1
    return total


def parse_plan(text: str) -> ParseResult:
    """Parse a plan; failures come back as diagnostics, never as exceptions."""
    try:
        steps = _Parser(text).plan()
    except _SyntaxError as exc:
        return ParseResult([], [exc.diag])
    except RecursionError:
        return ParseResult([], [Diagnostic(1, 1, "input too deeply nested")])
    diags = []
    seen: set[int] = set()
    for st in steps:
        if st.id in seen:
            diags.append(Diagnostic(0, 0, f"duplicate step id {st.id}"))
        seen.add(st.id)
        if static_cost(st.body) > STATIC_LIMIT:
            diags.append(Diagnostic(0, 0, f"step {st.id} may execute more than {STATIC_LIMIT} statements"))
    return ParseResult(steps if not diags else [], diags)


def parse_statements(text: str) -> tuple[tuple, list[Diagnostic]]:
    """Parse a bare statement sequence (reasoning-function bodies)."""
    try:
        p = _Parser(text)
        body = p.stmts(("EOF",), depth=0)
        p.expect("EOF")
    except _SyntaxError as exc:
        return (), [exc.diag]
    if static_cost(body) > STATIC_LIMIT:
        return (), [Diagnostic(0, 0, f"body may execute more than {STATIC_LIMIT} statements")]
    return body, []


def parse_call(text: str) -> Call | None:
    """A single call statement, or None."""
    try:
        p = _Parser(text.strip())
        call = p.call()
        p.expect("EOF")
        return call
    except _SyntaxError:
        return None


def quote(s: str) -> str:
    out = s.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n").replace("\t", "\\t").replace("\r", "\\r")
    return f'"{out}"'


def format_arg(a: Arg) -> str:
    if isinstance(a, bool):
        return "true" if a else "false"
    if isinstance(a, str):
        return quote(a)
    if isinstance(a, int):
        return str(a)
    if isinstance(a, float):
        return repr(a)
    if isinstance(a, CellLit):
        return f"({a.row}, {a.col})"
    if isinstance(a, MemRef):
        return f"mem.{a.name}"
    if isinstance(a, tuple):
        return "[" + ", ".join(quote(x) for x in a) + "]"
    raise TypeError(f"cannot serialize argument {a!r}")


def format_call(c: Call) -> str:
    return f"{c.name}({', '.join(format_arg(a) for a in c.args)})"


def format_cond(c: Cond) -> str:
    return ("not " if c.negated else "") + format_call(c.call)


def _stmt_lines(s: Stmt, indent: int) -> list[str]:
    pad = " " * indent
    if isinstance(s, Call):
        return [pad + format_call(s)]
    if isinstance(s, Answer):
        return [f"{pad}answer({quote(s.choice)})"]
    if isinstance(s, If):
        lines = [f"{pad}if {format_cond(s.cond)} then"]
        lines += serialize_statements(s.then, indent + 2)
        if s.orelse:
            lines.append(f"{pad}else")
            lines += serialize_statements(s.orelse, indent + 2)
        lines.append(f"{pad}end")
        return lines
    if isinstance(s, While):
        lines = [f"{pad}while {format_cond(s.cond)} max {s.bound} do"]
        lines += serialize_statements(s.body, indent + 2)
        lines.append(f"{pad}end")
        return lines
    raise TypeError(f"not a statement: {s!r}")


def serialize_statements(stmts: tuple, indent: int = 0) -> list[str]:
    out: list[str] = []
    for s in stmts:
        out += _stmt_lines(s, indent)
    return out


def serialize_plan(steps: list[PlanStep]) -> str:
    blocks = []
    for st in steps:
        blocks.append("\n".join([f"step {st.id} {quote(st.title)}:"] + serialize_statements(st.body, 2)))
    return "\n".join(blocks) + "\n"


def iter_calls(stmts: tuple):
    """Every call in a statement tree, conditions included, in source order."""
    for s in stmts:
        if isinstance(s, Call):
            yield s
        elif isinstance(s, If):
            yield s.cond.call
            yield from iter_calls(s.then)
            yield from iter_calls(s.orelse)
        elif isinstance(s, While):
            yield s.cond.call
            yield from iter_calls(s.body)


def contains_answer(stmts: tuple) -> bool:
    for s in stmts:
        if isinstance(s, Answer):
            return True
        if isinstance(s, If) and (contains_answer(s.then) or contains_answer(s.orelse)):
            return True
        if isinstance(s, While) and contains_answer(s.body):
            return True
    return False
