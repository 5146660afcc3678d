"""OpenQASM 2.0 subset: parsing with positioned errors and canonical emission."""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

from .core import Circuit, Gate, GateKind
from .errors import QasmSyntaxError, UndeclaredRegister, UnsupportedGate, ValidationError

_GATES = {k.value: k for k in GateKind}
_GATES["u"] = GateKind.U3
_FUNCS = {"sin": math.sin, "cos": math.cos, "tan": math.tan, "exp": math.exp, "ln": math.log, "sqrt": math.sqrt}

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>//[^\n]*)
  | (?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<id>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<str>"[^"\n]*")
  | (?P<arrow>->)
  | (?P<sym>[;,\[\]()+\-*/^{}])
    """,
    re.VERBOSE,
)


@dataclass
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    toks = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise QasmSyntaxError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            toks.append(Token(kind, m.group(), line, pos - line_start + 1))
        pos = m.end()
    toks.append(Token("eof", "", line, pos - line_start + 1))
    return toks


@dataclass
class QasmDocument:
    version: str = "2.0"
    qregs: dict[str, int] = field(default_factory=dict)
    cregs: dict[str, int] = field(default_factory=dict)
    statements: list = field(default_factory=list)


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0
        self.doc = QasmDocument()
        self.gates: list[Gate] = []
        self.measurements: list[tuple[int, int]] = []

    # token helpers
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def error(self, msg: str, tok: Token | None = None, cls=QasmSyntaxError):
        tok = tok or self.tok
        return cls(msg, tok.line, tok.col)

    def advance(self) -> Token:
        t = self.tok
        if t.kind != "eof":
            self.i += 1
        return t

    def expect(self, text: str) -> Token:
        if self.tok.text != text or self.tok.kind == "str":
            found = self.tok.text or "end of input"
            raise self.error(f"expected {text!r}, found {found!r}")
        return self.advance()

    def expect_kind(self, kind: str, what: str) -> Token:
        if self.tok.kind != kind:
            found = self.tok.text or "end of input"
            raise self.error(f"expected {what}, found {found!r}")
        return self.advance()

    # expressions
    def expr(self) -> float:
        v = self.term()
        while self.tok.text in ("+", "-") and self.tok.kind == "sym":
            op = self.advance().text
            rhs = self.term()
            v = v + rhs if op == "+" else v - rhs
        return v

    def term(self) -> float:
        v = self.unary()
        while self.tok.text in ("*", "/") and self.tok.kind == "sym":
            op_tok = self.advance()
            rhs = self.unary()
            if op_tok.text == "*":
                v = v * rhs
            else:
                if rhs == 0:
                    raise self.error("division by zero", op_tok)
                v = v / rhs
        return v

    def unary(self) -> float:
        if self.tok.kind == "sym" and self.tok.text == "-":
            self.advance()
            return -self.unary()
        if self.tok.kind == "sym" and self.tok.text == "+":
            self.advance()
            return self.unary()
        base = self.atom()
        if self.tok.kind == "sym" and self.tok.text == "^":
            op_tok = self.advance()
            exp = self.unary()
            try:
                return float(base**exp)
            except (OverflowError, ZeroDivisionError, TypeError):
                raise self.error("invalid power", op_tok) from None
        return base

    def atom(self) -> float:
        t = self.tok
        if t.kind == "num":
            self.advance()
            return float(t.text)
        if t.kind == "id" and t.text == "pi":
            self.advance()
            return math.pi
        if t.kind == "id" and t.text in _FUNCS:
            self.advance()
            self.expect("(")
            arg = self.expr()
            self.expect(")")
            try:
                return _FUNCS[t.text](arg)
            except (ValueError, OverflowError):
                raise self.error(f"invalid argument to {t.text}", t) from None
        if t.kind == "sym" and t.text == "(":
            self.advance()
            v = self.expr()
            self.expect(")")
            return v
        found = t.text or "end of input"
        raise self.error(f"expected expression, found {found!r}")

    # operands
    def operand(self, allow_whole: bool, regs: dict[str, int], what: str):
        name_tok = self.expect_kind("id", f"{what} register")
        if name_tok.text not in regs:
            raise self.error(f"undeclared register {name_tok.text!r}", name_tok, UndeclaredRegister)
        size = regs[name_tok.text]
        if self.tok.text == "[" and self.tok.kind == "sym":
            self.advance()
            idx_tok = self.expect_kind("num", "integer index")
            if not idx_tok.text.isdigit():
                raise self.error("index must be an integer", idx_tok)
            idx = int(idx_tok.text)
            if idx >= size:
                raise self.error(f"index {idx} out of range for {name_tok.text}[{size}]", idx_tok)
            self.expect("]")
            return [idx], name_tok
        if not allow_whole:
            raise self.error("expected indexed operand", name_tok)
        return list(range(size)), name_tok

    # statements
    def parse(self) -> Circuit:
        if self.tok.kind == "id" and self.tok.text == "OPENQASM":
            self.advance()
            ver = self.expect_kind("num", "version number")
            if not ver.text.startswith("2"):
                raise self.error(f"unsupported OpenQASM version {ver.text}", ver)
            self.doc.version = ver.text
            self.expect(";")
        while self.tok.kind != "eof":
            self.statement()
        if not self.doc.qregs:
            raise self.error("no quantum register declared")
        n = next(iter(self.doc.qregs.values()))
        try:
            return Circuit(n, tuple(self.gates), "", tuple(self.measurements))
        except ValidationError as e:  # pragma: no cover - guarded above
            raise self.error(str(e)) from None

    def statement(self):
        t = self.tok
        if t.kind != "id":
            raise self.error(f"expected statement, found {t.text or 'end of input'!r}")
        word = t.text
        if word == "include":
            self.advance()
            self.expect_kind("str", "file name string")
            self.expect(";")
            return
        if word in ("qreg", "creg"):
            self.advance()
            name = self.expect_kind("id", "register name")
            self.expect("[")
            size_tok = self.expect_kind("num", "register size")
            if not size_tok.text.isdigit() or int(size_tok.text) < 1:
                raise self.error("register size must be a positive integer", size_tok)
            self.expect("]")
            self.expect(";")
            regs = self.doc.qregs if word == "qreg" else self.doc.cregs
            if name.text in self.doc.qregs or name.text in self.doc.cregs:
                raise self.error(f"register {name.text!r} redeclared", name)
            if word == "qreg" and self.doc.qregs:
                raise self.error("only a single quantum register is supported", t)
            regs[name.text] = int(size_tok.text)
            return
        if word == "barrier":
            self.advance()
            self.operand(True, self.doc.qregs, "quantum")
            while self.tok.text == "," and self.tok.kind == "sym":
                self.advance()
                self.operand(True, self.doc.qregs, "quantum")
            self.expect(";")
            return
        if word == "measure":
            self.advance()
            qs, _ = self.operand(True, self.doc.qregs, "quantum")
            self.expect_kind("arrow", "'->'")
            cs, ctok = self.operand(True, self.doc.cregs, "classical")
            if len(qs) != len(cs):
                raise self.error("measure operands differ in size", ctok)
            self.expect(";")
            self.measurements += list(zip(qs, cs))
            return
        if word in ("gate", "opaque", "if", "reset"):
            raise self.error(f"'{word}' statements are not supported", t, UnsupportedGate)
        self.gate_statement()

    def gate_statement(self):
        name_tok = self.advance()
        kind = _GATES.get(name_tok.text)
        if kind is None:
            raise self.error(f"unsupported gate {name_tok.text!r}", name_tok, UnsupportedGate)
        if not self.doc.qregs:
            raise self.error("gate applied before any qreg declaration", name_tok, UndeclaredRegister)
        params = []
        if self.tok.kind == "sym" and self.tok.text == "(":
            self.advance()
            if not (self.tok.kind == "sym" and self.tok.text == ")"):
                params.append(self.expr())
                while self.tok.kind == "sym" and self.tok.text == ",":
                    self.advance()
                    params.append(self.expr())
            self.expect(")")
        if len(params) != kind.num_params:
            raise self.error(f"{name_tok.text} takes {kind.num_params} parameters, got {len(params)}", name_tok)
        if not all(math.isfinite(p) for p in params):
            raise self.error("non-finite gate parameter", name_tok)
        operands = []
        whole = kind.arity == 1
        qs, _ = self.operand(whole, self.doc.qregs, "quantum")
        operands.append(qs)
        while self.tok.kind == "sym" and self.tok.text == ",":
            self.advance()
            qs, _ = self.operand(False, self.doc.qregs, "quantum")
            operands.append(qs)
        self.expect(";")
        if len(operands) != kind.arity:
            raise self.error(f"{name_tok.text} acts on {kind.arity} qubits, got {len(operands)}", name_tok)
        if kind.arity == 1:
            for q in operands[0]:
                self.gates.append(Gate(kind, (q,), tuple(params)))
            return
        qubits = tuple(o[0] for o in operands)
        if len(set(qubits)) != len(qubits):
            raise self.error(f"repeated qubit in {name_tok.text}", name_tok)
        self.gates.append(Gate(kind, qubits, tuple(params)))


def parse_qasm(text: str) -> Circuit:
    parser = _Parser(text)
    try:
        return parser.parse()
    except RecursionError:
        tok = parser.tok
        raise QasmSyntaxError("expression nested too deeply", tok.line, tok.col) from None


def _eval_angle(text: str) -> float:
    p = _Parser(text)
    v = p.expr()
    return v


def format_angle(theta: float, max_den: int = 64) -> str:
    if theta == 0:
        return "0"
    ratio = theta / math.pi
    for q in range(1, max_den + 1):
        p = round(ratio * q)
        if p == 0 or math.gcd(p, q) != 1 or abs(ratio * q - p) > 1e-9:
            continue
        sign = "-" if p < 0 else ""
        num = "pi" if abs(p) == 1 else f"{abs(p)}*pi"
        cand = f"{sign}{num}" if q == 1 else f"{sign}{num}/{q}"
        if _eval_angle(cand) == theta:
            return cand
        break
    return f"{theta:.17g}"


def emit_qasm(c: Circuit) -> str:
    lines = ["OPENQASM 2.0;", 'include "qelib1.inc";', f"qreg q[{c.num_qubits}];"]
    if c.measurements:
        ncl = max(b for _, b in c.measurements) + 1
        lines.append(f"creg c[{ncl}];")
    for g in c.gates:
        name = g.kind.value
        args = ",".join(f"q[{q}]" for q in g.qubits)
        if g.params:
            ps = ",".join(format_angle(p) for p in g.params)
            lines.append(f"{name}({ps}) {args};")
        else:
            lines.append(f"{name} {args};")
    for q, b in c.measurements:
        lines.append(f"measure q[{q}] -> c[{b}];")
    return "\n".join(lines) + "\n"
