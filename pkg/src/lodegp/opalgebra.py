"""Exact arithmetic foundation: rationals, sparse multivariate polynomials,
rational functions, and operator polynomials/matrices in the derivative D.

All values are immutable after construction and all operations are pure, so
everything here is safe to share across threads.  Coefficients are exact
rationals (fractions.Fraction); decimal literals in the input grammar are
parsed as exact decimal fractions, e.g. "9.81" becomes 981/100.
"""

from __future__ import annotations

from fractions import Fraction

from .errors import ParseError, ShapeMismatchError, SingularEvaluationError, UnboundSymbolError

# Arbitrary-precision rational scalar.  Fraction already guarantees the
# canonical form (reduced, positive denominator).
Rational = Fraction

_ZERO = Fraction(0)
_ONE = Fraction(1)


def _as_fraction(value) -> Fraction:
    """Exact conversion; floats convert via their exact binary value."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value)
    raise TypeError(f"cannot interpret {value!r} as an exact rational")


def _grlex_key(exps):
    return (sum(exps), exps)


class MultiPoly:
    """Sparse multivariate polynomial over the rationals.

    symbols: sorted tuple of symbol names.
    terms: dict mapping exponent tuples (one entry per symbol) to nonzero
    Fractions.  The zero polynomial has an empty dict.
    """

    __slots__ = ("symbols", "terms")

    def __init__(self, symbols=(), terms=None):
        symbols = tuple(symbols)
        if list(symbols) != sorted(symbols):
            raise ValueError("MultiPoly symbols must be sorted")
        self.symbols = symbols
        self.terms = {} if terms is None else terms

    @staticmethod
    def const(value, symbols=()) -> "MultiPoly":
        c = _as_fraction(value)
        symbols = tuple(sorted(symbols))
        if c == 0:
            return MultiPoly(symbols, {})
        return MultiPoly(symbols, {(0,) * len(symbols): c})

    @staticmethod
    def var(name, symbols=None) -> "MultiPoly":
        if symbols is None:
            symbols = (name,)
        symbols = tuple(sorted(symbols))
        if name not in symbols:
            raise ValueError(f"symbol {name!r} not among {symbols}")
        exps = tuple(1 if s == name else 0 for s in symbols)
        return MultiPoly(symbols, {exps: _ONE})

    def is_zero(self) -> bool:
        return not self.terms

    def is_const(self) -> bool:
        return all(not any(e) for e in self.terms)

    def const_value(self) -> Fraction:
        if not self.terms:
            return _ZERO
        if not self.is_const():
            raise ValueError("polynomial is not constant")
        return next(iter(self.terms.values()))

    def align(self, symbols) -> "MultiPoly":
        """Re-express over a superset symbol tuple (must be sorted)."""
        if symbols == self.symbols:
            return self
        pos = []
        for s in self.symbols:
            if s not in symbols:
                raise ValueError(f"cannot drop symbol {s!r}")
            pos.append(symbols.index(s))
        n = len(symbols)
        new_terms = {}
        for exps, c in self.terms.items():
            out = [0] * n
            for p, e in zip(pos, exps):
                out[p] = e
            new_terms[tuple(out)] = c
        return MultiPoly(tuple(symbols), new_terms)

    @staticmethod
    def _common(a: "MultiPoly", b: "MultiPoly"):
        if a.symbols == b.symbols:
            return a, b
        merged = tuple(sorted(set(a.symbols) | set(b.symbols)))
        return a.align(merged), b.align(merged)

    def __add__(self, other: "MultiPoly") -> "MultiPoly":
        a, b = MultiPoly._common(self, other)
        terms = dict(a.terms)
        for exps, c in b.terms.items():
            s = terms.get(exps, _ZERO) + c
            if s:
                terms[exps] = s
            else:
                terms.pop(exps, None)
        return MultiPoly(a.symbols, terms)

    def __neg__(self) -> "MultiPoly":
        return MultiPoly(self.symbols, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other: "MultiPoly") -> "MultiPoly":
        return self + (-other)

    def __mul__(self, other: "MultiPoly") -> "MultiPoly":
        a, b = MultiPoly._common(self, other)
        if not a.terms or not b.terms:
            return MultiPoly(a.symbols, {})
        terms = {}
        for e1, c1 in a.terms.items():
            for e2, c2 in b.terms.items():
                e = tuple(x + y for x, y in zip(e1, e2))
                s = terms.get(e, _ZERO) + c1 * c2
                if s:
                    terms[e] = s
                else:
                    terms.pop(e, None)
        return MultiPoly(a.symbols, terms)

    def scale(self, c) -> "MultiPoly":
        c = _as_fraction(c)
        if c == 0:
            return MultiPoly(self.symbols, {})
        return MultiPoly(self.symbols, {e: c * v for e, v in self.terms.items()})

    def __eq__(self, other) -> bool:
        if not isinstance(other, MultiPoly):
            return NotImplemented
        a, b = MultiPoly._common(self, other)
        return a.terms == b.terms

    def __hash__(self):
        return hash((self.symbols, frozenset(self.terms.items())))

    def leading(self):
        """(exponents, coefficient) of the graded-lex leading term."""
        if not self.terms:
            return None
        e = max(self.terms, key=_grlex_key)
        return e, self.terms[e]

    def content_exponents(self):
        """Componentwise minimum exponent vector over all terms."""
        if not self.terms:
            return (0,) * len(self.symbols)
        mins = None
        for exps in self.terms:
            if mins is None:
                mins = list(exps)
            else:
                mins = [min(m, e) for m, e in zip(mins, exps)]
        return tuple(mins)

    def shift_down(self, shift) -> "MultiPoly":
        """Divide by the monomial with the given exponent vector."""
        if not any(shift):
            return self
        return MultiPoly(
            self.symbols,
            {tuple(e - s for e, s in zip(exps, shift)): c for exps, c in self.terms.items()},
        )

    def substitute(self, assignment: dict) -> "MultiPoly":
        """Partial exact substitution of symbols by rational values."""
        bound = {s: _as_fraction(v) for s, v in assignment.items() if s in self.symbols}
        if not bound:
            return self
        keep = tuple(s for s in self.symbols if s not in bound)
        idx_keep = [i for i, s in enumerate(self.symbols) if s not in bound]
        idx_bound = [(i, bound[s]) for i, s in enumerate(self.symbols) if s in bound]
        terms = {}
        for exps, c in self.terms.items():
            for i, v in idx_bound:
                if exps[i]:
                    c = c * v ** exps[i]
            e = tuple(exps[i] for i in idx_keep)
            s = terms.get(e, _ZERO) + c
            if s:
                terms[e] = s
            else:
                terms.pop(e, None)
        return MultiPoly(keep, terms)

    def eval_exact(self, assignment: dict) -> Fraction:
        for s in self.symbols:
            if s not in assignment:
                raise UnboundSymbolError(f"symbol {s!r} is unbound")
        total = _ZERO
        for exps, c in self.terms.items():
            v = c
            for s, e in zip(self.symbols, exps):
                if e:
                    v = v * _as_fraction(assignment[s]) ** e
            total += v
        return total

    def eval_float(self, assignment: dict) -> float:
        for s in self.symbols:
            if s not in assignment:
                raise UnboundSymbolError(f"symbol {s!r} is unbound")
        total = 0.0
        for exps, c in self.terms.items():
            v = float(c)
            for s, e in zip(self.symbols, exps):
                if e:
                    v *= float(assignment[s]) ** e
            total += v
        return total

    def __repr__(self):
        return f"MultiPoly({self.symbols}, {self.terms})"


class RatFun:
    """Rational function num/den over a finite symbol set.

    Canonical form: zero is 0/1; the common monomial content of num and den
    is cancelled; den is scaled to have graded-lex leading coefficient 1.
    Full multivariate GCD reduction is deliberately not attempted.
    """

    __slots__ = ("num", "den")

    def __init__(self, num: MultiPoly, den: MultiPoly | None = None):
        if den is None:
            den = MultiPoly.const(1, num.symbols)
        num, den = MultiPoly._common(num, den)
        if den.is_zero():
            raise ZeroDivisionError("zero denominator in rational function")
        if num.is_zero():
            self.num = MultiPoly(num.symbols, {})
            self.den = MultiPoly.const(1, num.symbols)
            return
        shift = tuple(
            min(a, b) for a, b in zip(num.content_exponents(), den.content_exponents())
        )
        if any(shift):
            num = num.shift_down(shift)
            den = den.shift_down(shift)
        lead = den.leading()[1]
        if lead != 1:
            inv = 1 / lead
            num = num.scale(inv)
            den = den.scale(inv)
        self.num = num
        self.den = den

    @staticmethod
    def const(value, symbols=()) -> "RatFun":
        return RatFun(MultiPoly.const(value, symbols))

    @staticmethod
    def var(name) -> "RatFun":
        return RatFun(MultiPoly.var(name))

    def is_zero(self) -> bool:
        return self.num.is_zero()

    def is_const(self) -> bool:
        return self.num.is_const() and self.den.is_const()

    def const_value(self) -> Fraction:
        return self.num.const_value() / self.den.const_value()

    @property
    def symbols(self):
        return self.num.symbols

    def __add__(self, other: "RatFun") -> "RatFun":
        if other.is_zero():
            return self
        if self.is_zero():
            return other
        return RatFun(self.num * other.den + other.num * self.den, self.den * other.den)

    def __neg__(self) -> "RatFun":
        return RatFun(-self.num, self.den)

    def __sub__(self, other: "RatFun") -> "RatFun":
        return self + (-other)

    def __mul__(self, other: "RatFun") -> "RatFun":
        if self.is_zero() or other.is_zero():
            return RatFun.const(0, self.symbols)
        return RatFun(self.num * other.num, self.den * other.den)

    def __truediv__(self, other: "RatFun") -> "RatFun":
        if other.is_zero():
            raise ZeroDivisionError("division by zero rational function")
        return RatFun(self.num * other.den, self.den * other.num)

    def scale(self, c) -> "RatFun":
        c = _as_fraction(c)
        if c == 0:
            return RatFun.const(0, self.symbols)
        return RatFun(self.num.scale(c), self.den)

    def __eq__(self, other) -> bool:
        if not isinstance(other, RatFun):
            return NotImplemented
        return self.num * other.den == other.num * self.den

    def __hash__(self):
        return hash((self.num, self.den))

    def substitute(self, assignment: dict) -> "RatFun":
        return RatFun(self.num.substitute(assignment), self.den.substitute(assignment))

    def eval_float(self, assignment: dict) -> float:
        den = self.den.eval_float(assignment)
        if abs(den) <= 1e-12:
            raise SingularEvaluationError(f"denominator evaluated to {den}")
        return self.num.eval_float(assignment) / den

    def eval_exact(self, assignment: dict) -> Fraction:
        den = self.den.eval_exact(assignment)
        if den == 0:
            raise SingularEvaluationError("denominator evaluated to exactly zero")
        return self.num.eval_exact(assignment) / den

    def __repr__(self):
        return f"RatFun({ratfun_to_str(self)!r})"


def ratfun_arith(lhs: RatFun, rhs: RatFun, op: str) -> RatFun:
    """Field operation on rational functions; op in {add, sub, mul, div}."""
    if op == "add":
        return lhs + rhs
    if op == "sub":
        return lhs - rhs
    if op == "mul":
        return lhs * rhs
    if op == "div":
        return lhs / rhs
    raise ValueError(f"unknown op {op!r}")


def ratfun_eval(f: RatFun, assignment: dict) -> float:
    """Evaluate in 64-bit floating point."""
    return f.eval_float(assignment)


class OperatorPoly:
    """Univariate polynomial in the derivative D with RatFun coefficients.

    coeffs[i] is the coefficient of D^i; the list has no trailing zeros and
    the zero polynomial is the empty list.
    """

    __slots__ = ("coeffs",)

    def __init__(self, coeffs):
        coeffs = list(coeffs)
        while coeffs and coeffs[-1].is_zero():
            coeffs.pop()
        self.coeffs = tuple(coeffs)

    @staticmethod
    def zero() -> "OperatorPoly":
        return OperatorPoly(())

    @staticmethod
    def const(value, symbols=()) -> "OperatorPoly":
        return OperatorPoly((RatFun.const(value, symbols),))

    @staticmethod
    def from_ratfun(f: RatFun) -> "OperatorPoly":
        return OperatorPoly((f,))

    @staticmethod
    def d(power: int = 1, symbols=()) -> "OperatorPoly":
        coeffs = [RatFun.const(0, symbols)] * power + [RatFun.const(1, symbols)]
        return OperatorPoly(coeffs)

    def degree(self) -> int:
        """Degree in D; -1 for the zero polynomial."""
        return len(self.coeffs) - 1

    def is_zero(self) -> bool:
        return not self.coeffs

    def is_unit(self) -> bool:
        return len(self.coeffs) == 1

    def is_one(self) -> bool:
        return len(self.coeffs) == 1 and self.coeffs[0] == RatFun.const(1)

    def coeff(self, i: int) -> RatFun:
        if i < len(self.coeffs):
            return self.coeffs[i]
        return RatFun.const(0)

    def leading(self) -> RatFun:
        if not self.coeffs:
            raise ValueError("zero polynomial has no leading coefficient")
        return self.coeffs[-1]

    def __add__(self, other: "OperatorPoly") -> "OperatorPoly":
        n = max(len(self.coeffs), len(other.coeffs))
        return OperatorPoly([self.coeff(i) + other.coeff(i) for i in range(n)])

    def __neg__(self) -> "OperatorPoly":
        return OperatorPoly([-c for c in self.coeffs])

    def __sub__(self, other: "OperatorPoly") -> "OperatorPoly":
        return self + (-other)

    def __mul__(self, other: "OperatorPoly") -> "OperatorPoly":
        # D has constant coefficients in t, so multiplication is commutative.
        if self.is_zero() or other.is_zero():
            return OperatorPoly(())
        out = [RatFun.const(0)] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            if a.is_zero():
                continue
            for j, b in enumerate(other.coeffs):
                if b.is_zero():
                    continue
                out[i + j] = out[i + j] + a * b
        return OperatorPoly(out)

    def scale(self, f: RatFun) -> "OperatorPoly":
        if f.is_zero():
            return OperatorPoly(())
        return OperatorPoly([c * f for c in self.coeffs])

    def monic(self) -> "OperatorPoly":
        if self.is_zero():
            return self
        lead = self.leading()
        if lead == RatFun.const(1):
            return self
        return self.scale(RatFun.const(1) / lead)

    def derivative(self) -> "OperatorPoly":
        """Formal derivative with respect to D (used by square-free analysis)."""
        return OperatorPoly(
            [self.coeffs[i].scale(i) for i in range(1, len(self.coeffs))]
        )

    def substitute(self, assignment: dict) -> "OperatorPoly":
        return OperatorPoly([c.substitute(assignment) for c in self.coeffs])

    def __eq__(self, other) -> bool:
        if not isinstance(other, OperatorPoly):
            return NotImplemented
        if len(self.coeffs) != len(other.coeffs):
            return False
        return all(a == b for a, b in zip(self.coeffs, other.coeffs))

    def __hash__(self):
        return hash(self.coeffs)

    def __repr__(self):
        return f"OperatorPoly({poly_to_str(self)!r})"


def op_divmod(a: OperatorPoly, b: OperatorPoly):
    """Euclidean division over the coefficient field: a = q*b + r, deg r < deg b."""
    if b.is_zero():
        raise ZeroDivisionError("operator polynomial division by zero")
    q = [RatFun.const(0)] * max(0, a.degree() - b.degree() + 1)
    r = list(a.coeffs)
    blead = b.leading()
    bdeg = b.degree()
    while len(r) - 1 >= bdeg and r:
        c = r[-1] / blead
        k = len(r) - 1 - bdeg
        q[k] = q[k] + c
        for i, bc in enumerate(b.coeffs):
            r[k + i] = r[k + i] - c * bc
        while r and r[-1].is_zero():
            r.pop()
    return OperatorPoly(q), OperatorPoly(r)


def op_gcd(a: OperatorPoly, b: OperatorPoly) -> OperatorPoly:
    """Monic greatest common divisor via the Euclidean algorithm."""
    x, y = a, b
    while not y.is_zero():
        _, r = op_divmod(x, y)
        x, y = y, r
    if x.is_zero():
        return x
    return x.monic()


class OperatorMatrix:
    """Dense matrix of operator polynomials."""

    __slots__ = ("rows", "cols", "entries")

    def __init__(self, entries):
        entries = [list(row) for row in entries]
        if not entries or not entries[0]:
            raise ShapeMismatchError("operator matrix needs at least one row and column")
        cols = len(entries[0])
        for row in entries:
            if len(row) != cols:
                raise ShapeMismatchError("ragged operator matrix")
        self.rows = len(entries)
        self.cols = cols
        self.entries = tuple(tuple(row) for row in entries)

    @staticmethod
    def identity(n: int, symbols=()) -> "OperatorMatrix":
        one = OperatorPoly.const(1, symbols)
        zero = OperatorPoly.zero()
        return OperatorMatrix(
            [[one if i == j else zero for j in range(n)] for i in range(n)]
        )

    @staticmethod
    def zeros(m: int, n: int) -> "OperatorMatrix":
        return OperatorMatrix([[OperatorPoly.zero()] * n for _ in range(m)])

    def __getitem__(self, ij):
        i, j = ij
        return self.entries[i][j]

    def transpose(self) -> "OperatorMatrix":
        return OperatorMatrix(
            [[self.entries[i][j] for i in range(self.rows)] for j in range(self.cols)]
        )

    def substitute(self, assignment: dict) -> "OperatorMatrix":
        return OperatorMatrix(
            [[e.substitute(assignment) for e in row] for row in self.entries]
        )

    def is_diagonal(self) -> bool:
        return all(
            self.entries[i][j].is_zero()
            for i in range(self.rows)
            for j in range(self.cols)
            if i != j
        )

    def max_degree(self) -> int:
        return max(e.degree() for row in self.entries for e in row)

    def __eq__(self, other) -> bool:
        if not isinstance(other, OperatorMatrix):
            return NotImplemented
        return (
            self.rows == other.rows
            and self.cols == other.cols
            and self.entries == other.entries
        )

    def __hash__(self):
        return hash(self.entries)

    def __repr__(self):
        body = "; ".join(
            ", ".join(poly_to_str(e) for e in row) for row in self.entries
        )
        return f"OperatorMatrix[{body}]"


def mat_mul(A: OperatorMatrix, B: OperatorMatrix) -> OperatorMatrix:
    """Exact operator matrix product."""
    if A.cols != B.rows:
        raise ShapeMismatchError(f"cannot multiply {A.rows}x{A.cols} by {B.rows}x{B.cols}")
    out = []
    for i in range(A.rows):
        row = []
        for j in range(B.cols):
            acc = OperatorPoly.zero()
            for k in range(A.cols):
                a = A.entries[i][k]
                if a.is_zero():
                    continue
                b = B.entries[k][j]
                if b.is_zero():
                    continue
                acc = acc + a * b
            row.append(acc)
        out.append(row)
    return OperatorMatrix(out)


def mat_det(A: OperatorMatrix) -> OperatorPoly:
    """Determinant by cofactor expansion (matrices here stay tiny)."""
    if A.rows != A.cols:
        raise ShapeMismatchError("determinant of a non-square matrix")

    def det(rows):
        n = len(rows)
        if n == 1:
            return rows[0][0]
        total = OperatorPoly.zero()
        for j, pivot in enumerate(rows[0]):
            if pivot.is_zero():
                continue
            minor = [
                [row[k] for k in range(n) if k != j] for row in rows[1:]
            ]
            sub = det(minor)
            if j % 2:
                sub = -sub
            total = total + pivot * sub
        return total

    return det([list(row) for row in A.entries])


# ---------------------------------------------------------------------------
# Polynomial string grammar
#
#   expression ::= ('+'|'-')? term (('+'|'-') term)*
#   term       ::= factor (('*'|'/') factor)*
#   factor     ::= atom ('^' uint)?
#   atom       ::= 'D' | symbol | number | '(' expression ')'
#
# 'D' denotes the derivative and is reserved.  Division is only defined when
# the divisor has degree zero in D.  Whitespace is insignificant.
# ---------------------------------------------------------------------------

_SYMBOL_START = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ_")
_SYMBOL_CHARS = _SYMBOL_START | set("0123456789")


class _Tokenizer:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.tokens = []
        self._scan()
        self.index = 0

    def _location(self, pos):
        line = self.text.count("\n", 0, pos) + 1
        last_nl = self.text.rfind("\n", 0, pos)
        return line, pos - last_nl

    def _scan(self):
        text = self.text
        i = 0
        while i < len(text):
            ch = text[i]
            if ch.isspace():
                i += 1
                continue
            if ch in "+-*/^()":
                self.tokens.append((ch, ch, i))
                i += 1
                continue
            if ch.isdigit() or (ch == "." and i + 1 < len(text) and text[i + 1].isdigit()):
                j = i
                seen_dot = False
                while j < len(text) and (text[j].isdigit() or (text[j] == "." and not seen_dot)):
                    if text[j] == ".":
                        seen_dot = True
                    j += 1
                self.tokens.append(("num", text[i:j], i))
                i = j
                continue
            if ch in _SYMBOL_START:
                j = i
                while j < len(text) and text[j] in _SYMBOL_CHARS:
                    j += 1
                name = text[i:j]
                self.tokens.append(("D" if name == "D" else "sym", name, i))
                i = j
                continue
            line, col = self._location(i)
            raise ParseError(f"unexpected character {ch!r}", line, col)
        self.tokens.append(("end", "", len(text)))

    def peek(self):
        return self.tokens[self.index]

    def next(self):
        tok = self.tokens[self.index]
        self.index += 1
        return tok

    def error(self, message, token):
        line, col = self._location(token[2])
        raise ParseError(message, line, col)


class _Parser:
    def __init__(self, text: str, symbols):
        if "D" in symbols:
            raise ValueError("'D' denotes the derivative and cannot be a symbol")
        self.tok = _Tokenizer(text)
        self.symbols = tuple(sorted(symbols))

    def parse(self) -> OperatorPoly:
        value = self._expression()
        tail = self.tok.peek()
        if tail[0] != "end":
            self.tok.error(f"unexpected token {tail[1]!r}", tail)
        return value

    def _expression(self) -> OperatorPoly:
        sign = 1
        if self.tok.peek()[0] in "+-":
            sign = -1 if self.tok.next()[0] == "-" else 1
        value = self._term()
        if sign < 0:
            value = -value
        while self.tok.peek()[0] in "+-":
            op = self.tok.next()[0]
            rhs = self._term()
            value = value + rhs if op == "+" else value - rhs
        return value

    def _term(self) -> OperatorPoly:
        value = self._factor()
        while self.tok.peek()[0] in "*/":
            op_tok = self.tok.next()
            rhs = self._factor()
            if op_tok[0] == "*":
                value = value * rhs
            else:
                if rhs.is_zero():
                    self.tok.error("division by zero", op_tok)
                if rhs.degree() > 0:
                    self.tok.error("division by an operator of positive degree", op_tok)
                value = value.scale(RatFun.const(1) / rhs.coeffs[0])
        return value

    def _factor(self) -> OperatorPoly:
        value = self._atom()
        if self.tok.peek()[0] == "^":
            caret = self.tok.next()
            tok = self.tok.next()
            if tok[0] != "num" or "." in tok[1]:
                self.tok.error("exponent must be a nonnegative integer", caret)
            power = int(tok[1])
            out = OperatorPoly.const(1, self.symbols)
            for _ in range(power):
                out = out * value
            return out
        return value

    def _atom(self) -> OperatorPoly:
        tok = self.tok.next()
        kind, text, _ = tok
        if kind == "num":
            return OperatorPoly.const(Fraction(text), self.symbols)
        if kind == "D":
            return OperatorPoly.d(1, self.symbols)
        if kind == "sym":
            if text not in self.symbols:
                self.tok.error(f"unknown symbol {text!r}", tok)
            return OperatorPoly.from_ratfun(
                RatFun(MultiPoly.var(text, self.symbols))
            )
        if kind == "(":
            value = self._expression()
            closing = self.tok.next()
            if closing[0] != ")":
                self.tok.error("expected ')'", closing)
            return value
        self.tok.error(f"unexpected token {text!r}" if text else "unexpected end of input", tok)


def parse_poly(text: str, symbols=()) -> OperatorPoly:
    """Parse an operator polynomial from the string grammar."""
    return _Parser(text, symbols).parse()


def parse_matrix(rows, symbols=()) -> OperatorMatrix:
    """Parse a rectangular list of polynomial strings."""
    return OperatorMatrix([[parse_poly(cell, symbols) for cell in row] for row in rows])


def _frac_to_str(c: Fraction) -> str:
    if c.denominator == 1:
        return str(c.numerator)
    return f"{c.numerator}/{c.denominator}"


def _monomial_to_str(symbols, exps, c: Fraction) -> str:
    parts = []
    if c != 1 or not any(exps):
        parts.append(_frac_to_str(c))
    for s, e in zip(symbols, exps):
        if e == 1:
            parts.append(s)
        elif e > 1:
            parts.append(f"{s}^{e}")
    return "*".join(parts)


def _multipoly_to_str(p: MultiPoly) -> str:
    if p.is_zero():
        return "0"
    items = sorted(p.terms.items(), key=lambda kv: _grlex_key(kv[0]), reverse=True)
    out = ""
    for exps, c in items:
        piece = _monomial_to_str(p.symbols, exps, abs(c))
        if not out:
            out = piece if c > 0 else f"-{piece}"
        else:
            out += f" + {piece}" if c > 0 else f" - {piece}"
    return out


def ratfun_to_str(f: RatFun) -> str:
    num = _multipoly_to_str(f.num)
    if f.den.is_const() and f.den.const_value() == 1:
        return num
    den = _multipoly_to_str(f.den)
    num_paren = f"({num})" if (" " in num or "/" in num) else num
    den_paren = f"({den})" if (" " in den or "/" in den or "*" in den) else den
    return f"{num_paren}/{den_paren}"


def _coeff_to_factor_str(f: RatFun) -> str:
    s = ratfun_to_str(f)
    if " " in s:
        return f"({s})"
    return s


def poly_to_str(p: OperatorPoly) -> str:
    """Render an operator polynomial in the input grammar (round-trips)."""
    if p.is_zero():
        return "0"
    pieces = []
    for i in range(p.degree(), -1, -1):
        c = p.coeff(i)
        if c.is_zero():
            continue
        dpart = "" if i == 0 else ("D" if i == 1 else f"D^{i}")
        one = RatFun.const(1)
        minus_one = RatFun.const(-1)
        if i == 0:
            body = ratfun_to_str(c)
            if " " in body:
                body = f"({body})"
            sign = ""
        elif c == one:
            body, sign = dpart, ""
        elif c == minus_one:
            body, sign = dpart, "-"
        else:
            neg = (-c)
            cs = _coeff_to_factor_str(c)
            if cs.startswith("-") and not cs.startswith("(-"):
                body, sign = f"{_coeff_to_factor_str(neg)}*{dpart}", "-"
            else:
                body, sign = f"{cs}*{dpart}", ""
        if not pieces:
            pieces.append(f"{sign}{body}")
        else:
            if sign == "-" or body.startswith("-"):
                pieces.append(f"- {body.lstrip('-')}")
            else:
                pieces.append(f"+ {body}")
    return " ".join(pieces)
