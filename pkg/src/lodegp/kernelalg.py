"""Symbolic kernel algebra: base covariance functions for primary operators,
a differentiation-closed term class, and the operator pushforward V k V'.

A kernel expression is a canonical sum of terms

    coef * sigma^2 * t1^p * t2^q * exp(ea*t1 + eb*t2)
         * {cos|sin}(freq*(t1 - t2)) * ell^(-2*invp) * SE(ell)

where coef is an exact rational function of the ODE parameters, the exp and
trig arguments are floats fixed by a numeric factorization, and SE(ell) is
exp(-(t1-t2)^2 / (2*ell^2)).  The class is closed under differentiation in
either argument, so operator polynomials can be applied exactly; float
factors picked up while differentiating are folded into the coefficient via
their exact binary values, keeping canonicalization and symmetry exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import (
    NeedsRefactorizeModeError,
    ShapeMismatchError,
    SymbolicRootsUnsupportedError,
    UnboundSymbolError,
)
from .opalgebra import (
    OperatorMatrix,
    OperatorPoly,
    RatFun,
    op_divmod,
    op_gcd,
    ratfun_to_str,
)
from .smith import SmithDecomposition, is_controllable, smith_normal_form

TRIG_NONE, TRIG_COS, TRIG_SIN = 0, 1, 2


def ell_symbol(se_index: int) -> str:
    return f"ell{se_index}"


@dataclass(frozen=True)
class PrimaryFactor:
    """A power of an irreducible real polynomial in D (or the zero/unit cases)."""

    kind: str  # "real" | "complex-pair" | "zero-op" | "unit"
    a: float = 0.0
    b: float = 0.0
    j: int = 1

    def degree(self) -> int:
        if self.kind == "real":
            return self.j
        if self.kind == "complex-pair":
            return 2 * self.j
        return 0


@dataclass(frozen=True)
class KernelTerm:
    coef: RatFun
    sigma: str | None = None
    p: int = 0
    q: int = 0
    ea: float = 0.0
    eb: float = 0.0
    trig: int = TRIG_NONE
    freq: float = 0.0
    se: int = -1
    invp: int = 0
    src: int = -1  # latent column this term originated from; -1 if hand built

    def key(self):
        return (
            self.src,
            self.sigma or "",
            self.p,
            self.q,
            self.ea,
            self.eb,
            self.trig,
            self.freq,
            self.se,
            self.invp,
        )


def _make_term(coef, sigma, p, q, ea, eb, trig, freq, se, invp, src):
    """Normalized term constructor; returns None when the term vanishes."""
    if coef.is_zero():
        return None
    ea = ea + 0.0
    eb = eb + 0.0
    if trig != TRIG_NONE:
        if freq == 0.0:
            if trig == TRIG_SIN:
                return None
            trig, freq = TRIG_NONE, 0.0
        elif freq < 0.0:
            if trig == TRIG_SIN:
                coef = -coef
            freq = -freq
    else:
        freq = 0.0
    if se < 0:
        assert invp == 0, "inverse-lengthscale power without an SE factor"
    return KernelTerm(coef, sigma, p, q, ea, eb, trig, freq, se, invp, src)



def to_rs_monomials(terms):
    """Exact change of variables t1^p t2^q -> polynomial in r = t1 - t2 and
    s = t1 + t2.  Coefficient arithmetic stays in rational functions, so
    s-powers that cancel analytically cancel exactly."""
    from math import comb

    acc: dict = {}
    for t in terms:
        base = Fraction(1, 2 ** (t.p + t.q))
        for a in range(t.p + 1):
            ca = comb(t.p, a)
            for b in range(t.q + 1):
                w = base * ca * comb(t.q, b) * (-1 if (t.q - b) % 2 else 1)
                key = ((t.p - a) + (t.q - b), a + b)  # (r power, s power)
                piece = t.coef.scale(w)
                if key in acc:
                    acc[key] = acc[key] + piece
                else:
                    acc[key] = piece
    out = []
    for (ri, si) in sorted(acc):
        coef = acc[(ri, si)]
        if not coef.is_zero():
            out.append((coef, ri, si))
    return out


class KernelExpr:
    """Canonical sum of kernel terms (like terms merged, zero terms dropped)."""

    __slots__ = ("terms",)

    def __init__(self, terms, canonical=False):
        if canonical:
            self.terms = tuple(terms)
            return
        merged: dict = {}
        for t in terms:
            if t is None:
                continue
            k = t.key()
            if k in merged:
                merged[k] = merged[k] + t.coef
            else:
                merged[k] = t.coef
        out = []
        for k in sorted(merged):
            coef = merged[k]
            if coef.is_zero():
                continue
            src, sigma, p, q, ea, eb, trig, freq, se, invp = k
            out.append(
                KernelTerm(coef, sigma or None, p, q, ea, eb, trig, freq, se, invp, src)
            )
        self.terms = tuple(out)

    @staticmethod
    def zero() -> "KernelExpr":
        return KernelExpr((), canonical=True)

    def is_zero(self) -> bool:
        return not self.terms

    def __add__(self, other: "KernelExpr") -> "KernelExpr":
        if not self.terms:
            return other
        if not other.terms:
            return self
        return KernelExpr(self.terms + other.terms)

    def scale(self, f: RatFun) -> "KernelExpr":
        if f.is_zero():
            return KernelExpr.zero()
        return KernelExpr(
            [
                KernelTerm(t.coef * f, t.sigma, t.p, t.q, t.ea, t.eb, t.trig, t.freq, t.se, t.invp, t.src)
                for t in self.terms
            ]
        )

    def with_src(self, src: int) -> "KernelExpr":
        return KernelExpr(
            [
                KernelTerm(t.coef, t.sigma, t.p, t.q, t.ea, t.eb, t.trig, t.freq, t.se, t.invp, src)
                for t in self.terms
            ]
        )

    def substitute(self, assignment: dict) -> "KernelExpr":
        return KernelExpr(
            [
                KernelTerm(
                    t.coef.substitute(assignment),
                    t.sigma, t.p, t.q, t.ea, t.eb, t.trig, t.freq, t.se, t.invp, t.src,
                )
                for t in self.terms
            ]
        )

    def swap_args(self) -> "KernelExpr":
        """The expression with t1 and t2 exchanged."""
        out = []
        for t in self.terms:
            coef = -t.coef if t.trig == TRIG_SIN else t.coef
            out.append(
                _make_term(coef, t.sigma, t.q, t.p, t.eb, t.ea, t.trig, t.freq, t.se, t.invp, t.src)
            )
        return KernelExpr(out)

    def diff(self, arg: int) -> "KernelExpr":
        """Exact partial derivative; arg is 1 for t1, 2 for t2."""
        if arg not in (1, 2):
            raise ValueError("arg must be 1 (first) or 2 (second)")
        out = []
        for t in self.terms:
            c, sig, p, q = t.coef, t.sigma, t.p, t.q
            common = dict(ea=t.ea, eb=t.eb, trig=t.trig, freq=t.freq, se=t.se, invp=t.invp, src=t.src)
            if arg == 1:
                if p > 0:
                    out.append(_make_term(c.scale(p), sig, p - 1, q, **common))
                if t.ea != 0.0:
                    out.append(_make_term(c.scale(Fraction(t.ea)), sig, p, q, **common))
            else:
                if q > 0:
                    out.append(_make_term(c.scale(q), sig, p, q - 1, **common))
                if t.eb != 0.0:
                    out.append(_make_term(c.scale(Fraction(t.eb)), sig, p, q, **common))
            if t.trig != TRIG_NONE:
                # d/dt1 of (t1 - t2) is +1, d/dt2 is -1
                sign = Fraction(t.freq) if arg == 1 else -Fraction(t.freq)
                flipped = dict(common)
                if t.trig == TRIG_COS:
                    flipped["trig"] = TRIG_SIN
                    out.append(_make_term(c.scale(-sign), sig, p, q, **flipped))
                else:
                    flipped["trig"] = TRIG_COS
                    out.append(_make_term(c.scale(sign), sig, p, q, **flipped))
            if t.se >= 0:
                # SE chain rule contributes -(t1-t2)/ell^2 (or + for t2),
                # with (t1 - t2) expanded into monomials
                s = -1 if arg == 1 else 1
                deeper = dict(common)
                deeper["invp"] = t.invp + 1
                out.append(_make_term(c.scale(s), sig, p + 1, q, **deeper))
                out.append(_make_term(c.scale(-s), sig, p, q + 1, **deeper))
        return KernelExpr(out)

    def hyper_symbols(self):
        syms = set()
        for t in self.terms:
            if t.sigma:
                syms.add(t.sigma)
            if t.se >= 0:
                syms.add(ell_symbol(t.se))
        return syms

    def evaluate(self, t1, t2, binding: dict):
        """Evaluate in 64-bit floats; t1 and t2 may be scalars or arrays.

        Polynomial parts are evaluated in the variables r = t1 - t2 and
        s = t1 + t2 (exact re-expansion); terms stemming from derivatives of
        the squared exponential depend on r alone there, which sidesteps the
        large cancellations the raw monomials produce at large times.
        """
        t1 = np.asarray(t1, dtype=float)
        t2 = np.asarray(t2, dtype=float)
        r = t1 - t2
        s = t1 + t2
        out = np.zeros(np.broadcast(t1, t2).shape)
        groups: dict = {}
        for t in self.terms:
            groups.setdefault(
                (t.sigma, t.se, t.ea, t.eb, t.trig, t.freq, t.invp), []
            ).append(t)
        for key in sorted(groups, key=lambda k: (k[0] or "",) + k[1:]):
            sigma, se, ea, eb, trig, freq, invp = key
            c = 1.0
            try:
                if sigma is not None:
                    c *= float(binding[sigma]) ** 2
                if se >= 0:
                    ell = float(binding[ell_symbol(se)])
                    if invp:
                        c *= ell ** (-2 * invp)
            except KeyError as exc:
                raise UnboundSymbolError(f"symbol {exc.args[0]!r} is unbound") from exc
            poly = 0.0
            for coef, ri, si in to_rs_monomials(groups[key]):
                piece = coef.eval_float(binding)
                if ri:
                    piece = piece * r**ri
                if si:
                    piece = piece * s**si
                poly = poly + piece
            v = c * poly
            if ea != 0.0 or eb != 0.0:
                v = v * (np.exp(ea * t1) * np.exp(eb * t2))
            if trig == TRIG_COS:
                v = v * np.cos(freq * r)
            elif trig == TRIG_SIN:
                v = v * np.sin(freq * r)
            if se >= 0:
                v = v * np.exp(-(r**2) / (2.0 * ell**2))
            out = out + v
        if out.shape == ():
            return float(out)
        return out

    def __eq__(self, other):
        if not isinstance(other, KernelExpr):
            return NotImplemented
        if len(self.terms) != len(other.terms):
            return False
        return all(
            a.key() == b.key() and a.coef == b.coef
            for a, b in zip(self.terms, other.terms)
        )

    def __hash__(self):
        return hash(tuple(t.key() for t in self.terms))

    def __repr__(self):
        return f"KernelExpr({kernel_to_str(self)!r})"


@dataclass(frozen=True)
class LatentDiagonal:
    """Diagonal prior for the decoupled latent functions, one covariance per
    column of D.  The latent functions themselves are never materialized."""

    entries: tuple
    hyper_slots: tuple  # ((symbol, kind), ...) in latent order


@dataclass(frozen=True)
class KernelMatrix:
    dim: int
    entries: tuple  # dim x dim of KernelExpr


def factor_primary(d: OperatorPoly) -> list[PrimaryFactor]:
    """Factor a numeric operator polynomial into primary factors.

    Multiplicities come from an exact square-free decomposition (repeated
    gcd with the derivative), so only simple roots ever reach the numeric
    companion-matrix root finder; conjugates are then paired within
    tau = 1e-8 * (1 + max |coeff|).
    """
    for c in d.coeffs:
        if not c.is_const():
            raise SymbolicRootsUnsupportedError(
                "operator has free parameters; bind numeric values first"
            )
    if d.is_zero():
        return [PrimaryFactor("zero-op")]
    if d.degree() == 0:
        return [PrimaryFactor("unit")]

    monic = d.monic()
    coeffs = [float(c.const_value()) for c in monic.coeffs]
    tau = 1e-8 * (1.0 + max(abs(c) for c in coeffs))

    # square-free layers: roots of layer k have multiplicity >= k+1
    layers = []
    f = monic
    while f.degree() > 0:
        g = op_gcd(f, f.derivative())
        radical, rem = op_divmod(f, g)
        assert rem.is_zero()
        layers.append(radical)
        f = g

    def roots_of(poly: OperatorPoly):
        cs = [float(c.const_value()) for c in reversed(poly.coeffs)]
        if len(cs) == 1:
            return np.array([])
        return np.roots(cs)

    base_roots = list(roots_of(layers[0]))
    mult = [1] * len(base_roots)
    for layer in layers[1:]:
        for r in roots_of(layer):
            i = min(range(len(base_roots)), key=lambda k: abs(base_roots[k] - r))
            mult[i] += 1

    factors = []
    used = [False] * len(base_roots)
    order = sorted(range(len(base_roots)), key=lambda k: (base_roots[k].real, abs(base_roots[k].imag)))
    for i in order:
        if used[i]:
            continue
        r = base_roots[i]
        if abs(r.imag) <= tau:
            used[i] = True
            a = float(r.real)
            factors.append(PrimaryFactor("real", a=0.0 if abs(a) <= tau else a, j=mult[i]))
            continue
        partner = None
        for k in range(len(base_roots)):
            if k == i or used[k]:
                continue
            if abs(base_roots[k] - r.conjugate()) <= max(tau, 1e-6 * abs(r)):
                partner = k
                break
        if partner is None:
            raise SymbolicRootsUnsupportedError(
                f"could not pair complex root {r} with its conjugate"
            )
        used[i] = used[partner] = True
        j = mult[i]
        assert mult[partner] == j, "conjugate roots with different multiplicities"
        a = (float(r.real) + float(base_roots[partner].real)) / 2.0
        b = (abs(float(r.imag)) + abs(float(base_roots[partner].imag))) / 2.0
        factors.append(
            PrimaryFactor("complex-pair", a=0.0 if abs(a) <= tau else a + 0.0, b=b, j=j)
        )

    total = sum(f.degree() for f in factors)
    assert total == d.degree(), f"factor degrees {total} != {d.degree()}"
    return factors


def _factor_kernel(factor: PrimaryFactor, sigma: str, se_index: int) -> KernelExpr:
    one = RatFun.const(1)
    if factor.kind == "unit":
        return KernelExpr.zero()
    if factor.kind == "zero-op":
        return KernelExpr([_make_term(one, sigma, 0, 0, 0.0, 0.0, TRIG_NONE, 0.0, se_index, 0, -1)])
    terms = []
    trig = TRIG_NONE if factor.kind == "real" else TRIG_COS
    freq = 0.0 if factor.kind == "real" else factor.b
    for i in range(factor.j):
        terms.append(
            _make_term(one, sigma, i, i, factor.a, factor.a, trig, freq, -1, 0, -1)
        )
    return KernelExpr(terms)


def base_kernel(d: OperatorPoly, index: int = 0) -> KernelExpr:
    """Covariance function for the scalar equation d * f = 0.

    Units give the zero kernel; a real root a with multiplicity j gives
    sigma^2 * (sum_i t1^i t2^i) * exp(a (t1+t2)); a complex pair adds a
    cos(b (t1-t2)) factor; the zero operator gives the squared-exponential.
    Non-primary operators contribute one summand per primary factor, each
    with its own signal variance slot.
    """
    factors = factor_primary(d)
    expr = KernelExpr.zero()
    multi = len(factors) > 1
    for k, factor in enumerate(factors):
        sigma = f"sigma{index}_{k}" if multi else f"sigma{index}"
        expr = expr + _factor_kernel(factor, sigma, index)
    return expr


def kernel_slots(expr: KernelExpr) -> list:
    """(symbol, kind) hyperparameter slots used by a latent entry."""
    slots = []
    seen = set()
    for t in expr.terms:
        if t.sigma and t.sigma not in seen:
            seen.add(t.sigma)
            slots.append((t.sigma, "variance"))
        if t.se >= 0:
            name = ell_symbol(t.se)
            if name not in seen:
                seen.add(name)
                slots.append((name, "lengthscale"))
    return slots


def diff_kernel(k: KernelExpr, arg: str | int) -> KernelExpr:
    """Partial derivative with respect to the first or second argument."""
    if arg in ("first", 1):
        return k.diff(1)
    if arg in ("second", 2):
        return k.diff(2)
    raise ValueError("arg must be 'first' or 'second'")


def apply_operator(
    p: OperatorPoly, k: KernelExpr, arg: str | int, assignment: dict | None = None
) -> KernelExpr:
    """Apply an operator polynomial to one kernel argument:
    sum_i coeff_i * d^i k / d(arg)^i, coefficients multiplying symbolically."""
    if assignment:
        p = p.substitute(assignment)
    result = KernelExpr.zero()
    current = k
    for i, coeff in enumerate(p.coeffs):
        if i > 0:
            current = diff_kernel(current, arg)
        if coeff.is_zero():
            continue
        result = result + current.scale(coeff)
    return result


def pushforward(V: OperatorMatrix, latent: LatentDiagonal) -> KernelMatrix:
    """Covariance of the pushforward GP: entry (i, j) applies row operators
    V[i,c] on the first argument and V[j,c] on the second."""
    n = V.rows
    if V.cols != len(latent.entries):
        raise ShapeMismatchError(
            f"V has {V.cols} columns but the latent diagonal has {len(latent.entries)}"
        )
    tagged = [expr.with_src(c) for c, expr in enumerate(latent.entries)]
    half = [[None] * V.cols for _ in range(n)]
    for j in range(n):
        for c in range(V.cols):
            if tagged[c].is_zero() or V.entries[j][c].is_zero():
                half[j][c] = KernelExpr.zero()
            else:
                half[j][c] = apply_operator(V.entries[j][c], tagged[c], "second")
    entries = []
    for i in range(n):
        row = []
        for j in range(n):
            acc = KernelExpr.zero()
            for c in range(V.cols):
                if half[j][c].is_zero():
                    continue
                acc = acc + apply_operator(V.entries[i][c], half[j][c], "first")
            row.append(acc)
        entries.append(tuple(row))
    return KernelMatrix(dim=n, entries=tuple(entries))


@dataclass(frozen=True)
class CompiledKernel:
    """Fully constructed multi-output covariance with its provenance."""

    channels: tuple
    matrix: KernelMatrix
    latent: LatentDiagonal
    hyper_slots: tuple  # ((symbol, kind), ...)
    param_symbols: tuple
    controllable: bool | None
    mode: str
    snf: SmithDecomposition | None = None
    system_matrix: OperatorMatrix | None = None

    @property
    def dim(self) -> int:
        return self.matrix.dim

    def entry(self, i: int, j: int) -> KernelExpr:
        return self.matrix.entries[i][j]

    def bind(self, params: dict) -> "CompiledKernel":
        return self

    def sub_kernel(self, indices) -> "CompiledKernel":
        indices = tuple(indices)
        entries = tuple(
            tuple(self.matrix.entries[i][j] for j in indices) for i in indices
        )
        return CompiledKernel(
            channels=tuple(self.channels[i] for i in indices),
            matrix=KernelMatrix(dim=len(indices), entries=entries),
            latent=self.latent,
            hyper_slots=self.hyper_slots,
            param_symbols=self.param_symbols,
            controllable=self.controllable,
            mode=self.mode,
            snf=self.snf,
            system_matrix=self.system_matrix,
        )


class RefactorizeKernel:
    """Deferred compilation: the SNF is computed once symbolically, while
    primary factorization waits for numeric ODE parameter values.  Every
    distinct parameter assignment compiles a fresh immutable kernel."""

    def __init__(self, channels, snf, system_matrix, param_symbols, mode="refactorize"):
        self.channels = tuple(channels)
        self.snf = snf
        self.system_matrix = system_matrix
        self.param_symbols = tuple(param_symbols)
        self.mode = mode
        self._cache: dict = {}
        self._slot_signature = None
        first = self.bind({s: 1.0 for s in self.param_symbols})
        self.hyper_slots = first.hyper_slots
        self.controllable = first.controllable

    @property
    def dim(self) -> int:
        return len(self.channels)

    def bind(self, params: dict) -> CompiledKernel:
        key = tuple(float(params[s]) for s in self.param_symbols)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        assignment = {s: Fraction(float(params[s])) for s in self.param_symbols}
        snf_bound = SmithDecomposition(
            U=self.snf.U.substitute(assignment),
            D=self.snf.D.substitute(assignment),
            V=self.snf.V.substitute(assignment),
            detU=self.snf.detU.substitute(assignment),
            detV=self.snf.detV.substitute(assignment),
        )
        compiled = _compile_from_snf(
            self.channels, snf_bound, self.system_matrix.substitute(assignment),
            (), "refactorize",
        )
        signature = tuple(compiled.hyper_slots)
        if self._slot_signature is None:
            self._slot_signature = signature
        elif signature != self._slot_signature:
            raise SymbolicRootsUnsupportedError(
                "primary factor structure changed with the parameter values; "
                "the hyperparameter slots are no longer consistent"
            )
        if len(self._cache) > 256:
            self._cache.clear()
        self._cache[key] = compiled
        return compiled


def _compile_from_snf(channels, snf, system_matrix, param_symbols, mode) -> CompiledKernel:
    m, n = snf.D.rows, snf.D.cols
    entries = []
    slots = []
    for c in range(n):
        d = snf.D.entries[c][c] if c < min(m, n) else OperatorPoly.zero()
        expr = base_kernel(d, index=c)
        entries.append(expr)
        slots.extend(kernel_slots(expr))
    latent = LatentDiagonal(entries=tuple(entries), hyper_slots=tuple(slots))
    matrix = pushforward(snf.V, latent)
    return CompiledKernel(
        channels=tuple(channels),
        matrix=matrix,
        latent=latent,
        hyper_slots=tuple(slots),
        param_symbols=tuple(param_symbols),
        controllable=is_controllable(snf.D),
        mode=mode,
        snf=snf,
        system_matrix=system_matrix,
    )


def compile_lodegp(spec, mode: str = "symbolic"):
    """Build the LODE-GP covariance for a system: Smith normal form, base
    kernels from the diagonal, then the pushforward with V.

    In symbolic mode the ODE parameters stay symbolic inside the kernel
    coefficients, which requires every non-unit, non-zero diagonal entry of
    D to be parameter free.  Refactorize mode instead defers factorization
    until parameters are bound and recompiles per assignment.
    """
    if mode not in ("symbolic", "refactorize"):
        raise ValueError(f"unknown compilation mode {mode!r}")
    snf = smith_normal_form(spec.matrix)
    if mode == "refactorize":
        return RefactorizeKernel(
            spec.channels, snf, spec.matrix, spec.param_symbols
        )
    m, n = snf.D.rows, snf.D.cols
    for c in range(min(m, n)):
        d = snf.D.entries[c][c]
        if d.is_zero() or d.degree() == 0:
            continue
        if any(c_.symbols for c_ in d.coeffs):
            raise NeedsRefactorizeModeError(
                f"diagonal entry {c} has free parameters; compile with "
                "mode='refactorize'"
            )
    return _compile_from_snf(spec.channels, snf, spec.matrix, spec.param_symbols, mode)


def diagonal_se_kernel(channels, shared_lengthscale: bool = True) -> CompiledKernel:
    """Independent squared-exponential kernel per channel (the baseline GP):
    per-channel signal variances, one shared lengthscale by default."""
    one = RatFun.const(1)
    n = len(channels)
    entries = []
    slots = []
    latent_entries = []
    for c in range(n):
        se_idx = 0 if shared_lengthscale else c
        sigma = f"sigma{c}"
        expr = KernelExpr(
            [_make_term(one, sigma, 0, 0, 0.0, 0.0, TRIG_NONE, 0.0, se_idx, 0, c)]
        )
        latent_entries.append(expr)
        slots.append((sigma, "variance"))
    ell_names = {ell_symbol(0 if shared_lengthscale else c) for c in range(n)}
    for name in sorted(ell_names):
        slots.append((name, "lengthscale"))
    zero = KernelExpr.zero()
    for i in range(n):
        entries.append(tuple(latent_entries[i] if i == j else zero for j in range(n)))
    return CompiledKernel(
        channels=tuple(channels),
        matrix=KernelMatrix(dim=n, entries=tuple(entries)),
        latent=LatentDiagonal(entries=tuple(latent_entries), hyper_slots=tuple(slots)),
        hyper_slots=tuple(slots),
        param_symbols=(),
        controllable=None,
        mode="baseline",
    )


def _float_str(x: float) -> str:
    return f"{x:.6g}"


def term_to_str(t: KernelTerm) -> str:
    parts = []
    coef = ratfun_to_str(t.coef)
    if coef != "1" or not (t.sigma or t.p or t.q or t.ea or t.eb or t.trig or t.se >= 0):
        parts.append(f"({coef})" if (" " in coef or "/" in coef) else coef)
    if t.sigma:
        parts.append(f"{t.sigma}^2")
    if t.invp:
        parts.append(f"{ell_symbol(t.se)}^-{2 * t.invp}")
    if t.p:
        parts.append("t1" if t.p == 1 else f"t1^{t.p}")
    if t.q:
        parts.append("t2" if t.q == 1 else f"t2^{t.q}")
    if t.ea != 0.0 or t.eb != 0.0:
        parts.append(f"exp({_float_str(t.ea)}*t1 + {_float_str(t.eb)}*t2)")
    if t.trig == TRIG_COS:
        parts.append(f"cos({_float_str(t.freq)}*(t1 - t2))")
    elif t.trig == TRIG_SIN:
        parts.append(f"sin({_float_str(t.freq)}*(t1 - t2))")
    if t.se >= 0:
        parts.append(f"SE({ell_symbol(t.se)})")
    return " * ".join(parts) if parts else "1"


def kernel_to_str(expr: KernelExpr) -> str:
    """Human-readable rendering of a kernel expression."""
    if expr.is_zero():
        return "0"
    return "  +  ".join(term_to_str(t) for t in expr.terms)
