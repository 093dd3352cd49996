"""Truncations of the Iwasawa algebra Z_3[[T]].

Ideals of ``Lambda/(3^e, w)`` with ``w`` one of the monic polynomials
``omega_n = (1+T)^(3^n) - 1`` or ``omega'_n = omega_n / T`` are kept in a
canonical strong Groebner form: a list of polynomials ``3^k * (monic)`` with
strictly decreasing degrees, tails fully reduced.  Two ideals are equal iff
their canonical forms agree, and the index of an ideal is read off the
degree profile.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import comb
from typing import Iterable, Sequence

P = 3

OMEGA = "omega"
OMEGA_PRIME = "omega-prime"
VARIANTS = (OMEGA, OMEGA_PRIME)

Poly = tuple  # integer coefficients, lowest degree first


def v3(x: int) -> int:
    """3-adic valuation of a nonzero integer."""
    if x == 0:
        raise ValueError("v3(0) is infinite")
    x = abs(x)
    k = 0
    while x % 3 == 0:
        x //= 3
        k += 1
    return k


def strip(c: Sequence[int]) -> list:
    c = list(c)
    while c and c[-1] == 0:
        c.pop()
    return c


def poly_mul(a: Sequence[int], b: Sequence[int]) -> list:
    if not a or not b:
        return []
    out = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                out[i + j] += x * y
    return out


def poly_add(a: Sequence[int], b: Sequence[int]) -> list:
    n = max(len(a), len(b))
    return [(a[i] if i < len(a) else 0) + (b[i] if i < len(b) else 0) for i in range(n)]


def poly_divmod(a: Sequence[int], m: Sequence[int]) -> tuple[list, list]:
    """Division with remainder by a monic integer polynomial."""
    m = strip(m)
    if not m or m[-1] != 1:
        raise ValueError("divisor must be monic")
    r = strip(a)
    d = len(m) - 1
    if len(r) <= d:
        return [], r
    q = [0] * (len(r) - d)
    for i in range(len(r) - 1, d - 1, -1):
        c = r[i]
        if c:
            q[i - d] = c
            for j in range(d + 1):
                r[i - d + j] -= c * m[j]
    return strip(q), strip(r[:d])


def poly_rem(a: Sequence[int], m: Sequence[int], modulus: int | None = None) -> list:
    r = poly_divmod(a, m)[1]
    if modulus is not None:
        r = strip([x % modulus for x in r])
    return r


@lru_cache(maxsize=None)
def omega(n: int, variant: str = OMEGA) -> Poly:
    """``(1+T)^(3^n) - 1``, or that polynomial divided by ``T``."""
    if n < 0:
        raise ValueError("level must be non-negative")
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    N = P**n
    full = [comb(N, i) for i in range(N + 1)]
    full[0] = 0
    if variant == OMEGA:
        return tuple(full)
    return tuple(full[1:])


def one_plus_T_power(k: int) -> list:
    """(1+T)^k for k >= 0 as an exact integer polynomial."""
    return [comb(k, i) for i in range(k + 1)]


def involution(g: Sequence[int], level: int, variant: str = OMEGA) -> list:
    """Image of ``g`` under ``T -> (1+T)^(-1) - 1`` modulo the level modulus.

    ``(1+T)`` has order dividing ``3^level`` modulo either modulus, so the
    inverse is the power ``3^level - 1``.
    """
    mod = omega(level, variant)
    sub = one_plus_T_power(P**level - 1)
    sub[0] -= 1
    sub = poly_rem(sub, mod)
    out: list = []
    power = [1]
    for c in g:
        if c:
            out = poly_add(out, [c * x for x in power])
        power = poly_rem(poly_mul(power, sub), mod)
    return poly_rem(out, mod)


@dataclass(frozen=True)
class LambdaContext:
    """Working ring ``(Z/3^e)[T]/(w)`` with ``w = omega_n`` or ``omega'_n``."""

    e: int
    n: int
    variant: str = OMEGA

    def __post_init__(self):
        if self.e < 1:
            raise ValueError("exponent e must be positive")
        if self.n < 0:
            raise ValueError("level n must be non-negative")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")

    @property
    def modulus(self) -> int:
        return P**self.e

    @property
    def omega(self) -> Poly:
        return omega(self.n, self.variant)

    @property
    def degree(self) -> int:
        return len(self.omega) - 1

    def reduce(self, g: Sequence[int]) -> list:
        return poly_rem(g, self.omega, self.modulus)

    def times_T(self, g: Sequence[int]) -> list:
        return self.reduce([0] + list(g))

    def with_exponent(self, e: int) -> "LambdaContext":
        return LambdaContext(e, self.n, self.variant)

    def with_level(self, n: int) -> "LambdaContext":
        return LambdaContext(self.e, n, self.variant)


@dataclass(frozen=True)
class TruncatedPolynomial:
    """An element of ``(Z/3^e)[T]/(w)``, coefficients lowest degree first."""

    coefficients: tuple
    context: LambdaContext

    def __post_init__(self):
        q = self.context.modulus
        d = self.context.degree
        c = list(self.coefficients)[:]
        if len(c) > d or any(not 0 <= x < q for x in c):
            c = self.context.reduce(c)
        c = c + [0] * (d - len(c))
        object.__setattr__(self, "coefficients", tuple(c))

    @classmethod
    def from_integers(cls, coeffs: Sequence[int], context: LambdaContext):
        return cls(tuple(context.reduce(coeffs)), context)

    @property
    def e(self):
        return self.context.e

    @property
    def level(self):
        return self.context.n

    @property
    def variant(self):
        return self.context.variant

    def is_zero(self) -> bool:
        return not any(self.coefficients)


class _GroebnerState:
    """Mutable strong Groebner basis over Z/3^e, one slot per leading valuation."""

    def __init__(self, ctx: LambdaContext):
        self.ctx = ctx
        self.q = ctx.modulus
        self.slots: dict[int, list] = {}

    def _reducer(self, v: int, j: int):
        best = None
        for k, b in self.slots.items():
            if k <= v and len(b) - 1 <= j:
                if best is None or k > best[0]:
                    best = (k, b)
        return best

    def insert(self, g: Sequence[int]) -> bool:
        """Insert ``g``; return True if the span changed."""
        q = self.q
        changed = False
        todo = [strip([x % q for x in g])]
        while todo:
            g = todo.pop()
            while g:
                j = len(g) - 1
                c = g[j]
                v = v3(c)
                u = c // P**v
                red = self._reducer(v, j)
                if red is not None:
                    k, b = red
                    mult = (P ** (v - k) * u) % q
                    shift = j - (len(b) - 1)
                    for i, x in enumerate(b):
                        g[i + shift] = (g[i + shift] - mult * x) % q
                    g = strip(g)
                    continue
                uinv = pow(u, -1, q)
                g = strip([(x * uinv) % q for x in g])
                old = self.slots.get(v)
                self.slots[v] = g
                changed = True
                if old is not None:
                    todo.append(old)
                for k in [k for k in self.slots if k > v and len(self.slots[k]) - 1 >= j]:
                    todo.append(self.slots.pop(k))
                g = []
        return changed

    def saturate(self):
        """Close under multiplication by 3 (the only S-pairs in this setting)."""
        seen: set = set()
        while True:
            pending = [(k, tuple(b)) for k, b in self.slots.items() if (k, tuple(b)) not in seen]
            if not pending:
                return
            for k, b in pending:
                seen.add((k, b))
                self.insert([3 * x for x in b])

    def profile(self) -> list:
        """kappa(i) for i < degree: valuation of the lattice pivot in column i."""
        d = self.ctx.degree
        kap = [self.ctx.e] * d
        for k, b in self.slots.items():
            for i in range(len(b) - 1, d):
                if k < kap[i]:
                    kap[i] = k
        return kap

    def canonical(self) -> tuple:
        kap = self.profile()
        by_col = {}
        for k, b in self.slots.items():
            by_col[len(b) - 1] = k
        q = self.q
        out = []
        for k in sorted(self.slots):
            b = list(self.slots[k])
            for i in range(len(b) - 2, -1, -1):
                mod = P ** kap[i]
                c = b[i]
                if c % mod == c:
                    continue
                qt = c // mod
                kk = kap[i]
                piv = self.slots[kk]
                shift = i - (len(piv) - 1)
                for t, x in enumerate(piv):
                    b[t + shift] = (b[t + shift] - qt * x) % q
            out.append((k, tuple(b)))
        return tuple(out)


def _normal_form(basis: tuple, ctx: LambdaContext, g: Sequence[int]) -> list:
    """Canonical remainder of ``g`` modulo the ideal with Groebner basis ``basis``."""
    q = ctx.modulus
    d = ctx.degree
    g = ctx.reduce(g)
    g = g + [0] * (d - len(g))
    kap = [ctx.e] * d
    piv = {}
    for k, b in basis:
        for i in range(len(b) - 1, d):
            if k < kap[i]:
                kap[i] = k
        piv[k] = b
    for i in range(d - 1, -1, -1):
        c = g[i]
        mod = P ** kap[i]
        if kap[i] == ctx.e or c < mod:
            continue
        qt = c // mod
        b = piv[kap[i]]
        shift = i - (len(b) - 1)
        for t, x in enumerate(b):
            g[t + shift] = (g[t + shift] - qt * x) % q
    return strip(g)


@dataclass(frozen=True)
class TruncatedLambdaIdeal:
    """Canonical form of an ideal of ``Lambda/(3^e, w)``.

    ``basis`` is a tuple of ``(k, coefficients)`` pairs: each polynomial has
    leading coefficient exactly ``3^k``, degrees strictly decrease as ``k``
    grows.  ``3^e`` and ``w`` are always implicit members.
    """

    context: LambdaContext
    basis: tuple = field(default=())

    @property
    def e(self):
        return self.context.e

    @property
    def level(self):
        return self.context.n

    @property
    def variant(self):
        return self.context.variant

    def profile(self) -> list:
        d = self.context.degree
        kap = [self.context.e] * d
        for k, b in self.basis:
            for i in range(len(b) - 1, d):
                if k < kap[i]:
                    kap[i] = k
        return kap

    @property
    def log3_index(self) -> int:
        return sum(self.profile())

    @property
    def exponent(self) -> int:
        """Smallest t with 3^t in the ideal (t <= e)."""
        for k, b in self.basis:
            if len(b) == 1:
                return k
        return self.context.e

    def is_unit(self) -> bool:
        return self.log3_index == 0

    def generators(self) -> list:
        return [list(b) for _, b in self.basis]

    def normal_form(self, g: Sequence[int]) -> list:
        return _normal_form(self.basis, self.context, g)

    def contains(self, g: Sequence[int]) -> bool:
        return not self.normal_form(g)

    def __contains__(self, g) -> bool:
        if isinstance(g, TruncatedPolynomial):
            g = g.coefficients
        return self.contains(g)

    def issubset(self, other: "TruncatedLambdaIdeal") -> bool:
        _check_same(self.context, other.context)
        return all(other.contains(b) for _, b in self.basis)

    def add(self, gens: Iterable) -> "TruncatedLambdaIdeal":
        return ideal_from_generators(list(gens) + self.generators(), self.context)

    def lattice_rows(self) -> list:
        """Row basis of the ideal as a sub-lattice of (Z/3^e)^degree.

        Row for column i is ``T^(i - deg) * B_kappa(i)``; columns with
        ``kappa(i) = e`` contribute the row ``3^e * T^i``.
        """
        d = self.context.degree
        kap = self.profile()
        piv = dict(self.basis)
        rows = []
        for i in range(d):
            if kap[i] == self.context.e:
                row = [0] * d
                row[i] = self.context.modulus
            else:
                b = piv[kap[i]]
                row = [0] * (i - (len(b) - 1)) + list(b)
                row = row + [0] * (d - len(row))
                row = self.context.reduce(row)
                row = row + [0] * (d - len(row))
            rows.append(row)
        return rows

    def reduce_to_level(self, n: int) -> "TruncatedLambdaIdeal":
        """Image under ``Lambda/(w_m) -> Lambda/(w_n)`` for ``n <= m``."""
        if n > self.level:
            raise ValueError("can only reduce to a lower level")
        ctx = self.context.with_level(n)
        return ideal_from_generators(self.generators(), ctx)

    def with_exponent(self, e: int) -> "TruncatedLambdaIdeal":
        """Re-express at another exponent.

        Lowering ``e`` is always an image.  Raising ``e`` is only meaningful
        when the ideal already contains ``3^t`` with ``t < e`` (exponent
        sufficiency); then the lift is unique.
        """
        if e >= self.e and self.exponent >= self.e and e != self.e:
            raise ValueError("cannot lift an ideal whose exponent is not below 3^e")
        return ideal_from_generators(self.generators(), self.context.with_exponent(e))

    def involuted(self) -> "TruncatedLambdaIdeal":
        """Image under the involution ``T -> (1+T)^(-1) - 1``."""
        gens = [involution(b, self.level, self.variant) for b in self.generators()]
        return ideal_from_generators(gens, self.context)

    def describe(self) -> str:
        return ", ".join(format_poly(b) for b in self.generators()) or "0"


def _check_same(a: LambdaContext, b: LambdaContext):
    if a != b:
        raise ValueError(f"context mismatch: {a} vs {b}")


def ideal_from_generators(gens: Iterable, context: LambdaContext) -> TruncatedLambdaIdeal:
    """Canonical form of the ideal generated by ``gens``, ``3^e`` and ``w``."""
    st = _GroebnerState(context)
    st.insert(list(context.omega))
    for g in gens:
        if isinstance(g, TruncatedPolynomial):
            _check_same(g.context, context)
            g = g.coefficients
        st.insert(context.reduce(g))
    st.saturate()
    return TruncatedLambdaIdeal(context, st.canonical())


def quotient_order(ideal: TruncatedLambdaIdeal) -> int:
    """log_3 of the order of the quotient ring."""
    return ideal.log3_index


def tk_invariant(ideal: TruncatedLambdaIdeal):
    """Smallest k with T^k in I + (3); ``math.inf`` for a zero image."""
    for k, b in ideal.basis:
        if k == 0:
            for i, x in enumerate(b):
                if x % 3:
                    return i
    return float("inf")


def stabilization_level(ideal: TruncatedLambdaIdeal) -> int:
    """Smallest m with omega_m (resp. omega'_m) in the ideal.

    For the plain variant this is the order of ``1+T`` in the unit group of
    the quotient, as a power of 3.
    """
    for m in range(ideal.level + 1):
        if ideal.contains(omega(m, ideal.variant)):
            return m
    raise ArithmeticError("quotient not finite within the working context; raise e or n")


def order_of_one_plus_T(ideal: TruncatedLambdaIdeal) -> int:
    """Level n such that 1+T has order 3^n modulo the ideal."""
    if ideal.is_unit():
        raise ValueError("the unit ideal has a trivial quotient")
    for m in range(ideal.level + 1):
        if ideal.contains(omega(m, OMEGA)):
            return m
    raise ArithmeticError("quotient not finite within the working context; raise e or n")


def stabilization_check(lower: TruncatedLambdaIdeal, upper: TruncatedLambdaIdeal) -> bool:
    """True when ``J + (w_n) = J + (w_{n+1})`` for the two truncations."""
    if lower.e != upper.e or lower.variant != upper.variant:
        raise ValueError("context mismatch")
    if upper.level != lower.level + 1:
        raise ValueError("levels must be consecutive")
    return upper.reduce_to_level(lower.level) == lower and upper.log3_index == lower.log3_index


@dataclass(frozen=True)
class FinitenessWitness:
    """Lower bound 3^a for the level-m quotient, upper bound 3^b at level n."""

    m: int
    n: int
    a: int
    b: int

    def __post_init__(self):
        if self.n < self.m or self.m < 0:
            raise ValueError("need n >= m >= 0")
        if self.b < self.a or self.a < 0:
            raise ValueError("need b >= a >= 0")


def finiteness_lemma(w: FinitenessWitness) -> bool:
    """True iff ``b - a < n - m``, which forces ``omega_n M = 0``."""
    return w.b - w.a < w.n - w.m


def format_poly(c: Sequence[int], var: str = "T") -> str:
    terms = []
    for i in range(len(c) - 1, -1, -1):
        x = c[i]
        if not x:
            continue
        mono = "" if i == 0 else (var if i == 1 else f"{var}^{i}")
        if mono and abs(x) == 1:
            s = mono
        elif mono:
            s = f"{abs(x)}{mono}"
        else:
            s = str(abs(x))
        sign = "-" if x < 0 else "+"
        terms.append((sign, s))
    if not terms:
        return "0"
    out = ("-" if terms[0][0] == "-" else "") + terms[0][1]
    for sign, s in terms[1:]:
        out += sign + s
    return out


def parse_poly(text: str, var: str = "T") -> list:
    """Parse ``T^3+3T-9`` style integer polynomials."""
    s = text.replace(" ", "").replace("*", "")
    if not s:
        raise ValueError("empty polynomial")
    if s[0] not in "+-":
        s = "+" + s
    coeffs: dict[int, int] = {}
    i = 0
    while i < len(s):
        sign = -1 if s[i] == "-" else 1
        if s[i] not in "+-":
            raise ValueError(f"bad polynomial {text!r}")
        i += 1
        j = i
        while j < len(s) and s[j].isdigit():
            j += 1
        num = int(s[i:j]) if j > i else None
        i = j
        deg = 0
        if i < len(s) and s[i] == var:
            i += 1
            deg = 1
            if i < len(s) and s[i] == "^":
                i += 1
                j = i
                while j < len(s) and s[j].isdigit():
                    j += 1
                if j == i:
                    raise ValueError(f"bad exponent in {text!r}")
                deg = int(s[i:j])
                i = j
        elif num is None:
            raise ValueError(f"bad term in {text!r}")
        coeffs[deg] = coeffs.get(deg, 0) + sign * (1 if num is None else num)
    top = max(coeffs)
    return strip([coeffs.get(k, 0) for k in range(top + 1)])


def _smith(C: Sequence[Sequence[int]], b: Sequence[int], e: int):
    """Diagonalise C over Z/3^e by row and column operations.

    Returns (valuations, transformed b, column transform Q) with z = Q w.
    """
    q = P**e
    m = len(C)
    n = len(C[0]) if m else 0
    A = [[x % q for x in row] for row in C]
    rhs = [x % q for x in b]
    colop = [[int(i == j) for j in range(n)] for i in range(n)]
    diag = []
    k = 0
    while k < min(m, n):
        best = None
        for i in range(k, m):
            for j in range(k, n):
                if A[i][j]:
                    v = v3(A[i][j])
                    if best is None or v < best[0]:
                        best = (v, i, j)
        if best is None:
            break
        v, i, j = best
        A[k], A[i] = A[i], A[k]
        rhs[k], rhs[i] = rhs[i], rhs[k]
        for row in A:
            row[k], row[j] = row[j], row[k]
        for row in colop:
            row[k], row[j] = row[j], row[k]
        u = pow(A[k][k] // P**v, -1, q)
        A[k] = [x * u % q for x in A[k]]
        rhs[k] = rhs[k] * u % q
        piv = P**v
        for i2 in range(m):
            if i2 != k and A[i2][k]:
                t = A[i2][k] // piv
                A[i2] = [(x - t * y) % q for x, y in zip(A[i2], A[k])]
                rhs[i2] = (rhs[i2] - t * rhs[k]) % q
        for j2 in range(k + 1, n):
            if A[k][j2]:
                t = A[k][j2] // piv
                for row in A:
                    row[j2] = (row[j2] - t * row[k]) % q
                for row in colop:
                    row[j2] = (row[j2] - t * row[k]) % q
        diag.append(v)
        k += 1
    return diag, rhs, colop


def solve_mod_prime_power(C: Sequence[Sequence[int]], b: Sequence[int], e: int):
    """Some z with C z = b over Z/3^e, or None."""
    n = len(C[0]) if C else 0
    diag, rhs, colop = _smith(C, b, e)
    w = [0] * n
    for i in range(len(rhs)):
        if i < len(diag):
            piv = P ** diag[i]
            if rhs[i] % piv:
                return None
            w[i] = rhs[i] // piv
        elif rhs[i]:
            return None
    q = P**e
    return [sum(colop[i][j] * w[j] for j in range(n)) % q for i in range(n)]


def kernel_mod_prime_power(C: Sequence[Sequence[int]], e: int) -> list:
    """Generators of {z : C z = 0 over Z/3^e}."""
    n = len(C[0]) if C else 0
    diag, _, colop = _smith(C, [0] * len(C), e)
    q = P**e
    out = []
    for j in range(n):
        scale = P ** (e - diag[j]) if j < len(diag) else 1
        if scale == q:
            continue
        out.append([colop[i][j] * scale % q for i in range(n)])
    return out


def multiplication_rows(x: Sequence[int], ctx: LambdaContext) -> list:
    """Rows T^i x mod (3^e, w), i < degree, each padded to the degree."""
    d = ctx.degree
    rows = []
    cur = ctx.reduce(x)
    for _ in range(d):
        rows.append(cur + [0] * (d - len(cur)))
        cur = ctx.times_T(cur)
    return rows


def divide_in_quotient(x: Sequence[int], target: Sequence[int], ctx: LambdaContext):
    """Some y with x*y = target in (Z/3^e)[T]/(w), or None."""
    d = ctx.degree
    rows = multiplication_rows(x, ctx)
    C = [[rows[i][j] for i in range(d)] for j in range(d)]
    t = ctx.reduce(target)
    t = t + [0] * (d - len(t))
    y = solve_mod_prime_power(C, t, ctx.e)
    return None if y is None else strip(y)


def colon_ideal(U: "TruncatedLambdaIdeal", v: int) -> "TruncatedLambdaIdeal":
    """(3^v : U) as an ideal of Lambda/(3^v, w): all b with b*U inside 3^v."""
    small = U.context.with_exponent(v)
    d = small.degree
    rows = []
    for u in U.generators():
        M = multiplication_rows(u, small)  # M[i] = T^i u
        rows.extend([M[i][j] for i in range(d)] for j in range(d))
    if not rows:
        return ideal_from_generators([[1]], small)
    return ideal_from_generators(kernel_mod_prime_power(rows, v), small)


def group_ring_exponents(y: Sequence[int], level: int) -> list:
    """Rewrite a polynomial in T as sum_j Y_j gamma^j with gamma = 1 + T."""
    d = P**level
    out = [0] * d
    for i, c in enumerate(y):
        if not c:
            continue
        for j in range(i + 1):
            out[j % d] += c * comb(i, j) * (-1) ** (i - j)
    return out
