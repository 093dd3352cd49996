"""Arithmetic of the real quadratic field Q(sqrt f).

Class groups come from cycles of reduced indefinite binary quadratic forms
with Gauss composition; fundamental units from the continued fraction of
``(s + sqrt f)/2``.  Everything is exact integer arithmetic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from math import isqrt
from typing import Iterator


class NotFundamental(ValueError):
    pass


def squarefree(n: int) -> bool:
    if n <= 0:
        return False
    d = 2
    while d * d <= n:
        if n % (d * d) == 0:
            return False
        if n % d == 0:
            n //= d
        d += 1 if d == 2 else 2
    return True


def is_fundamental(f: int) -> bool:
    if f <= 1:
        return False
    if f % 4 == 1:
        return squarefree(f)
    if f % 4 == 0:
        d = f // 4
        return d % 4 in (2, 3) and squarefree(d)
    return False


@dataclass(frozen=True)
class FundamentalDiscriminant:
    """A real quadratic fundamental discriminant with its 3-adic data.

    ``fprime`` is ``f/3`` when 3 | f and ``f`` otherwise; the n-th layer of
    the cyclotomic Z_3-tower sits in Q(zeta_m) with ``m = 3^(n+1) * fprime``.
    """

    f: int

    def __post_init__(self):
        if not is_fundamental(self.f):
            raise NotFundamental(f"{self.f} is not a real quadratic fundamental discriminant")

    @property
    def residue3(self) -> int:
        return self.f % 3

    @property
    def fprime(self) -> int:
        return self.f // 3 if self.f % 3 == 0 else self.f

    @property
    def variant(self) -> str:
        return "omega-prime" if self.residue3 == 1 else "omega"

    def cyclotomic_conductor(self, n: int) -> int:
        return 3 ** (n + 1) * self.fprime


def validate_discriminant(f: int) -> FundamentalDiscriminant:
    if f <= 1:
        raise NotFundamental(f"{f} is not > 1")
    return FundamentalDiscriminant(int(f))


def fundamental_discriminants(lo: int, hi: int) -> Iterator[int]:
    """Real quadratic fundamental discriminants in ``[lo, hi)``, ascending."""
    for f in range(max(lo, 2), hi):
        if is_fundamental(f):
            yield f


def kronecker(f: int, a: int) -> int:
    """Kronecker symbol (f/a) for a > 0, i.e. the quadratic character of Q(sqrt f)."""
    import gmpy2

    return int(gmpy2.kronecker(f, a))


# -- units ---------------------------------------------------------------

@dataclass(frozen=True)
class QuadraticUnit:
    """The unit (x + y sqrt f)/2."""

    x: int
    y: int
    f: int

    @property
    def norm(self) -> int:
        return (self.x * self.x - self.f * self.y * self.y) // 4

    def __mul__(self, other: "QuadraticUnit") -> "QuadraticUnit":
        x = (self.x * other.x + self.f * self.y * other.y) // 2
        y = (self.x * other.y + self.y * other.x) // 2
        return QuadraticUnit(x, y, self.f)

    def __pow__(self, k: int) -> "QuadraticUnit":
        out = QuadraticUnit(2, 0, self.f)
        base = self
        if k < 0:
            base = base.conjugate() if base.norm == 1 else QuadraticUnit(-base.x, base.y, self.f)
            k = -k
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def conjugate(self) -> "QuadraticUnit":
        return QuadraticUnit(self.x, -self.y, self.f)

    def log(self) -> float:
        """log |u| in the embedding with sqrt f > 0 (safe for huge x, y)."""
        import mpmath

        with mpmath.workdps(30):
            return float(mpmath.log(abs((mpmath.mpf(self.x) + mpmath.mpf(self.y) * mpmath.sqrt(self.f)) / 2)))


@lru_cache(maxsize=4096)
def fundamental_unit(f: int) -> QuadraticUnit:
    """Fundamental unit > 1 of Q(sqrt f) via continued fraction convergents."""
    s = f % 2
    r = isqrt(f)
    # omega = (P + sqrt f)/Q with Q | f - P^2
    P, Q = s, 2
    p_prev, p = 1, (P + r) // Q
    q_prev, q = 0, 1
    a = p
    while True:
        X = 2 * p - q * s
        if X * X - f * q * q in (4, -4):
            return QuadraticUnit(X, q, f)
        P = a * Q - P
        Q = (f - P * P) // Q
        a = (P + r) // Q
        p_prev, p = p, a * p + p_prev
        q_prev, q = q, a * q + q_prev


# -- binary quadratic forms --------------------------------------------

Form = tuple  # (a, b, c)


def _sqrt_floor(D: int) -> int:
    return isqrt(D)


def is_reduced(form: Form, D: int) -> bool:
    """|sqrt D - 2|a|| < b < sqrt D."""
    return _reduced_exact(form[0], form[1], D)


def _reduced_exact(a: int, b: int, D: int) -> bool:
    if b <= 0 or b * b >= D:
        return False
    t = 2 * abs(a)
    # sqrt D is irrational, so compare squares
    lo = t - b
    hi = t + b
    return (lo < 0 or lo * lo < D) and D < hi * hi


def _normalize(a: int, b: int, c: int, D: int) -> Form:
    s = _sqrt_floor(D)
    A = abs(a)
    if A * A > D:
        # -|a| < b <= |a|
        t = (A - b) // (2 * A)
        b2 = b + 2 * A * t
    else:
        # sqrt D - 2|a| < b < sqrt D: largest b2 = b mod 2|a| with b2 <= s
        t = (s - b) // (2 * A)
        b2 = b + 2 * A * t
    c2 = (b2 * b2 - D) // (4 * a)
    return (a, b2, c2)


def rho(form: Form, D: int) -> Form:
    a, b, c = form
    return _normalize(c, -b, a, D)


def reduce_form(form: Form, D: int) -> Form:
    a, b, c = form
    f = _normalize(a, b, c, D)
    for _ in range(10_000):
        if _reduced_exact(f[0], f[1], D):
            return f
        f = rho(f, D)
    raise RuntimeError("reduction did not terminate")


def reduced_forms(D: int) -> list:
    """All reduced forms (a, b, c) of discriminant D > 0."""
    out = []
    s = _sqrt_floor(D)
    for b in range(1, s + 1):
        if (b - D) % 2:
            continue
        N = (D - b * b) // 4  # = -a c > 0
        if N <= 0:
            continue
        for A in range(1, isqrt(N) + 1):
            if N % A:
                continue
            for aa in {A, N // A}:
                for a in (aa, -aa):
                    if _reduced_exact(a, b, D):
                        out.append((a, b, -N // a))
    return sorted(set(out))


def compose(f1: Form, f2: Form, D: int) -> Form:
    """Gauss composition of two primitive forms with positive first coefficients."""
    a1, b1, c1 = f1
    a2, b2, c2 = f2
    if a1 <= 0 or a2 <= 0:
        raise ValueError("compose expects a > 0")
    if a1 > a2:
        a1, b1, c1, a2, b2, c2 = a2, b2, c2, a1, b1, c1
    s = (b1 + b2) // 2
    n = b2 - s
    if a2 % a1 == 0:
        y1, d = 0, a1
    else:
        d, u, _ = _xgcd(a2, a1)
        y1 = u
    if s % d == 0:
        y2, x2, d1 = -1, 0, d
    else:
        d1, x2, y2 = _xgcd(s, d)
        y2 = -y2
    v1 = a1 // d1
    v2 = a2 // d1
    r = (y1 * y2 * n - x2 * c2) % v1
    b3 = b2 + 2 * v2 * r
    a3 = v1 * v2
    c3 = (b3 * b3 - D) // (4 * a3)
    return (a3, b3, c3)


def _xgcd(a: int, b: int):
    x0, x1, y0, y1 = 1, 0, 0, 1
    while b:
        q, a, b = a // b, b, a % b
        x0, x1 = x1, x0 - q * x1
        y0, y1 = y1, y0 - q * y1
    return a, x0, y0


@dataclass(frozen=True)
class ClassGroupData:
    f: int
    h_narrow: int
    h: int
    h3: int
    sylow3: tuple  # exponents of the cyclic factors, descending
    unit_norm: int


class _NarrowClassGroup:
    def __init__(self, D: int):
        self.D = D
        forms = reduced_forms(D)
        self.cycle_of: dict = {}
        self.cycles: list = []
        for fm in forms:
            if fm in self.cycle_of:
                continue
            cyc = []
            g = fm
            while g not in self.cycle_of:
                self.cycle_of[g] = len(self.cycles)
                cyc.append(g)
                g = rho(g, D)
            self.cycles.append(cyc)
        self.rep = [next(g for g in cyc if g[0] > 0) for cyc in self.cycles]
        principal = reduce_form(self._principal(), D)
        self.identity = self.cycle_of[principal]

    def _principal(self) -> Form:
        D = self.D
        b = D % 2
        return (1, b, (b * b - D) // 4)

    def __len__(self):
        return len(self.cycles)

    def mul(self, i: int, j: int) -> int:
        g = compose(self.rep[i], self.rep[j], self.D)
        return self.cycle_of[reduce_form(g, self.D)]

    def order(self, i: int) -> int:
        k, x = 1, i
        while x != self.identity:
            x = self.mul(x, i)
            k += 1
        return k


def class_group_3part(f: int) -> ClassGroupData:
    """Class number and 3-Sylow structure of Q(sqrt f) from reduced forms."""
    fd = validate_discriminant(f)
    G = _NarrowClassGroup(fd.f)
    hn = len(G)
    eps = fundamental_unit(fd.f)
    h = hn if eps.norm == -1 else hn // 2
    h3 = 0
    t = h
    while t % 3 == 0:
        t //= 3
        h3 += 1
    sylow: tuple = ()
    if h3:
        # counts of elements killed by 3^k determine the 3-Sylow invariants
        orders = [G.order(i) for i in range(hn)]
        ranks = []
        k = 1
        prev = 1
        while True:
            cnt = sum(1 for o in orders if (3**k) % o == 0)
            if cnt == prev:
                break
            ranks.append(round(math.log(cnt // prev, 3)))
            prev = cnt
            k += 1
        # ranks[k-1] = number of cyclic factors of order >= 3^k
        inv = []
        for k in range(len(ranks), 0, -1):
            more = ranks[k] if k < len(ranks) else 0
            inv.extend([k] * (ranks[k - 1] - more))
        sylow = tuple(inv)
    return ClassGroupData(fd.f, hn, h, h3, sylow, eps.norm)


def analytic_class_number(f: int) -> int:
    """Class number from 2 h log(eps) = -sum chi(a) log(2 sin(pi a/f)); a test oracle."""
    s = 0.0
    for a in range(1, f):
        c = kronecker(f, a)
        if c:
            s -= c * math.log(2 * math.sin(math.pi * a / f))
    return round(s / (2 * fundamental_unit(f).log()))


# -- 3-adic logarithm ------------------------------------------------------

class PrecisionError(ArithmeticError):
    pass


def _sqrt_mod_3power(f: int, E: int) -> int:
    if f % 3 != 1:
        raise ValueError("sqrt f exists in Z_3 only for f = 1 mod 3")
    s = 1
    mod = 3
    for _ in range(E):
        mod3 = mod * 3
        # Newton step for s^2 = f
        s = (s - (s * s - f) * pow(2 * s, -1, mod3)) % mod3
        mod = mod3
    return s % 3**E


def padic_log3_valuation(u: QuadraticUnit, e: int = 12):
    """3-adic valuation of log_3(u) for f = 1 mod 3 (3 split).

    The unit is embedded via a 3-adic square root of f, squared to land in
    1 + 3Z_3, and the log series is summed to precision 3^e.  Returns
    ``math.inf`` for u = +-1 exactly.
    """
    f = u.f
    if f % 3 != 1:
        raise ValueError("3 must split: need f = 1 mod 3")
    if u.y == 0:
        return math.inf
    E = e + 8
    mod = 3**E
    s = _sqrt_mod_3power(f, E)
    z0 = ((u.x + u.y * s) * pow(2, -1, mod)) % mod
    z = (z0 * z0 - 1) % mod  # u^2 = 1 + z, 3 | z
    if z % 3:
        raise ArithmeticError("unit square not 1 mod 3")
    # log(1+z) = sum (-1)^(k+1) z^k / k; terms with v(z^k/k) >= E dropped
    from fractions import Fraction

    acc = Fraction(0)
    zk = 1
    k = 1
    vz = _val(z, E)
    while True:
        zk = (zk * z) % mod
        if k * vz - _val(k, 10**6) >= E:
            break
        acc += Fraction((-1) ** (k + 1) * zk, k)
        k += 1
    num = acc.numerator * pow(acc.denominator, -1, mod) % mod if acc.denominator % 3 else None
    if num is None:
        vden = _val(acc.denominator, 10**6)
        n = acc.numerator
        val = _val(n, E) - vden if n % mod else E - vden
    else:
        val = _val(num, E)
    # terms carry precision about E - log_3(k) for the surviving k
    reliable = e
    if val >= reliable:
        raise PrecisionError(f"valuation >= {reliable}; raise precision")
    return val


def _val(x: int, cap: int) -> int:
    if x == 0:
        return cap
    k = 0
    while x % 3 == 0 and k < cap:
        x //= 3
        k += 1
    return k
