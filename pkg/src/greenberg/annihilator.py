"""Upper bounds for J + (omega_n) from cyclotomic units modulo auxiliary primes.

For a prime r = 1 (mod 3^e f') every prime of Q(zeta_m) above r has residue
field F_r, so the conjugates of the cyclotomic unit eta_n reduce to
explicit residues.  Reading them through the 3^e-th power residue character
gives a Galois-equivariant map to (Z/3^e)[G_n]; the image of eta_n lies in
J + (3^e, omega_n), and the images for many r generate it.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Iterable, Iterator, Optional

import numpy as np
import sympy

from .iwasawa import (
    OMEGA,
    OMEGA_PRIME,
    LambdaContext,
    TruncatedLambdaIdeal,
    TruncatedPolynomial,
    ideal_from_generators,
)
from .modarith import MAX_MODULUS, mulmod, power_table, prod_rows
from .quadfield import FundamentalDiscriminant, kronecker

log = logging.getLogger(__name__)

GAMMA_EXPONENT = 4  # gamma acts on 3-power roots of unity by zeta -> zeta^4
CHUNK = 1 << 21


class SearchHorizonExceeded(RuntimeError):
    pass


class StreamExhausted(RuntimeError):
    pass


@dataclass(frozen=True)
class AuxiliaryPrime:
    r: int
    M: int  # 3^e * f'
    e: int
    g: int  # primitive root mod r
    chi_base: int  # g^((r-1)/3^e), generates the 3^e-torsion
    certified: bool = True  # deterministic primality (r < 2^64)

    def root_of_unity(self, m: int) -> int:
        if (self.r - 1) % m:
            raise ValueError(f"{m} does not divide r - 1")
        return pow(self.g, (self.r - 1) // m, self.r)


def _primitive_root(r: int, known: dict) -> int:
    fac = dict(known)
    rest = (r - 1)
    for p in fac:
        while rest % p == 0:
            rest //= p
    for p, k in sympy.factorint(rest).items():
        fac[p] = fac.get(p, 0) + k
    qs = [(r - 1) // p for p in fac]
    g = 2
    while True:
        if all(pow(g, q, r) != 1 for q in qs):
            return g
        g += 1


def make_aux_prime(r: int, fd: FundamentalDiscriminant, e: int, g: Optional[int] = None) -> AuxiliaryPrime:
    M = 3**e * fd.fprime
    if (r - 1) % M:
        raise ValueError(f"{r} is not 1 mod {M}")
    if g is None:
        known = {p: 0 for p in sympy.factorint(M)}
        g = _primitive_root(r, known)
    return AuxiliaryPrime(r, M, e, g, pow(g, (r - 1) // 3**e, r), r < 2**64)


def find_aux_primes(fd: FundamentalDiscriminant, e: int, n: int, count: int,
                    start: int = 1, horizon: int = 10**7) -> list:
    """The first ``count`` primes r = 1 (mod 3^e f') (ascending, k >= start)."""
    if e < n + 1:
        raise ValueError("need e >= n + 1 so r splits completely in the level-n field")
    M = 3**e * fd.fprime
    out = []
    k = start
    while len(out) < count:
        if k - start > horizon:
            raise SearchHorizonExceeded(f"no more primes 1 mod {M} within {horizon} steps")
        r = k * M + 1
        if r % fd.f and sympy.isprime(r):
            out.append(make_aux_prime(r, fd, e))
        k += 1
    return out


def iter_aux_primes(fd: FundamentalDiscriminant, e: int, n: int, horizon: int = 10**7) -> Iterator[AuxiliaryPrime]:
    if e < n + 1:
        raise ValueError("need e >= n + 1")
    M = 3**e * fd.fprime
    for k in range(1, horizon + 1):
        r = k * M + 1
        if r % fd.f and sympy.isprime(r):
            yield make_aux_prime(r, fd, e)
    raise SearchHorizonExceeded(f"no more primes 1 mod {M} within {horizon} steps")


def chi(x: int, P: AuxiliaryPrime) -> int:
    """3^e-th power residue character of x mod r, as an element of Z/3^e.

    Discrete log of x^((r-1)/3^e) to the base ``chi_base``, found digit by
    digit in base 3.
    """
    r, e = P.r, P.e
    x %= r
    if x == 0:
        raise ZeroDivisionError("chi(0) undefined")
    h = pow(x, (r - 1) // 3**e, r)
    z3 = pow(P.chi_base, 3 ** (e - 1), r)
    digits = {1: 0, z3: 1, z3 * z3 % r: 2}
    acc = 0
    inv_base = pow(P.chi_base, -1, r)
    for i in range(e):
        t = h * pow(inv_base, acc, r) % r
        d = digits.get(pow(t, 3 ** (e - 1 - i), r))
        if d is None:
            raise ArithmeticError("element is not in the 3^e-torsion")
        acc += d * 3**i
    return acc


@dataclass(frozen=True)
class AnnihilatorElement:
    alpha: TruncatedPolynomial
    source_prime: int
    level: int
    case: int  # f mod 3


class CosetLayout:
    """Units mod m grouped by their class in Gal(F_n/Q) = <sigma> x G_n.

    Row ``s*3^n + j`` is the coset of exponents a with chi_f(a) = (+1, -1)[s]
    and a = +-4^j (mod 3^(n+1)).  Under CRT, a <-> (x, y) in
    (Z/3^(n+1))^* x (Z/f')^*, so a row is {4^j} x Y_t together with
    {-4^j} x Y_t' for two halves Y_+-1 of (Z/f')^*.  Rows are never stored.
    """

    def __init__(self, fd: FundamentalDiscriminant, n: int):
        self.fd = fd
        self.n = n
        self.m = fd.cyclotomic_conductor(n)
        self.degree = 3**n
        self.three = 3 ** (n + 1)
        m, three, f0 = self.m, self.three, fd.fprime
        # a = x*e1 + y*e2 (mod m)
        self.e1 = f0 * pow(f0, -1, three) % m
        self.e2 = three * pow(three, -1, f0) % m if f0 > 1 else 0
        pos = [1]
        for _ in range(self.degree - 1):
            pos.append(pos[-1] * GAMMA_EXPONENT % three)
        self.pos = np.array(pos, dtype=np.int64)
        self.neg = three - self.pos
        y = np.arange(1, max(f0, 2), dtype=np.int64)
        y = y[np.gcd(y, f0) == 1]
        self.ys = {t: y[self._chi((self.e1 + y * self.e2) % m) == t] for t in (1, -1)}
        # chi_f on (-1, 1); (4^j, 1) = (1, 1) mod 3 gives +1
        self.neg_sign = int(self._chi(np.array([(self.e1 * (three - 1) + self.e2) % m]))[0])
        if len(self.ys[1]) != len(self.ys[-1]) or self.neg_sign not in (1, -1):
            raise AssertionError("coset labelling failed")
        self.rows = 2 * self.degree
        self.width = 2 * len(self.ys[1])

    def _chi(self, a: np.ndarray) -> np.ndarray:
        f = self.fd.f
        return np.array([kronecker(f, int(v) % f) for v in a], dtype=np.int64)

    def _parts(self, s: int):
        """(x values, y values) pairs making up the rows with sign index s."""
        t = 1 - 2 * s
        return [(self.pos, self.ys[t]), (self.neg, self.ys[t * self.neg_sign])]

    @cached_property
    def exps(self) -> np.ndarray:
        """All exponents, one row per coset; only sensible for small levels."""
        out = []
        for s in (0, 1):
            blocks = [(xs[:, None] * self.e1 + ys[None, :] * self.e2) % self.m for xs, ys in self._parts(s)]
            out.append(np.concatenate(blocks, axis=1))
        return np.concatenate(out, axis=0)

    def coset_products(self, w: int, r: int) -> list:
        """prod over each coset of (1 - w^a) mod r, as Python ints."""
        if r >= MAX_MODULUS:
            raise ValueError("modulus too large for vectorised mulmod")
        A = power_table(pow(w, self.e1, r), self.three, r)
        B = power_table(pow(w, self.e2, r), max(self.fd.fprime, 1), r)
        out = []
        for s in (0, 1):
            row = np.ones(self.degree, dtype=np.int64)
            for xs, ys in self._parts(s):
                row = mulmod(row, self._outer_products(A[xs], B[ys], r), r)
            out.extend(int(v) for v in row)
        return out

    @staticmethod
    def _outer_products(ax: np.ndarray, by: np.ndarray, r: int) -> np.ndarray:
        """prod_y (1 - ax[i]*by[y]) mod r for each i."""
        out = np.empty(len(ax), dtype=np.int64)
        step = max(1, CHUNK // max(len(by), 1))
        for lo in range(0, len(ax), step):
            vals = np.mod(1 - mulmod(ax[lo:lo + step, None], by[None, :], r), r)
            if (vals == 0).any():
                raise ArithmeticError("w is not a primitive m-th root of unity")
            out[lo:lo + step] = prod_rows(vals, r)
        return out

    def conjugate_images(self, w: int, r: int) -> list:
        """u_j = gamma^j(eta_n) mod the prime above r fixed by zeta -> w."""
        P = self.coset_products(w, r)
        d = self.degree
        return [P[d + j] * pow(P[j], -1, r) % r for j in range(d)]


@lru_cache(maxsize=8)
def coset_layout(f: int, n: int) -> CosetLayout:
    return CosetLayout(FundamentalDiscriminant(f), n)


def alpha_from_characters(chis: list, n: int, e: int, variant: str) -> list:
    """sum_j chi_j gamma^{-j} in (Z/3^e)[T]/(omega_n); divided by T for omega'."""
    q = 3**e
    d = 3**n
    vec = np.array(chis, dtype=np.int64) % q
    if variant == OMEGA_PRIME and int(vec.sum()) % q:
        raise ArithmeticError("norm of eta_n is not trivial in the split case")
    # gamma^{-j} = (1+T)^{(d-j) mod d} modulo omega_n; Horner in (1+T)
    c = vec[(-np.arange(d)) % d]
    p = np.zeros(d, dtype=np.int64)
    for k in range(d - 1, -1, -1):
        p[1:] = p[1:] + p[:-1]
        p[0] += c[k]
        p %= q
    if variant == OMEGA_PRIME:
        p = p[1:]
    return [int(x) for x in p]


def eta_image(fd: FundamentalDiscriminant, n: int, P: AuxiliaryPrime, e: Optional[int] = None) -> AnnihilatorElement:
    """Image alpha_r of eta_n under the character at the prime above r."""
    e = P.e if e is None else e
    if e > P.e:
        raise ValueError("prime does not support this exponent")
    if P.r >= MAX_MODULUS:
        raise ValueError("auxiliary prime too large")
    m = fd.cyclotomic_conductor(n)
    if (P.r - 1) % m:
        raise ValueError("prime does not split completely at this level")
    w = P.root_of_unity(m)
    layout = coset_layout(fd.f, n)
    us = layout.conjugate_images(w, P.r)
    Pe = P if e == P.e else AuxiliaryPrime(P.r, P.M, e, P.g, pow(P.g, (P.r - 1) // 3**e, P.r), P.certified)
    chis = [chi(u, Pe) for u in us]
    ctx = LambdaContext(e, n, fd.variant)
    coeffs = alpha_from_characters(chis, n, e, fd.variant)
    return AnnihilatorElement(TruncatedPolynomial.from_integers(coeffs, ctx), P.r, n, fd.residue3)


@dataclass
class SaturationReport:
    primes_used: int = 0
    stable_count: int = 0
    saturated: bool = False
    primes: list = field(default_factory=list)


def accumulate_ideal(fd: FundamentalDiscriminant, n: int, e: int,
                     stream: Iterable[AnnihilatorElement], window: int = 5,
                     strict: bool = False, target: Optional[int] = None,
                     start: Optional[TruncatedLambdaIdeal] = None):
    """Fold annihilator elements into J + (3^e, omega_n) until ``window`` in a row change nothing.

    With a known lower bound ``target`` for log3 of the quotient order, a
    stable window only counts once the index has come down to it.
    """
    ctx = LambdaContext(e, n, fd.variant)
    ideal = start if start is not None else ideal_from_generators([], ctx)
    rep = SaturationReport()
    for el in stream:
        if el.alpha.context != ctx:
            raise ValueError("annihilator element from a different context")
        rep.primes_used += 1
        rep.primes.append(el.source_prime)
        if el.alpha in ideal:
            rep.stable_count += 1
        else:
            ideal = ideal.add([el.alpha.coefficients])
            rep.stable_count = 0
        if rep.stable_count >= window and (target is None or ideal.log3_index <= target):
            rep.saturated = True
            break
    if strict and not rep.saturated:
        raise StreamExhausted(f"stream ended after {rep.primes_used} primes without stability")
    return ideal, rep


@dataclass
class UpperBound:
    ideal: TruncatedLambdaIdeal
    report: SaturationReport
    elements: list


def upper_bound(fd: FundamentalDiscriminant, n: int, e: Optional[int] = None, window: int = 5,
                max_primes: int = 64, max_e: int = 20, target: Optional[int] = None) -> UpperBound:
    """Saturated annihilator ideal at level n with self-certifying exponent.

    Starts at e = max(n + 1, 2) and raises e until the quotient's exponent
    is strictly below 3^e.  ``target`` is passed on to accumulate_ideal.
    """
    e = max(n + 1, 2) if e is None else max(e, n + 1)
    while True:
        elements = []

        def stream():
            for P in iter_aux_primes(fd, e, n):
                if len(elements) >= max_primes:
                    return
                el = eta_image(fd, n, P, e)
                elements.append(el)
                yield el

        ideal, rep = accumulate_ideal(fd, n, e, stream(), window, target=target)
        log.debug("f=%d n=%d e=%d: index 3^%d after %d primes", fd.f, n, e, ideal.log3_index, rep.primes_used)
        if ideal.exponent < e:
            return UpperBound(ideal, rep, elements)
        if e >= max_e:
            raise ArithmeticError(f"exponent schedule exhausted at e={e}")
        e += 1
