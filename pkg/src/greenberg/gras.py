"""Lower bounds for C_m by exhibiting 3-power roots of cyclotomic units.

If ``x`` generates the annihilator ideal of eta_m modulo units and
``x*y = 3^v`` in ``Lambda/(3^e, w)``, then ``eta_m^y`` must be a 3^v-th
power in F_m.  Its only possible root is real at every embedding, so the
root is pinned down by the logarithmic embedding of eta_m.  We rebuild
eta_m exactly (coordinates over Z[theta] x O_F, by CRT over split primes),
take the real roots at high precision, round, and certify the identity
``beta^(3^v) = eta^y`` by reducing it modulo every prime above enough
split primes to beat a norm bound.
"""
from __future__ import annotations

import logging
import math
import random
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import mpmath
import numpy as np
import sympy

from .annihilator import GAMMA_EXPONENT, coset_layout
from .iwasawa import (
    LambdaContext,
    TruncatedLambdaIdeal,
    colon_ideal,
    group_ring_exponents,
    ideal_from_generators,
    v3,
)
from .modarith import MAX_MODULUS
from .quadfield import FundamentalDiscriminant, kronecker

log = logging.getLogger(__name__)

CERTIFIED_YES = "CERTIFIED_YES"
CERTIFIED_NO = "CERTIFIED_NO"
INCONCLUSIVE = "INCONCLUSIVE"

VERIFIED = "VERIFIED"
REFUTED = "REFUTED"

FEASIBLE_LEVEL = 2
PRIME_BITS = 47


class PrecisionUnderflow(ArithmeticError):
    pass


# -- the field F_m and its embeddings ----------------------------------------

class FieldBasis:
    """Z-basis theta^k * {1, omega_f} of an order of F_m, k < 3^m.

    ``theta = zeta + zeta^-1`` with zeta of order 3^(m+1), and
    ``omega_f = (f mod 2 + sqrt f)/2``.  The order has 3-power index in the
    maximal order, at most 3^((3^m - 1)/2), and only when 3 | f.
    Embedding ``(s, j)``, indexed ``s*3^m + j``, sends zeta_M to
    zeta_M^t for any t with chi_f(t) = (1, -1)[s] and t = +-4^j mod 3^(m+1).
    """

    def __init__(self, fd: FundamentalDiscriminant, m: int):
        self.fd = fd
        self.m = m
        self.half = 3**m
        self.d = 2 * self.half
        self.M = fd.cyclotomic_conductor(m)
        self.index_log3 = (3**m - 1) // 2 if fd.f % 3 == 0 else 0
        self._real = {}

    def labels(self):
        for s in (0, 1):
            for j in range(self.half):
                yield s, j

    def _rows(self, theta_of, sqrt_f, one, half):
        """Evaluate the basis at every embedding given theta_j and sqrt f images."""
        rows = []
        off = self.fd.f % 2
        for s, j in self.labels():
            th = theta_of(j)
            om = half(off + (sqrt_f if s == 0 else -sqrt_f))
            powers = [one]
            for _ in range(self.half - 1):
                powers.append(powers[-1] * th)
            rows.append(powers + [p * om for p in powers])
        return rows

    def real_rows(self, prec: int):
        if prec not in self._real:
            with mpmath.workprec(prec):
                q = 3 ** (self.m + 1)
                rows = self._rows(
                    lambda j: 2 * mpmath.cos(2 * mpmath.pi * pow(GAMMA_EXPONENT, j, q) / q),
                    mpmath.sqrt(self.fd.f),
                    mpmath.mpf(1),
                    lambda x: x / 2,
                )
                self._real[prec] = mpmath.matrix(rows)
        return self._real[prec]

    def float_rows(self) -> np.ndarray:
        q = 3 ** (self.m + 1)
        return np.array(self._rows(
            lambda j: 2 * math.cos(2 * math.pi * pow(GAMMA_EXPONENT, j, q) / q),
            math.sqrt(self.fd.f), 1.0, lambda x: x / 2), dtype=float)

    def mod_rows(self, w: int, r: int) -> list:
        """Basis images modulo the prime above r with zeta_M -> w."""
        f = self.fd.f
        q = 3 ** (self.m + 1)
        w3 = pow(w, self.M // q, r)
        wf = pow(w, self.M // f, r)
        gauss = 0
        x = 1
        for a in range(f):
            k = kronecker(f, a) if a else 0
            if k:
                gauss += k * x
            x = x * wf % r
        gauss %= r
        if gauss * gauss % r != f % r:
            raise ArithmeticError("Gauss sum does not square to f")
        inv2 = pow(2, -1, r)

        def theta(j):
            t = pow(GAMMA_EXPONENT, j, q)
            return (pow(w3, t, r) + pow(w3, q - t, r)) % r

        rows = self._rows(theta, gauss, 1, lambda x: x * inv2 % r)
        return [[x % r for x in row] for row in rows]

    def inverse_norm_log2(self) -> float:
        inv = np.linalg.inv(self.float_rows())
        return math.log2(np.abs(inv).sum(axis=1).max())

    def generator_abs_log2(self) -> float:
        """log2 of an upper bound for |basis element| at any embedding."""
        return (self.half - 1) + math.log2((1 + math.sqrt(self.fd.f)) / 2) + 1e-9


@lru_cache(maxsize=16)
def field_basis(f: int, m: int) -> FieldBasis:
    return FieldBasis(FundamentalDiscriminant(f), m)


def _solve_mod_p(A: list, b: list, r: int) -> list:
    n = len(A)
    M = [list(row) + [b[i]] for i, row in enumerate(A)]
    for c in range(n):
        piv = next((i for i in range(c, n) if M[i][c] % r), None)
        if piv is None:
            raise ArithmeticError("singular basis matrix modulo r")
        M[c], M[piv] = M[piv], M[c]
        inv = pow(M[c][c], -1, r)
        M[c] = [x * inv % r for x in M[c]]
        for i in range(n):
            if i != c and M[i][c]:
                t = M[i][c]
                M[i] = [(x - t * y) % r for x, y in zip(M[i], M[c])]
    return [M[i][n] for i in range(n)]


@dataclass
class SplitPrime:
    """A prime r = 1 (mod M) with eta_m and the basis reduced at each prime above it."""

    r: int
    w: int
    eta: list  # eta at embedding (s, j), index s*3^m + j
    basis: list


class SplitPrimePool:
    """Lazily generated primes r = 1 (mod M) near 2^PRIME_BITS, deterministic order."""

    def __init__(self, basis: FieldBasis, seed: int = 0):
        self.basis = basis
        self.primes: list = []
        self._k = (1 << PRIME_BITS) // basis.M + 1
        self._rng = random.Random(seed)

    def _next(self) -> SplitPrime:
        B = self.basis
        M = B.M
        Mfac = list(sympy.factorint(M))
        while True:
            r = self._k * M + 1
            self._k += 1
            if r >= MAX_MODULUS:
                raise ArithmeticError("ran out of split primes below the modulus cap")
            if r % B.fd.f == 0 or not sympy.isprime(r):
                continue
            while True:
                w = pow(self._rng.randrange(2, r - 1), (r - 1) // M, r)
                if all(pow(w, M // p, r) != 1 for p in Mfac):
                    break
            layout = coset_layout(B.fd.f, B.m)
            P = layout.coset_products(w, r)
            d = B.half
            eta = [0] * B.d
            for j in range(d):
                u = P[d + j] * pow(P[j], -1, r) % r
                eta[j] = u
                eta[d + j] = pow(u, -1, r)
            return SplitPrime(r, w, eta, B.mod_rows(w, r))

    def get(self, i: int) -> SplitPrime:
        while len(self.primes) <= i:
            self.primes.append(self._next())
        return self.primes[i]


def float_eta_logs(fd: FundamentalDiscriminant, m: int) -> np.ndarray:
    """log|eta_m| at each embedding from the sine-product formula, double precision."""
    layout = coset_layout(fd.f, m)
    a = layout.exps.astype(np.float64)
    logs = np.log(2 * np.abs(np.sin(np.pi * a / layout.m))).sum(axis=1)
    d = layout.degree
    plus = logs[d:] - logs[:d]
    return np.concatenate([plus, -plus])


@dataclass
class RealEmbeddingSheet:
    """log|eta_m| and sign of eta_m at every real embedding of F_m.

    ``coordinates`` are exact: eta_m = sum c_i b_i / denominator over the
    FieldBasis.  ``bits`` is the absolute accuracy of ``logs``.
    """

    f: int
    level: int
    bits: int
    coordinates: tuple
    denominator: int
    logs: list
    signs: list
    coordinate_bits: int
    primes_used: int

    @property
    def degree(self) -> int:
        return 2 * 3**self.level

    def log_sum(self):
        return mpmath.fsum(self.logs)


def _evaluate_logs(basis: FieldBasis, coords, den: int, bits: int, approx: np.ndarray):
    cbits = max(c.bit_length() for c in coords) + 8
    prec = cbits + bits + 64
    d = basis.d
    half = basis.half
    logs = [None] * d
    signs = [0] * d
    with mpmath.workprec(prec):
        R = basis.real_rows(prec)
        for j in range(half):
            big = j if approx[j] >= 0 else half + j
            other = half + j if big == j else j
            val = mpmath.fsum(R[big, i] * coords[i] for i in range(d)) / den
            if val == 0:
                raise PrecisionUnderflow("eta evaluated to zero")
            logs[big] = mpmath.log(abs(val))
            logs[other] = -logs[big]
            signs[big] = signs[other] = 1 if val > 0 else -1
    return logs, signs


_SHEETS: dict = {}
_POOLS: dict = {}


def prime_pool(f: int, m: int) -> SplitPrimePool:
    key = (f, m)
    if key not in _POOLS:
        _POOLS[key] = SplitPrimePool(field_basis(f, m))
    return _POOLS[key]


def embed_eta(fd: FundamentalDiscriminant, m: int, bits: int = 512) -> RealEmbeddingSheet:
    """Exact coordinates of eta_m and its log-embedding to ``bits`` bits."""
    key = (fd.f, m)
    old = _SHEETS.get(key)
    if old is not None and old.bits >= bits:
        return old
    basis = field_basis(fd.f, m)
    approx = float_eta_logs(fd, m)
    if old is not None:
        coords, den, cbits, used = old.coordinates, old.denominator, old.coordinate_bits, old.primes_used
    else:
        den = 3**basis.index_log3
        target = (math.log2(den) + basis.inverse_norm_log2()
                  + float(np.abs(approx).max()) / math.log(2) + 40)
        pool = prime_pool(fd.f, m)
        residues = []
        modulus = 1
        i = 0
        while modulus.bit_length() < target + 2:
            sp = pool.get(i)
            c = _solve_mod_p(sp.basis, sp.eta, sp.r)
            residues.append([x * den % sp.r for x in c])
            modulus *= sp.r
            i += 1
        coords = []
        for k in range(basis.d):
            x = int(sympy.ntheory.modular.crt([pool.get(t).r for t in range(i)],
                                              [residues[t][k] for t in range(i)])[0])
            if x > modulus // 2:
                x -= modulus
            coords.append(x)
        check = pool.get(i)
        lhs = [sum(row[k] * coords[k] for k in range(basis.d)) % check.r for row in check.basis]
        rhs = [x * den % check.r for x in check.eta]
        if lhs != rhs:
            raise ArithmeticError(f"CRT reconstruction of eta failed for f={fd.f}, m={m}")
        used = i + 1
        cbits = max(abs(c).bit_length() for c in coords)
        coords = tuple(coords)
    logs, signs = _evaluate_logs(basis, coords, den, bits, approx)
    drift = max(abs(float(logs[k]) - approx[k]) for k in range(basis.d))
    if drift > 1e-6 * max(1.0, float(np.abs(approx).max())):
        raise ArithmeticError(f"exact and sine-product embeddings disagree by {drift}")
    sheet = RealEmbeddingSheet(fd.f, m, bits, coords, den, logs, signs, cbits, used)
    _SHEETS[key] = sheet
    return sheet


# -- 3-power test ------------------------------------------------------------

@dataclass
class PowerCertificate:
    verdict: str
    exponents: tuple  # eta^(sum_j g_j gamma^j)
    power: int  # 3^k
    margin: float = math.inf  # distance of the scaled coordinates from integers
    denominator: int = 1
    primes: tuple = ()
    root: Optional[tuple] = None
    note: str = ""


def _twisted_logs(sheet: RealEmbeddingSheet, g: Sequence[int], prec: int):
    """log|eta^g| and sign of eta^g at each embedding, to ``prec`` bits."""
    half = 3**sheet.level
    with mpmath.workprec(prec):
        return _twisted_logs_at(sheet, g, half)


def _twisted_logs_at(sheet, g, half):
    L = []
    S = []
    for s in (0, 1):
        for j in range(half):
            tot = mpmath.mpf(0)
            sign = 1
            for i, gi in enumerate(g):
                if gi:
                    k = s * half + (j + i) % half
                    tot += gi * sheet.logs[k]
                    if gi % 2 and sheet.signs[k] < 0:
                        sign = -sign
            L.append(tot)
            S.append(sign)
    return L, S


def _eta_power_mod(sp: SplitPrime, g: Sequence[int], half: int) -> list:
    out = []
    for s in (0, 1):
        for j in range(half):
            x = 1
            for i, gi in enumerate(g):
                if gi:
                    x = x * pow(sp.eta[s * half + (j + i) % half], gi, sp.r) % sp.r
            out.append(x)
    return out


def _certify_root(basis: FieldBasis, sheet: RealEmbeddingSheet, g, power: int, C: list,
                  D: int, L: list, slack: float):
    """Prove (sum C_i b_i)^power == D^power * eta^g exactly, or return None.

    ``slack`` bounds |C_i - D*c_i| for the real-root coordinates c_i, so
    |sum C_i b_i| <= D*|beta| + slack*d*max|b_i| at every embedding.
    """
    bound = 1.0
    for Lt in L:
        err = slack * basis.d * mpmath.mpf(2) ** basis.generator_abs_log2()
        beta = float(mpmath.log(D * mpmath.exp(Lt / power) + err, 2))
        rhs_log2 = power * math.log2(D) + float(Lt) / math.log(2)
        bound += max(power * beta, rhs_log2) + 1
    pool = prime_pool(sheet.f, sheet.level)
    used = []
    acc = 0.0
    i = 0
    while acc <= bound:
        sp = pool.get(i)
        i += 1
        beta = [sum(row[k] * C[k] for k in range(basis.d)) % sp.r for row in sp.basis]
        eg = _eta_power_mod(sp, g, basis.half)
        Dp = pow(D, power, sp.r)
        for b, e in zip(beta, eg):
            if pow(b, power, sp.r) != Dp * e % sp.r:
                return None
        used.append(sp.r)
        acc += basis.d * math.log2(sp.r)
    return tuple(used)


def is_power(sheet: RealEmbeddingSheet, g: Sequence[int], k: int, bits: int = 512) -> PowerCertificate:
    """Decide whether eta^(sum g_j gamma^j) is a 3^k-th power in F_m."""
    g = tuple(int(x) for x in g)
    power = 3**k
    basis = field_basis(sheet.f, sheet.level)
    if not any(g) or k == 0:
        return PowerCertificate(CERTIFIED_YES, g, power, 0.0, 1, (), None, "trivial")
    gsum = sum(abs(x) for x in g)
    approx = float_eta_logs(basis.fd, sheet.level)
    Lf = [sum(gi * approx[s * basis.half + (j + i) % basis.half] for i, gi in enumerate(g))
          for s in (0, 1) for j in range(basis.half)]
    # the coordinate error must sit well below the smallest |beta| for the norm bound
    beta_bits = 2 * max(abs(x) for x in Lf) / power / math.log(2)
    cond = basis.inverse_norm_log2() + math.log2(basis.d) + basis.index_log3 * math.log2(3)
    prec = int(max(bits, beta_bits + cond + basis.generator_abs_log2() + 64))
    need = prec + int(math.log2(gsum + 1)) + 8
    if sheet.bits < need:
        sheet = embed_eta(basis.fd, sheet.level, need)
    L, S = _twisted_logs(sheet, g, need + 64)

    def coords_at(p):
        with mpmath.workprec(p):
            beta = mpmath.matrix([S[t] * mpmath.exp(L[t] / power) for t in range(basis.d)])
            return mpmath.lu_solve(basis.real_rows(p), beta)

    c1 = coords_at(prec)
    c2 = coords_at(prec + 64)
    with mpmath.workprec(prec + 64):
        noise = max(abs(c1[i] - c2[i]) for i in range(basis.d))
        tol = mpmath.mpf(2) ** -24
        if noise > tol / 1024:
            return PowerCertificate(INCONCLUSIVE, g, power, note=f"numerical noise {mpmath.nstr(noise, 5)}")
        best = math.inf
        for t in range(basis.index_log3 + 1):
            D = 3**t
            scaled = [D * c2[i] for i in range(basis.d)]
            C = [int(mpmath.nint(x)) for x in scaled]
            gap = max(abs(x - c) for x, c in zip(scaled, C))
            margin = float(gap)
            best = min(best, margin)
            if margin < tol:
                used = _certify_root(basis, sheet, g, power, C, D, L, gap + 2 * D * noise)
                if used is not None:
                    return PowerCertificate(CERTIFIED_YES, g, power, margin, D, used, tuple(C))
                return PowerCertificate(INCONCLUSIVE, g, power, margin, D,
                                        note="rounded root failed the modular check")
    if best > 1e-3:
        return PowerCertificate(CERTIFIED_NO, g, power, best, 3**basis.index_log3,
                                note="real root has non-integral coordinates")
    return PowerCertificate(INCONCLUSIVE, g, power, best, note="coordinates close to integers but not certifiable")


# -- verifying an upper-bound ideal ------------------------------------------

@dataclass
class LowerBound:
    status: str  # VERIFIED, REFUTED or INCONCLUSIVE
    level: int
    lower_log3: Optional[int]  # rigorous: log3 |C_m| >= this
    upper_log3: int
    certificates: tuple = ()
    note: str = ""


def _centered(b: Sequence[int], q: int) -> list:
    return [x - q if x > q // 2 else x for x in (y % q for y in b)]


def verify_ideal(fd: FundamentalDiscriminant, m: int, U: TruncatedLambdaIdeal, bits: int = 512,
                 max_level: int = FEASIBLE_LEVEL) -> LowerBound:
    """Try to prove that the upper-bound ideal U at level m is exact.

    U must come from the computed (unit-side) orientation and satisfy
    exponent < e.  If U is the true annihilator, eta^b is a 3^v-th power
    for every b in (3^v : U); certified roots for the generators of that
    colon ideal B give ``log3 |C_m| >= v*deg(w) - log3 [Lambda : B]``.
    """
    ctx = U.context
    up = U.log3_index
    if ctx.n != m:
        raise ValueError("ideal lives at a different level")
    if up == 0:
        return LowerBound(VERIFIED, m, 0, 0, note="unit ideal")
    if m > max_level:
        return LowerBound(INCONCLUSIVE, m, None, up, note=f"level {m} beyond the feasible cap {max_level}")
    v = U.exponent
    if v >= ctx.e:
        raise ValueError("ideal exponent not below 3^e; raise e first")
    B = colon_ideal(U, v)
    sheet = embed_eta(fd, m, bits)
    small = B.context
    proven = []
    certs = []
    for b in B.generators():
        b = _centered(b, 3**v)
        t = min(v3(x) for x in b if x)
        g = group_ring_exponents([x // 3**t for x in b], m)
        cert = is_power(sheet, g, v - t, bits)
        certs.append(cert)
        if cert.verdict == CERTIFIED_NO:
            return LowerBound(REFUTED, m, None, up, tuple(certs), "predicted root does not exist")
        if cert.verdict == CERTIFIED_YES:
            proven.append(b)
    lower = v * ctx.degree - ideal_from_generators(proven, small).log3_index
    status = VERIFIED if lower == up else INCONCLUSIVE
    note = "" if status == VERIFIED else "some predicted roots not certified"
    return LowerBound(status, m, lower, up, tuple(certs), note)
