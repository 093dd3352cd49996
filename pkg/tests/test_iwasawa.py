import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from greenberg.iwasawa import (
    OMEGA,
    OMEGA_PRIME,
    FinitenessWitness,
    LambdaContext,
    TruncatedPolynomial,
    colon_ideal,
    divide_in_quotient,
    finiteness_lemma,
    format_poly,
    group_ring_exponents,
    ideal_from_generators,
    involution,
    kernel_mod_prime_power,
    omega,
    order_of_one_plus_T,
    parse_poly,
    poly_divmod,
    poly_mul,
    poly_rem,
    quotient_order,
    stabilization_check,
    stabilization_level,
    strip,
    tk_invariant,
)

from oracles import brute_force_log3_index, lattice_log3_index


def ideal(text_gens, e, n, variant=OMEGA):
    return ideal_from_generators([parse_poly(g) for g in text_gens], LambdaContext(e, n, variant))


def test_omega_values():
    assert omega(0) == (0, 1)
    assert omega(1) == (0, 3, 3, 1)
    assert omega(1, OMEGA_PRIME) == (3, 3, 1)
    assert omega(0, OMEGA_PRIME) == (1,)


@pytest.mark.parametrize("n", range(7))
def test_omega_is_T_power_mod_3(n):
    w = omega(n)
    assert [x % 3 for x in w] == [0] * 3**n + [1]


@pytest.mark.parametrize("n", range(6))
def test_omega_divides_next(n):
    q, r = poly_divmod(omega(n + 1), omega(n))
    assert r == []
    assert q[0] == 3
    assert poly_mul(q, omega(n)) == list(omega(n + 1))


def test_truncated_polynomial_shape():
    ctx = LambdaContext(2, 1, OMEGA_PRIME)
    p = TruncatedPolynomial.from_integers([1, 2, 3, 4, 5], ctx)
    assert len(p.coefficients) == 2
    assert all(0 <= c < 9 for c in p.coefficients)
    assert len(TruncatedPolynomial.from_integers([1], LambdaContext(2, 2)).coefficients) == 9


@pytest.mark.parametrize("gens,e,n,expected", [
    (["1"], 2, 1, 0),
    (["3", "T"], 2, 1, 1),
    (["T^3", "3"], 2, 2, 3),
    (["T^3+3", "3T", "9"], 2, 2, 4),
])
def test_quotient_orders(gens, e, n, expected):
    I = ideal(gens, e, n)
    assert quotient_order(I) == expected
    assert lattice_log3_index([parse_poly(g) for g in gens], e, list(omega(n))) == expected


def test_brute_force_span_small_contexts():
    rng = random.Random(1)
    for e, n in [(1, 1), (2, 1), (1, 2)]:
        ctx = LambdaContext(e, n)
        d = ctx.degree
        for _ in range(15):
            gens = [[rng.randrange(3**e) for _ in range(d)] for _ in range(rng.randint(1, 2))]
            I = ideal_from_generators(gens, ctx)
            assert I.log3_index == brute_force_log3_index(gens, e, list(omega(n)))


def test_brute_force_span_omega_prime():
    rng = random.Random(2)
    for e in (1, 2):
        ctx = LambdaContext(e, 1, OMEGA_PRIME)
        for _ in range(15):
            gens = [[rng.randrange(3**e) for _ in range(2)]]
            I = ideal_from_generators(gens, ctx)
            assert I.log3_index == brute_force_log3_index(gens, e, list(omega(1, OMEGA_PRIME)))


poly = st.lists(st.integers(-200, 200), min_size=1, max_size=12)


@settings(max_examples=80, deadline=None)
@given(st.lists(poly, min_size=1, max_size=3), st.integers(1, 4), st.integers(0, 2),
       st.sampled_from([OMEGA, OMEGA_PRIME]))
def test_index_matches_lattice_oracle(gens, e, n, variant):
    if variant == OMEGA_PRIME and n == 0:
        return
    ctx = LambdaContext(e, n, variant)
    I = ideal_from_generators(gens, ctx)
    assert I.log3_index == lattice_log3_index(gens, e, list(omega(n, variant)))


@settings(max_examples=60, deadline=None)
@given(st.lists(poly, min_size=1, max_size=3), st.integers(1, 3), st.integers(0, 2), st.randoms())
def test_canonical_form_properties(gens, e, n, rnd):
    ctx = LambdaContext(e, n)
    I = ideal_from_generators(gens, ctx)
    # closure operator, order independence, T-stability
    assert ideal_from_generators(I.generators(), ctx) == I
    shuffled = list(gens)
    rnd.shuffle(shuffled)
    assert ideal_from_generators(shuffled, ctx) == I
    for b in I.generators():
        assert ctx.times_T(b) in I
    # tk bounded by the degree, monotone under growth
    k = tk_invariant(I)
    assert k <= 3**n
    bigger = I.add([[rnd.randrange(27) for _ in range(3)]])
    assert tk_invariant(bigger) <= k
    assert I.issubset(bigger)


def test_tk_examples():
    assert tk_invariant(ideal(["3", "T"], 2, 1)) == 1
    assert tk_invariant(ideal(["T^4+3", "3T", "9"], 3, 2)) == 4
    assert tk_invariant(ideal(["1"], 2, 1)) == 0


def test_order_of_one_plus_T_examples():
    assert order_of_one_plus_T(ideal(["3", "T"], 2, 1)) == 0
    assert order_of_one_plus_T(ideal(["T^3", "3"], 2, 2)) == 1
    assert order_of_one_plus_T(ideal(["T-996", "2187"], 8, 7)) == 6
    with pytest.raises(ValueError):
        order_of_one_plus_T(ideal(["1"], 2, 1))


def test_order_of_one_plus_T_is_multiplicative_order():
    # direct check: (1+T)^(3^n) = 1 and (1+T)^(3^(n-1)) != 1 modulo J
    I = ideal(["T^2+3T-9", "81"], 6, 5)
    n = order_of_one_plus_T(I)
    assert n == 4
    assert I.contains(omega(n)) and not I.contains(omega(n - 1))


def test_stabilization_check_examples():
    lo = ideal(["3", "T"], 3, 1)
    hi = ideal(["3", "T"], 3, 2)
    assert stabilization_check(lo, hi)
    assert not stabilization_check(ideal(["3", "T"], 3, 1), ideal(["9", "T"], 3, 2))
    with pytest.raises(ValueError):
        stabilization_check(lo, ideal(["3", "T"], 4, 2))
    with pytest.raises(ValueError):
        stabilization_check(lo, ideal(["3", "T"], 3, 3))


def test_stabilization_level_variants():
    # for (T - a, b) with omega': level v3(b); with omega: v3(b/a)
    assert stabilization_level(ideal(["T+621", "2187"], 8, 8, OMEGA_PRIME)) == 7
    assert stabilization_level(ideal(["T-996", "2187"], 8, 7)) == 6
    assert stabilization_level(ideal(["T^2+3T+3"], 2, 2, OMEGA_PRIME)) == 1


@pytest.mark.parametrize("m,n,a,b,expected", [
    (2, 3, 5, 5, True),
    (2, 5, 3, 5, True),
    (2, 3, 3, 5, False),
])
def test_finiteness_lemma_examples(m, n, a, b, expected):
    assert finiteness_lemma(FinitenessWitness(m, n, a, b)) is expected


def test_finiteness_witness_validation():
    with pytest.raises(ValueError):
        FinitenessWitness(3, 2, 0, 0)
    with pytest.raises(ValueError):
        FinitenessWitness(0, 2, 3, 1)


def test_exponent_guard():
    I = ideal(["T^3", "3"], 2, 2)
    assert I.exponent == 1
    assert I.with_exponent(4).log3_index == 3
    J = ideal(["T"], 2, 1)  # exponent equals e: cannot be lifted safely
    with pytest.raises(ValueError):
        J.with_exponent(3)


def test_involution_is_an_involution():
    for n, variant in [(1, OMEGA), (2, OMEGA), (2, OMEGA_PRIME)]:
        mod = omega(n, variant)
        for g in ([0, 1], [3, 1, 0, 2], [1, 1], [5, 0, 0, 0, 0, 0, 0, 0, 0, 0, 7]):
            back = involution(involution(g, n, variant), n, variant)
            assert strip(back) == strip(poly_rem(g, mod))
    I = ideal(["T^3+6", "3T", "9"], 4, 2)
    assert I.involuted().involuted() == I
    assert I.involuted() == ideal(["T^3+3", "3T", "9"], 4, 2)


def test_colon_duality():
    for gens, e, n, variant in [(["T^3", "3"], 3, 2, OMEGA), (["T^3+3", "3T", "9"], 4, 2, OMEGA),
                                (["T", "3"], 3, 1, OMEGA), (["T^4+3", "3T", "9"], 4, 2, OMEGA_PRIME),
                                (["T^5+9T+9", "3T^2+18", "27"], 5, 3, OMEGA_PRIME)]:
        U = ideal(gens, e, n, variant)
        v = U.exponent
        B = colon_ideal(U, v)
        assert v * U.context.degree - B.log3_index == U.log3_index
        for b in B.generators():
            for u in U.generators():
                prod = B.context.reduce(poly_mul(b, u))
                assert all(x % 3**v == 0 for x in prod)


def test_divide_and_kernel():
    ctx = LambdaContext(3, 2)
    y = divide_in_quotient([3, 0, 0, 1], [9], ctx)
    assert ctx.reduce(poly_mul([3, 0, 0, 1], y)) == [9]
    assert divide_in_quotient([3], [1], ctx) is None
    for z in kernel_mod_prime_power([[3, 0], [0, 9]], 2):
        assert (3 * z[0]) % 9 == 0


def test_group_ring_exponents():
    assert group_ring_exponents([0, 1], 1) == [-1, 1, 0]
    assert group_ring_exponents([0, 0, 0, 1], 1) == [-1 + 1, 3, -3]  # (g-1)^3 with g^3 = 1


def test_poly_syntax_round_trip():
    for text in ["T^3+3", "T-996", "3T^2+18", "T^5+9T+9", "27", "-T"]:
        assert format_poly(parse_poly(text)) == text
    with pytest.raises(ValueError):
        parse_poly("T^")
