import math
import random

import pytest
import sympy

from greenberg.annihilator import (
    AnnihilatorElement,
    SearchHorizonExceeded,
    StreamExhausted,
    accumulate_ideal,
    chi,
    eta_image,
    find_aux_primes,
    iter_aux_primes,
    make_aux_prime,
    upper_bound,
)
from greenberg.iwasawa import (
    LambdaContext,
    TruncatedPolynomial,
    ideal_from_generators,
    parse_poly,
    stabilization_check,
)
from greenberg.quadfield import class_group_3part, validate_discriminant

from oracles import reference_eta_image


def test_find_aux_primes_examples():
    fd5 = validate_discriminant(5)
    assert find_aux_primes(fd5, 2, 0, 1)[0].r == 181
    fd12 = validate_discriminant(12)
    assert find_aux_primes(fd12, 2, 1, 1)[0].r == 37
    for fd, e in [(fd5, 3), (fd12, 4), (validate_discriminant(229), 2)]:
        ps = find_aux_primes(fd, e, 1, 8)
        rs = [P.r for P in ps]
        assert rs == sorted(rs)
        for P in ps:
            assert P.r % (3**e * fd.fprime) == 1
            assert sympy.isprime(P.r) and sympy.n_order(P.g, P.r) == P.r - 1
            assert P.certified


def test_find_aux_primes_guards():
    fd = validate_discriminant(5)
    with pytest.raises(ValueError):
        find_aux_primes(fd, 1, 1, 1)
    with pytest.raises(SearchHorizonExceeded):
        find_aux_primes(fd, 2, 0, 100, horizon=10)


def test_chi_properties():
    rng = random.Random(3)
    fd = validate_discriminant(229)
    for e in (1, 2, 4):
        for P in find_aux_primes(fd, e, 0, 4):
            q = 3**e
            assert chi(1, P) == 0
            assert chi(P.g, P) % 3 != 0
            for _ in range(20):
                x = rng.randrange(1, P.r)
                y = rng.randrange(1, P.r)
                assert chi(x * y, P) == (chi(x, P) + chi(y, P)) % q
                assert chi(pow(x, q, P.r), P) == 0
            assert {chi(pow(P.g, k, P.r), P) for k in range(q)} == set(range(q))
    with pytest.raises(ZeroDivisionError):
        chi(P.r, P)


@pytest.mark.parametrize("f,n,e", [(5, 1, 2), (12, 1, 2), (229, 1, 3), (13, 1, 2), (37, 2, 3), (24, 2, 3), (257, 1, 2)])
def test_eta_image_matches_reference(f, n, e):
    fd = validate_discriminant(f)
    for P in find_aux_primes(fd, e, n, 3):
        ours = eta_image(fd, n, P).alpha.coefficients
        assert list(ours) == reference_eta_image(f, n, P.r, P.g, e)


def test_eta_image_independent_of_lifts():
    fd = validate_discriminant(229)
    P = find_aux_primes(fd, 3, 1, 1)[0]
    base = reference_eta_image(229, 1, P.r, P.g, 3)
    for pb, pc in [(1, 0), (0, 1), (5, 3), (-1, -1)]:
        assert reference_eta_image(229, 1, P.r, P.g, 3, pb, pc) == base


@pytest.mark.parametrize("f", [5, 12, 21, 257, 761, 3305])
def test_augmentation_is_level_zero_image(f):
    # norm compatibility (f not 1 mod 3): alpha_r(T=0) at level n equals chi(eta_0)
    fd = validate_discriminant(f)
    for P in find_aux_primes(fd, 3, 2, 3):
        alpha = eta_image(fd, 2, P).alpha.coefficients
        level0 = eta_image(fd, 0, P).alpha.coefficients
        assert alpha[0] == level0[0]


@pytest.mark.parametrize("f", [13, 37, 229, 1129])
def test_split_case_norm_is_trivial(f):
    fd = validate_discriminant(f)
    for P in find_aux_primes(fd, 3, 1, 3):
        chis = reference_chis(fd, 1, P)
        assert sum(chis) % 27 == 0


def reference_chis(fd, n, P):
    from greenberg.annihilator import coset_layout

    layout = coset_layout(fd.f, n)
    us = layout.conjugate_images(P.root_of_unity(fd.cyclotomic_conductor(n)), P.r)
    return [chi(u, P) for u in us]


def test_ideal_independent_of_primitive_root():
    fd = validate_discriminant(61629)
    e, n = 3, 1
    primes = find_aux_primes(fd, e, n, 12)
    a = ideal_from_generators([eta_image(fd, n, P).alpha.coefficients for P in primes], LambdaContext(e, n))
    other = []
    for P in primes:
        k = next(k for k in range(2, P.r) if math.gcd(k, P.r - 1) == 1)
        Q = make_aux_prime(P.r, fd, e, pow(P.g, k, P.r))
        other.append(eta_image(fd, n, Q).alpha.coefficients)
    assert ideal_from_generators(other, LambdaContext(e, n)) == a


def test_accumulation_order_and_monotonicity():
    fd = validate_discriminant(61629)
    e, n = 3, 1
    els = [eta_image(fd, n, P) for P in find_aux_primes(fd, e, n, 10)]
    full, rep = accumulate_ideal(fd, n, e, els, window=100)
    assert rep.primes_used == 10 and not rep.saturated
    rng = random.Random(0)
    for _ in range(3):
        shuffled = els[:]
        rng.shuffle(shuffled)
        assert accumulate_ideal(fd, n, e, shuffled, window=100)[0] == full
    for k in range(1, 10):
        prefix = accumulate_ideal(fd, n, e, els[:k], window=100)[0]
        assert prefix.issubset(full)
        assert prefix.log3_index >= full.log3_index


def test_accumulate_trivial_streams():
    fd = validate_discriminant(5)
    ctx = LambdaContext(2, 1)
    zero = AnnihilatorElement(TruncatedPolynomial.from_integers([0], ctx), 0, 1, 2)
    I, rep = accumulate_ideal(fd, 1, 2, [zero] * 5, window=5)
    assert I.log3_index == 2 * 3 and rep.saturated
    unit = AnnihilatorElement(TruncatedPolynomial.from_integers([1], ctx), 0, 1, 2)
    I, _ = accumulate_ideal(fd, 1, 2, [zero, unit], window=5)
    assert I.is_unit()
    with pytest.raises(StreamExhausted):
        accumulate_ideal(fd, 1, 2, [zero], window=5, strict=True)
    with pytest.raises(ValueError):
        accumulate_ideal(fd, 1, 3, [zero])


def test_target_delays_stopping():
    # the window alone stops f = 221 at a false index; a known lower bound does not
    fd = validate_discriminant(221)
    h3 = class_group_3part(221).h3
    assert upper_bound(fd, 0, target=h3).ideal.log3_index == h3


def ideal_of(gens, ctx):
    return ideal_from_generators([parse_poly(g) for g in gens], ctx)


def test_61629_levels_one_and_two():
    fd = validate_discriminant(61629)
    lo = upper_bound(fd, 1, e=3).ideal
    hi = upper_bound(fd, 2, e=3).ideal
    assert lo.log3_index == hi.log3_index == 3
    assert lo == ideal_of(["T^3", "3"], lo.context)
    assert stabilization_check(lo, hi)


def test_15217_level_two():
    fd = validate_discriminant(15217)
    U = upper_bound(fd, 2).ideal
    assert U.variant == "omega-prime"
    assert U == ideal_of(["T^4+3", "3T", "9"], U.context)


def test_iter_aux_primes_skips_divisors_of_f():
    fd = validate_discriminant(12)
    rs = [P.r for _, P in zip(range(10), iter_aux_primes(fd, 2, 1))]
    assert all(r % 12 for r in rs)
