import math
import random

import pytest

from greenberg.quadfield import (
    NotFundamental,
    PrecisionError,
    QuadraticUnit,
    analytic_class_number,
    class_group_3part,
    fundamental_discriminants,
    fundamental_unit,
    padic_log3_valuation,
    validate_discriminant,
)

from oracles import dirichlet_class_number, is_fundamental_sieve


def test_validate_examples():
    fd = validate_discriminant(12)
    assert (fd.residue3, fd.fprime) == (0, 4)
    fd = validate_discriminant(5)
    assert (fd.residue3, fd.fprime) == (2, 5)
    assert validate_discriminant(13).variant == "omega-prime"
    assert validate_discriminant(12).cyclotomic_conductor(1) == 36
    for bad in (9, 1, 0, -5, 7, 20, 32):
        with pytest.raises(NotFundamental):
            validate_discriminant(bad)


def test_discriminants_below_100():
    expected = [5, 8, 12, 13, 17, 21, 24, 28, 29, 33, 37, 40, 41, 44, 53, 56, 57, 60, 61,
                65, 69, 73, 76, 77, 85, 88, 89, 92, 93, 97]
    assert list(fundamental_discriminants(0, 100)) == expected
    assert [f for f in range(100) if is_fundamental_sieve(f)] == expected


def test_discriminant_enumeration_matches_sieve():
    assert list(fundamental_discriminants(0, 3000)) == [f for f in range(3000) if is_fundamental_sieve(f)]


@pytest.mark.parametrize("f,x,y", [(5, 1, 1), (8, 2, 1), (229, 15, 1)])
def test_fundamental_unit_examples(f, x, y):
    assert fundamental_unit(f) == QuadraticUnit(x, y, f)


def test_pell_relation_and_minimality():
    for f in fundamental_discriminants(0, 2000):
        u = fundamental_unit(f)
        assert u.x * u.x - f * u.y * u.y in (4, -4)
        assert u.x > 0 and u.y > 0
    # minimality on small f: no smaller solution of x^2 - f y^2 = +-4
    for f in fundamental_discriminants(0, 300):
        u = fundamental_unit(f)
        for yy in range(1, u.y):
            xx = math.isqrt(f * yy * yy + 4)
            assert xx * xx != f * yy * yy + 4
            if f * yy * yy >= 4:
                xx = math.isqrt(f * yy * yy - 4)
                assert xx * xx != f * yy * yy - 4


def test_unit_arithmetic():
    u = fundamental_unit(229)
    assert (u ** 3).norm == u.norm ** 3
    assert (u ** 2) * (u ** -2) == QuadraticUnit(2, 0, 229)
    assert abs((u ** 5).log() - 5 * u.log()) < 1e-9


@pytest.mark.parametrize("f,h,h3", [(5, 1, 0), (229, 3, 1), (257, 3, 1)])
def test_class_group_examples(f, h, h3):
    data = class_group_3part(f)
    assert (data.h, data.h3) == (h, h3)
    assert data.h3 <= math.log(data.h, 3) + 1e-9


def test_class_number_against_dirichlet_formula():
    rng = random.Random(7)
    pool = list(fundamental_discriminants(0, 2000))
    for f in rng.sample(pool, 20) + [229, 257, 1129, 1901]:
        h, err = dirichlet_class_number(f)
        assert err < 1e-6
        assert class_group_3part(f).h == h == analytic_class_number(f)


def test_sylow_structure_is_consistent():
    for f in fundamental_discriminants(0, 5000):
        data = class_group_3part(f)
        assert sum(data.sylow3) == data.h3
        assert list(data.sylow3) == sorted(data.sylow3, reverse=True)
    # first non-cyclic 3-class group among real quadratic fields
    assert class_group_3part(32009).sylow3 == (1, 1)


def test_padic_log_examples():
    assert padic_log3_valuation(QuadraticUnit(2, 0, 13)) == math.inf
    v = padic_log3_valuation(fundamental_unit(13))
    assert 1 <= v < 12


def test_padic_log_of_cube():
    for f in [13, 37, 61, 73, 97, 229, 2089]:
        u = fundamental_unit(f)
        v = padic_log3_valuation(u, 20)
        assert padic_log3_valuation(u ** 3, 20) == v + 1


def test_padic_log_requires_split_prime():
    with pytest.raises(ValueError):
        padic_log3_valuation(fundamental_unit(5))


def test_padic_log_precision_signal():
    u = fundamental_unit(13)
    v = padic_log3_valuation(u, 12)
    with pytest.raises(PrecisionError):
        padic_log3_valuation(u ** (3 ** 12), 12)
    assert padic_log3_valuation(u ** 9, 30) == v + 2
