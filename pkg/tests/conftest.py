import random
from fractions import Fraction

import pytest

from lodegp.opalgebra import MultiPoly, OperatorMatrix, OperatorPoly, RatFun


def random_rational(rng, max_num=9, max_den=9):
    num = rng.randint(-max_num, max_num)
    den = rng.randint(1, max_den)
    return Fraction(num, den)


def random_operator_poly(rng, max_degree=3, zero_prob=0.0, symbols=()):
    if zero_prob and rng.random() < zero_prob:
        return OperatorPoly.zero()
    deg = rng.randint(0, max_degree)
    coeffs = [RatFun.const(random_rational(rng), symbols) for _ in range(deg + 1)]
    if coeffs[-1].is_zero():
        coeffs[-1] = RatFun.const(Fraction(rng.randint(1, 9)), symbols)
    return OperatorPoly(coeffs)


def random_operator_matrix(rng, max_dim=4, max_degree=3, zero_prob=0.35):
    m = rng.randint(1, max_dim)
    n = rng.randint(1, max_dim)
    return OperatorMatrix(
        [
            [random_operator_poly(rng, max_degree, zero_prob) for _ in range(n)]
            for _ in range(m)
        ]
    )


@pytest.fixture
def rng():
    return random.Random(12345)
