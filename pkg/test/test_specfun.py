import math

import numpy as np
import pytest
from scipy import special

from errors import DomainError, UnsupportedOrderError
from specfun import (bessel_j, bessel_j_array, bessel_jp, bessel_y, bessel_y_array, bessel_yp,
                     cylinder_tables, hankel1)

# both sides of the series / recurrence / asymptotic crossovers
ARGUMENTS = np.array([0.05, 0.5, 1.0, 1.999, 2.0, 2.001, 5.0, 10.0, 24.9, 25.0, 25.1, 40.0])


@pytest.mark.parametrize('order', [0, 1, 2, 5, 10])
def test_bessel_j_matches_scipy(order):
    np.testing.assert_allclose(bessel_j_array(order, ARGUMENTS), special.jv(order, ARGUMENTS),
                               rtol=1e-10, atol=1e-12)


@pytest.mark.parametrize('order', [0, 1, 2, 5])
def test_bessel_y_matches_scipy(order):
    args = ARGUMENTS[ARGUMENTS >= 0.5]
    np.testing.assert_allclose(bessel_y_array(order, args), special.yv(order, args),
                               rtol=1e-9, atol=1e-11)


@pytest.mark.parametrize('x', [0.3, 1.0, 3.7, 12.0, 30.0])
@pytest.mark.parametrize('order', [0, 1, 3])
def test_wronskian(order, x):
    w = bessel_j(order, x) * bessel_yp(order, x) - bessel_jp(order, x) * bessel_y(order, x)
    assert w == pytest.approx(2.0 / (math.pi * x), rel=1e-9)


def test_j_at_zero():
    assert bessel_j(0, 0.0) == 1.0
    assert bessel_j(3, 0.0) == 0.0


def test_high_order_small_argument():
    assert bessel_j(40, 1.0) == pytest.approx(special.jv(40, 1.0), rel=1e-10)


def test_hankel_combines_j_and_y():
    value = hankel1(2, 3.0)
    assert value.real == pytest.approx(special.jv(2, 3.0), abs=1e-12)
    assert value.imag == pytest.approx(special.yv(2, 3.0), abs=1e-12)


def test_cylinder_tables_derivatives():
    js, jp, ys, yp = cylinder_tables(6, 4.2)
    np.testing.assert_allclose(js, special.jv(np.arange(7), 4.2), atol=1e-12)
    np.testing.assert_allclose(jp, special.jvp(np.arange(7), 4.2), atol=1e-12)
    np.testing.assert_allclose(ys, special.yv(np.arange(7), 4.2), atol=1e-11)
    np.testing.assert_allclose(yp, special.yvp(np.arange(7), 4.2), atol=1e-11)


@pytest.mark.parametrize('order', [-1, 1.5, 61])
def test_unsupported_orders(order):
    with pytest.raises(UnsupportedOrderError):
        bessel_j(order, 1.0)


def test_arguments_outside_the_domain():
    with pytest.raises(DomainError):
        bessel_j(0, -1.0)
    with pytest.raises(DomainError):
        bessel_y(0, 0.0)
