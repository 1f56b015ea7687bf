"""
Bessel Functions
Real-argument J_m, Y_m and Hankel H1_m of integer order, vectorized over the argument
"""

import math

import numpy as np

from errors import DomainError, UnsupportedOrderError

ORDER_CEILING = 60

# crossover points, locked by the identity tests in test/test_specfun.py
SERIES_LIMIT = 2.0
ASYMPTOTIC_LIMIT = 25.0
SERIES_TERMS = 30
ASYMPTOTIC_TERMS = 60
RESCALE_THRESHOLD = 1e250


def _check_order(order, limit=ORDER_CEILING):
    if int(order) != order or order < 0:
        raise UnsupportedOrderError(f"only nonnegative integer orders are supported, got {order}")
    if order > limit:
        raise UnsupportedOrderError(f"order {order} exceeds the ceiling {limit}")
    return int(order)


def _as_array(x):
    x = np.asarray(x, dtype=float)
    return x.ndim == 0, np.atleast_1d(x).ravel()


def _series_j(nmax, x):
    """Ascending power series for every order 0..nmax"""
    out = np.zeros((nmax + 1, x.size))
    half = 0.5 * x
    q = -half * half
    with np.errstate(divide='ignore'):
        log_half = np.log(half)
    for m in range(nmax + 1):
        if m == 0:
            term = np.ones_like(x)
        else:
            term = np.where(x > 0, np.exp(m * log_half - math.lgamma(m + 1)), 0.0)
        total = term.copy()
        for k in range(1, SERIES_TERMS):
            term = term * q / (k * (k + m))
            total += term
        out[m] = total
    return out


def _miller_j(nmax, x):
    """Backward recurrence from far above max(nmax, x), normalized by J_0 + 2 sum J_2k = 1"""
    top = max(float(nmax), float(x.max()))
    start = 2 * (int(top + 30.0 + math.sqrt(40.0 * top)) // 2 + 1)
    out = np.zeros((nmax + 1, x.size))
    following = np.zeros_like(x)
    current = np.ones_like(x)
    norm = np.zeros_like(x)
    for k in range(start, 0, -1):
        if k <= nmax:
            out[k] = current
        if k % 2 == 0:
            norm += 2.0 * current
        previous = (2.0 * k / x) * current - following
        following, current = current, previous
        big = np.abs(current) > RESCALE_THRESHOLD
        if big.any():
            factor = np.where(big, 1.0 / RESCALE_THRESHOLD, 1.0)
            current *= factor
            following *= factor
            norm *= factor
            out *= factor
    out[0] = current
    norm += current
    return out / norm


def _j_table(nmax, x):
    out = np.empty((nmax + 1, x.size))
    small = x < SERIES_LIMIT
    if small.any():
        out[:, small] = _series_j(nmax, x[small])
    if (~small).any():
        out[:, ~small] = _miller_j(nmax, x[~small])
    return out


def _hankel_asymptotic(nu, x):
    """Large-argument expansion; returns (J_nu, Y_nu)"""
    mu = 4.0 * nu * nu
    p = np.ones_like(x)
    q = np.zeros_like(x)
    term = np.ones_like(x)
    for k in range(1, ASYMPTOTIC_TERMS):
        term = term * (mu - (2 * k - 1) ** 2) / (8.0 * k * x)
        if k % 2 == 1:
            q += (-1) ** ((k - 1) // 2) * term
        else:
            p += (-1) ** (k // 2) * term
        if np.max(np.abs(term)) < 1e-17:
            break
    chi = x - (0.5 * nu + 0.25) * math.pi
    scale = np.sqrt(2.0 / (math.pi * x))
    return (scale * (p * np.cos(chi) - q * np.sin(chi)),
            scale * (p * np.sin(chi) + q * np.cos(chi)))


def _neumann_y01(x):
    """Y_0 and Y_1 from the Neumann series over even/odd order J values"""
    top = 2 * (int(x.max() + 40.0) // 2)
    js = _j_table(top + 1, x)
    log_term = np.log(0.5 * x) + np.euler_gamma
    k = np.arange(1, top // 2 + 1)
    signs = ((-1.0) ** k / k)[:, None]
    y0 = (2.0 / math.pi) * log_term * js[0] - (4.0 / math.pi) * np.sum(signs * js[2 * k], axis=0)
    y1 = ((2.0 / math.pi) * (log_term * js[1] - js[0] / x)
          + (2.0 / math.pi) * np.sum(signs * (js[2 * k - 1] - js[2 * k + 1]), axis=0))
    return y0, y1


def _y01(x):
    y0 = np.empty_like(x)
    y1 = np.empty_like(x)
    far = x >= ASYMPTOTIC_LIMIT
    if (~far).any():
        y0[~far], y1[~far] = _neumann_y01(x[~far])
    if far.any():
        y0[far] = _hankel_asymptotic(0.0, x[far])[1]
        y1[far] = _hankel_asymptotic(1.0, x[far])[1]
    return y0, y1


def bessel_j_sequence(nmax, x):
    """J_0..J_nmax at x (scalar or array); shape (nmax+1,) or (nmax+1, len(x))"""
    nmax = _check_order(nmax)
    scalar, xs = _as_array(x)
    if np.any(xs < 0) or not np.all(np.isfinite(xs)):
        raise DomainError("bessel_j needs finite x >= 0")
    out = _j_table(nmax, xs)
    return out[:, 0] if scalar else out


def bessel_y_sequence(nmax, x):
    """Y_0..Y_nmax by forward recurrence from Y_0, Y_1"""
    nmax = _check_order(nmax)
    scalar, xs = _as_array(x)
    if np.any(xs <= 0) or not np.all(np.isfinite(xs)):
        raise DomainError("bessel_y needs finite x > 0")
    out = np.empty((max(nmax, 1) + 1, xs.size))
    out[0], out[1] = _y01(xs)
    for m in range(1, nmax):
        out[m + 1] = (2.0 * m / xs) * out[m] - out[m - 1]
    out = out[:nmax + 1]
    return out[:, 0] if scalar else out


def bessel_j_array(order, x):
    order = _check_order(order)
    return bessel_j_sequence(order, x)[order]


def bessel_y_array(order, x):
    order = _check_order(order)
    return bessel_y_sequence(order, x)[order]


def bessel_j(order, x):
    """J_order(x) for x >= 0"""
    return float(bessel_j_array(order, float(x)))


def bessel_y(order, x):
    """Y_order(x) for x > 0"""
    return float(bessel_y_array(order, float(x)))


def hankel1(order, x):
    """H1_order(x) = J_order(x) + i Y_order(x)"""
    return complex(bessel_j(order, x), bessel_y(order, x))


def _derivative(sequence, order):
    if order == 0:
        return -sequence[1]
    return 0.5 * (sequence[order - 1] - sequence[order + 1])


def bessel_jp_array(order, x):
    order = _check_order(order, ORDER_CEILING - 1)
    return _derivative(bessel_j_sequence(order + 1, x), order)


def bessel_yp_array(order, x):
    order = _check_order(order, ORDER_CEILING - 1)
    return _derivative(bessel_y_sequence(order + 1, x), order)


def bessel_jp(order, x):
    return float(bessel_jp_array(order, float(x)))


def bessel_yp(order, x):
    return float(bessel_yp_array(order, float(x)))


def hankel1p(order, x):
    return complex(bessel_jp(order, x), bessel_yp(order, x))


def cylinder_tables(nmax, x):
    """
    J, J', Y, Y' for orders 0..nmax at one argument, from one pass each.

    Used by the far-field synthesizer, which needs every order at kR and k_i R.
    """
    nmax = _check_order(nmax, ORDER_CEILING - 1)
    js = bessel_j_sequence(nmax + 1, x)
    ys = bessel_y_sequence(nmax + 1, x)
    jp = np.array([_derivative(js, m) for m in range(nmax + 1)])
    yp = np.array([_derivative(ys, m) for m in range(nmax + 1)])
    return js[:nmax + 1], jp, ys[:nmax + 1], yp


if __name__ == "__main__":
    for x in (0.5, 1.0, 5.0, 30.0):
        j0, y0 = bessel_j(0, x), bessel_y(0, x)
        w = bessel_j(0, x) * bessel_yp(0, x) - bessel_jp(0, x) * bessel_y(0, x)
        print(f"x={x:5.1f}  J0={j0:+.15f}  Y0={y0:+.15f}  W*pi*x/2={w * math.pi * x / 2:.15f}")
