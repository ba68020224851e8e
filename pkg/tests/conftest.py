import math

import numpy as np
import pytest

from djnmr.spinsys import SpinSystem, alanine


@pytest.fixture(scope="session")
def ala() -> SpinSystem:
    return alanine()


@pytest.fixture(scope="session")
def two_spin() -> SpinSystem:
    return SpinSystem(
        offsets_hz=(100.0, -50.0),
        j_hz=((0.0, 10.0), (10.0, 0.0)),
        t1_s=(1.0, 1.0),
        t2_s=(0.5, 0.5),
    )


def golden_max(f, lo, hi, tol=1e-12):
    """Golden-section maximization; position then refined by bisecting the
    sign change of a central-difference slope (positions to ~1e-12)."""
    phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c, d = b - phi * (b - a), a + phi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > 1e-9:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + phi * (b - a)
            fd = f(d)
    x = (a + b) / 2.0
    h = 1e-6

    def slope(u):
        return f(u + h) - f(u - h)

    lo_s, hi_s = x - 1e-6, x + 1e-6
    while slope(lo_s) < 0 and lo_s > lo:
        lo_s -= 1e-5
    while slope(hi_s) > 0 and hi_s < hi:
        hi_s += 1e-5
    for _ in range(80):
        mid = (lo_s + hi_s) / 2.0
        if slope(mid) > 0:
            lo_s = mid
        else:
            hi_s = mid
        if hi_s - lo_s < tol:
            break
    x = (lo_s + hi_s) / 2.0
    return x, f(x)


def count_extrema(f, lo, hi, n=400001):
    u = np.linspace(lo, hi, n)
    y = f(u)
    maxima = (y[1:-1] > y[:-2]) & (y[1:-1] > y[2:])
    minima = (y[1:-1] < y[:-2]) & (y[1:-1] < y[2:])
    return int(maxima.sum() + minima.sum())
