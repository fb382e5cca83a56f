"""Gauss-type quadrature helpers.

``adaptive_gauss`` is a global adaptive bisection scheme over 32-point
Gauss-Legendre panels; it copes with integrable algebraic endpoint
singularities.
``jacobi_rule`` returns mapped Gauss-Jacobi rules used where an algebraic
endpoint weight is known in advance.
"""
import heapq
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

from .errors import QuadratureFailure

_PANEL_ORDER = 32


@lru_cache(maxsize=None)
def _legendre(order):
    x, w = np.polynomial.legendre.leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def _panel(f, a, b):
    x, w = _legendre(_PANEL_ORDER)
    half = 0.5 * (b - a)
    return half * np.dot(w, f(0.5 * (a + b) + half * x))


def _split(f, lo, hi):
    mid = 0.5 * (lo + hi)
    whole = _panel(f, lo, hi)
    left, right = _panel(f, lo, mid), _panel(f, mid, hi)
    return left + right, abs(left + right - whole)


def adaptive_gauss(f, a, b, tol=1e-10, max_depth=48, max_panels=20000):
    """Integrate a vectorised ``f`` over ``[a, b]`` to absolute tolerance ``tol``.

    Global adaptive bisection: each panel's error is the discrepancy between
    its one-panel and two-half-panel values, and the panel with the largest
    error is split until the summed error drops below ``tol`` (or below
    rounding level relative to the integral).

    Returns
    -------
    value : float or complex
    error : float
        Sum of the panel error estimates.
    """
    if a == b:
        return 0.0, 0.0
    value, err = _split(f, a, b)
    heap = [(-err, 0, a, b, value, err)]
    total, total_err, panels = value, err, 1
    while total_err > tol and total_err > 1e-15 * max(abs(total), 1e-300) * len(heap):
        _, depth, lo, hi, value, err = heapq.heappop(heap)
        if depth >= max_depth or panels >= max_panels:
            raise QuadratureFailure(
                f"adaptive quadrature did not reach tol={tol:g} on [{a}, {b}]",
                error_estimate=total_err,
            )
        mid = 0.5 * (lo + hi)
        total -= value
        total_err -= err
        for clo, chi in ((lo, mid), (mid, hi)):
            cval, cerr = _split(f, clo, chi)
            heapq.heappush(heap, (-cerr, depth + 1, clo, chi, cval, cerr))
            total += cval
            total_err += cerr
        panels += 2
    # re-sum to shed the drift of the running updates
    return sum(item[4] for item in heap), total_err


@lru_cache(maxsize=64)
def _jacobi(order, a, b):
    x, w = roots_jacobi(order, a, b)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def jacobi_rule(order, lower, upper, left_exponent):
    """Nodes/weights for ``∫_lower^upper g(x) (x - lower)**left_exponent dx``.

    The returned weights already contain the power weight, so the integral
    is ``weights @ g(nodes)``. ``left_exponent`` must exceed -1.
    """
    y, w = _jacobi(order, 0.0, float(left_exponent))
    half = 0.5 * (upper - lower)
    nodes = lower + half * (1.0 + y)
    weights = w * half ** (1.0 + left_exponent)
    return nodes, weights
