"""Cubic Hermite shape functions and Gauss-Legendre rules on [0, 1].

Local order on an element ``[xa, xb]`` of length ``h`` is
``(u(xa), u'(xa), u(xb), u'(xb))``. The unit-interval tables returned here
omit the factor ``h`` on the slope functions; callers scale by ``h`` (value),
``1`` (first derivative) and ``1/h`` (second derivative) as needed.
"""

import numpy as np


def gauss_legendre(order):
    """Gauss points and weights mapped to [0, 1]."""
    t, w = np.polynomial.legendre.leggauss(int(order))
    return 0.5 * (t + 1.0), 0.5 * w


def unit_shapes(t):
    """Shape functions and t-derivatives on [0, 1].

    Returns three ``(4, len(t))`` arrays: values, first and second
    derivatives with respect to ``t``.
    """
    t = np.asarray(t, dtype=float)
    t2 = t * t
    t3 = t2 * t
    one = np.ones_like(t)
    val = np.array([1 - 3 * t2 + 2 * t3, t - 2 * t2 + t3, 3 * t2 - 2 * t3, -t2 + t3])
    d1 = np.array([-6 * t + 6 * t2, 1 - 4 * t + 3 * t2, 6 * t - 6 * t2, -2 * t + 3 * t2])
    d2 = np.array([-6 + 12 * t, -4 + 6 * t, 6 - 12 * t, -2 + 6 * t]) * one
    return val, d1, d2


def locate(nodes, x):
    """Element index and local coordinate ``t`` for points ``x``.

    Points on an interior node go to the element on their right, the last
    node goes to the last element.
    """
    x = np.asarray(x, dtype=float)
    ne = len(nodes) - 1
    e = np.clip(np.searchsorted(nodes, x, side="right") - 1, 0, ne - 1)
    h = nodes[e + 1] - nodes[e]
    t = np.clip((x - nodes[e]) / h, 0.0, 1.0)
    return e, t, h


def eval_hermite(nodes, values, slopes, x):
    """Evaluate a C1 piecewise cubic given nodal values and slopes.

    Returns ``(u, u', u'')`` arrays shaped like ``x``.
    """
    x = np.asarray(x, dtype=float)
    e, t, h = locate(nodes, x.ravel())
    val, d1, d2 = unit_shapes(t)
    c = np.array([values[e], h * slopes[e], values[e + 1], h * slopes[e + 1]])
    u = np.sum(c * val, axis=0)
    du = np.sum(c * d1, axis=0) / h
    d2u = np.sum(c * d2, axis=0) / (h * h)
    return u.reshape(x.shape), du.reshape(x.shape), d2u.reshape(x.shape)
