"""Hyper-dual numbers for exact first and second derivatives.

A hyper-dual number ``a + b e1 + c e2 + d e1e2`` with ``e1**2 = e2**2 = 0``
carries f, df/dx_i, df/dx_j and d2f/dx_i dx_j through any composition of
the supported operations, with no truncation error.
"""
from __future__ import annotations

import math

import numpy as np


class HyperDual:
    __slots__ = ("a", "b", "c", "d")

    def __init__(self, a, b=0.0, c=0.0, d=0.0):
        self.a = float(a)
        self.b = float(b)
        self.c = float(c)
        self.d = float(d)

    def __repr__(self):
        return f"HyperDual({self.a!r}, {self.b!r}, {self.c!r}, {self.d!r})"

    # chain rule for a scalar function with value f0, f1 = f'(a), f2 = f''(a)
    def _apply(self, f0, f1, f2):
        return HyperDual(
            f0,
            f1 * self.b,
            f1 * self.c,
            f1 * self.d + f2 * self.b * self.c,
        )

    def __add__(self, other):
        if isinstance(other, HyperDual):
            return HyperDual(self.a + other.a, self.b + other.b, self.c + other.c, self.d + other.d)
        return HyperDual(self.a + other, self.b, self.c, self.d)

    __radd__ = __add__

    def __neg__(self):
        return HyperDual(-self.a, -self.b, -self.c, -self.d)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, HyperDual):
            return HyperDual(
                self.a * other.a,
                self.a * other.b + self.b * other.a,
                self.a * other.c + self.c * other.a,
                self.a * other.d + self.b * other.c + self.c * other.b + self.d * other.a,
            )
        return HyperDual(self.a * other, self.b * other, self.c * other, self.d * other)

    __rmul__ = __mul__

    def reciprocal(self):
        inv = 1.0 / self.a
        return self._apply(inv, -inv * inv, 2.0 * inv * inv * inv)

    def __truediv__(self, other):
        if isinstance(other, HyperDual):
            return self * other.reciprocal()
        return self * (1.0 / other)

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, n):
        if isinstance(n, HyperDual):
            raise TypeError("HyperDual exponents are not supported")
        if n == 2:
            return self * self
        return self._apply(self.a ** n, n * self.a ** (n - 1), n * (n - 1) * self.a ** (n - 2))

    def sqrt(self):
        s = math.sqrt(self.a)
        return self._apply(s, 0.5 / s, -0.25 / (s * self.a))

    def sin(self):
        s, c = math.sin(self.a), math.cos(self.a)
        return self._apply(s, c, -s)

    def cos(self):
        s, c = math.sin(self.a), math.cos(self.a)
        return self._apply(c, -s, -c)

    def exp(self):
        e = math.exp(self.a)
        return self._apply(e, e, e)

    def log(self):
        return self._apply(math.log(self.a), 1.0 / self.a, -1.0 / (self.a * self.a))

    # comparisons look at the real part only
    def __lt__(self, other):
        return self.a < _real(other)

    def __le__(self, other):
        return self.a <= _real(other)

    def __gt__(self, other):
        return self.a > _real(other)

    def __ge__(self, other):
        return self.a >= _real(other)

    def __float__(self):
        return self.a


def _real(x):
    return x.a if isinstance(x, HyperDual) else float(x)


def real(x):
    """Real part of a hyper-dual number, or the float itself."""
    return _real(x)


def sqrt(x):
    return x.sqrt() if isinstance(x, HyperDual) else math.sqrt(x)


def sin(x):
    return x.sin() if isinstance(x, HyperDual) else math.sin(x)


def cos(x):
    return x.cos() if isinstance(x, HyperDual) else math.cos(x)


def exp(x):
    return x.exp() if isinstance(x, HyperDual) else math.exp(x)


def log(x):
    return x.log() if isinstance(x, HyperDual) else math.log(x)


def gradient(func, x):
    """Exact gradient of a scalar function at ``x`` (one pass per coordinate)."""
    x = np.asarray(x, dtype=float)
    n = x.size
    g = np.empty(n)
    for i in range(n):
        args = [HyperDual(v) for v in x]
        args[i] = HyperDual(x[i], 1.0, 0.0, 0.0)
        g[i] = func(args).b
    return g


def hessian(func, x):
    """Exact Hessian of a scalar function at ``x``, plus the gradient.

    Returns ``(value, grad, hess)``. Uses n(n+1)/2 evaluations.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    H = np.empty((n, n))
    g = np.empty(n)
    value = None
    for i in range(n):
        for j in range(i, n):
            args = [HyperDual(v) for v in x]
            if i == j:
                args[i] = HyperDual(x[i], 1.0, 1.0, 0.0)
            else:
                args[i] = HyperDual(x[i], 1.0, 0.0, 0.0)
                args[j] = HyperDual(x[j], 0.0, 1.0, 0.0)
            out = func(args)
            H[i, j] = H[j, i] = out.d
            if i == j:
                g[i] = out.b
                value = out.a
    return value, g, H


def fd_hessian(func, x, rel_step=None):
    """Central-difference Hessian, used only to cross-check :func:`hessian`."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if rel_step is None:
        rel_step = np.finfo(float).eps ** (1.0 / 4.0)
    h = rel_step * (1.0 + np.abs(x))
    H = np.empty((n, n))
    f0 = func(list(x))
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = h[i]
        H[i, i] = (func(list(x + ei)) - 2.0 * f0 + func(list(x - ei))) / h[i] ** 2
        for j in range(i + 1, n):
            ej = np.zeros(n)
            ej[j] = h[j]
            fpp = func(list(x + ei + ej))
            fpm = func(list(x + ei - ej))
            fmp = func(list(x - ei + ej))
            fmm = func(list(x - ei - ej))
            H[i, j] = H[j, i] = (fpp - fpm - fmp + fmm) / (4.0 * h[i] * h[j])
    return H
