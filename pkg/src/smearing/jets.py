"""Truncated Taylor series ("jet") arithmetic.

A :class:`TaylorJet` of order ``k`` holds the first ``k + 1`` Taylor
coefficients of a function around an expansion point.  Arithmetic and the
elementary functions below propagate those coefficients exactly (up to
floating round-off), so the ``k``-th derivative is ``k! * coefficients[k]``
without any finite differencing.

The module-level :func:`exp`, :func:`log`, :func:`log1p` and :func:`sqrt`
dispatch on their argument, so a formula written with them evaluates on
floats, numpy arrays (real or complex) and jets alike.
"""

from __future__ import annotations

import math
import numbers

import numpy as np


class JetOverflowError(OverflowError):
    """Jet coefficients left the floating-point range."""


class TaylorJet:
    """Truncated power series ``sum_j c_j h^j`` with ``j <= order``."""

    __slots__ = ("coefficients",)
    __array_priority__ = 1000

    def __init__(self, coefficients):
        c = np.array(coefficients, dtype=float)
        if c.ndim != 1 or c.size == 0:
            raise ValueError("jet coefficients must be a non-empty 1-D sequence")
        self.coefficients = c

    @classmethod
    def variable(cls, x0: float, order: int, scale: float = 1.0) -> "TaylorJet":
        """The independent variable ``x = x0 + scale * h``."""
        if order < 0:
            raise ValueError("order must be non-negative")
        c = np.zeros(order + 1)
        c[0] = x0
        if order >= 1:
            c[1] = scale
        return cls(c)

    @classmethod
    def constant(cls, value: float, order: int) -> "TaylorJet":
        c = np.zeros(order + 1)
        c[0] = value
        return cls(c)

    @property
    def order(self) -> int:
        return self.coefficients.size - 1

    @property
    def value(self) -> float:
        return float(self.coefficients[0])

    def derivative(self, n: int) -> float:
        """``n``-th derivative with respect to ``h`` at ``h = 0``."""
        if not 0 <= n <= self.order:
            raise ValueError(f"derivative order {n} outside 0..{self.order}")
        return math.factorial(n) * float(self.coefficients[n])

    def __repr__(self):
        return f"TaylorJet({self.coefficients.tolist()!r})"

    # -- arithmetic -----------------------------------------------------
    def _coerce(self, other) -> "TaylorJet":
        if isinstance(other, TaylorJet):
            if other.order != self.order:
                raise ValueError("jets of different order")
            return other
        if isinstance(other, numbers.Real):
            return TaylorJet.constant(float(other), self.order)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return TaylorJet(self.coefficients + other.coefficients)

    __radd__ = __add__

    def __neg__(self):
        return TaylorJet(-self.coefficients)

    def __pos__(self):
        return self

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return TaylorJet(self.coefficients - other.coefficients)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return other - self

    def __mul__(self, other):
        if isinstance(other, numbers.Real):
            return TaylorJet(self.coefficients * float(other))
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        k = self.order
        return TaylorJet(np.convolve(self.coefficients, other.coefficients)[: k + 1])

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, numbers.Real):
            return TaylorJet(self.coefficients / float(other))
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        a, b = self.coefficients, other.coefficients
        if b[0] == 0.0:
            raise ZeroDivisionError("jet division by a series vanishing at the expansion point")
        q = np.empty_like(a)
        for n in range(a.size):
            q[n] = (a[n] - np.dot(b[1 : n + 1], q[n - 1 :: -1][:n])) / b[0]
        return TaylorJet(q)

    def __rtruediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return other / self

    def __pow__(self, p):
        if isinstance(p, numbers.Integral) and p >= 0:
            # repeated squaring keeps polynomial results exact
            result = TaylorJet.constant(1.0, self.order)
            base = self
            p = int(p)
            while p:
                if p & 1:
                    result = result * base
                base = base * base
                p >>= 1
            return result
        if isinstance(p, numbers.Integral):
            return 1.0 / self ** (-int(p))
        if isinstance(p, numbers.Real):
            return _real_power(self, float(p))
        if isinstance(p, TaylorJet):
            return exp(p * log(self))
        return NotImplemented

    def __rpow__(self, base):
        if isinstance(base, numbers.Real):
            if base <= 0:
                raise ValueError("base of a jet power must be positive")
            return exp(self * math.log(base))
        return NotImplemented


def _real_power(a: TaylorJet, p: float) -> TaylorJet:
    c = a.coefficients
    if c[0] <= 0.0:
        raise ValueError("non-integer power of a jet with non-positive constant term")
    out = np.empty_like(c)
    out[0] = c[0] ** p
    for n in range(1, c.size):
        j = np.arange(1, n + 1)
        out[n] = np.dot(((p + 1.0) * j - n) * c[j], out[n - j]) / (n * c[0])
    return TaylorJet(out)


def _jet_exp(a: TaylorJet) -> TaylorJet:
    c = a.coefficients
    out = np.empty_like(c)
    with np.errstate(over="raise"):
        try:
            out[0] = math.exp(c[0])
        except OverflowError as exc:
            raise JetOverflowError("exp overflow in jet constant term") from exc
    for n in range(1, c.size):
        j = np.arange(1, n + 1)
        out[n] = np.dot(j * c[j], out[n - j]) / n
    return TaylorJet(out)


def _jet_log(a: TaylorJet) -> TaylorJet:
    c = a.coefficients
    if c[0] <= 0.0:
        raise ValueError("log of a jet with non-positive constant term")
    out = np.empty_like(c)
    out[0] = math.log(c[0])
    for n in range(1, c.size):
        j = np.arange(1, n)
        out[n] = (c[n] - np.dot(j * out[j], c[n - j]) / n) / c[0]
    return TaylorJet(out)


def exp(x):
    if isinstance(x, TaylorJet):
        return _jet_exp(x)
    return np.exp(x)


def log(x):
    if isinstance(x, TaylorJet):
        return _jet_log(x)
    return np.log(x)


def log1p(x):
    if isinstance(x, TaylorJet):
        c = x.coefficients.copy()
        out = _jet_log(TaylorJet(np.concatenate(([1.0 + c[0]], c[1:]))))
        out.coefficients[0] = math.log1p(c[0])
        return out
    return np.log1p(x)


def sqrt(x):
    if isinstance(x, TaylorJet):
        return _real_power(x, 0.5)
    return np.sqrt(x)


def power(x, p):
    if isinstance(x, TaylorJet) or isinstance(p, TaylorJet):
        return x ** p
    return np.power(x, p)


def derivative(f, x0: float, order: int) -> float:
    """``order``-th derivative of a jet-aware callable ``f`` at ``x0``."""
    if order < 1:
        raise ValueError("derivative order must be >= 1")
    jet = f(TaylorJet.variable(x0, order))
    if not isinstance(jet, TaylorJet):
        return 0.0
    value = jet.derivative(order)
    if not math.isfinite(value):
        raise JetOverflowError(f"order-{order} derivative overflowed; use a lower order")
    return value
