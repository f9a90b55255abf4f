"""Forward-mode first-order jets over (x, y, t).

A :class:`Jet` carries values of shape ``(N,)`` together with the partial
derivatives with respect to the two space coordinates and time, stored as an
``(N, 3)`` array.  Planar vector fields are pairs of jets (:class:`VJet`).
Only the handful of operations needed by the calibration constructions are
provided.
"""

from __future__ import annotations

import numpy as np

DX, DY, DT = 0, 1, 2


class Jet:
    __slots__ = ("val", "d")

    def __init__(self, val, d=None):
        self.val = np.asarray(val, dtype=float)
        if d is None:
            d = np.zeros(self.val.shape + (3,))
        self.d = np.asarray(d, dtype=float)

    # construction -------------------------------------------------------
    @classmethod
    def const(cls, val, n=None):
        val = np.asarray(val, dtype=float)
        if n is not None and val.ndim == 0:
            val = np.full(n, float(val))
        return cls(val)

    @classmethod
    def time_function(cls, value, rate, n):
        """Spatially constant jet with prescribed time derivative."""
        d = np.zeros((n, 3))
        d[:, DT] = rate
        return cls(np.full(n, float(value)), d)

    @classmethod
    def coords(cls, points):
        points = np.asarray(points, dtype=float)
        n = points.shape[0]
        dx = np.zeros((n, 3))
        dx[:, DX] = 1.0
        dy = np.zeros((n, 3))
        dy[:, DY] = 1.0
        return cls(points[:, 0].copy(), dx), cls(points[:, 1].copy(), dy)

    # accessors ----------------------------------------------------------
    @property
    def grad(self):
        return self.d[:, :2]

    @property
    def dt(self):
        return self.d[:, DT]

    def __len__(self):
        return self.val.shape[0]

    def subset(self, mask):
        return Jet(self.val[mask], self.d[mask])

    def copy(self):
        return Jet(self.val.copy(), self.d.copy())

    def put(self, mask, other):
        self.val[mask] = other.val
        self.d[mask] = other.d

    # arithmetic ---------------------------------------------------------
    def __add__(self, other):
        if isinstance(other, Jet):
            return Jet(self.val + other.val, self.d + other.d)
        return Jet(self.val + other, self.d)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.val, -self.d)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Jet):
            return Jet(self.val * other.val,
                       self.d * other.val[:, None] + other.d * self.val[:, None])
        other = np.asarray(other, dtype=float)
        scale = other[:, None] if other.ndim == 1 else other
        return Jet(self.val * other, self.d * scale)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other.reciprocal()
        return self * (1.0 / np.asarray(other, dtype=float))

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def reciprocal(self):
        inv = 1.0 / self.val
        return Jet(inv, -self.d * (inv * inv)[:, None])

    def sqrt(self):
        root = np.sqrt(self.val)
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = np.where(root > 0.0, 0.5 / root, 0.0)
        return Jet(root, self.d * scale[:, None])

    def square(self):
        return self * self

    def apply(self, f, fprime):
        """Compose with a scalar function given together with its derivative."""
        return Jet(f(self.val), self.d * fprime(self.val)[:, None])


class VJet:
    """Planar vector field as a pair of scalar jets."""

    __slots__ = ("x", "y")

    def __init__(self, x: Jet, y: Jet):
        self.x = x
        self.y = y

    @classmethod
    def const(cls, vec):
        vec = np.asarray(vec, dtype=float)
        return cls(Jet(vec[:, 0].copy()), Jet(vec[:, 1].copy()))

    @classmethod
    def time_function(cls, value, rate, n):
        return cls(Jet.time_function(value[0], rate[0], n),
                   Jet.time_function(value[1], rate[1], n))

    @classmethod
    def zeros(cls, n):
        return cls(Jet(np.zeros(n)), Jet(np.zeros(n)))

    @property
    def val(self):
        return np.stack([self.x.val, self.y.val], axis=-1)

    @property
    def jacobian(self):
        """Spatial Jacobian, ``J[k, i, j] = d(component i)/d(x_j)``."""
        return np.stack([self.x.grad, self.y.grad], axis=1)

    @property
    def dt(self):
        return np.stack([self.x.dt, self.y.dt], axis=-1)

    @property
    def div(self):
        return self.x.d[:, DX] + self.y.d[:, DY]

    def __len__(self):
        return len(self.x)

    def subset(self, mask):
        return VJet(self.x.subset(mask), self.y.subset(mask))

    def copy(self):
        return VJet(self.x.copy(), self.y.copy())

    def put(self, mask, other):
        self.x.put(mask, other.x)
        self.y.put(mask, other.y)

    def __add__(self, other):
        return VJet(self.x + other.x, self.y + other.y)

    def __sub__(self, other):
        return VJet(self.x - other.x, self.y - other.y)

    def __neg__(self):
        return VJet(-self.x, -self.y)

    def scale(self, factor):
        """Multiply by a scalar jet, array or float."""
        return VJet(self.x * factor, self.y * factor)

    def dot(self, other):
        if isinstance(other, VJet):
            return self.x * other.x + self.y * other.y
        other = np.asarray(other, dtype=float)
        if other.ndim == 1:
            return self.x * other[0] + self.y * other[1]
        return self.x * other[:, 0] + self.y * other[:, 1]

    def norm2(self):
        return self.dot(self)

    def rot_ccw(self):
        return VJet(-self.y, self.x)

    def rot_cw(self):
        return VJet(self.y, -self.x)


def blend(weight: Jet, a: VJet, b: VJet) -> VJet:
    """``weight * a + (1 - weight) * b``."""
    return a.scale(weight) + b.scale(1.0 - weight)
