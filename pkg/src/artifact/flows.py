"""Prescribed velocity fields on the unit disk.

Gradients follow the convention ``grad[k, i, j] = d v_i / d x_j`` at sample
``k``, so that ``(a . nabla) v = grad @ a``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_J = np.array([[0.0, -1.0], [1.0, 0.0]])


def _rot(phi):
    c, s = np.cos(phi), np.sin(phi)
    return np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2)


class VelocityField:
    """Base class.  Subclasses provide ``velocity`` and ``grad``."""

    solenoidal = True
    has_flow_map = False

    def velocity(self, x, t):
        raise NotImplementedError

    def grad(self, x, t):
        raise NotImplementedError

    def dt(self, x, t):
        return np.zeros_like(np.asarray(x, dtype=float))

    def describe(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class AzimuthalFlow(VelocityField):
    """v = omega(|x|) * (-x2, x1) with omega(r) = omega0 + omega1 * (1 - r^2)^2.

    omega1 = 0 is a rigid rotation.  Because omega'(1) = 0 the flow is
    tangential on the unit circle and keeps a 90 degree contact angle.
    Writing q = |x|^2 and g(q) = omega0 + omega1 (1 - q)^2, the exact flow map
    is a rotation by the angle t * g(q).
    """

    omega0: float = 1.0
    omega1: float = 0.0
    has_flow_map = True

    def _g(self, q):
        return self.omega0 + self.omega1 * (1.0 - q) ** 2

    def _g1(self, q):
        return -2.0 * self.omega1 * (1.0 - q)

    def _g2(self, q):
        return 2.0 * self.omega1 * np.ones_like(q)

    def angular_speed(self, r):
        return self._g(np.asarray(r, dtype=float) ** 2)

    def velocity(self, x, t):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        q = np.sum(x * x, axis=1)
        return self._g(q)[:, None] * (x @ _J.T)

    def grad(self, x, t):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        q = np.sum(x * x, axis=1)
        jx = x @ _J.T
        dg = 2.0 * self._g1(q)[:, None] * x
        return self._g(q)[:, None, None] * _J[None] + jx[:, :, None] * dg[:, None, :]

    def flow_map(self, x, t):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        q = np.sum(x * x, axis=1)
        return np.einsum("kij,kj->ki", _rot(t * self._g(q)), x)

    def flow_jacobian(self, x, t, a):
        """D Phi_t(x)[a]."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        a = np.atleast_2d(np.asarray(a, dtype=float))
        q = np.sum(x * x, axis=1)
        rot = _rot(t * self._g(q))
        rx = np.einsum("kij,kj->ki", rot, x)
        ra = np.einsum("kij,kj->ki", rot, a)
        dphi_a = 2.0 * t * self._g1(q) * np.sum(x * a, axis=1)
        return ra + dphi_a[:, None] * (rx @ _J.T)

    def flow_hessian(self, x, t, a, b):
        """D^2 Phi_t(x)[a, b]."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        a = np.atleast_2d(np.asarray(a, dtype=float))
        b = np.atleast_2d(np.asarray(b, dtype=float))
        q = np.sum(x * x, axis=1)
        rot = _rot(t * self._g(q))
        rx = np.einsum("kij,kj->ki", rot, x)
        ra = np.einsum("kij,kj->ki", rot, a)
        rb = np.einsum("kij,kj->ki", rot, b)
        g1, g2 = self._g1(q), self._g2(q)
        xa, xb, ab = np.sum(x * a, 1), np.sum(x * b, 1), np.sum(a * b, 1)
        phi_a, phi_b = 2.0 * t * g1 * xa, 2.0 * t * g1 * xb
        phi_ab = 2.0 * t * (g1 * ab + 2.0 * g2 * xa * xb)
        out = phi_b[:, None] * (ra @ _J.T) + phi_a[:, None] * (rb @ _J.T)
        out += phi_ab[:, None] * (rx @ _J.T) - (phi_a * phi_b)[:, None] * rx
        return out

    def describe(self):
        return {"kind": "azimuthal", "omega0": self.omega0, "omega1": self.omega1}


def zero_flow() -> AzimuthalFlow:
    return AzimuthalFlow(0.0, 0.0)


def rigid_rotation(omega: float = 1.0) -> AzimuthalFlow:
    return AzimuthalFlow(omega, 0.0)


@dataclass(frozen=True)
class DipoleStreamFlow(VelocityField):
    """Non-radial stream-function flow with psi = A (1 - |x|^2)^2 x2.

    v = (d psi/d x2, -d psi/d x1); psi vanishes on the unit circle so v is
    tangential there.  No closed-form flow map.
    """

    amplitude: float = 1.0

    def velocity(self, x, t):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        a = self.amplitude
        x1, x2 = x[:, 0], x[:, 1]
        w = 1.0 - x1 * x1 - x2 * x2
        return np.stack([a * w * (w - 4.0 * x2 * x2), 4.0 * a * x1 * x2 * w], axis=1)

    def grad(self, x, t):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        a = self.amplitude
        x1, x2 = x[:, 0], x[:, 1]
        w = 1.0 - x1 * x1 - x2 * x2
        g = np.empty((x.shape[0], 2, 2))
        g[:, 0, 0] = -4.0 * a * x1 * (w - 2.0 * x2 * x2)
        g[:, 0, 1] = -2.0 * a * x2 * (6.0 * w - 4.0 * x2 * x2)
        g[:, 1, 0] = 4.0 * a * x2 * (w - 2.0 * x1 * x1)
        g[:, 1, 1] = 4.0 * a * x1 * (w - 2.0 * x2 * x2)
        return g

    def describe(self):
        return {"kind": "dipole", "amplitude": self.amplitude}


@dataclass(frozen=True)
class BumpPerturbedFlow(VelocityField):
    """u = base + amplitude * direction * (1 - |x - c|^2 / r^2)_+^3.

    Used for weak candidates whose velocity differs from the strong one.  The
    perturbation is not divergence free.
    """

    base: VelocityField
    amplitude: float
    center: tuple = (0.5, 0.0)
    radius: float = 0.3
    direction: tuple = (1.0, 0.0)
    solenoidal = False

    def _bump(self, x):
        d = np.atleast_2d(np.asarray(x, dtype=float)) - np.asarray(self.center)
        q = np.sum(d * d, axis=1) / self.radius ** 2
        inside = q < 1.0
        eta = np.where(inside, (1.0 - q) ** 3, 0.0)
        deta = np.where(inside, -6.0 * (1.0 - q) ** 2 / self.radius ** 2, 0.0)[:, None] * d
        return eta, deta

    def velocity(self, x, t):
        eta, _ = self._bump(x)
        e = np.asarray(self.direction, dtype=float)
        return self.base.velocity(x, t) + self.amplitude * eta[:, None] * e[None]

    def grad(self, x, t):
        _, deta = self._bump(x)
        e = np.asarray(self.direction, dtype=float)
        return self.base.grad(x, t) + self.amplitude * e[None, :, None] * deta[:, None, :]

    def dt(self, x, t):
        return self.base.dt(x, t)

    def describe(self):
        out = {"kind": "bump-perturbed", "amplitude": self.amplitude,
               "center": list(self.center), "radius": self.radius,
               "direction": list(self.direction)}
        out["base"] = self.base.describe()
        return out


def flow_from_dict(spec: dict) -> VelocityField:
    kind = spec.get("kind", "azimuthal")
    if kind == "zero":
        return zero_flow()
    if kind == "rigid":
        return rigid_rotation(float(spec.get("omega", 1.0)))
    if kind == "azimuthal":
        return AzimuthalFlow(float(spec.get("omega0", 1.0)), float(spec.get("omega1", 0.0)))
    if kind == "dipole":
        return DipoleStreamFlow(float(spec.get("amplitude", 1.0)))
    raise ValueError(f"unknown velocity kind {kind!r}")
