"""Analytic toy energy landscapes.

Each potential exposes energy, gradient, and Laplacian in closed form.
Exact second derivatives are required downstream: the path-action weights
depend on |grad U|^2 and on the Laplacian of U, and finite differences
would inject noise into every edge weight of the transition graph.

Kinds:
    double-well        U(x, y) = (x^2 - 1)^2 + a * y^2
    mueller-brown      the standard four-Gaussian surface
    harmonic           U(q) = 1/2 * sum_i kappa_i * q_i^2
    custom-polynomial  sum of monomial terms from a coefficient table
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError

# Classic Mueller-Brown parameter set (four Gaussian terms).
_MB_A = np.array([-200.0, -100.0, -170.0, 15.0])
_MB_a = np.array([-1.0, -1.0, -6.5, 0.7])
_MB_b = np.array([0.0, 0.0, 11.0, 0.6])
_MB_c = np.array([-10.0, -10.0, -6.5, 0.7])
_MB_x0 = np.array([1.0, 0.0, -0.5, -1.0])
_MB_y0 = np.array([0.0, 0.5, 1.5, 1.0])


class Potential:
    """Base interface: scalar energy plus exact first and second derivatives."""

    kind = "abstract"
    dim: int

    def energy(self, q: np.ndarray) -> float:
        raise NotImplementedError

    def gradient(self, q: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def laplacian(self, q: np.ndarray) -> float:
        raise NotImplementedError

    def params(self) -> dict:
        """JSON-serializable parameter record (used for config echo)."""
        raise NotImplementedError

    def _check(self, q: np.ndarray) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        if q.shape != (self.dim,):
            raise ValidationError(
                f"{self.kind} potential expects a point of dimension {self.dim}, "
                f"got shape {q.shape}"
            )
        return q


class DoubleWell(Potential):
    """Two basins at (+-1, 0) separated by a barrier of height 1 at x = 0.

    U(x, y) = (x^2 - 1)^2 + a * y^2
    """

    kind = "double-well"
    dim = 2

    def __init__(self, a: float = 5.0):
        if a <= 0:
            raise ValidationError("double-well transverse stiffness a must be > 0")
        self.a = float(a)

    def energy(self, q):
        q = self._check(q)
        x, y = q
        return float((x * x - 1.0) ** 2 + self.a * y * y)

    def gradient(self, q):
        q = self._check(q)
        x, y = q
        return np.array([4.0 * x * (x * x - 1.0), 2.0 * self.a * y])

    def laplacian(self, q):
        q = self._check(q)
        x = q[0]
        return float(12.0 * x * x - 4.0 + 2.0 * self.a)

    def params(self):
        return {"a": self.a}


class MuellerBrown(Potential):
    """The standard two-dimensional Mueller-Brown surface.

    U(x, y) = sum_k A_k exp(a_k dx^2 + b_k dx dy + c_k dy^2) with
    dx = x - x0_k, dy = y - y0_k. An overall scale factor tames the
    native O(100) energy units.
    """

    kind = "mueller-brown"
    dim = 2

    def __init__(self, scale: float = 1.0):
        if scale <= 0:
            raise ValidationError("mueller-brown scale must be > 0")
        self.scale = float(scale)

    def _terms(self, q):
        x, y = q
        dx = x - _MB_x0
        dy = y - _MB_y0
        expo = _MB_a * dx * dx + _MB_b * dx * dy + _MB_c * dy * dy
        return dx, dy, self.scale * _MB_A * np.exp(expo)

    def energy(self, q):
        q = self._check(q)
        return float(np.sum(self._terms(q)[2]))

    def gradient(self, q):
        q = self._check(q)
        dx, dy, t = self._terms(q)
        gx = np.sum(t * (2.0 * _MB_a * dx + _MB_b * dy))
        gy = np.sum(t * (_MB_b * dx + 2.0 * _MB_c * dy))
        return np.array([gx, gy])

    def laplacian(self, q):
        q = self._check(q)
        dx, dy, t = self._terms(q)
        ux = 2.0 * _MB_a * dx + _MB_b * dy
        uy = _MB_b * dx + 2.0 * _MB_c * dy
        uxx = np.sum(t * (ux * ux + 2.0 * _MB_a))
        uyy = np.sum(t * (uy * uy + 2.0 * _MB_c))
        return float(uxx + uyy)

    def params(self):
        return {"scale": self.scale}


class Harmonic(Potential):
    """Isotropic or per-axis quadratic well, U(q) = 1/2 sum_i kappa_i q_i^2."""

    kind = "harmonic"

    def __init__(self, kappa, dim: int | None = None):
        kappa = np.atleast_1d(np.asarray(kappa, dtype=float))
        if dim is not None and kappa.size == 1:
            kappa = np.full(dim, kappa[0])
        if np.any(kappa <= 0):
            raise ValidationError("harmonic spring constants must be > 0")
        self.kappa = kappa
        self.dim = kappa.size

    def energy(self, q):
        q = self._check(q)
        return float(0.5 * np.sum(self.kappa * q * q))

    def gradient(self, q):
        q = self._check(q)
        return self.kappa * q

    def laplacian(self, q):
        self._check(q)
        return float(np.sum(self.kappa))

    def params(self):
        return {"kappa": self.kappa.tolist()}


class CustomPolynomial(Potential):
    """Polynomial from a coefficient table.

    Terms are (coefficient, exponent-tuple) entries: the pair
    (2.5, (2, 1)) contributes 2.5 * x^2 * y in two dimensions. Gradients
    and Laplacians follow from the table symbolically, so a constant
    potential is the single term (c, (0, ..., 0)).
    """

    kind = "custom-polynomial"

    def __init__(self, terms, dim: int):
        if dim < 1:
            raise ValidationError("polynomial dimension must be >= 1")
        self.dim = int(dim)
        self.terms = []
        for coeff, expo in terms:
            expo = tuple(int(e) for e in expo)
            if len(expo) != self.dim or any(e < 0 for e in expo):
                raise ValidationError(f"bad exponent tuple {expo} for dimension {dim}")
            self.terms.append((float(coeff), expo))

    def energy(self, q):
        q = self._check(q)
        total = 0.0
        for coeff, expo in self.terms:
            total += coeff * np.prod([q[i] ** e for i, e in enumerate(expo)])
        return float(total)

    def gradient(self, q):
        q = self._check(q)
        g = np.zeros(self.dim)
        for coeff, expo in self.terms:
            for i, e in enumerate(expo):
                if e == 0:
                    continue
                term = coeff * e * q[i] ** (e - 1)
                for j, ej in enumerate(expo):
                    if j != i:
                        term *= q[j] ** ej
                g[i] += term
        return g

    def laplacian(self, q):
        q = self._check(q)
        lap = 0.0
        for coeff, expo in self.terms:
            for i, e in enumerate(expo):
                if e < 2:
                    continue
                term = coeff * e * (e - 1) * q[i] ** (e - 2)
                for j, ej in enumerate(expo):
                    if j != i:
                        term *= q[j] ** ej
                lap += term
        return float(lap)

    def params(self):
        return {"terms": [[c, list(e)] for c, e in self.terms], "dim": self.dim}


def constant(value: float = 0.0, dim: int = 2) -> CustomPolynomial:
    """Flat landscape; pure diffusion under Langevin dynamics."""
    return CustomPolynomial([(value, (0,) * dim)], dim=dim)


def make_potential(kind: str, params: dict | None = None) -> Potential:
    """Build a potential from its config record."""
    params = dict(params or {})
    if kind == "double-well":
        return DoubleWell(**params)
    if kind == "mueller-brown":
        return MuellerBrown(**params)
    if kind == "harmonic":
        return Harmonic(**params)
    if kind == "custom-polynomial":
        return CustomPolynomial(**params)
    raise ValidationError(f"unknown potential kind {kind!r}")
