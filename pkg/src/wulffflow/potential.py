"""Double-well potentials with wells at 0 and 1, and the 1-D optimal profile.

The default well is W(s) = 36 s^2 (1-s)^2, scaled so that the surface
normalization c0 = int_0^1 sqrt(W) equals 1 exactly, which removes the c0
prefactor from every sharp-interface comparison.  Its lambda-convexity
constant is 36 (the exact minimum of -W'' over the line).
"""

from __future__ import annotations

import dataclasses

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicHermiteSpline

from .errors import ConvergenceError, InputError


def _poly(coeffs):
    return np.polynomial.Polynomial(np.asarray(coeffs, dtype=float))


def _min_over_line(poly) -> float:
    """Exact minimum of an even-degree polynomial with positive leading
    coefficient: evaluate at the real critical points."""
    crit = poly.deriv().roots()
    crit = crit[np.abs(crit.imag) < 1e-12].real
    if len(crit) == 0:
        raise InputError("polynomial has no interior critical points")
    return float(poly(crit).min())


@dataclasses.dataclass(frozen=True)
class DoubleWell:
    """Polynomial double-well potential with wells at 0 and 1.

    Attributes
    ----------
    coeffs : ascending polynomial coefficients of W
    lambda_ : lambda-convexity constant, the exact value -min W''
    c0 : int_0^1 sqrt(W(s)) ds
    """

    coeffs: tuple
    lambda_: float
    c0: float

    @classmethod
    def from_coeffs(cls, coeffs, c0: float | None = None,
                    lambda_: float | None = None) -> "DoubleWell":
        w = _poly(coeffs)
        _validate_well(w)
        if lambda_ is None:
            lambda_ = -_min_over_line(w.deriv(2))
            if lambda_ <= 0.0:
                raise InputError("W'' has no negative part: not a double well")
        if c0 is None:
            c0 = c0_of_poly(w)
        return cls(coeffs=tuple(float(c) for c in np.asarray(coeffs, float)),
                   lambda_=float(lambda_), c0=float(c0))

    def w(self, s) -> np.ndarray:
        return _poly(self.coeffs)(np.asarray(s, dtype=float))

    def wp(self, s) -> np.ndarray:
        return _poly(self.coeffs).deriv()(np.asarray(s, dtype=float))

    def wpp(self, s) -> np.ndarray:
        return _poly(self.coeffs).deriv(2)(np.asarray(s, dtype=float))

    def sqrt_w(self, s) -> np.ndarray:
        return np.sqrt(np.maximum(self.w(s), 0.0))

    @property
    def is_standard(self) -> bool:
        return np.allclose(self.coeffs, (0.0, 0.0, 36.0, -72.0, 36.0))

    def phi(self, z) -> np.ndarray:
        """Antiderivative phi(z) = int_0^z sqrt(W), clamped outside [0, 1].

        Closed form z^2 (3 - 2 z) for the standard well; tabulated quadrature
        otherwise.  phi(1) = c0.
        """
        z = np.asarray(z, dtype=float)
        zc = np.clip(z, 0.0, 1.0)
        if self.is_standard:
            return zc * zc * (3.0 - 2.0 * zc)
        return self._phi_table()(zc)

    def _phi_table(self):
        if not hasattr(self, "_phi_spline"):
            s = np.linspace(0.0, 1.0, 2001)
            vals = np.concatenate([[0.0], np.cumsum(
                (self.sqrt_w(s[:-1]) + self.sqrt_w(s[1:])) / 2 * np.diff(s))])
            object.__setattr__(self, "_phi_spline",
                               CubicHermiteSpline(s, vals, self.sqrt_w(s)))
        return self._phi_spline


def _validate_well(w):
    """Sampled admissibility gates: wells exactly at 0 and 1, positivity off
    the wells, W'' > 0 at the wells, monotone beyond [0, 1]."""
    if abs(w(0.0)) > 1e-12 or abs(w(1.0)) > 1e-12:
        raise InputError("W must vanish at 0 and 1")
    s = np.linspace(-2.0, 3.0, 2001)
    interior = (np.abs(s) > 1e-3) & (np.abs(s - 1.0) > 1e-3)
    if np.any(w(s[interior]) <= 0.0):
        raise InputError("W must be positive away from the wells")
    wpp = w.deriv(2)
    if wpp(0.0) <= 0.0 or wpp(1.0) <= 0.0:
        raise InputError("W'' must be positive at both wells")
    wp = w.deriv()
    if np.any(wp(np.linspace(-2.0, 0.0, 200)) > 1e-12):
        raise InputError("W must be nonincreasing on (-inf, 0]")
    if np.any(wp(np.linspace(1.0, 3.0, 200)) < -1e-12):
        raise InputError("W must be nondecreasing on [1, inf)")


def standard_well() -> DoubleWell:
    """W(s) = 36 s^2 (1-s)^2 with the exact constants c0 = 1, lambda = 36."""
    return DoubleWell(coeffs=(0.0, 0.0, 36.0, -72.0, 36.0),
                      lambda_=36.0, c0=1.0)


_WELL_REGISTRY = {"standard36": standard_well}


def well_from_name(name: str) -> DoubleWell:
    try:
        return _WELL_REGISTRY[name]()
    except KeyError:
        raise InputError(f"unknown well {name!r}; known: {sorted(_WELL_REGISTRY)}")


def c0_of_poly(w) -> float:
    val, err = quad(lambda s: np.sqrt(max(w(s), 0.0)), 0.0, 1.0,
                    epsabs=1e-12, epsrel=1e-12, limit=200)
    if err > 1e-10:
        raise ConvergenceError(f"c0 quadrature error estimate {err:.2e} > 1e-10",
                               residual=err)
    return float(val)


def c0_of(well: DoubleWell) -> float:
    """Adaptive quadrature of int_0^1 sqrt(W), absolute tolerance 1e-10."""
    return c0_of_poly(_poly(well.coeffs))


class Profile:
    """Monotone transition profile: the solution of P' = sqrt(W(P)), P(0) = 1/2.

    Tabulated by RK4 with step 1e-3 on z in [-10, 10] and interpolated with a
    Hermite spline whose slopes are the exact sqrt(W(P)) values; extended by
    the endpoint constants beyond the table (there 1 - P and P fall below
    1e-25, far under any grid resolution).
    """

    z_max = 10.0
    step = 1e-3

    def __init__(self, well: DoubleWell):
        self.well = well
        n = int(round(self.z_max / self.step))
        fwd = self._integrate(well, n, +self.step)
        bwd = self._integrate(well, n, -self.step)
        z = np.concatenate([-self.step * np.arange(n, 0, -1), [0.0],
                            self.step * np.arange(1, n + 1)])
        vals = np.concatenate([bwd[::-1], [0.5], fwd])
        # Ties are allowed only where 1 - P saturates at float resolution.
        if np.any(np.diff(vals) < 0.0):
            raise ConvergenceError("profile tabulation is not monotone")
        self.z = z
        self.values = vals
        self._spline = CubicHermiteSpline(z, vals, well.sqrt_w(vals))

    @staticmethod
    def _integrate(well, n, h):
        out = np.empty(n)
        y = 0.5
        f = well.sqrt_w
        sign = 1.0 if h > 0 else -1.0
        hh = abs(h)
        for i in range(n):
            k1 = sign * f(y)
            k2 = sign * f(y + 0.5 * hh * k1)
            k3 = sign * f(y + 0.5 * hh * k2)
            k4 = sign * f(y + hh * k3)
            y = y + hh / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
            out[i] = y
        return out

    def __call__(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        out = self._spline(np.clip(z, -self.z_max, self.z_max))
        return np.clip(out, self.values[0], self.values[-1])

    def export_csv(self, path):
        rows = np.column_stack([self.z, self.values])
        np.savetxt(path, rows, delimiter=",", header="z,theta", comments="")


def profile(well: DoubleWell) -> Profile:
    return Profile(well)
