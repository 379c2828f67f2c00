"""Right-hand sides of the bundled ODE systems.

Each model is exposed as a :class:`SystemSpec` whose ``rhs`` is a compiled
kernel with the uniform signature ``rhs(t, y, params, out)`` operating on one
lane pack: ``t`` is the per-lane time ``(W,)``, ``y`` the state block
``(D, W)``, ``params`` the parameter block ``(P, W)`` and ``out`` the
derivative block ``(D, W)``.  Kernels are pure, reentrant and use numpy
error semantics (division by zero yields inf/nan instead of raising), so a
sick lane poisons only itself.

Models
------
``intro``       dx = x^2 - p            (one multiply-add)
``intro-div``   dx = 1/x - p*x          (adds a division)
``intro-sin``   dx = p*sin(x)           (adds a transcendental)
``lorenz``      three-component chaotic benchmark, sigma = 10, b = 2.666
``km``          bubble-radius oscillator in dimensionless form, driven by a
                dual-frequency acoustic pressure; parameters are the 13
                precomputed coefficients from :func:`km_coefficients`
``valve``       pressure-relief valve body with seat impacts; chamber
                pressure feeds back through a sqrt outflow law
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from numba import njit

from .lanes import STATUS_COLLAPSE, STATUS_NEGATIVE_PRESSURE

__all__ = [
    "SystemSpec",
    "KMPhysical",
    "km_coefficients",
    "intro_rhs",
    "intro_div_rhs",
    "intro_sin_rhs",
    "lorenz_rhs",
    "km_rhs",
    "valve_rhs",
    "SYSTEMS",
    "VALVE_KAPPA",
    "VALVE_DELTA",
    "VALVE_BETA",
    "VALVE_RESTITUTION",
]

_KERNEL_SIG = "(float64[::1], float64[:,::1], float64[:,::1], float64[:,::1])"
_JIT = dict(cache=True, nogil=True, error_model="numpy")

# liquid/gas properties shared by every bubble configuration
KM_SOUND_SPEED = 1497.3        # m/s
KM_DENSITY = 997.1             # kg/m^3
KM_AMBIENT_PRESSURE = 1.0e5    # Pa
KM_VAPOUR_PRESSURE = 3166.8    # Pa
KM_SURFACE_TENSION = 0.072     # N/m
KM_VISCOSITY = 8.902e-4        # Pa s
KM_POLYTROPIC = 1.4

# valve body constants; the flow rate q is the per-lane control parameter
VALVE_KAPPA = 1.25
VALVE_DELTA = 10.0
VALVE_BETA = 20.0
VALVE_RESTITUTION = 0.8


@dataclass(frozen=True)
class SystemSpec:
    """A model definition: dimension, parameter count and compiled RHS.

    ``guard`` optionally classifies states a lane must never commit; it
    returns a per-lane bool mask plus the status code to flag with.
    """

    name: str
    dim: int
    n_params: int
    rhs: Callable
    guard: Optional[Callable] = None


@njit(_KERNEL_SIG, **_JIT)
def _intro_kernel(t, y, p, out):
    for l in range(y.shape[1]):
        x = y[0, l]
        out[0, l] = x * x - p[0, l]


@njit(_KERNEL_SIG, **_JIT)
def _intro_div_kernel(t, y, p, out):
    for l in range(y.shape[1]):
        x = y[0, l]
        out[0, l] = 1.0 / x - p[0, l] * x


@njit(_KERNEL_SIG, **_JIT)
def _intro_sin_kernel(t, y, p, out):
    for l in range(y.shape[1]):
        out[0, l] = p[0, l] * math.sin(y[0, l])


@njit(_KERNEL_SIG, **_JIT)
def _lorenz_kernel(t, y, p, out):
    for l in range(y.shape[1]):
        x1 = y[0, l]
        x2 = y[1, l]
        x3 = y[2, l]
        out[0, l] = 10.0 * (x2 - x1)
        out[1, l] = p[0, l] * x1 - x2 - x1 * x3
        out[2, l] = x1 * x2 - 2.666 * x3


_TWO_PI = 2.0 * math.pi


@njit(_KERNEL_SIG, **_JIT)
def _km_kernel(tau, y, c, out):
    for l in range(y.shape[1]):
        y1 = y[0, l]
        y2 = y[1, l]
        # the only reciprocal of y1; reused as a multiplicator below
        inv_y1 = 1.0 / y1
        s1 = math.sin(_TWO_PI * tau[l])
        co1 = math.cos(_TWO_PI * tau[l])
        arg2 = _TWO_PI * c[11, l] * tau[l] + c[12, l]
        s2 = math.sin(arg2)
        co2 = math.cos(arg2)
        wall = 1.0 + c[9, l] * y2
        num = (
            (c[0, l] + c[1, l] * y2) * inv_y1 ** c[10, l]
            - c[2, l] * wall
            - c[3, l] * inv_y1
            - c[4, l] * y2 * inv_y1
            - (1.0 - c[9, l] * y2 / 3.0) * 1.5 * y2 * y2
            - (c[5, l] * s1 + c[6, l] * s2) * wall
            - y1 * (c[7, l] * co1 + c[8, l] * co2)
        )
        den = y1 - c[9, l] * y1 * y2 + c[4, l] * c[9, l]
        out[0, l] = y2
        out[1, l] = num / den


@njit(_KERNEL_SIG, **_JIT)
def _valve_kernel(t, y, p, out):
    for l in range(y.shape[1]):
        y1 = y[0, l]
        y2 = y[1, l]
        y3 = y[2, l]
        if y3 >= 0.0:
            root = math.sqrt(y3)
        elif y3 > -1e-12:
            # roundoff dip below zero; anything more negative is a lane error
            root = 0.0
        else:
            root = np.nan
        out[0, l] = y2
        out[1, l] = -1.25 * y2 - (y1 + 10.0) + y3
        out[2, l] = 20.0 * (p[0, l] - y1 * root)


def _km_guard(y):
    return y[0] <= 0.0, STATUS_COLLAPSE


def _valve_guard(y):
    return y[2] < -1e-12, STATUS_NEGATIVE_PRESSURE


@dataclass(frozen=True)
class KMPhysical:
    """Physical driving/bubble configuration (SI units).

    ``f1`` may be an array to configure a whole sweep at once.  The liquid
    properties are fixed module constants; only the acoustic driving and the
    equilibrium radius vary between experiments.
    """

    p_a1: float = 1.5e5      # first pressure amplitude [Pa]
    p_a2: float = 0.0        # second pressure amplitude [Pa]
    f1: float = 20.0e3       # first driving frequency [Hz]
    f2: float = 0.0          # second driving frequency [Hz]
    theta: float = 0.0       # phase shift [rad]
    r_e: float = 10.0e-6     # equilibrium bubble radius [m]


def km_coefficients(phys: KMPhysical) -> np.ndarray:
    """Precompute the 13 dimensionless coefficients of the bubble model.

    Time is rescaled so one driving period of ``f1`` has unit length and the
    radius is measured in units of ``r_e``.  Returns a ``(13,)`` array, or
    ``(13, n)`` when ``phys.f1`` is an array of ``n`` frequencies.

    The identity ``C0 - C2 - C3 = 0`` holds by construction (the static
    pressure balance at the equilibrium radius) and is used as a cross-check
    in the tests.
    """
    f1 = np.asarray(phys.f1, dtype=np.float64)
    if np.any(f1 <= 0.0):
        raise ValueError("driving frequency f1 must be positive")
    if phys.r_e <= 0.0:
        raise ValueError("equilibrium radius must be positive")
    scalar = f1.ndim == 0
    f1 = np.atleast_1d(f1)

    rho = KM_DENSITY
    c_l = KM_SOUND_SPEED
    r_e = phys.r_e
    omega1 = 2.0 * np.pi * f1
    omega2 = 2.0 * np.pi * phys.f2
    p_gas = KM_AMBIENT_PRESSURE - KM_VAPOUR_PRESSURE + 2.0 * KM_SURFACE_TENSION / r_e
    k = 2.0 * np.pi / (r_e * omega1)

    c = np.empty((13, f1.size), dtype=np.float64)
    c[0] = p_gas / rho * k * k
    c[1] = (1.0 - 3.0 * KM_POLYTROPIC) / (rho * c_l) * p_gas * k
    c[2] = (KM_AMBIENT_PRESSURE - KM_VAPOUR_PRESSURE) / rho * k * k
    c[3] = 2.0 * KM_SURFACE_TENSION / (rho * r_e) * k * k
    c[4] = 4.0 * KM_VISCOSITY / (rho * r_e * r_e) * (2.0 * np.pi / omega1)
    c[5] = phys.p_a1 / rho * k * k
    c[6] = phys.p_a2 / rho * k * k
    c[7] = r_e * omega1 * phys.p_a1 / (rho * c_l) * k * k
    c[8] = r_e * omega1 * phys.p_a2 / (rho * c_l) * k * k
    c[9] = r_e * omega1 / (2.0 * np.pi * c_l)
    c[10] = 3.0 * KM_POLYTROPIC
    c[11] = omega2 / omega1
    c[12] = phys.theta
    return c[:, 0] if scalar else c


def _as_pack(x):
    a = np.atleast_1d(np.asarray(x, dtype=np.float64))
    return np.ascontiguousarray(a.reshape(1, -1))


def _call_kernel(kernel, t, y_rows, p_rows):
    y = np.ascontiguousarray(np.vstack(y_rows))
    p = np.ascontiguousarray(np.vstack(p_rows))
    w = y.shape[1]
    tt = np.full(w, 0.0) if t is None else np.ascontiguousarray(
        np.broadcast_to(np.asarray(t, dtype=np.float64), (w,)).copy()
    )
    out = np.empty_like(y)
    kernel(tt, y, p, out)
    return out


def intro_rhs(x, p):
    """dx/dt = x^2 - p."""
    out = _call_kernel(_intro_kernel, None, [_as_pack(x)[0]], [_as_pack(p)[0]])
    return out[0] if np.ndim(x) else float(out[0, 0])


def intro_div_rhs(x, p):
    """dx/dt = 1/x - p*x (non-finite at x = 0)."""
    out = _call_kernel(_intro_div_kernel, None, [_as_pack(x)[0]], [_as_pack(p)[0]])
    return out[0] if np.ndim(x) else float(out[0, 0])


def intro_sin_rhs(x, p):
    """dx/dt = p*sin(x)."""
    out = _call_kernel(_intro_sin_kernel, None, [_as_pack(x)[0]], [_as_pack(p)[0]])
    return out[0] if np.ndim(x) else float(out[0, 0])


def lorenz_rhs(x1, x2, x3, p):
    """The three-component chaotic benchmark system."""
    scalar = not np.ndim(x1)
    out = _call_kernel(
        _lorenz_kernel, None,
        [_as_pack(x1)[0], _as_pack(x2)[0], _as_pack(x3)[0]],
        [_as_pack(p)[0]],
    )
    if scalar:
        return float(out[0, 0]), float(out[1, 0]), float(out[2, 0])
    return out[0], out[1], out[2]


def km_rhs(y1, y2, tau, coeffs):
    """Dimensionless bubble-wall acceleration, ``(dy1, dy2)``.

    ``coeffs`` is the ``(13,)`` or ``(13, n)`` output of
    :func:`km_coefficients`.  The denominator vanishes only at a collapse
    singularity; such lanes are flagged by the driver rather than raising.
    """
    scalar = not np.ndim(y1)
    c = np.asarray(coeffs, dtype=np.float64)
    if c.ndim == 1:
        c = np.repeat(c[:, None], np.size(y1), axis=1)
    out = _call_kernel(_km_kernel, tau, [_as_pack(y1)[0], _as_pack(y2)[0]], list(c))
    if scalar:
        return float(out[0, 0]), float(out[1, 0])
    return out[0], out[1]


def valve_rhs(y1, y2, y3, q):
    """Valve body kinematics plus chamber pressure balance."""
    scalar = not np.ndim(y1)
    out = _call_kernel(
        _valve_kernel, None,
        [_as_pack(y1)[0], _as_pack(y2)[0], _as_pack(y3)[0]],
        [_as_pack(q)[0]],
    )
    if scalar:
        return float(out[0, 0]), float(out[1, 0]), float(out[2, 0])
    return out[0], out[1], out[2]


SYSTEMS = {
    "intro": SystemSpec("intro", 1, 1, _intro_kernel),
    "intro-div": SystemSpec("intro-div", 1, 1, _intro_div_kernel),
    "intro-sin": SystemSpec("intro-sin", 1, 1, _intro_sin_kernel),
    "lorenz": SystemSpec("lorenz", 3, 1, _lorenz_kernel),
    "km": SystemSpec("km", 2, 13, _km_kernel, guard=_km_guard),
    "valve": SystemSpec("valve", 3, 1, _valve_kernel, guard=_valve_guard),
}
