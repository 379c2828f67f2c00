"""Compiled fixed-step kernels for the runtime benchmarks.

These advance a whole batch group ``(m, D, W)`` through ``n_steps`` classic
fourth-order steps with a shared step size.  The stage loops run over packs
with the lane index innermost and contiguous, which is the layout LLVM's
loop vectorizer turns into packed arithmetic; a width-1 run of the same code
takes the scalar remainder path, so the ``width`` knob cleanly switches the
SIMD story on and off while computing identical per-lane results.

The loop structure mirrors the generic stepper exactly (stage k of every
pack before stage k+1 of any pack, identical accumulation order), so kernel
results agree with the structured path to roundoff.  The fastmath subset
below permits reassociation and FMA contraction but keeps NaN/Inf semantics:
diverged lanes stay honestly non-finite.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

FASTMATH = {"reassoc", "contract", "nsz", "arcp"}
_SIG = "(float64[:,:,::1], float64[:,:,::1], float64, int64)"
_JIT = dict(cache=True, nogil=True, fastmath=FASTMATH, error_model="numpy")

# RK4 weights; b-accumulation order matches steppers.attempt_step
_B1 = 1.0 / 6.0
_B2 = 1.0 / 3.0
_B3 = 1.0 / 3.0
_B4 = 1.0 / 6.0


@njit(_SIG, **_JIT)
def lorenz_rk4(y, p, dt, n_steps):
    m = y.shape[0]
    w = y.shape[2]
    acc = np.empty_like(y)
    yt = np.empty_like(y)
    h2 = dt * 0.5
    for _ in range(n_steps):
        for j in range(m):
            for l in range(w):
                x1 = y[j, 0, l]
                x2 = y[j, 1, l]
                x3 = y[j, 2, l]
                k1 = 10.0 * (x2 - x1)
                k2 = p[j, 0, l] * x1 - x2 - x1 * x3
                k3 = x1 * x2 - 2.666 * x3
                acc[j, 0, l] = _B1 * k1
                acc[j, 1, l] = _B1 * k2
                acc[j, 2, l] = _B1 * k3
                yt[j, 0, l] = x1 + h2 * k1
                yt[j, 1, l] = x2 + h2 * k2
                yt[j, 2, l] = x3 + h2 * k3
        for j in range(m):
            for l in range(w):
                x1 = yt[j, 0, l]
                x2 = yt[j, 1, l]
                x3 = yt[j, 2, l]
                k1 = 10.0 * (x2 - x1)
                k2 = p[j, 0, l] * x1 - x2 - x1 * x3
                k3 = x1 * x2 - 2.666 * x3
                acc[j, 0, l] += _B2 * k1
                acc[j, 1, l] += _B2 * k2
                acc[j, 2, l] += _B2 * k3
                yt[j, 0, l] = y[j, 0, l] + h2 * k1
                yt[j, 1, l] = y[j, 1, l] + h2 * k2
                yt[j, 2, l] = y[j, 2, l] + h2 * k3
        for j in range(m):
            for l in range(w):
                x1 = yt[j, 0, l]
                x2 = yt[j, 1, l]
                x3 = yt[j, 2, l]
                k1 = 10.0 * (x2 - x1)
                k2 = p[j, 0, l] * x1 - x2 - x1 * x3
                k3 = x1 * x2 - 2.666 * x3
                acc[j, 0, l] += _B3 * k1
                acc[j, 1, l] += _B3 * k2
                acc[j, 2, l] += _B3 * k3
                yt[j, 0, l] = y[j, 0, l] + dt * k1
                yt[j, 1, l] = y[j, 1, l] + dt * k2
                yt[j, 2, l] = y[j, 2, l] + dt * k3
        for j in range(m):
            for l in range(w):
                x1 = yt[j, 0, l]
                x2 = yt[j, 1, l]
                x3 = yt[j, 2, l]
                k1 = 10.0 * (x2 - x1)
                k2 = p[j, 0, l] * x1 - x2 - x1 * x3
                k3 = x1 * x2 - 2.666 * x3
                y[j, 0, l] += dt * (acc[j, 0, l] + _B4 * k1)
                y[j, 1, l] += dt * (acc[j, 1, l] + _B4 * k2)
                y[j, 2, l] += dt * (acc[j, 2, l] + _B4 * k3)


@njit(_SIG, **_JIT)
def intro_rk4(y, p, dt, n_steps):
    m = y.shape[0]
    w = y.shape[2]
    h2 = dt * 0.5
    for _ in range(n_steps):
        for j in range(m):
            for l in range(w):
                x = y[j, 0, l]
                pp = p[j, 0, l]
                k1 = x * x - pp
                xs = x + h2 * k1
                k2 = xs * xs - pp
                xs = x + h2 * k2
                k3 = xs * xs - pp
                xs = x + dt * k3
                k4 = xs * xs - pp
                y[j, 0, l] = x + dt * (_B1 * k1 + _B2 * k2 + _B3 * k3 + _B4 * k4)


@njit(_SIG, **_JIT)
def intro_div_rk4(y, p, dt, n_steps):
    m = y.shape[0]
    w = y.shape[2]
    h2 = dt * 0.5
    for _ in range(n_steps):
        for j in range(m):
            for l in range(w):
                x = y[j, 0, l]
                pp = p[j, 0, l]
                k1 = 1.0 / x - pp * x
                xs = x + h2 * k1
                k2 = 1.0 / xs - pp * xs
                xs = x + h2 * k2
                k3 = 1.0 / xs - pp * xs
                xs = x + dt * k3
                k4 = 1.0 / xs - pp * xs
                y[j, 0, l] = x + dt * (_B1 * k1 + _B2 * k2 + _B3 * k3 + _B4 * k4)


@njit(_SIG, **_JIT)
def intro_sin_rk4(y, p, dt, n_steps):
    m = y.shape[0]
    w = y.shape[2]
    h2 = dt * 0.5
    for _ in range(n_steps):
        for j in range(m):
            for l in range(w):
                x = y[j, 0, l]
                pp = p[j, 0, l]
                k1 = pp * math.sin(x)
                xs = x + h2 * k1
                k2 = pp * math.sin(xs)
                xs = x + h2 * k2
                k3 = pp * math.sin(xs)
                xs = x + dt * k3
                k4 = pp * math.sin(xs)
                y[j, 0, l] = x + dt * (_B1 * k1 + _B2 * k2 + _B3 * k3 + _B4 * k4)


FIXED_RK4_KERNELS = {
    "lorenz": lorenz_rk4,
    "intro": intro_rk4,
    "intro-div": intro_div_rk4,
    "intro-sin": intro_sin_rk4,
}
