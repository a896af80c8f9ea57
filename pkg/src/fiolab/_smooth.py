"""Smooth compactly supported building blocks shared across modules."""

import numpy as np


def exp_bump(t):
    """e^{1/(t^2-1)} on (-1, 1), exactly zero elsewhere."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = np.abs(t) < 1.0
    ti = t[inside]
    out[inside] = np.exp(1.0 / (ti * ti - 1.0))
    return out


def exp_bump_d1(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = np.abs(t) < 1.0
    ti = t[inside]
    s = ti * ti - 1.0
    out[inside] = np.exp(1.0 / s) * (-2.0 * ti / (s * s))
    return out


def exp_bump_d2(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = np.abs(t) < 1.0
    ti = t[inside]
    s = ti * ti - 1.0
    t2 = ti * ti
    out[inside] = np.exp(1.0 / s) * (4.0 * t2 - 2.0 * s * s + 8.0 * t2 * s) / s**4
    return out


def _edge(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def smooth_step(t):
    """C-infinity step: 0 for t <= 0, 1 for t >= 1 (both exact)."""
    a = _edge(t)
    b = _edge(1.0 - np.asarray(t, dtype=float))
    return a / (a + b)


def radial_cutoff(r):
    """psi_0 as a function of the radius: 1 on r <= 1, 0 on r >= 2."""
    return smooth_step(2.0 - np.asarray(r, dtype=float))


def plateau(t, inner, outer):
    """Even 1-D cutoff equal to 1 on |t| <= inner and 0 on |t| >= outer."""
    return smooth_step((outer - np.abs(np.asarray(t, dtype=float))) / (outer - inner))
