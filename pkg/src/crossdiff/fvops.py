"""Dimension-agnostic finite-volume face operations on flat cell indices.

Shared by the scheme (generic sparse assembly) and the diagnostics (flux
magnitudes); the 1D hot path lives in :mod:`crossdiff.kernels` instead.
"""

from __future__ import annotations

import numpy as np

from .kernels import _alpha_cut_vec
from .params import Params


def face_terms(fv, gv, grid, params: Params, eps, rho, reg, upwind, axis):
    """Per-face quantities along one axis: gradients, pressure gradients,
    damping, face mobilities, fluxes, and the upwind choice."""
    a, b, c, d = params.as_tuple()
    L, R = grid.interior_faces(axis)
    dx = grid.dx
    gradf = (fv[R] - fv[L]) / dx
    gradg = (gv[R] - gv[L]) / dx
    dpf = a * gradf + b * gradg
    dpg = c * gradf + d * gradg
    if reg:
        s = 0.5 * (np.maximum(fv[L], 0.0) + np.maximum(fv[R], 0.0)
                   + np.maximum(gv[L], 0.0) + np.maximum(gv[R], 0.0))
        lam = 2.0 / (1.0 + np.exp(eps * s))
        cut = lambda z: _alpha_cut_vec(z, rho)
    else:
        lam = np.ones_like(gradf)
        cut = lambda z: np.maximum(z, 0.0)
    if upwind:
        up_f = np.where(dpf > 0.0, R, L)
        up_g = np.where(dpg > 0.0, R, L)
        mf = cut(fv[up_f])
        mg = cut(gv[up_g])
    else:
        up_f = up_g = None
        mf = 0.5 * (cut(fv[L]) + cut(fv[R]))
        mg = 0.5 * (cut(gv[L]) + cut(gv[R]))
    flux_f = lam * mf * dpf
    flux_g = lam * mg * dpg
    if reg:
        flux_f = flux_f + eps * gradf
        flux_g = flux_g + eps * gradg
    return {
        "L": L, "R": R, "gradf": gradf, "gradg": gradg,
        "dpf": dpf, "dpg": dpg, "lam": lam, "mf": mf, "mg": mg,
        "up_f": up_f, "up_g": up_g, "flux_f": flux_f, "flux_g": flux_g,
    }


def accumulate_div(P, L, R, flux, dx, out=None):
    """Add the divergence of one axis' interior-face flux to a flat field."""
    div = np.zeros(P) if out is None else out
    np.add.at(div, L, flux / dx)
    np.add.at(div, R, -flux / dx)
    return div


def divergences(fv, gv, grid, params, eps, rho, reg, upwind):
    P = grid.num_points
    div_f = np.zeros(P)
    div_g = np.zeros(P)
    for axis in range(grid.ndim):
        t = face_terms(fv, gv, grid, params, eps, rho, reg, upwind, axis)
        accumulate_div(P, t["L"], t["R"], t["flux_f"], grid.dx, div_f)
        accumulate_div(P, t["L"], t["R"], t["flux_g"], grid.dx, div_g)
    return div_f, div_g


def implicit_residual(fv, gv, prev_f, prev_g, grid, params, tau, eps, rho, reg, upwind):
    div_f, div_g = divergences(fv, gv, grid, params, eps, rho, reg, upwind)
    return fv - tau * div_f - prev_f, gv - tau * div_g - prev_g
