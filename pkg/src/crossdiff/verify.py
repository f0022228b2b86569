"""Randomized property suites for the entropy machinery.

Each check draws admissible parameter quadruples and sample points, tests
one algebraic property of the constructions in :mod:`crossdiff.entropy`,
and reports pass counts with the worst observed slack.  No PDE is solved
anywhere here; the suites back the ``verify`` CLI subcommand and the
acceptance tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import entropy
from .params import Params

COEFF_TOL = 1e-12
SYMMETRY_TOL = 1e-12
GRAD_FD_TOL = 1e-6
HESS_FD_TOL = 1e-5


@dataclass
class CheckResult:
    name: str
    passed: int
    total: int
    worst: float
    note: str = ""

    @property
    def ok(self) -> bool:
        return self.passed == self.total

    def line(self) -> str:
        status = "PASS" if self.ok else "FAIL"
        extra = f" ({self.note})" if self.note else ""
        return (f"{status} {self.name}: {self.passed}/{self.total} samples, "
                f"worst slack {self.worst:.3e}{extra}")


def draw_params(rng: np.random.Generator, count: int) -> list[Params]:
    """Admissible quadruples with a mild margin on the determinant so the
    positivity checks are not run at the edge of floating-point resolution."""
    out = []
    while len(out) < count:
        a, b, c, d = np.exp(rng.uniform(-1.5, 1.5, size=4))
        if a * d > 1.01 * b * c:
            out.append(Params(a, b, c, d))
    return out


def check_coefficients(draws: int = 100, n_max: int = 20, seed: int = 0) -> CheckResult:
    """Closed-form coefficients equal the recursion to 1e-12 relative and are
    all strictly positive."""
    rng = np.random.default_rng(seed)
    passed = total = 0
    worst = 0.0
    for params in draw_params(rng, draws):
        for n in range(2, n_max + 1):
            total += 1
            closed = entropy.build_coefficients(params, n).coeffs
            rec = entropy.coefficients_by_recursion(params, n).coeffs
            rel = np.abs(closed - rec) / np.abs(rec)
            worst = max(worst, float(rel.max()))
            if rel.max() <= COEFF_TOL and np.all(closed > 0.0):
                passed += 1
    return CheckResult("coefficient closed form vs recursion", passed, total, worst)


def check_sn_symmetry(draws: int = 20, samples: int = 1000,
                      n_lo: int = 2, n_hi: int = 10, seed: int = 1) -> CheckResult:
    """Hessian times mobility is symmetric to 1e-12 of its own magnitude."""
    rng = np.random.default_rng(seed)
    passed = total = 0
    worst = 0.0
    for params in draw_params(rng, draws):
        X = rng.uniform(0.0, 10.0, size=(2, samples))
        for n in range(n_lo, n_hi + 1):
            poly = entropy.build_coefficients(params, n)
            s = entropy.sn_matrix(poly, params, X)
            scale = np.abs(s).max(axis=(0, 1))
            asym = np.abs(s[0, 1] - s[1, 0])
            rel = asym / np.maximum(scale, 1e-300)
            worst = max(worst, float(rel.max()))
            passed += int(np.count_nonzero(rel <= SYMMETRY_TOL))
            total += samples
    return CheckResult("symmetry of hessian*mobility", passed, total, worst)


def check_hessian_pd(draws: int = 20, samples: int = 1000,
                     n_lo: int = 2, n_hi: int = 10, seed: int = 2) -> CheckResult:
    """Hessian is positive definite away from the origin and its determinant
    dominates the two-term lower bound from the expansion coefficients."""
    rng = np.random.default_rng(seed)
    passed = total = 0
    worst = np.inf
    for params in draw_params(rng, draws):
        X = rng.uniform(1e-3, 10.0, size=(2, samples))
        for n in range(n_lo, n_hi + 1):
            poly = entropy.build_coefficients(params, n)
            h = entropy.hessian_phi(poly, X)
            tr = h[0, 0] + h[1, 1]
            det = h[0, 0] * h[1, 1] - h[0, 1] * h[1, 0]
            # closed-form smaller eigenvalue of a symmetric 2x2 matrix
            min_eig = 0.5 * (tr - np.sqrt((h[0, 0] - h[1, 1]) ** 2 + 4.0 * h[0, 1] ** 2))
            bound = entropy.hessian_det_lower_bound(params, poly, X)
            scale = np.abs(h).max(axis=(0, 1)) ** 2
            ok = (min_eig > 0.0) & (det >= bound * (1.0 - 1e-10) - 1e-12 * scale)
            worst = min(worst, float(min_eig.min()))
            passed += int(np.count_nonzero(ok))
            total += samples
    return CheckResult("hessian positive definiteness + determinant bound",
                       passed, total, worst, note="worst = smallest eigenvalue seen")


def check_sn_pd(draws: int = 20, samples: int = 1000,
                n_lo: int = 2, n_hi: int = 10, seed: int = 3) -> CheckResult:
    """Hessian*mobility has positive trace and determinant on the open quadrant."""
    rng = np.random.default_rng(seed)
    passed = total = 0
    worst = np.inf
    for params in draw_params(rng, draws):
        X = rng.uniform(1e-3, 10.0, size=(2, samples))
        for n in range(n_lo, n_hi + 1):
            poly = entropy.build_coefficients(params, n)
            s = entropy.sn_matrix(poly, params, X)
            tr = s[0, 0] + s[1, 1]
            det = s[0, 0] * s[1, 1] - s[0, 1] * s[1, 0]
            ok = (tr > 0.0) & (det > 0.0)
            worst = min(worst, float(det.min()))
            passed += int(np.count_nonzero(ok))
            total += samples
    return CheckResult("positive definiteness of hessian*mobility",
                       passed, total, worst, note="worst = smallest determinant seen")


def check_norm_sandwich(draws: int = 20, samples: int = 10000,
                        n_lo: int = 2, n_hi: int = 12, seed: int = 4) -> CheckResult:
    """(c X1 + d X2)^n / d^n <= polynomial <= (a X1 + b X2)^n / b^n."""
    rng = np.random.default_rng(seed)
    passed = total = 0
    worst = 0.0
    for params in draw_params(rng, draws):
        X = rng.uniform(0.0, 10.0, size=(2, samples))
        for n in range(n_lo, n_hi + 1):
            poly = entropy.build_coefficients(params, n)
            val = entropy.eval_phi(poly, X)
            lower, upper = entropy.phi_bounds(params, n, X)
            slack = 1e-12 * np.maximum(np.maximum(lower, upper), 1.0)
            ok = (val >= lower - slack) & (val <= upper + slack)
            viol = np.maximum(lower - val, val - upper) / np.maximum(upper, 1e-300)
            worst = max(worst, float(viol.max()))
            passed += int(np.count_nonzero(ok))
            total += samples
    return CheckResult("norm sandwich bounds", passed, total, worst)


def check_derivatives(draws: int = 5, samples: int = 200,
                      n_lo: int = 2, n_hi: int = 8, seed: int = 5) -> CheckResult:
    """Analytic gradient/Hessian match central finite differences."""
    rng = np.random.default_rng(seed)
    h = 1e-6
    passed = total = 0
    worst = 0.0
    for params in draw_params(rng, draws):
        X = rng.uniform(0.1, 10.0, size=(2, samples))
        x1, x2 = X
        for n in range(n_lo, n_hi + 1):
            poly = entropy.build_coefficients(params, n)
            grad = entropy.grad_phi(poly, X)
            fd1 = (entropy.eval_phi(poly, (x1 + h, x2))
                   - entropy.eval_phi(poly, (x1 - h, x2))) / (2 * h)
            fd2 = (entropy.eval_phi(poly, (x1, x2 + h))
                   - entropy.eval_phi(poly, (x1, x2 - h))) / (2 * h)
            scale_g = np.maximum(np.abs(grad).max(axis=0), 1e-300)
            rel_g = np.maximum(np.abs(grad[0] - fd1), np.abs(grad[1] - fd2)) / scale_g
            hess = entropy.hessian_phi(poly, X)
            gp = entropy.grad_phi(poly, (x1 + h, x2))
            gm = entropy.grad_phi(poly, (x1 - h, x2))
            fd11 = (gp[0] - gm[0]) / (2 * h)
            fd21 = (gp[1] - gm[1]) / (2 * h)
            gp = entropy.grad_phi(poly, (x1, x2 + h))
            gm = entropy.grad_phi(poly, (x1, x2 - h))
            fd22 = (gp[1] - gm[1]) / (2 * h)
            scale_h = np.maximum(np.abs(hess).max(axis=(0, 1)), 1e-300)
            rel_h = np.maximum.reduce([
                np.abs(hess[0, 0] - fd11), np.abs(hess[0, 1] - fd21),
                np.abs(hess[1, 1] - fd22)]) / scale_h
            ok = (rel_g <= GRAD_FD_TOL) & (rel_h <= HESS_FD_TOL)
            worst = max(worst, float(rel_g.max()), float(rel_h.max()))
            passed += int(np.count_nonzero(ok))
            total += samples
    return CheckResult("finite-difference consistency of derivatives",
                       passed, total, worst)


def check_regularized_bounds(draws: int = 10, samples: int = 2000,
                             seed: int = 6) -> CheckResult:
    """Entry bounds, sign pattern, and coercivity of the regularized mobility:
    0 <= entry - eps*I <= 2 rho max(a,b,c,d), off-diagonal rows vanish outside
    [0, rho], and <S M ξ, ξ> >= eps * det(S)/tr(S) |ξ|^2."""
    rng = np.random.default_rng(seed)
    passed = total = 0
    worst = np.inf
    for params in draw_params(rng, draws):
        a, b, c, d = params.as_tuple()
        eps = float(rng.uniform(0.01, 0.99))
        rho = float(rng.uniform(1.5, 50.0))
        X = rng.uniform(-5.0, rho + 5.0, size=(2, samples))
        m = entropy.mobility_regularized(params, X, eps, rho)
        core = m.copy()
        core[0, 0] -= eps
        core[1, 1] -= eps
        hi = 2.0 * rho * max(a, b, c, d)
        ok = np.all((core >= -1e-12) & (core <= hi + 1e-12), axis=(0, 1))
        outside1 = (X[0] < 0.0) | (X[0] > rho)
        outside2 = (X[1] < 0.0) | (X[1] > rho)
        ok &= ~outside1 | ((m[0, 1] == 0.0) & (m[0, 0] >= m[0, 1]))
        ok &= ~outside2 | ((m[1, 0] == 0.0) & (m[1, 1] >= m[1, 0]))
        S = entropy.symmetrizer(params)
        sm = np.einsum("ij,jk...->ik...", S, m)
        xi = rng.standard_normal((2, samples))
        quad = (sm[0, 0] * xi[0] ** 2 + (sm[0, 1] + sm[1, 0]) * xi[0] * xi[1]
                + sm[1, 1] * xi[1] ** 2)
        floor = eps * b * c * (a * d - b * c) / (a * c + b * d)
        norm2 = xi[0] ** 2 + xi[1] ** 2
        margin = quad / norm2 - floor
        ok &= margin >= -1e-12 * max(1.0, floor)
        worst = min(worst, float(margin.min()))
        passed += int(np.count_nonzero(ok))
        total += samples
    return CheckResult("regularized mobility bounds and coercivity",
                       passed, total, worst,
                       note="worst = smallest coercivity margin seen")


def run_property_suite(n_max: int = 10, samples: int = 1000,
                       seed: int = 0) -> list[CheckResult]:
    """Full suite at a configurable sample budget; purely algebraic."""
    n_hi = max(3, n_max)
    return [
        check_coefficients(draws=max(10, samples // 10), n_max=max(n_hi, 20),
                           seed=seed),
        check_sn_symmetry(samples=samples, n_hi=n_hi, seed=seed + 1),
        check_hessian_pd(samples=samples, n_hi=n_hi, seed=seed + 2),
        check_sn_pd(samples=samples, n_hi=n_hi, seed=seed + 3),
        check_norm_sandwich(samples=max(samples, 10000), n_hi=max(n_hi, 12),
                            seed=seed + 4),
        check_derivatives(samples=min(samples, 500), seed=seed + 5),
        check_regularized_bounds(samples=samples, seed=seed + 6),
    ]
