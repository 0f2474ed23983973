"""Scalar mode metrics and matrix symbols of the elastic operator.

Conventions: the analytic (bilinear, non-Hermitian) dot product a . b =
sum_i a_i b_i is used throughout, so every formula extends holomorphically to
complex covectors.  Mode labels are the strings "S" and "P".
"""

from __future__ import annotations

import numpy as np

from .errors import (DegenerateDirectionError, NotOnBoundaryError,
                     OutOfDomainError)

__all__ = [
    "adot",
    "metric_inv",
    "metric_inv_grad",
    "metric_bilinear",
    "principal_symbol",
    "principal_symbol_matrix",
    "principal_symbol_batch",
    "traction_symbol",
    "traction_normal_derivative",
]

MODES = ("S", "P")

DOMAIN_TOL = 1e-9
BOUNDARY_TOL = 1e-10


def adot(a, b):
    """Analytic dot product sum_i a_i b_i (no conjugation)."""
    return np.sum(np.asarray(a) * np.asarray(b), axis=-1)


def _check_mode(mode):
    if mode not in MODES:
        raise ValueError(f"mode must be 'S' or 'P', got {mode!r}")


def _check_domain(m, x):
    if np.any(m.domain.phi(x) > DOMAIN_TOL):
        raise OutOfDomainError(f"point {np.asarray(x)!r} outside the closed domain")


def _mode_coeff(m, mode, x):
    """Stiffness coefficient of the mode: mu for S, lambda + 2 mu for P."""
    if mode == "S":
        return m.mu(x)
    return m.lam(x) + 2.0 * m.mu(x)


def metric_inv(m, mode, x, xi, check_domain=True):
    """Dual mode metric (a(x) xi.xi + R xi.xi) / rho(x), analytic in xi.

    Vanishes iff xi = 0 for admissible media.  ``x`` must lie in the closed
    domain (checked unless ``check_domain`` is False).
    """
    _check_mode(mode)
    if check_domain:
        _check_domain(m, x)
    x = np.asarray(x, dtype=np.float64)
    xi = np.asarray(xi)
    a = _mode_coeff(m, mode, x)
    r = m.stress.matrix(x)
    rxi = np.einsum("...ij,...j->...i", r, xi)
    return (a * adot(xi, xi) + adot(xi, rxi)) / m.rho(x)


def metric_bilinear(m, mode, x, eta, zeta, check_domain=False):
    """Polarization of the dual metric: (a eta.zeta + R eta.zeta) / rho."""
    _check_mode(mode)
    if check_domain:
        _check_domain(m, x)
    a = _mode_coeff(m, mode, x)
    r = m.stress.matrix(x)
    rz = np.einsum("...ij,...j->...i", r, zeta)
    return (a * adot(eta, zeta) + adot(eta, rz)) / m.rho(x)


def metric_inv_grad(m, mode, x, xi, check_domain=True):
    """Value of the dual metric plus its gradients in x and in xi.

    Real covectors only.  Returns (value, d/dx, d/dxi).
    """
    _check_mode(mode)
    if check_domain:
        _check_domain(m, x)
    x = np.asarray(x, dtype=np.float64)
    xi = np.asarray(xi, dtype=np.float64)
    if mode == "S":
        a, da = m.mu.value_and_gradient(x)
    else:
        lam, dlam = m.lam.value_and_gradient(x)
        mu, dmu = m.mu.value_and_gradient(x)
        a, da = lam + 2.0 * mu, dlam + 2.0 * dmu
    rho, drho = m.rho.value_and_gradient(x)
    r = m.stress.matrix(x)
    dr = m.stress.derivative(x)
    rxi = r @ xi
    num = a * (xi @ xi) + xi @ rxi
    val = num / rho
    dnum_dx = da * (xi @ xi) + np.einsum("ijk,i,j->k", dr, xi, xi)
    dval_dx = (dnum_dx - val * drho) / rho
    dval_dxi = 2.0 * (a * xi + rxi) / rho
    return val, dval_dx, dval_dxi


def principal_symbol(m, x, tau, xi):
    """Principal symbol of the operator and its cofactor-type partner.

    Returns (p, p_tilde, q_S, q_P) where q_mode = rho (tau^2 - g_mode(x, xi)),
    p = q_S (Id - pi) + q_P pi, p_tilde = q_P (Id - pi) + q_S pi, and
    pi = (xi (x) xi) / (xi . xi).  They satisfy p_tilde p = q_S q_P Id and
    det p = q_S^2 q_P.  Raises for xi . xi = 0 (pi is undefined there).
    """
    _check_domain(m, x)
    xi = np.asarray(xi)
    xx = adot(xi, xi)
    if abs(xx) < 1e-300:
        raise DegenerateDirectionError("xi . xi = 0: projector undefined")
    rho = m.rho(x)
    q_s = rho * (tau ** 2 - metric_inv(m, "S", x, xi, check_domain=False))
    q_p = rho * (tau ** 2 - metric_inv(m, "P", x, xi, check_domain=False))
    eye = np.eye(3, dtype=np.result_type(xi, float))
    pi = np.outer(xi, xi) / xx
    p = q_s * (eye - pi) + q_p * pi
    p_tilde = q_p * (eye - pi) + q_s * pi
    return p, p_tilde, q_s, q_p


def principal_symbol_matrix(m, x, tau, xi):
    """Principal symbol in expanded polynomial form (no projector).

    p = rho tau^2 Id - (lambda + mu) xi (x) xi - (mu xi.xi + R xi.xi) Id.
    Defined for every complex covector, including analytic null directions;
    used as the independent route for contour quadrature checks.
    """
    x = np.asarray(x, dtype=np.float64)
    xi = np.asarray(xi)
    lam = m.lam(x)
    mu = m.mu(x)
    rho = m.rho(x)
    r = m.stress.matrix(x)
    rxx = adot(xi, r @ xi)
    eye = np.eye(3, dtype=np.result_type(xi, float))
    return ((rho * tau ** 2 - mu * adot(xi, xi) - rxx) * eye
            - (lam + mu) * np.outer(xi, xi))


def principal_symbol_batch(m, x, tau, xi):
    """Vectorized principal symbol over a batch of real cotangent points.

    ``x`` and ``xi`` have shape (n, 3), ``tau`` shape (n,).  Returns stacked
    (p, p_tilde, q_S, q_P) with matrix shape (n, 3, 3).
    """
    x = np.asarray(x, dtype=np.float64)
    xi = np.asarray(xi, dtype=np.float64)
    tau = np.asarray(tau, dtype=np.float64)
    xx = np.sum(xi * xi, axis=-1)
    if np.any(np.abs(xx) < 1e-300):
        raise DegenerateDirectionError("batch contains xi . xi = 0")
    rho = m.rho(x)
    mu = m.mu(x)
    lam = m.lam(x)
    r = m.stress.matrix(x)
    rxx = np.einsum("...i,...ij,...j->...", xi, r, xi)
    q_s = rho * tau ** 2 - mu * xx - rxx
    q_p = rho * tau ** 2 - (lam + 2.0 * mu) * xx - rxx
    eye = np.eye(3)
    pi = xi[..., :, None] * xi[..., None, :] / xx[..., None, None]
    p = q_s[..., None, None] * (eye - pi) + q_p[..., None, None] * pi
    p_tilde = q_p[..., None, None] * (eye - pi) + q_s[..., None, None] * pi
    return p, p_tilde, q_s, q_p


def traction_symbol(m, x, xi, boundary_tol=BOUNDARY_TOL):
    """Principal symbol of the traction operator at a boundary point.

    s(x, xi) = lambda (nu (x) xi) + mu (xi (x) nu) + mu (xi.nu) Id
               + (R xi . nu) Id,
    with nu the outward unit normal.  Analytic in xi.
    """
    x = np.asarray(x, dtype=np.float64)
    if not m.domain.on_boundary(x, tol=boundary_tol):
        raise NotOnBoundaryError(
            f"traction symbol needs a boundary point, |phi| = {abs(float(m.domain.phi(x))):.2e}")
    xi = np.asarray(xi)
    nu = m.domain.normal(x)
    lam = m.lam(x)
    mu = m.mu(x)
    r = m.stress.matrix(x)
    eye = np.eye(3, dtype=np.result_type(xi, float))
    return (lam * np.outer(nu, xi) + mu * np.outer(xi, nu)
            + (mu * adot(xi, nu) + adot(r @ xi, nu)) * eye)


def traction_normal_derivative(m, x, boundary_tol=BOUNDARY_TOL):
    """Derivative of the traction symbol along the normal covector coordinate.

    Equals (lambda + mu) (nu (x) nu) + (mu + R nu . nu) Id; elliptic for
    admissible media (eigenvalues lambda + 2 mu + R nu.nu and mu + R nu.nu).
    """
    x = np.asarray(x, dtype=np.float64)
    if not m.domain.on_boundary(x, tol=boundary_tol):
        raise NotOnBoundaryError("normal traction derivative needs a boundary point")
    nu = m.domain.normal(x)
    lam = m.lam(x)
    mu = m.mu(x)
    r = m.stress.matrix(x)
    return ((lam + mu) * np.outer(nu, nu)
            + (mu + adot(nu, r @ nu)) * np.eye(3))
