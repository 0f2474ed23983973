"""Boundary covector analysis: regions, characteristic roots, DN symbol.

A boundary covector gamma = (t, x, tau, xi_t) has x on the boundary and xi_t
tangential.  Per mode, the full characteristic covectors through gamma are
xi_t - z nu with z solving the quadratic

    B(nu, nu) z^2 - 2 B(xi_t, nu) z + (B(xi_t, xi_t) - tau^2) = 0,

where B is the dual mode metric as a bilinear form.  Real roots are classified
forward/backward by the sign of tau * B(xi_t - z nu, nu); complex roots come
in conjugate pairs and the one with positive imaginary part is selected.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (ContourError, DegenerateDirectionError,
                     FrameDegenerateError, GlancingError, LopatinskiError,
                     NotOnBoundaryError, SingularResidueError)
from .medium import check_class_membership
from .symbols import (adot, principal_symbol_matrix, traction_normal_derivative,
                      traction_symbol)

__all__ = [
    "BoundaryCovector",
    "boundary_covector",
    "RegionLabel",
    "classify",
    "ModeRoots",
    "CharRoots",
    "char_roots",
    "discriminant_margin",
    "LopatinskiReport",
    "lopatinski_margin",
    "sample_boundary_covectors",
    "ResidueData",
    "residue_matrices",
    "QuadratureResult",
    "residue_quadrature",
    "DnSymbol",
    "dn_symbol",
    "CompanionReport",
    "companion_symbol_check",
]

GLANCING_TOL = 1e-10
BOUNDARY_TOL = 1e-10

# Sign of the normal-derivative term in the traction route of the DN symbol,
# fixed once by calibration against the eigenvector route on the constant
# medium (see tests); with covectors written xi_t - z nu this is -1.
NORMAL_DERIVATIVE_SIGN = -1.0


# ---------------------------------------------------------------------------
# boundary covectors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundaryCovector:
    """Covector (t, x, tau, xi_t) on the boundary cylinder, with unit normal."""

    t: float
    x: np.ndarray
    tau: float
    xi_t: np.ndarray
    nu: np.ndarray

    def __post_init__(self):
        for name in ("x", "xi_t", "nu"):
            a = np.array(getattr(self, name), dtype=np.float64)
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "tau", float(self.tau))

    @property
    def xi_t_norm(self):
        return float(np.linalg.norm(self.xi_t))

    def in_gamma_delta(self, delta):
        """Time-like cone membership: |tau| >= delta |xi_t|."""
        return abs(self.tau) >= delta * self.xi_t_norm


def boundary_covector(m, t, x, tau, xi, boundary_tol=BOUNDARY_TOL):
    """Build a validated BoundaryCovector, projecting xi onto the tangent plane."""
    x = np.asarray(x, dtype=np.float64)
    if not m.domain.on_boundary(x, tol=boundary_tol):
        raise NotOnBoundaryError(
            f"covector base point off the boundary: |phi| = {abs(float(m.domain.phi(x))):.2e}")
    nu = m.domain.normal(x)
    xi = np.asarray(xi, dtype=np.float64)
    xi_t = xi - np.dot(xi, nu) * nu
    if tau ** 2 + np.dot(xi_t, xi_t) == 0.0:
        raise DegenerateDirectionError("(tau, xi_t) must be nonzero")
    return BoundaryCovector(t=t, x=x, tau=tau, xi_t=xi_t, nu=nu)


# ---------------------------------------------------------------------------
# mode quadratics and roots
# ---------------------------------------------------------------------------

def _mode_quadratic_batch(m, mode, x, nu, xi_t, tau):
    """Coefficients (A, Bh, C) of the root quadratic, batched, plus a scale.

    A = B(nu,nu), Bh = B(xi_t,nu), C = B(xi_t,xi_t) - tau^2.  The returned
    scale2 is homogeneous of the same degree as the discriminant Bh^2 - A C
    and never vanishes for valid covectors.
    """
    a = m.mu(x) if mode == "S" else m.lam(x) + 2.0 * m.mu(x)
    rho = m.rho(x)
    r = m.stress.matrix(x)
    rnu = np.einsum("...ij,...j->...i", r, nu)
    big_a = (a * np.sum(nu * nu, axis=-1) + np.sum(nu * rnu, axis=-1)) / rho
    bh = (a * np.sum(xi_t * nu, axis=-1) + np.sum(xi_t * rnu, axis=-1)) / rho
    rxi = np.einsum("...ij,...j->...i", r, xi_t)
    bxx = (a * np.sum(xi_t * xi_t, axis=-1) + np.sum(xi_t * rxi, axis=-1)) / rho
    c = bxx - tau ** 2
    scale2 = bh * bh + np.abs(big_a) * (np.abs(bxx) + tau ** 2)
    return big_a, bh, c, scale2


def _mode_quadratic(m, mode, gamma):
    return _mode_quadratic_batch(m, mode, gamma.x, gamma.nu, gamma.xi_t,
                                 gamma.tau)


@dataclass(frozen=True)
class RegionLabel:
    """Per-mode hyperbolic/elliptic/glancing labels and the combined region."""

    s_label: str
    p_label: str
    combined: str
    in_gamma_delta: bool | None
    s_discriminant: float
    p_discriminant: float
    s_scale2: float
    p_scale2: float

    def to_dict(self):
        return {"s_label": self.s_label, "p_label": self.p_label,
                "combined": self.combined,
                "in_gamma_delta": self.in_gamma_delta,
                "s_discriminant": self.s_discriminant,
                "p_discriminant": self.p_discriminant}


def classify(m, gamma, params=None, glancing_tol=GLANCING_TOL):
    """Classify gamma into hyperbolic / mixed / elliptic / glancing regions.

    A mode is glancing when |Bh^2 - A C| < glancing_tol * scale2.  The S
    elliptic region is contained in the P elliptic region, so the combined
    label is determined by (S label, P label).
    """
    labels = {}
    discs = {}
    scales = {}
    for mode in ("S", "P"):
        big_a, bh, c, scale2 = _mode_quadratic(m, mode, gamma)
        d4 = bh * bh - big_a * c
        discs[mode] = float(d4)
        scales[mode] = float(scale2)
        if abs(d4) < glancing_tol * scale2:
            labels[mode] = "glancing"
        elif d4 > 0:
            labels[mode] = "hyperbolic"
        else:
            labels[mode] = "elliptic"

    if "glancing" in labels.values():
        combined = "glancing"
    elif labels["S"] == "hyperbolic" and labels["P"] == "hyperbolic":
        combined = "hyperbolic"
    elif labels["S"] == "hyperbolic":
        combined = "mixed"
    else:
        combined = "elliptic"

    if params is None:
        params = getattr(m, "class_params", None)
    in_gd = gamma.in_gamma_delta(params.delta) if params is not None else None
    return RegionLabel(s_label=labels["S"], p_label=labels["P"],
                       combined=combined, in_gamma_delta=in_gd,
                       s_discriminant=discs["S"], p_discriminant=discs["P"],
                       s_scale2=scales["S"], p_scale2=scales["P"])


@dataclass(frozen=True)
class ModeRoots:
    """Characteristic roots of one mode at a boundary covector.

    For real roots, ``z_forward`` is the root whose bicharacteristic enters
    the domain as time increases; for a complex pair it is the root with
    positive imaginary part (decay into the domain) and ``real`` is False.
    ``c_forward`` is d q_mode / dz at the selected root.
    """

    mode: str
    real: bool
    z_forward: complex
    z_backward: complex
    c_forward: complex
    c_backward: complex
    xi_forward: np.ndarray
    xi_backward: np.ndarray
    discriminant: float


@dataclass(frozen=True)
class CharRoots:
    gamma: BoundaryCovector
    s: ModeRoots
    p: ModeRoots
    xi_dot: complex          # xi_S . xi_P (analytic)
    normalized_product: float

    def mode(self, mode):
        return self.s if mode == "S" else self.p


def _roots_for_mode(m, mode, gamma, glancing_tol):
    big_a, bh, c, scale2 = (float(v) for v in _mode_quadratic(m, mode, gamma))
    d4 = bh * bh - big_a * c
    if abs(d4) < glancing_tol * scale2:
        raise GlancingError(f"mode {mode} is glancing at this covector",
                            discriminant=d4)
    rho = float(m.rho(gamma.x))
    if d4 > 0:
        s = np.sqrt(d4)
        # stable pairing: compute the large-magnitude root first
        if bh >= 0:
            z_big = (bh + s) / big_a
        else:
            z_big = (bh - s) / big_a
        z_small = c / (big_a * z_big) if z_big != 0.0 else (2 * bh / big_a - z_big)
        za, zb = z_big, z_small
        # forward iff tau * B(xi_t - z nu, nu) = tau * (Bh - A z) > 0
        if gamma.tau * (bh - big_a * za) > 0:
            z_fwd, z_bwd = za, zb
        else:
            z_fwd, z_bwd = zb, za
        real = True
    else:
        s = np.sqrt(-d4)
        z_fwd = complex(bh, s) / big_a
        z_bwd = complex(bh, -s) / big_a
        real = False
    c_fwd = 2.0 * rho * (bh - big_a * z_fwd)
    c_bwd = 2.0 * rho * (bh - big_a * z_bwd)
    xi_fwd = gamma.xi_t - z_fwd * gamma.nu
    xi_bwd = gamma.xi_t - z_bwd * gamma.nu
    return ModeRoots(mode=mode, real=real,
                     z_forward=complex(z_fwd), z_backward=complex(z_bwd),
                     c_forward=complex(c_fwd), c_backward=complex(c_bwd),
                     xi_forward=np.asarray(xi_fwd), xi_backward=np.asarray(xi_bwd),
                     discriminant=d4)


def discriminant_margin(m, gamma):
    """min over modes of |discriminant| / scale2; zero exactly at glancing.

    Contour quadrature of the residue matrices converges geometrically in
    the root separation, so quantitative cross-checks against the closed
    form should require a floor on this margin (sqrt of it bounds the
    relative root gap).
    """
    vals = []
    for mode in ("S", "P"):
        big_a, bh, c, scale2 = (float(v) for v in
                                _mode_quadratic(m, mode, gamma))
        vals.append(abs(bh * bh - big_a * c) / scale2)
    return min(vals)


def char_roots(m, gamma, glancing_tol=GLANCING_TOL):
    """Characteristic roots, selected covectors, and the Lopatinski product.

    Raises GlancingError when either mode is glancing.  The residual of the
    scalar symbol at each returned root is at machine level by construction.
    """
    s_roots = _roots_for_mode(m, "S", gamma, glancing_tol)
    p_roots = _roots_for_mode(m, "P", gamma, glancing_tol)
    dot = complex(adot(s_roots.xi_forward, p_roots.xi_forward))
    ns = np.sqrt(abs(adot(s_roots.xi_forward, s_roots.xi_forward)))
    npn = np.sqrt(abs(adot(p_roots.xi_forward, p_roots.xi_forward)))
    if ns == 0.0 or npn == 0.0:
        raise SingularResidueError("analytically null selected covector")
    return CharRoots(gamma=gamma, s=s_roots, p=p_roots, xi_dot=dot,
                     normalized_product=float(abs(dot) / (ns * npn)))


# ---------------------------------------------------------------------------
# Lopatinski margin sampling
# ---------------------------------------------------------------------------

def sample_boundary_covectors(m, n, rng, delta, ratio_hi=None):
    """Random boundary covector batch inside the time-like cone Gamma_delta.

    Returns arrays (x, nu, xi_t, tau) with |xi_t| = 1 and |tau| / |xi_t|
    log-uniform in [delta, ratio_hi].  The upper end defaults to three times
    the largest compressional speed, which covers the hyperbolic region.
    """
    x = m.domain.sample_boundary(n, rng)
    nu = m.domain.normal(x)
    v = rng.standard_normal((n, 3))
    v -= np.sum(v * nu, axis=-1, keepdims=True) * nu
    bad = np.linalg.norm(v, axis=-1) < 1e-8
    while np.any(bad):
        v[bad] = rng.standard_normal((int(bad.sum()), 3))
        v[bad] -= np.sum(v[bad] * nu[bad], axis=-1, keepdims=True) * nu[bad]
        bad = np.linalg.norm(v, axis=-1) < 1e-8
    xi_t = v / np.linalg.norm(v, axis=-1, keepdims=True)
    if ratio_hi is None:
        pts = m.domain.grid(9)
        c2 = (m.lam(pts) + 2.0 * m.mu(pts)) * (1.0 + 0.5) / m.rho(pts)
        ratio_hi = max(3.0 * float(np.sqrt(c2.max())), 2.0 * delta)
    u = np.exp(rng.uniform(np.log(delta), np.log(ratio_hi), n))
    tau = u * rng.choice([-1.0, 1.0], n)
    return x, nu, xi_t, tau


@dataclass
class LopatinskiReport:
    """Minimum normalized |xi_S . xi_P| over a covector sample."""

    min_normalized: float
    argmin: BoundaryCovector | None
    n_samples: int
    n_used: int
    n_glancing_skipped: int
    region_counts: dict
    admissible: bool | None

    @property
    def positive(self):
        return self.min_normalized > 0.0

    def to_dict(self):
        return {"min_normalized": self.min_normalized,
                "n_samples": self.n_samples, "n_used": self.n_used,
                "n_glancing_skipped": self.n_glancing_skipped,
                "region_counts": self.region_counts,
                "admissible": self.admissible,
                "positive": self.positive}


def lopatinski_margin(m, params=None, sample_count=10000, seed=0,
                      glancing_margin=1e-3):
    """Sampled lower bound for the Lopatinski product over Gamma_delta.

    Samples covectors in the time-like cone, skips near-glancing ones
    (discriminant within ``glancing_margin`` of zero relative to scale), and
    returns the minimum of |xi_S . xi_P| / (|xi_S| |xi_P|) with analytic
    norms |xi| = sqrt(|xi . xi|).  For a medium passing the class membership
    check the minimum must be positive; a non-positive minimum then raises
    LopatinskiError.  For inadmissible media the value is reported only.
    """
    if params is None:
        params = getattr(m, "class_params", None)
    if params is None:
        raise ValueError("no class parameters supplied")
    rng = np.random.default_rng(seed)
    x, nu, xi_t, tau = sample_boundary_covectors(m, sample_count, rng,
                                                 params.delta)

    sel = {}
    valid = np.ones(sample_count, dtype=bool)
    glancing = np.zeros(sample_count, dtype=bool)
    real_mask = {}
    for mode in ("S", "P"):
        big_a, bh, c, scale2 = _mode_quadratic_batch(m, mode, x, nu, xi_t, tau)
        d4 = bh * bh - big_a * c
        valid &= big_a > 0
        glancing |= np.abs(d4) < glancing_margin * scale2
        s = np.sqrt(np.abs(d4))
        real = d4 > 0
        with np.errstate(invalid="ignore", divide="ignore"):
            z_real = (bh - np.sign(tau) * s) / big_a
            z_cplx = (bh + 1j * s) / big_a
        sel[mode] = np.where(real, z_real.astype(complex), z_cplx)
        real_mask[mode] = real

    use = valid & ~glancing
    xi_s = xi_t.astype(complex) - sel["S"][:, None] * nu
    xi_p = xi_t.astype(complex) - sel["P"][:, None] * nu
    dot = np.sum(xi_s * xi_p, axis=-1)
    ns = np.sqrt(np.abs(np.sum(xi_s * xi_s, axis=-1)))
    npn = np.sqrt(np.abs(np.sum(xi_p * xi_p, axis=-1)))
    denom_ok = use & (ns > 0) & (npn > 0)
    norm_prod = np.full(sample_count, np.inf)
    norm_prod[denom_ok] = np.abs(dot[denom_ok]) / (ns[denom_ok] * npn[denom_ok])

    n_used = int(denom_ok.sum())
    if n_used == 0:
        raise ValueError("no usable covector samples (all glancing/invalid)")
    imin = int(np.argmin(norm_prod))
    min_val = float(norm_prod[imin])
    argmin = BoundaryCovector(t=0.0, x=x[imin], tau=float(tau[imin]),
                              xi_t=xi_t[imin], nu=nu[imin])

    hyp = real_mask["S"] & real_mask["P"] & denom_ok
    mix = real_mask["S"] & ~real_mask["P"] & denom_ok
    ell = ~real_mask["S"] & denom_ok
    counts = {"hyperbolic": int(hyp.sum()), "mixed": int(mix.sum()),
              "elliptic": int(ell.sum())}

    admissible = None
    try:
        admissible = check_class_membership(m, params).admissible
    except ValueError:
        pass
    report = LopatinskiReport(min_normalized=min_val, argmin=argmin,
                              n_samples=sample_count, n_used=n_used,
                              n_glancing_skipped=int(glancing.sum()),
                              region_counts=counts, admissible=admissible)
    if admissible and not report.positive:
        raise LopatinskiError(
            f"Lopatinski product vanished ({min_val}) for an admissible medium")
    return report


# ---------------------------------------------------------------------------
# residue matrices
# ---------------------------------------------------------------------------

def _analytic_projector(xi):
    xx = adot(xi, xi)
    if abs(xx) < 1e-14 * np.sum(np.abs(xi) ** 2):
        raise SingularResidueError("xi . xi = 0: analytic projector undefined")
    return np.outer(xi, xi) / xx


@dataclass
class ResidueData:
    """Closed-form residue matrices of the inverse principal symbol.

    A_j = (z_S^j / c_S)(Id - pi(xi_S)) + (z_P^j / c_P) pi(xi_P) for j = 0, 1,
    summing the residues of z^j p(tau, xi_t - z nu)^{-1} over the selected
    (forward / upper half-plane) roots.
    """

    a0: np.ndarray
    a1: np.ndarray
    a0_inv: np.ndarray
    cond_a0: float
    roots: CharRoots


def residue_matrices(m, gamma, glancing_tol=GLANCING_TOL):
    roots = char_roots(m, gamma, glancing_tol)
    z_s, z_p = roots.s.z_forward, roots.p.z_forward
    scale = max(abs(z_s), abs(z_p), 1e-30)
    if abs(z_s - z_p) < 1e-12 * scale:
        raise SingularResidueError("coinciding S and P roots")
    if abs(roots.xi_dot) < 1e-12 * max(np.linalg.norm(roots.s.xi_forward) ** 2,
                                       np.linalg.norm(roots.p.xi_forward) ** 2):
        raise SingularResidueError("xi_S . xi_P = 0: Lopatinski degeneracy")
    pi_s = _analytic_projector(roots.s.xi_forward)
    pi_p = _analytic_projector(roots.p.xi_forward)
    eye = np.eye(3, dtype=complex)
    a0 = (eye - pi_s) / roots.s.c_forward + pi_p / roots.p.c_forward
    a1 = z_s * (eye - pi_s) / roots.s.c_forward + z_p * pi_p / roots.p.c_forward
    a0_inv = np.linalg.inv(a0)
    return ResidueData(a0=a0, a1=a1, a0_inv=a0_inv,
                       cond_a0=float(np.linalg.cond(a0)), roots=roots)


@dataclass
class QuadratureResult:
    a0: np.ndarray
    a1: np.ndarray
    center: complex
    radius: float
    nodes: int
    windings: dict


def residue_quadrature(m, gamma, nodes=256, glancing_tol=GLANCING_TOL):
    """Contour-integral evaluation of the residue matrices.

    Trapezoidal rule on a circle enclosing exactly the selected roots; the
    matrix inverse of the expanded-form principal symbol is taken numerically
    at each node, independent of the closed-form route.  Winding numbers of
    all four roots are evaluated from the same quadrature and must certify
    the selection, otherwise ContourError is raised.
    """
    roots = char_roots(m, gamma, glancing_tol)
    z_s, z_p = roots.s.z_forward, roots.p.z_forward
    rejected = [roots.s.z_backward, roots.p.z_backward]
    center = 0.5 * (z_s + z_p)
    rmax = max(abs(z_s - center), abs(z_p - center))
    d_min = min(abs(z - center) for z in rejected)
    if d_min <= rmax * (1.0 + 1e-9):
        raise ContourError("rejected root inside the minimal enclosing circle")
    # geometric mean balances the inner and outer trapezoid decay rates
    radius = 0.5 * d_min if rmax == 0.0 else np.sqrt(rmax * d_min)

    theta = 2.0 * np.pi * np.arange(nodes) / nodes
    ring = np.exp(1j * theta)
    z = center + radius * ring

    xi = gamma.xi_t[None, :].astype(complex) - z[:, None] * gamma.nu[None, :]
    lam = float(m.lam(gamma.x))
    mu = float(m.mu(gamma.x))
    rho = float(m.rho(gamma.x))
    r = m.stress.matrix(gamma.x)
    xx = np.sum(xi * xi, axis=-1)
    rxx = np.einsum("ni,ij,nj->n", xi, r.astype(complex), xi)
    p = ((rho * gamma.tau ** 2 - mu * xx - rxx)[:, None, None]
         * np.eye(3, dtype=complex)
         - (lam + mu) * xi[:, :, None] * xi[:, None, :])
    p_inv = np.linalg.inv(p)

    weight = (radius / nodes) * ring
    a0 = np.einsum("n,nij->ij", weight, p_inv)
    a1 = np.einsum("n,n,nij->ij", weight, z, p_inv)

    windings = {}
    for label, root, expect in (("S_forward", z_s, 1.0), ("P_forward", z_p, 1.0),
                                ("S_backward", rejected[0], 0.0),
                                ("P_backward", rejected[1], 0.0)):
        w = np.sum(weight / (z - root))
        windings[label] = complex(w)
        if abs(w - expect) > 1e-2:
            raise ContourError(
                f"winding number of {label} root is {w:.3f}, expected {expect}")
    return QuadratureResult(a0=a0, a1=a1, center=complex(center),
                            radius=float(radius), nodes=nodes,
                            windings=windings)


# ---------------------------------------------------------------------------
# Dirichlet-to-Neumann principal symbol
# ---------------------------------------------------------------------------

@dataclass
class DnSymbol:
    """DN principal symbol computed along two independent routes.

    ``matrix`` acts mode-by-mode: a in C xi_P maps to s(x, xi_P) a and
    a with a . xi_S = 0 maps to s(x, xi_S) a, extended linearly through the
    oblique splitting C^3 = C xi_P + {a : a . xi_S = 0}.  ``route_r`` composes
    the traction symbol with the normal-derivative symbol A_1 A_0^{-1}.
    """

    matrix: np.ndarray
    route_r: np.ndarray
    rel_residual: float
    roots: CharRoots


def dn_symbol(m, gamma, glancing_tol=GLANCING_TOL):
    residue = residue_matrices(m, gamma, glancing_tol)
    roots = residue.roots
    xi_s = roots.s.xi_forward
    xi_p = roots.p.xi_forward

    s_s = traction_symbol(m, gamma.x, xi_s)
    s_p = traction_symbol(m, gamma.x, xi_p)
    sp_xip = s_p @ xi_p
    cols = []
    for j in range(3):
        e = np.zeros(3, dtype=complex)
        e[j] = 1.0
        alpha = adot(xi_s, e) / roots.xi_dot
        w = e - alpha * xi_p
        cols.append(alpha * sp_xip + s_s @ w)
    route_e = np.stack(cols, axis=-1)

    s_t = traction_symbol(m, gamma.x, gamma.xi_t).astype(complex)
    s_nu = traction_normal_derivative(m, gamma.x).astype(complex)
    u_prime = residue.a1 @ residue.a0_inv
    route_r = s_t + NORMAL_DERIVATIVE_SIGN * s_nu @ u_prime

    denom = max(np.linalg.norm(route_e), np.linalg.norm(route_r), 1e-300)
    rel = float(np.linalg.norm(route_e - route_r) / denom)
    return DnSymbol(matrix=route_e, route_r=route_r, rel_residual=rel,
                    roots=roots)


# ---------------------------------------------------------------------------
# companion first-order reduction
# ---------------------------------------------------------------------------

def _kernel_basis(xi, p_root):
    """Basis of ker p at a characteristic root covector (real xi)."""
    xi = np.real_if_close(xi)
    if p_root:
        return [np.asarray(xi, dtype=complex) / np.linalg.norm(xi)]
    k = int(np.argmin(np.abs(xi)))
    e = np.zeros(3)
    e[k] = 1.0
    v1 = np.cross(xi, e)
    v1 = v1 / np.linalg.norm(v1)
    v2 = np.cross(xi, v1)
    v2 = v2 / np.linalg.norm(v2)
    return [v1.astype(complex), v2.astype(complex)]


@dataclass
class CompanionReport:
    """Diagnostics of the 6x6 companion symbol at a boundary covector."""

    eta_norm: float
    identity_residual: float
    eigenvalue_error: float
    kernel_ok: bool
    kernel_dims: dict
    g: np.ndarray


def companion_symbol_check(m, gamma, zeta=None, glancing_tol=GLANCING_TOL):
    """Build the companion symbol and verify its defining identities.

    With p(z) the principal symbol along xi_t - z nu, normalized to a monic
    matrix quadratic z^2 Id + p1 z + p2, the companion symbol is

        g = [[0, |eta| Id], [-p2 / |eta|, -p1]],   |eta|^2 = tau^2 + |xi_t|^2.

    Checks: the factorization (zeta - g')(zeta - g) = diag(p(zeta), p(zeta))
    with g' = [[-p1, -|eta| Id], [p2 / |eta|, 0]]; the eigenvalues of g equal
    the characteristic roots with multiplicity (2, 2, 1, 1); over each real
    root the kernel of (z - g) is {(|eta| a, z a) : p(z) a = 0}.
    """
    eta2 = gamma.tau ** 2 + float(np.dot(gamma.xi_t, gamma.xi_t))
    if eta2 <= 0.0:
        raise FrameDegenerateError("tangential frequency vanishes")
    eta = float(np.sqrt(eta2))

    def p_of(z):
        return principal_symbol_matrix(m, gamma.x, gamma.tau,
                                       gamma.xi_t - z * gamma.nu)

    p_0 = p_of(0.0)
    p_plus = p_of(1.0)
    p_minus = p_of(-1.0)
    c0 = p_0
    c1 = 0.5 * (p_plus - p_minus)
    c2 = 0.5 * (p_plus + p_minus) - p_0
    p1 = np.linalg.solve(c2, c1)
    p2 = np.linalg.solve(c2, c0)

    eye = np.eye(3)
    zero = np.zeros((3, 3))
    g = np.block([[zero, eta * eye], [-p2 / eta, -p1]])
    gp = np.block([[-p1, -eta * eye], [p2 / eta, zero]])

    roots = char_roots(m, gamma, glancing_tol)
    all_roots = [roots.s.z_forward, roots.s.z_forward,
                 roots.s.z_backward, roots.s.z_backward,
                 roots.p.z_forward, roots.p.z_backward]

    if zeta is None:
        probes = [z for z in {roots.s.z_forward, roots.p.z_forward,
                              roots.s.z_backward, roots.p.z_backward}]
        probes.append(0.7 * eta)
    else:
        probes = [zeta]
    identity_residual = 0.0
    eye6 = np.eye(6, dtype=complex)
    for z in probes:
        pn = (z * z * np.eye(3, dtype=complex) + z * p1.astype(complex)
              + p2.astype(complex))
        lhs = (z * eye6 - gp.astype(complex)) @ (z * eye6 - g.astype(complex))
        rhs = np.block([[pn, np.zeros((3, 3))], [np.zeros((3, 3)), pn]])
        scale = max(np.linalg.norm(rhs), 1.0)
        identity_residual = max(identity_residual,
                                float(np.linalg.norm(lhs - rhs) / scale))

    eigs = np.linalg.eigvals(g)
    remaining = list(eigs)
    worst = 0.0
    for z in all_roots:
        k = int(np.argmin([abs(w - z) for w in remaining]))
        worst = max(worst, abs(remaining.pop(k) - z))
    eig_scale = max(1.0, max(abs(z) for z in all_roots))
    eigenvalue_error = float(worst / eig_scale)

    kernel_ok = True
    kernel_dims = {}
    for mode_roots, is_p in ((roots.s, False), (roots.p, True)):
        if not mode_roots.real:
            continue
        for tag, z, xi in ((f"{mode_roots.mode}+", mode_roots.z_forward,
                            mode_roots.xi_forward),
                           (f"{mode_roots.mode}-", mode_roots.z_backward,
                            mode_roots.xi_backward)):
            zr = z.real
            basis = _kernel_basis(xi.real, is_p)
            cand = np.stack([np.concatenate([eta * a, zr * a]) for a in basis],
                            axis=-1)
            q_cand, _ = np.linalg.qr(cand)
            mat = zr * np.eye(6) - g
            _, svals, vh = np.linalg.svd(mat)
            tol = 1e-8 * svals[0]
            null = vh[svals < tol].conj().T
            kernel_dims[tag] = null.shape[1]
            if null.shape[1] != len(basis):
                kernel_ok = False
                continue
            q_null, _ = np.linalg.qr(null)
            gap = np.linalg.norm(q_cand @ q_cand.conj().T
                                 - q_null @ q_null.conj().T)
            if gap > 1e-8:
                kernel_ok = False

    return CompanionReport(eta_norm=eta, identity_residual=identity_residual,
                           eigenvalue_error=eigenvalue_error,
                           kernel_ok=kernel_ok, kernel_dims=kernel_dims, g=g)
