"""Acceptance gate: ten pinned criteria, one printed PASS/FAIL line each.

Every tolerance here is frozen; a red line means the library does not meet
its contract, never that the test should be loosened.
"""

import time

import numpy as np
import pytest

import elastoray as er
from elastoray.boundary import discriminant_margin

SOUTH = np.array([0.0, 0.0, -1.0])
NORTH = np.array([0.0, 0.0, 1.0])
SQ2 = np.sqrt(2.0)
SQ3 = np.sqrt(3.0)


def report(capsys, num, desc, ok, detail):
    line = f"[criterion {num:02d}] {'PASS' if ok else 'FAIL'}  {desc}  ({detail})"
    with capsys.disabled():
        print(line)
    assert ok, line


def covector_fan(m, n, seed, delta=0.5, margin=None, require=None):
    """n covectors from the Gamma_delta sampler, optionally margin-filtered."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        x, nu, xi_t, tau = er.sample_boundary_covectors(m, 4 * n, rng, delta)
        for i in range(len(tau)):
            g = er.boundary_covector(m, 0.0, x[i], tau[i], xi_t[i])
            if er.classify(m, g).combined == "glancing":
                continue
            if margin is not None and discriminant_margin(m, g) < margin:
                continue
            out.append(g)
            if len(out) == n:
                break
    if require:
        labels = {er.classify(m, g).combined for g in out}
        assert require <= labels, f"fan misses regions: {require - labels}"
    return out


@pytest.fixture(scope="module")
def constant_fan_legs(constant_medium):
    # shared by criteria 6 and 7: 100 two-mode-hyperbolic probes, traced
    rng = np.random.default_rng(2026)
    probes = er.probe_fan(constant_medium, 100, rng)
    legs = []
    for g in probes:
        for mode in ("S", "P"):
            legs.append(er.trace_leg(constant_medium, g, mode))
    return probes, legs


def test_criterion_01_factorization(capsys, constant_medium, stressed_medium,
                                    potential_medium):
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    worst_fact = 0.0
    worst_det = 0.0
    for m in (constant_medium, stressed_medium, potential_medium):
        n = 10000
        x = m.domain.sample_interior(n, rng)
        tau = rng.uniform(0.1, 3.0, size=n)
        xi = rng.standard_normal((n, 3))
        p, pt, qs, qp = er.principal_symbol_batch(m, x, tau, xi)
        prod = np.einsum("nij,njk->nik", pt, p)
        target = (qs * qp)[:, None, None] * np.eye(3)[None]
        scale = np.maximum(1.0, np.abs(qs * qp))
        worst_fact = max(worst_fact,
                         (np.abs(prod - target).max(axis=(1, 2)) / scale).max())
        det = np.linalg.det(p)
        det_scale = np.maximum(1.0, np.abs(qs * qs * qp))
        worst_det = max(worst_det,
                        (np.abs(det - qs * qs * qp) / det_scale).max())
    elapsed = time.perf_counter() - t0
    ok = worst_fact <= 1e-10 and worst_det <= 1e-10 and elapsed < 5.0
    report(capsys, 1,
           "symbol factorization and determinant over 3x10^4 samples",
           ok, f"fact {worst_fact:.2e}, det {worst_det:.2e}, {elapsed:.2f}s")


def test_criterion_02_residue_oracle(capsys, constant_medium):
    m = constant_medium
    fan = covector_fan(m, 100, seed=202, margin=5e-2)
    rng = np.random.default_rng(202)
    worst_quad = 0.0
    worst_aone = 0.0
    for g in fan:
        rd = er.residue_matrices(m, g)
        quad = er.residue_quadrature(m, g, nodes=256)
        worst_quad = max(worst_quad, np.abs(quad.a0 - rd.a0).max(),
                         np.abs(quad.a1 - rd.a1).max())
        z_s, z_p = rd.roots.s.z_forward, rd.roots.p.z_forward
        xi_s, xi_p = rd.roots.s.xi_forward, rd.roots.p.xi_forward
        w = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        v = w - xi_p * (xi_p @ w) / (xi_p @ xi_p)
        scale = max(1.0, float(np.abs(rd.a1).max()))
        worst_aone = max(
            worst_aone,
            np.abs(rd.a1 @ v - z_s * (rd.a0 @ v)).max() / scale,
            np.abs(rd.a1 @ xi_s - z_p * (rd.a0 @ xi_s)).max() / scale)
    ok = worst_quad <= 1e-8 and worst_aone <= 1e-12
    report(capsys, 2,
           "closed-form residues vs 256-node contour quadrature, 100 covectors",
           ok, f"quad {worst_quad:.2e}, relations {worst_aone:.2e}")


def test_criterion_03_dn_dual_route(capsys, constant_medium):
    m = constant_medium
    fan = covector_fan(m, 100, seed=303,
                       require={"hyperbolic", "mixed", "elliptic"})
    worst = max(er.dn_symbol(m, g).rel_residual for g in fan)
    g0 = er.boundary_covector(m, 0.0, NORTH, 2.0, np.array([1.0, 0.0, 0.0]))
    dn = er.dn_symbol(m, g0)
    a_sh = np.array([0.0, 1.0, 0.0])
    err_sh = np.abs(dn.matrix @ a_sh - SQ3 * a_sh).max() / SQ3
    xi_p = np.array([1.0, 0.0, 1.0 / SQ3])
    a_p = xi_p / np.linalg.norm(xi_p)
    want = np.array([1.0, 0.0, SQ3])
    err_p = np.abs(dn.matrix @ a_p - want).max() / np.abs(want).max()
    ok = worst <= 1e-10 and err_sh <= 1e-10 and err_p <= 1e-10
    report(capsys, 3,
           "DN symbol dual-route agreement and hand-computed actions",
           ok, f"route {worst:.2e}, SH {err_sh:.2e}, P {err_p:.2e}")


def test_criterion_04_lopatinski(capsys, constant_medium, stressed_medium,
                                 potential_medium, bump_medium):
    ok = True
    details = []
    for name, m in (("constant", constant_medium), ("stressed", stressed_medium),
                    ("potential", potential_medium), ("bump", bump_medium)):
        rep1 = er.lopatinski_margin(m, sample_count=100000, seed=404)
        rep2 = er.lopatinski_margin(m, sample_count=200000, seed=404)
        stable = abs(rep2.min_normalized - rep1.min_normalized) <= \
            0.10 * rep1.min_normalized
        ok = ok and rep1.admissible and rep1.min_normalized > 0.0 and stable
        details.append(f"{name} {rep1.min_normalized:.3f}")
    report(capsys, 4,
           "Lopatinski margin positive and stable over 10^5 covectors, 4 media",
           ok, ", ".join(details))


def test_criterion_05_polarization(capsys, constant_medium, rng):
    m = constant_medium
    fan = covector_fan(m, 150, seed=505)
    worst_alg = 0.0
    worst_mute = 0.0
    n_hyp = n_mix = 0
    ranks_ok = True
    for g in fan:
        lab = er.classify(m, g)
        if lab.s_label != "hyperbolic":
            continue
        try:
            fr = er.polarization_frame(m, g)
        except er.FrameConditionError:
            continue
        dims = sorted(b.shape[1] for b in fr.bases.values())
        if fr.kind == "hyperbolic":
            ranks_ok = ranks_ok and dims == [1, 1, 2, 2]
            n_hyp += 1
        else:
            ranks_ok = ranks_ok and dims == [2, 2, 2]
            n_mix += 1
        projs = list(fr.projectors.values())
        for i, pi in enumerate(projs):
            worst_alg = max(worst_alg, np.abs(pi @ pi - pi).max())
        worst_alg = max(worst_alg, np.abs(sum(projs) - np.eye(6)).max())
        worst_mute = max(worst_mute, er.muting_annihilation_check(m, g, fr))
    g0 = er.boundary_covector(m, 0.0, NORTH, 2.0, np.array([1.0, 0.0, 0.0]))
    fr0 = er.polarization_frame(m, g0)
    e = rng.standard_normal((3, 3))
    e = (e + e.T) / np.linalg.norm(e + e.T, 2)
    mm = er.mute_symbol(g0) + 0.1 * e
    big = np.zeros((6, 6))
    big[:3, :3] = mm
    big[3:, 3:] = mm
    control = np.linalg.norm(fr0.p_projector @ big, 2)
    ok = (ranks_ok and n_hyp >= 20 and n_mix >= 20
          and worst_alg <= 1e-10 and worst_mute <= 1e-10 and control > 1e-2)
    report(capsys, 5,
           "polarization frame ranks, projector algebra, muting annihilation",
           ok, f"algebra {worst_alg:.2e}, muting {worst_mute:.2e}, "
               f"control {control:.3f}")


def test_criterion_06_constant_medium_exactness(capsys, constant_medium,
                                                constant_fan_legs):
    m = constant_medium
    probes, legs = constant_fan_legs
    worst_time = 0.0
    for entry in legs:
        c = 1.0 if entry.mode == "S" else SQ3
        chord = np.linalg.norm(entry.gamma_out.x - entry.gamma_in.x)
        worst_time = max(worst_time, abs(entry.travel_time - chord / c))

    # Snell at reflection: incident S at 30 deg converts to P at 60 deg
    g = er.incidence_covector(m, SOUTH, "S", np.deg2rad(30.0))
    out, _, _ = er.trace_state(m, er.launch_state(m, g, "S"))
    res = er.reflect(m, out)
    nu = m.domain.normal(out.x)
    worst_snell = 0.0
    for mode, c, want in (("S", 1.0, 30.0), ("P", SQ3, 60.0)):
        s = next(s for s in res.states if s.mode == mode)
        v = -s.xi / (s.tau / c ** 2)
        v /= np.linalg.norm(v)
        angle = np.degrees(np.arccos(np.clip(-(v @ nu), -1.0, 1.0)))
        worst_snell = max(worst_snell, abs(angle - want) * np.pi / 180.0)

    critical = np.degrees(np.arcsin(1.0 / SQ3))
    suppression_ok = True
    for theta in np.linspace(5.0, 85.0, 17):
        g = er.incidence_covector(m, SOUTH, "S", np.deg2rad(theta))
        try:
            out, _, _ = er.trace_state(m, er.launch_state(m, g, "S"))
            res = er.reflect(m, out)
        except er.ElastorayError:
            continue
        has_p = any(s.mode == "P" for s in res.states)
        if theta < critical - 0.5:
            suppression_ok = suppression_ok and has_p
        elif theta > critical + 0.5:
            suppression_ok = suppression_ok and not has_p \
                and "P" in res.evanescent
    ok = worst_time <= 1e-8 and worst_snell <= 1e-8 and suppression_ok
    report(capsys, 6,
           "constant-medium ray exactness, Snell angles, evanescent cutoff",
           ok, f"time {worst_time:.2e}, snell {worst_snell:.2e} rad, "
               f"cutoff {critical:.2f} deg honored: {suppression_ok}")


def test_criterion_07_conservation(capsys, constant_medium, bump_medium,
                                   constant_fan_legs):
    probes, legs = constant_fan_legs
    rng = np.random.default_rng(707)
    bump_legs = [er.trace_leg(bump_medium, g, mode)
                 for g in er.probe_fan(bump_medium, 20, rng)
                 for mode in ("S", "P")]
    worst_drift = max(e.drift_max for e in legs + bump_legs)
    tau_exact = all(e.gamma_out.tau == e.gamma_in.tau for e in legs + bump_legs)

    m = constant_medium
    g = er.incidence_covector(m, SOUTH, "S", np.deg2rad(30.0))
    out, _, _ = er.trace_state(m, er.launch_state(m, g, "S"))
    res = er.reflect(m, out)
    nu = m.domain.normal(out.x)
    t_out = out.xi - (out.xi @ nu) * nu
    refl_exact = all(
        s.t == out.t and s.tau == out.tau
        and np.array_equal(s.x, res.states[0].x)
        and np.abs((s.xi - (s.xi @ nu) * nu) - t_out).max() <= 1e-15
        for s in res.states)
    ok = worst_drift <= 1e-9 and tau_exact and refl_exact
    report(capsys, 7,
           "Hamiltonian drift, exact frequency, exact reflection data",
           ok, f"drift {worst_drift:.2e}, tau exact: {tau_exact}, "
               f"reflection exact: {refl_exact}")


def test_criterion_08_generating_function(capsys, bump_medium):
    m = bump_medium
    rng = np.random.default_rng(808)
    h = 1e-4
    worst = 0.0
    n_pairs = 0
    while n_pairs < 20:
        x0 = m.domain.sample_boundary(1, rng)[0]
        y = m.domain.sample_boundary(1, rng)[0]
        gap = np.linalg.norm(y - x0)
        if gap < 0.6 or gap > 1.8:
            continue
        base = er.boundary_distance(m, "S", x0, y, n_starts=10, n_refine=1)
        if not base.connected:
            continue
        e1, e2 = m.domain.tangent_basis(x0)
        w0 = np.array([base.gamma_in.xi_t @ e1, base.gamma_in.xi_t @ e2])
        grad = np.zeros(2)
        want = np.zeros(2)
        okpair = True
        for k, tv in enumerate(m.domain.tangent_basis(y)):
            dp = er.boundary_distance(m, "S", x0,
                                      m.domain.radial_project(y + h * tv),
                                      warm_start=w0)
            dm = er.boundary_distance(m, "S", x0,
                                      m.domain.radial_project(y - h * tv),
                                      warm_start=w0)
            if not (dp.connected and dm.connected):
                okpair = False
                break
            grad[k] = (dp.distance - dm.distance) / (2.0 * h)
            want[k] = -(base.gamma_out.xi_t @ tv) / base.gamma_out.tau
        if not okpair:
            continue
        worst = max(worst, np.linalg.norm(grad - want) / np.linalg.norm(want))
        n_pairs += 1
    ok = worst <= 1e-3 and n_pairs == 20
    report(capsys, 8,
           "boundary gradient of distance equals -xi/tau on 20 pairs",
           ok, f"worst relative error {worst:.2e}")


def test_criterion_09_lens_map_recovery(capsys, constant_medium,
                                        stressed_medium):
    t0 = time.perf_counter()
    ok = True
    details = []
    for name, m in (("conformal", constant_medium),
                    ("anisotropic", stressed_medium)):
        rng = np.random.default_rng(909)
        probes = er.probe_fan(m, 50, rng)
        rep = er.recover_lens_maps(m, probes)
        ok = ok and rep.n_probes == 50
        ok = ok and rep.max_dx <= 1e-6 and rep.max_dxi <= 1e-6 \
            and rep.max_dt <= 1e-6
        ok = ok and rep.max_mode_separation > 0.1
        details.append(f"{name} dx {rep.max_dx:.1e} dt {rep.max_dt:.1e} "
                       f"sep {rep.max_mode_separation:.2f}")
    elapsed = time.perf_counter() - t0
    ok = ok and elapsed < 60.0
    report(capsys, 9,
           "lens maps recovered from transport events, 50 probes x 2 media",
           ok, "; ".join(details) + f", {elapsed:.1f}s")


def test_criterion_10_companion(capsys, constant_medium, stressed_medium):
    worst_id = 0.0
    worst_eig = 0.0
    count = 0
    for m in (constant_medium, stressed_medium):
        for g in covector_fan(m, 50, seed=1010):
            rep = er.companion_symbol_check(m, g)
            worst_id = max(worst_id, rep.identity_residual)
            worst_eig = max(worst_eig, rep.eigenvalue_error)
            count += 1
    ok = worst_id <= 1e-12 and worst_eig <= 1e-10 and count == 100
    report(capsys, 10,
           "companion symbol identity and eigenvalue match, 100 covectors",
           ok, f"identity {worst_id:.2e}, eigenvalues {worst_eig:.2e}")
