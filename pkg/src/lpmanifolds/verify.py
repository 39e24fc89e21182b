"""Named invariant suite backing the `verify` CLI subcommand.

Each check returns (ok, detail).  The suite is a quick structural health
scan; the full acceptance criteria live in the test suite.
"""

from __future__ import annotations

import math

import numpy as np

from . import (
    LpConfig,
    OrbitGrid,
    Timeline,
    NormLadder,
    OneFluidConfig,
    TwoFluidConfig,
    backward_shoot,
    build_manifold_graph,
    contraction_budget,
    decay_rate_fit,
    dissipativity_check,
    eigen_split,
    evolve,
    froude_bond,
    capillary_multiplier,
    graded_norm,
    hamiltonian_symmetry_check,
    invariance_residual,
    kdv_wave_profile,
    kh_bound,
    lp_solve,
    lp_variational,
    lyapunov_form,
    mmt_galerkin,
    mmt_mode_set,
    mmt_block,
    picard_solve,
    quartic_roots,
    reaction_diffusion,
    reversed_model,
    saddle_toy,
    split_field,
)
from .models import MmtParams

__all__ = ["run_suite", "CHECKS"]


def _mmt_mi():
    p = MmtParams(alpha=1.0, beta=0.0, sigma=-1, a=1.2, xi0=0,
                  mode_set=mmt_mode_set(0, 3))
    return p, mmt_galerkin(p)


def check_graded_monotone():
    ladder = NormLadder.fourier([0, 1, 2, 3], lambda r: r)
    rng = np.random.default_rng(7)
    for _ in range(50):
        v = rng.normal(size=8)
        n0 = graded_norm(v, ladder, 0.0)
        n1 = graded_norm(v, ladder, 1.0)
        n2 = graded_norm(v, ladder, 2.0)
        if not (n0 <= n1 * (1 + 1e-14) and n1 <= n2 * (1 + 1e-14)):
            return False, f"ladder monotonicity violated ({n0}, {n1}, {n2})"
    return True, "||v||_r nondecreasing in r on 50 random draws"


def check_projector_algebra():
    worst = 0.0
    for model, gap in ((saddle_toy("saddle1"), 0.5),
                       (reaction_diffusion(0.5, 5), 0.25),
                       (_mmt_mi()[1], 0.5)):
        A = model.jacobian(model.equilibrium)
        sp = eigen_split(A, gap)
        P, R = sp.projection.projector_plus, sp.projection.projector_rest
        n = A.shape[0]
        worst = max(worst,
                    np.abs(P + R - np.eye(n)).max(),
                    np.linalg.norm(P @ P - P),
                    np.linalg.norm(P @ R),
                    np.linalg.norm(P @ A @ R) / max(np.linalg.norm(A), 1.0),
                    np.linalg.norm(R @ A @ P) / max(np.linalg.norm(A), 1.0))
    ok = worst <= 1e-8
    return ok, f"projector algebra worst defect {worst:.2e}"


def check_lyapunov_identity():
    rng = np.random.default_rng(11)
    worst_res, worst_diss = 0.0, -math.inf
    for _ in range(40):
        n = int(rng.integers(2, 9))
        R = rng.normal(size=(n, n))
        shift = np.linalg.eigvals(R).real.max() + rng.uniform(0.2, 1.5)
        A = R - shift * np.eye(n)
        om = np.linalg.eigvals(A).real.max() + rng.uniform(0.05, 1.0)
        form = lyapunov_form(A, om)
        res = np.linalg.norm(A.T @ form.L + form.L @ A
                             - 2 * om * form.L + np.eye(n))
        worst_res = max(worst_res, res)
        worst_diss = max(worst_diss, dissipativity_check(form, A, om))
    ok = worst_res <= 1e-10 and worst_diss <= 1e-10
    return ok, (f"residual {worst_res:.2e}, dissipativity margin "
                f"{worst_diss:.2e}")


def check_evolve_composition():
    A = np.array([[0.0, 1.0], [-1.0, 0.0]])
    tl = Timeline.autonomous(A)
    v0 = np.array([1.0, 0.0])
    v_direct = evolve(tl, v0, 0.0, 1.5, 1e-3)
    v_mid = evolve(tl, v0, 0.0, 0.7, 1e-3)
    v_comp = evolve(tl, v_mid, 0.7, 1.5, 1e-3)
    err = np.linalg.norm(v_direct - v_comp)
    return err <= 1e-10, f"composition defect {err:.2e}"


def check_picard():
    model = saddle_toy("saddle1")
    orbit, diag = picard_solve(model, np.array([0.1, 0.0]), 0.5, 1e-3,
                               tol=1e-11)
    ok = (diag["rk4_discrepancy"] <= 1e-7
          and diag["contraction_factor"] < 1.0)
    return ok, (f"rk4 diff {diag['rk4_discrepancy']:.2e}, factor "
                f"{diag['contraction_factor']:.3f}")


def check_saddle_manifolds():
    m1 = saddle_toy("saddle1")
    sp1 = eigen_split(m1.jacobian(m1.equilibrium), 0.5)
    p1 = split_field(m1, sp1)
    cfg = LpConfig(lam=0.9, T_max=20.0, dt=0.005, eps=0.12, tol=1e-11)
    worst = 0.0
    for x0 in (-0.1, -0.05, 0.05, 0.1):
        h = lp_solve(p1, cfg, np.array([x0])).h_value[0]
        worst = max(worst, abs(h - x0 * x0 / 3.0))
    m2 = reversed_model(saddle_toy("saddle2"))
    sp2 = eigen_split(m2.jacobian(m2.equilibrium), 0.5)
    p2 = split_field(m2, sp2)
    cfg2 = LpConfig(lam=0.9, T_max=20.0, dt=0.005, eps=0.25, tol=1e-11)
    for y0 in (-0.2, 0.1, 0.2):
        h = lp_solve(p2, cfg2, np.array([y0])).h_value[0]
        worst = max(worst, abs(h - (-y0 * y0 / 4.0)))
    return worst <= 1e-6, f"worst analytic-manifold error {worst:.2e}"


def check_shoot_equivalence():
    rd = reaction_diffusion(2.0, 6)
    sp = eigen_split(rd.jacobian(rd.equilibrium), 0.5)
    pieces = split_field(rd, sp)
    cfg = LpConfig(lam=0.8, T_max=30.0, dt=0.01, eps=0.08, tol=1e-10)
    res = lp_solve(pieces, cfg, np.array([0.05, 0.04]))
    sh = backward_shoot(rd, sp, np.array([0.05, 0.04]), T=25.0, tol=1e-11)
    diff = float(np.max(np.abs(res.h_value - sh.matched_value)))
    budget = 10 * (res.diagnostics["error_budget"] + 1e-9)
    return diff <= budget, f"lp vs shoot {diff:.2e} (budget {budget:.2e})"


def check_mmt_blocks():
    rng = np.random.default_rng(3)
    worst = 0.0
    draws = 0
    while draws < 30:
        alpha = rng.uniform(0.6, 1.2)
        beta = rng.uniform(0.3, min(alpha, 1.0))
        a = rng.uniform(0.2, 1.5)
        xi0 = int(rng.integers(1, 3))
        xi = int(rng.integers(-3, 5))
        if xi == xi0:
            continue
        p = MmtParams(alpha=alpha, beta=beta, sigma=int(rng.choice([1, -1])),
                      a=a, xi0=xi0,
                      mode_set=tuple(sorted({xi0, xi, 2 * xi0 - xi})))
        blk = mmt_block(p, xi)
        roots = quartic_roots(blk.c_plus, blk.c_minus, blk.c)
        ev = np.linalg.eigvals(blk.block)
        B, C = blk.quartic_coeffs()
        if abs(B * B - 4 * C) < 1e-6 * max(B * B, 1.0):
            continue
        rem = list(ev)
        d = 0.0
        for rt in roots:
            j = int(np.argmin([abs(rt - w) for w in rem]))
            d = max(d, abs(rt - rem.pop(j)))
        worst = max(worst, d)
        draws += 1
    return worst <= 1e-10, f"quartic vs eigensolve worst {worst:.2e}"


def check_mmt_symmetry():
    p = MmtParams(alpha=1.0, beta=1.0, sigma=1, a=1.0, xi0=2,
                  mode_set=mmt_mode_set(2, 7))
    m = mmt_galerkin(p)
    rep = hamiltonian_symmetry_check(m.jacobian(m.equilibrium), 1e-8)
    return rep["symmetric"], f"pairing defect {rep['worst']:.2e}"


def check_decay_window():
    _, m = _mmt_mi()
    sp = eigen_split(m.jacobian(m.equilibrium), 0.5)
    pieces = split_field(m, sp)
    cfg = LpConfig(lam=0.8 * sp.lambda_plus, T_max=12.0 / sp.lambda_plus,
                   dt=0.005, eps=0.04, tol=1e-9)
    res = lp_solve(pieces, cfg, np.array([0.03, 0.0]))
    dev = OrbitGrid(res.orbit.times, res.orbit.states - m.equilibrium)
    lam_fit, r2 = decay_rate_fit(dev, m.ladder, 1.0)
    g = sp.realized_gap
    ok = (lam_fit >= sp.rest_max_re + 0.05 * g
          and lam_fit <= sp.lambda_plus_max + 0.05 * g and r2 > 0.99)
    return ok, f"lambda_fit {lam_fit:.4f} in padded band, R2 {r2:.5f}"


def check_tangency():
    rd = reaction_diffusion(2.0, 6)
    sp = eigen_split(rd.jacobian(rd.equilibrium), 0.5)
    pieces = split_field(rd, sp)
    cfg = LpConfig(lam=0.8, T_max=30.0, dt=0.01, eps=0.08, tol=1e-10)
    res0 = lp_solve(pieces, cfg, np.zeros(2))
    _, Dq0 = lp_variational(res0, pieces, cfg)
    return (np.linalg.norm(Dq0) <= 1e-6,
            f"||Dq(0)|| = {np.linalg.norm(Dq0):.2e}")


def check_invariance():
    m = saddle_toy("saddle1")
    sp = eigen_split(m.jacobian(m.equilibrium), 0.5)
    pieces = split_field(m, sp)
    cfg = LpConfig(lam=0.9, T_max=20.0, dt=0.005, eps=0.12, tol=1e-11)
    pts = np.array([[-0.08], [-0.04], [0.04], [0.08]])
    graph = build_manifold_graph(pieces, cfg, grid_spec=pts)
    rep = invariance_residual(graph, pieces, cfg, 0.1)
    return (rep["max_residual"] <= 1e-6,
            f"max invariance residual {rep['max_residual']:.2e}")


def check_budget():
    b = contraction_budget(1.0, 0.1, 1.0, -1.0, 1.0, 0.0)
    ok = abs(b.L1 - 0.2) < 1e-15 and b.feasible_eps is not None
    b2 = contraction_budget(1.0, 1.0, 1.0, -1.0, 1.0, 0.0)
    ok = ok and b2.L1 == 2.0 and b2.feasible_eps is None
    return ok, f"L1 = {b.L1}, feasible eps = {b.feasible_eps:.3e}"


def check_waterwave():
    # threshold data: g(rho_- - rho_+) = 1 and b = rho|nu|^2 total = 2
    nu = (1.0, math.sqrt(0.5))
    cfg2 = TwoFluidConfig(rho_plus=1.0, rho_minus=2.0, nu_plus=(nu[0],),
                          nu_minus=(nu[1],), h_plus=math.inf,
                          h_minus=math.inf, g=1.0, sigma=1.0)
    thresh = kh_bound(cfg2)
    cfg_fin = TwoFluidConfig(rho_plus=1.0, rho_minus=2.0, nu_plus=(nu[0],),
                             nu_minus=(nu[1],), h_plus=1e3, h_minus=1e3,
                             g=1.0, sigma=1.0)
    conv = abs(kh_bound(cfg_fin) - thresh)
    one = OneFluidConfig(g=1.0, sigma=1.0, h0=1.0, c_vec=(0.5,))
    _, _, flag = froude_bond(one)
    scan_ok = True
    if flag:
        for k in np.logspace(-3, 3, 121):
            if capillary_multiplier(np.array([k]), one) < 0:
                scan_ok = False
    ok = thresh == 0.0 and conv <= 1e-6 and flag and scan_ok
    return ok, f"threshold {thresh}, finite-depth gap {conv:.2e}"


def check_kdv():
    prof = kdv_wave_profile(1.0, 2.0, 0.0, np.linspace(-8, 8, 101))
    exact = 1.5 / np.cosh(0.5 * prof.x) ** 2
    err = np.max(np.abs(prof.phi - exact))
    ok = err <= 1e-6 and abs(prof.phi_max - 1.5) <= 1e-8
    return ok, f"sech^2 error {err:.2e}, residual {prof.level_residual:.2e}"


CHECKS = [
    ("graded_monotone", check_graded_monotone),
    ("projector_algebra", check_projector_algebra),
    ("lyapunov_identity", check_lyapunov_identity),
    ("evolve_composition", check_evolve_composition),
    ("picard_vs_rk4", check_picard),
    ("analytic_manifolds", check_saddle_manifolds),
    ("shoot_equivalence", check_shoot_equivalence),
    ("mmt_block_consistency", check_mmt_blocks),
    ("mmt_spectral_symmetry", check_mmt_symmetry),
    ("decay_rate_window", check_decay_window),
    ("tangency", check_tangency),
    ("invariance_residual", check_invariance),
    ("contraction_budget", check_budget),
    ("waterwave_criteria", check_waterwave),
    ("kdv_profile", check_kdv),
]

QUICK = {"graded_monotone", "projector_algebra", "evolve_composition",
         "contraction_budget", "waterwave_criteria", "mmt_spectral_symmetry"}


def run_suite(suite: str = "all", out=print) -> bool:
    ok_all = True
    first_fail = None
    for name, fn in CHECKS:
        if suite == "quick" and name not in QUICK:
            continue
        try:
            ok, detail = fn()
        except Exception as exc:   # a crash is a failure, keep scanning
            ok, detail = False, f"exception: {exc}"
        out(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
        if not ok and first_fail is None:
            first_fail = name
        ok_all = ok_all and ok
    if first_fail is not None:
        out(f"first failing invariant: {first_fail}")
    return ok_all
