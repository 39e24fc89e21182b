import math

import numpy as np
import pytest

from lpmanifolds.linalg import eigen_split, integrate_rk4
from lpmanifolds.models import (
    MmtParams,
    kdv_wave_profile,
    mmt_block,
    mmt_galerkin,
    mmt_mode_set,
    mmt_plane_wave_frequency,
    mmt_unstable_scan,
    reaction_diffusion,
    saddle_toy,
)
from lpmanifolds.oracles import finite_difference_jacobian


def _p(alpha=1.0, beta=1.0, sigma=1, a=1.0, xi0=1, half=2):
    return MmtParams(alpha=alpha, beta=beta, sigma=sigma, a=a, xi0=xi0,
                     mode_set=mmt_mode_set(xi0, half))


# -------------------------------------------------------------- plane wave

def test_plane_wave_frequency_unit():
    assert mmt_plane_wave_frequency(_p()) == pytest.approx(-2.0)


def test_plane_wave_frequency_zero_amplitude():
    p = _p(a=0.0, xi0=2)
    assert mmt_plane_wave_frequency(p) == pytest.approx(-4.0)


def test_plane_wave_frequency_carrier_two():
    p = _p(xi0=2)
    assert mmt_plane_wave_frequency(p) == pytest.approx(-20.0)


# -------------------------------------------------------------- mode blocks

def test_block_decouples_at_zero_amplitude():
    p = _p(a=0.0, xi0=2)
    blk = mmt_block(p, 1)
    assert blk.c == 0.0
    ev = np.sort_complex(np.linalg.eigvals(blk.block))
    expect = np.sort_complex(np.array(
        [1j * blk.c_plus, -1j * blk.c_plus, 1j * blk.c_minus,
         -1j * blk.c_minus]))
    assert np.max(np.abs(ev - expect)) < 1e-12


def test_block_carrier_two_values():
    p = _p(xi0=2)
    blk = mmt_block(p, 1)
    assert blk.c == pytest.approx(12.0)
    assert blk.c_plus == pytest.approx(-11.0)
    assert blk.c_minus == pytest.approx(61.0)
    B, C = blk.quartic_coeffs()
    assert B == pytest.approx(3554.0)
    assert np.max(np.linalg.eigvals(blk.block).real) < 1e-10


def test_block_degenerate_pair_rejected():
    with pytest.raises(ValueError, match="degenerate"):
        mmt_block(_p(xi0=2), 2)


def test_block_characteristic_polynomial_random():
    rng = np.random.default_rng(9)
    for _ in range(25):
        alpha = rng.uniform(0.6, 1.2)
        p = MmtParams(alpha=alpha, beta=rng.uniform(0.3, min(alpha, 1.0)),
                      sigma=int(rng.choice([1, -1])), a=rng.uniform(0.2, 1.5),
                      xi0=1, mode_set=mmt_mode_set(1, 4))
        xi = int(rng.integers(-3, 5))
        if xi == 1:
            continue
        blk = mmt_block(p, xi)
        B, C = blk.quartic_coeffs()
        lam = np.linalg.eigvals(blk.block)
        vals = lam ** 4 + B * lam ** 2 + C
        scale = max(abs(B) ** 2, abs(C), 1.0)
        assert np.max(np.abs(vals)) <= 1e-10 * scale


# -------------------------------------------------------------------- scans

def test_scan_zero_amplitude_has_no_flags():
    rows = mmt_unstable_scan(_p(a=0.0, xi0=2), range(-4, 5))
    assert not any(r["flagged"] for r in rows)


def test_scan_flags_confirmed_by_eigensolve():
    # focusing modulational instability about the zero carrier
    p = MmtParams(alpha=1.0, beta=0.0, sigma=-1, a=1.2, xi0=0,
                  mode_set=mmt_mode_set(0, 4))
    rows = mmt_unstable_scan(p, range(-4, 5))
    flagged = [r for r in rows if r["flagged"]]
    assert flagged, "expected a modulational band"
    for r in rows:
        if r["flagged"]:
            assert r["confirmed"], r
        else:
            assert r["max_re"] <= 1e-8


def test_scan_asymptotic_regime_report():
    # |xi - xi0| << |xi0| at increasing amplitude: report only, flags must be
    # consistent with the eigensolve either way
    for a in (1.0, 10.0, 100.0):
        p = MmtParams(alpha=1.0, beta=1.0, sigma=1, a=a, xi0=8,
                      mode_set=mmt_mode_set(8, 2))
        rows = mmt_unstable_scan(p, [6, 7, 9, 10])
        for r in rows:
            assert r["flagged"] == (r["discriminant"] < 0)
            if r["flagged"]:
                assert r["confirmed"]


# ----------------------------------------------------------------- galerkin

def test_galerkin_equilibrium_exact():
    m = mmt_galerkin(_p(xi0=2, half=3))
    assert np.max(np.abs(m.vector_field(m.equilibrium))) <= 1e-12


def test_galerkin_jacobian_matches_fd():
    m = mmt_galerkin(_p(xi0=2, half=2))
    rng = np.random.default_rng(1)
    for _ in range(5):
        u = m.equilibrium + 0.1 * rng.normal(size=m.dimension)
        J = m.jacobian(u)
        Jfd = finite_difference_jacobian(m.vector_field, u, 1e-6)
        scale = max(np.abs(J).max(), 1.0)
        assert np.abs(J - Jfd).max() <= 1e-6 * scale


def test_galerkin_block_structure_at_plane_wave():
    p = _p(xi0=2, half=2)
    m = mmt_galerkin(p)
    J = m.jacobian(m.equilibrium)
    modes = list(p.mode_set)
    # pair (1, 3) block equals mmt_block
    blk = mmt_block(p, 1)
    i1, i3 = modes.index(1), modes.index(3)
    idx = [2 * i1, 2 * i1 + 1, 2 * i3, 2 * i3 + 1]
    assert np.abs(J[np.ix_(idx, idx)] - blk.block).max() <= 1e-10
    # off-pair entries vanish
    mask = np.zeros_like(J, dtype=bool)
    for xi in modes:
        partner = 2 * p.xi0 - xi
        if partner not in modes:
            continue
        ii = [2 * modes.index(xi), 2 * modes.index(xi) + 1]
        jj = [2 * modes.index(partner), 2 * modes.index(partner) + 1]
        for r in ii:
            for s in ii + jj:
                mask[r, s] = True
    assert np.abs(J[~mask]).max() <= 1e-12


def test_galerkin_energy_conserved_orderly():
    # RK4 energy drift per unit time scales like dt^4
    p = MmtParams(alpha=1.0, beta=0.0, sigma=-1, a=1.2, xi0=0,
                  mode_set=mmt_mode_set(0, 2))
    m = mmt_galerkin(p)
    rng = np.random.default_rng(4)
    u0 = m.equilibrium + 0.05 * rng.normal(size=m.dimension)
    e0 = m.energy(u0)
    drifts = []
    for dt in (2e-2, 1e-2):
        u = integrate_rk4(lambda t, y: m.vector_field(y), u0, 0.0, 1.0, dt)
        drifts.append(abs(m.energy(u) - e0))
    order = math.log(drifts[0] / drifts[1]) / math.log(2.0)
    const = drifts[1] / 1e-2 ** 4
    print(f"energy drift constant per unit time: {const:.3e} "
          f"(order {order:.2f})")
    assert order > 3.5, (drifts, order)


def test_galerkin_eigenvalue_quadruples():
    # Hamiltonian structure: eigenvalues come in {z, -z, conj z, -conj z}
    p = MmtParams(alpha=1.0, beta=0.0, sigma=-1, a=1.2, xi0=0,
                  mode_set=mmt_mode_set(0, 3))
    m = mmt_galerkin(p)
    lam = np.linalg.eigvals(m.jacobian(m.equilibrium))
    for z in lam:
        for target in (-z, np.conj(z), -np.conj(z)):
            assert np.min(np.abs(lam - target)) <= 1e-8


def test_galerkin_zero_mode_linearly_decoupled():
    # beta > 0: the |xi|^beta multiplier kills the zero mode at linear order
    p = _p(xi0=2, half=2, beta=0.75)
    m = mmt_galerkin(p)
    J = m.jacobian(m.equilibrium)
    modes = list(p.mode_set)
    i0 = modes.index(0)
    rows = J[2 * i0:2 * i0 + 2, :].copy()
    rows[:, 2 * i0:2 * i0 + 2] = 0.0   # keep only the coupling entries
    assert np.abs(rows).max() <= 1e-12


def test_galerkin_mode_cap():
    big = MmtParams(alpha=1.0, beta=0.0, sigma=1, a=0.1, xi0=0,
                    mode_set=tuple(range(-40, 41)))
    with pytest.raises(ValueError, match="desk scale"):
        mmt_galerkin(big)


# -------------------------------------------------------------- saddle toys

def test_saddle1_manifold_identity():
    m = saddle_toy("saddle1")
    for x in np.linspace(-0.5, 0.5, 11):
        u = np.array([x, x * x / 3.0])
        f = m.vector_field(u)
        # on y = x^2/3: ydot - (2x/3) xdot = 0
        assert f[1] - (2.0 * x / 3.0) * f[0] == pytest.approx(0.0, abs=1e-14)


def test_saddle2_stable_manifold_identity():
    m = saddle_toy("saddle2")
    for y in np.linspace(-0.5, 0.5, 11):
        u = np.array([-y * y / 4.0, y])
        f = m.vector_field(u)
        # on x = -y^2/4: xdot - h'(y) ydot = 0 with h' = -y/2
        assert f[0] - (-y / 2.0) * f[1] == pytest.approx(0.0, abs=1e-14)


def test_saddle_jacobians_at_origin():
    m1, m2 = saddle_toy("saddle1"), saddle_toy("saddle2")
    assert m1.jacobian(np.zeros(2)) == pytest.approx(np.diag([1.0, -1.0]))
    assert m2.jacobian(np.zeros(2)) == pytest.approx(np.diag([2.0, -1.0]))


def test_saddle_unknown_name():
    with pytest.raises(ValueError, match="unknown"):
        saddle_toy("saddle3")


# -------------------------------------------------------- reaction-diffusion

def test_rd_unstable_dimension_half():
    m = reaction_diffusion(0.5, 5)
    sp = eigen_split(m.jacobian(m.equilibrium), 0.25)
    assert sp.dim_plus == 1


def test_rd_unstable_dimension_two():
    m = reaction_diffusion(2.0, 5)
    sp = eigen_split(m.jacobian(m.equilibrium), 0.5)
    assert sp.dim_plus == 2


def test_rd_spectrum_real():
    m = reaction_diffusion(0.5, 5)
    ev = np.linalg.eigvals(m.jacobian(m.equilibrium))
    assert np.max(np.abs(ev.imag)) <= 1e-12
    assert sorted(ev.real) == pytest.approx(
        sorted(0.5 - k * k for k in range(5)))


def test_rd_jacobian_matches_fd():
    m = reaction_diffusion(1.3, 6)
    rng = np.random.default_rng(8)
    for _ in range(5):
        u = 0.3 * rng.normal(size=6)
        J = m.jacobian(u)
        Jfd = finite_difference_jacobian(m.vector_field, u, 1e-5)
        assert np.abs(J - Jfd).max() <= 1e-6 * max(np.abs(J).max(), 1.0)


def test_rd_field_zero_at_origin():
    m = reaction_diffusion(2.0, 6)
    assert np.max(np.abs(m.vector_field(m.equilibrium))) <= 1e-12


# ----------------------------------------------------------------- kdv waves

def test_kdv_turning_point_p2():
    prof = kdv_wave_profile(1.0, 2.0, 0.0, np.linspace(-5, 5, 41))
    assert prof.phi_max == pytest.approx(1.5, abs=1e-12)


def test_kdv_turning_point_p3():
    prof = kdv_wave_profile(4.0, 3.0, 0.0, np.linspace(-2, 2, 21))
    assert prof.phi_max == pytest.approx(2.0 * math.sqrt(2.0), abs=1e-10)


def test_kdv_sech2_oracle():
    x = np.linspace(-8.0, 8.0, 161)
    prof = kdv_wave_profile(1.0, 2.0, 0.0, x)
    exact = 1.5 / np.cosh(0.5 * x) ** 2
    assert np.max(np.abs(prof.phi - exact)) <= 1e-6


def test_kdv_metric_term_keeps_level_curve():
    x = np.linspace(-6.0, 6.0, 121)
    p0 = kdv_wave_profile(1.0, 2.0, 0.0, x)
    p1 = kdv_wave_profile(1.0, 2.0, 1.0, x)
    assert p1.phi_max == pytest.approx(1.5, abs=1e-10)
    assert p1.level_residual <= 1e-8
    # profiles genuinely differ away from the crest
    assert np.max(np.abs(p1.phi - p0.phi)) > 1e-2


def test_kdv_even_and_ode_consistent():
    x = np.linspace(-4.0, 4.0, 81)
    prof = kdv_wave_profile(2.0, 2.0, 0.5, x)
    assert prof.phi == pytest.approx(prof.phi[::-1], abs=1e-10)
    # centered difference of phi matches the stored derivative
    dphi = np.gradient(prof.phi, x)
    interior = slice(5, len(x) - 5)
    assert np.max(np.abs(dphi[interior] - prof.phi_x[interior])) <= 5e-3


def test_kdv_rejects_bad_speed():
    with pytest.raises(ValueError, match="positive"):
        kdv_wave_profile(-1.0, 2.0, 0.0, np.linspace(-1, 1, 11))
