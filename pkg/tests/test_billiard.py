import math

import numpy as np
import pytest

from kaleidobilliards.billiard import (
    BasisTruncation,
    _quadrature_grid,
    _uv_coefficients,
    assemble,
    basis_function,
    convergence_study,
    flatten_sector,
    octant_sector,
    operator_coefficients,
    sector_from_inward_normals,
    solve_sector,
    solve_spectrum,
    spectrum_to_csv,
)
from kaleidobilliards.errors import ChartDomainError, HemisphereError, QuadratureError
from kaleidobilliards.exact import real_spherical_harmonic
from kaleidobilliards.groups import lambda_spectrum
from kaleidobilliards.masses import (
    MassSequence,
    coxeter_spec,
    generate_family,
    symmetric_member,
)

EQUAL = MassSequence((1, 1, 1, 1))
H3_SEQ = symmetric_member(coxeter_spec("H3"))


def exact_ladder(name, count):
    ladder = []
    for lam, mult in lambda_spectrum(coxeter_spec(name), 400).items():
        ladder.extend([lam] * mult)
    return np.array(sorted(ladder)[:count], dtype=float)


# -- flattening -------------------------------------------------------------------

def test_equal_masses_give_symmetric_abcd():
    sec = flatten_sector(EQUAL, (1, 3, 4, 2))
    a, b, c, d = sec.abcd
    assert a == pytest.approx(c, rel=1e-14)
    assert b == pytest.approx(d, rel=1e-14)


def test_h3_masses_finite_abcd_and_corner_map():
    sec = flatten_sector(H3_SEQ, (1, 2, 3, 4))
    assert all(np.isfinite(sec.abcd)) and all(x > 0 for x in sec.abcd)
    # corner correspondence is verified inside flatten_sector; re-check jacobian
    assert sec.jacobian_const == pytest.approx(
        1.0 / abs(np.linalg.det(sec.affine)), rel=1e-13
    )


def test_flatten_requires_four_masses_and_valid_ordering():
    from kaleidobilliards.errors import GeometryError

    with pytest.raises(GeometryError):
        flatten_sector(MassSequence((1, 1, 1)), (1, 2, 3))
    with pytest.raises(GeometryError):
        flatten_sector(EQUAL, (1, 2, 2, 3))


def test_extreme_mass_imbalance_raises_hemisphere_error():
    with pytest.raises(HemisphereError):
        flatten_sector(MassSequence((1e-20, 1.0, 1.0, 1.0)), (1, 2, 3, 4))


def test_measure_pullback_reproduces_girard_area():
    # integral of sqrt(g) over the triangle equals the spherical area
    for sec in (
        flatten_sector(H3_SEQ, (1, 2, 3, 4)),
        flatten_sector(EQUAL, (2, 1, 3, 4)),
        octant_sector(),
    ):
        s, t, w = _quadrature_grid(80)
        u, v = sec.to_uv(s, np.broadcast_to(t, s.shape))
        val = float((((1 + u * u + v * v) ** -1.5) * sec.jacobian_const * w).sum())
        assert val == pytest.approx(sec.geometry.area, abs=1e-8)


def test_degenerate_masses_reported_not_hidden():
    # huge imbalance either raises at flattening or surfaces via the deltas
    try:
        sec = flatten_sector(MassSequence((1e6, 1.0, 1.0, 1.0)), (1, 2, 3, 4))
    except HemisphereError:
        return
    study = convergence_study(sec, (20, 30), k=20)
    assert np.isfinite(study.last_deltas).all()
    assert study.last_deltas.max() > 1e-6  # visibly unconverged, not silently exact


# -- operator ---------------------------------------------------------------------

def test_uv_coefficients_at_origin():
    c = _uv_coefficients(0.0, 0.0)
    assert (c["g_uu"], c["g_uv"], c["g_vv"], c["b_u"], c["b_v"]) == (1, 0, 1, 0, 0)


def test_operator_rejects_exterior_points():
    sec = flatten_sector(EQUAL, (1, 2, 3, 4))
    with pytest.raises(ChartDomainError):
        operator_coefficients(sec, 0.5, 0.6)


def _pullback_and_derivatives(sec, poly, s, t):
    """Analytic value/gradient/hessian of p(z(s,t)) on the chart."""
    lam = poly.degree
    q = poly.compose(sec.frame.T)  # chart frame to world
    qs = q.gradient()
    qss = [g.gradient() for g in qs]
    u, v = sec.to_uv(s, t)
    pt = np.array([[1.0, u, v]])
    w2 = 1.0 + u * u + v * v
    p0 = q.evaluate(pt)[0]
    pu = qs[1].evaluate(pt)[0]
    pv = qs[2].evaluate(pt)[0]
    puu = qss[1][1].evaluate(pt)[0]
    puv = qss[1][2].evaluate(pt)[0]
    pvv = qss[2][2].evaluate(pt)[0]
    f = p0 * w2 ** (-lam / 2)
    fu = pu * w2 ** (-lam / 2) - lam * u * p0 * w2 ** (-lam / 2 - 1)
    fv = pv * w2 ** (-lam / 2) - lam * v * p0 * w2 ** (-lam / 2 - 1)
    fuu = (
        puu * w2 ** (-lam / 2)
        - 2 * lam * u * pu * w2 ** (-lam / 2 - 1)
        - lam * p0 * w2 ** (-lam / 2 - 1)
        + lam * (lam + 2) * u * u * p0 * w2 ** (-lam / 2 - 2)
    )
    fvv = (
        pvv * w2 ** (-lam / 2)
        - 2 * lam * v * pv * w2 ** (-lam / 2 - 1)
        - lam * p0 * w2 ** (-lam / 2 - 1)
        + lam * (lam + 2) * v * v * p0 * w2 ** (-lam / 2 - 2)
    )
    fuv = (
        puv * w2 ** (-lam / 2)
        - lam * (u * pv + v * pu) * w2 ** (-lam / 2 - 1)
        + lam * (lam + 2) * u * v * p0 * w2 ** (-lam / 2 - 2)
    )
    inv = np.linalg.inv(sec.affine)
    grad_uv = np.array([fu, fv])
    hess_uv = np.array([[fuu, fuv], [fuv, fvv]])
    grad_st = inv.T @ grad_uv
    hess_st = inv.T @ hess_uv @ inv
    return f, grad_st, hess_st


@pytest.mark.parametrize("ordering", [(1, 2, 3, 4), (2, 1, 3, 4)])
def test_operator_reproduces_harmonic_eigenvalue(ordering):
    sec = flatten_sector(H3_SEQ, ordering)
    rng = np.random.default_rng(7)
    for lam, mu in [(3, 1), (6, -4), (9, 0)]:
        poly = real_spherical_harmonic(lam, mu)
        for _ in range(7):
            # random interior point by corner barycenter
            w = rng.dirichlet((1.5, 1.5, 1.5))
            s, t = w @ np.array([[-1, -1], [-1, 1], [1, -1]])
            f, grad, hess = _pullback_and_derivatives(sec, poly, s, t)
            if abs(f) < 1e-6:
                continue
            c = operator_coefficients(sec, s, t)
            lap = (
                c["g_ss"] * hess[0, 0]
                + c["g_st"] * hess[0, 1]
                + c["g_tt"] * hess[1, 1]
                + c["b_s"] * grad[0]
                + c["b_t"] * grad[1]
            )
            assert lap == pytest.approx(-lam * (lam + 1) * f, rel=1e-8)


def test_operator_matches_finite_differences():
    sec = flatten_sector(EQUAL, (1, 2, 3, 4))
    poly = real_spherical_harmonic(4, 2)

    def f_of(s, t):
        u, v = sec.to_uv(s, t)
        q = poly.compose(sec.frame.T)
        w2 = 1.0 + u * u + v * v
        return q.evaluate(np.array([[1.0, u, v]]))[0] * w2 ** (-poly.degree / 2)

    s0, t0 = -0.35, -0.25
    h = 1e-4
    fss = (f_of(s0 + h, t0) - 2 * f_of(s0, t0) + f_of(s0 - h, t0)) / h**2
    ftt = (f_of(s0, t0 + h) - 2 * f_of(s0, t0) + f_of(s0, t0 - h)) / h**2
    fst = (
        f_of(s0 + h, t0 + h) - f_of(s0 + h, t0 - h) - f_of(s0 - h, t0 + h) + f_of(s0 - h, t0 - h)
    ) / (4 * h**2)
    fs = (f_of(s0 + h, t0) - f_of(s0 - h, t0)) / (2 * h)
    ft = (f_of(s0, t0 + h) - f_of(s0, t0 - h)) / (2 * h)
    c = operator_coefficients(sec, s0, t0)
    lap = c["g_ss"] * fss + c["g_st"] * fst + c["g_tt"] * ftt + c["b_s"] * fs + c["b_t"] * ft
    assert lap == pytest.approx(-4 * 5 * f_of(s0, t0), rel=1e-5)


# -- basis -----------------------------------------------------------------------

def test_basis_vanishes_on_all_boundaries():
    pts = np.linspace(-1, 1, 10)
    for n, m in [(1, 2), (2, 5), (4, 7)]:
        assert np.abs(basis_function(n, m, -1.0, pts)).max() < 1e-12
        assert np.abs(basis_function(n, m, pts, -1.0)).max() < 1e-12
        assert np.abs(basis_function(n, m, pts, -pts)).max() < 1e-12


def test_basis_matches_eight_term_exponential_sum():
    rng = np.random.default_rng(8)
    for n, m in [(1, 2), (3, 8), (2, 9)]:
        s = rng.uniform(-1, 1, 20)
        t = rng.uniform(-1, 1, 20)
        total = np.zeros(20, dtype=complex)
        for sign_n, sign_m, swap, pref in [
            (-1, +1, False, +1), (-1, -1, False, -1), (+1, -1, False, +1),
            (+1, +1, False, -1), (-1, +1, True, -1), (-1, -1, True, +1),
            (+1, -1, True, -1), (+1, +1, True, +1),
        ]:
            a, b = (m, n) if swap else (n, m)
            total = total + pref * np.exp(
                0.5j * math.pi * (sign_n * a * (s + 1) + sign_m * b * (t - 1))
            )
        total = total / 4.0
        np.testing.assert_allclose(total.imag, 0.0, atol=1e-12)
        np.testing.assert_allclose(
            basis_function(n, m, s, t), total.real, atol=1e-12
        )


def test_basis_orthonormal_under_flat_measure():
    # right-triangle eigenfunctions: <h_ab, h_cd> = delta over the triangle
    x, w = np.polynomial.legendre.leggauss(60)
    x01, w01 = 0.5 * (x + 1), 0.5 * w
    t = -1 + 2 * x01
    pairs = [(1, 2), (1, 3), (2, 3)]
    gram = np.zeros((3, 3))
    for i, (n1, m1) in enumerate(pairs):
        for j, (n2, m2) in enumerate(pairs):
            total = 0.0
            for tk, wk in zip(t, w01):
                smax = -tk
                ss = -1 + (x01 * (smax + 1))
                ws = w01 * (smax + 1)
                total += 2 * wk * np.sum(
                    ws * basis_function(n1, m1, ss, tk) * basis_function(n2, m2, ss, tk)
                )
            gram[i, j] = total
    np.testing.assert_allclose(gram, np.eye(3), atol=1e-10)


def test_basis_requires_n_less_than_m():
    with pytest.raises(ValueError):
        basis_function(3, 3, 0.0, 0.0)
    with pytest.raises(ValueError):
        BasisTruncation(4, ((2, 2),))


def test_truncation_enumeration():
    trunc = BasisTruncation(3)
    assert trunc.index_pairs == ((1, 2), (1, 3), (2, 3))
    assert len(BasisTruncation(40)) == 40 * 39 // 2


# -- assembly ---------------------------------------------------------------------

def test_assemble_tiny_truncation_shapes():
    sec = octant_sector()
    a, b = assemble(sec, BasisTruncation(3), quadrature_order=12)
    assert a.shape == (3, 3) and b.shape == (3, 3)
    assert np.abs(a - a.T).max() < 1e-10 * np.abs(a).max()
    assert np.abs(b - b.T).max() < 1e-10 * np.abs(b).max()
    assert np.all(np.linalg.eigvalsh(b) > 0)


def test_assemble_enforces_quadrature_floor():
    with pytest.raises(QuadratureError):
        assemble(octant_sector(), BasisTruncation(10), quadrature_order=20)


def test_trace_stable_under_quadrature_doubling():
    sec = flatten_sector(EQUAL, (1, 2, 3, 4))
    tr = []
    for order in (30, 60):
        _, b = assemble(sec, BasisTruncation(10), order)
        tr.append(np.trace(b))
    assert abs(tr[1] - tr[0]) / abs(tr[1]) < 1e-6


# -- spectra ----------------------------------------------------------------------

def test_octant_exact_spectrum():
    spec = solve_sector(octant_sector(), n_max=32, k=10)
    want = np.array([3, 5, 5, 7, 7, 7, 9, 9, 9, 9], dtype=float)
    assert np.abs(spec.effective_lambda - want).max() < 5e-4
    np.testing.assert_allclose(spec.values, want * (want + 1), rtol=2e-4)


@pytest.mark.parametrize(
    "name,masses",
    [
        ("A3", EQUAL),
        ("C3", generate_family(coxeter_spec("C3"), 3, 1)),
        ("H3", H3_SEQ),
    ],
)
def test_coxeter_sector_spectra_match_ladder(name, masses):
    sec = flatten_sector(masses, (1, 2, 3, 4))
    spec = solve_sector(sec, n_max=30, k=6)
    exact = exact_ladder(name, 6)
    assert np.abs(spec.effective_lambda - exact).max() < 5e-3


def test_inversion_congruent_orderings_share_spectra():
    sec1 = flatten_sector(H3_SEQ, (2, 1, 3, 4))
    sec2 = flatten_sector(H3_SEQ, (4, 3, 1, 2))
    s1 = solve_sector(sec1, 24, 20).values
    s2 = solve_sector(sec2, 24, 20).values
    np.testing.assert_allclose(s1, s2, rtol=1e-8)


def test_canonical_and_centroid_charts_agree():
    sec_can = flatten_sector(H3_SEQ, (2, 1, 3, 4))
    sec_cen = sector_from_inward_normals(sec_can.geometry.bounding_normals)
    s1 = solve_sector(sec_can, 36, 10).values
    s2 = solve_sector(sec_cen, 36, 10).values
    np.testing.assert_allclose(s1, s2, rtol=5e-4)


def test_variational_monotonicity_in_truncation():
    sec = flatten_sector(EQUAL, (1, 2, 3, 4))
    study = convergence_study(sec, (16, 20, 24), k=25)
    for prev, nxt in zip(study.spectra, study.spectra[1:]):
        assert np.all(nxt.values[:25] <= prev.values[:25] + 1e-9)


def test_convergence_study_octant_ground_level():
    study = convergence_study(octant_sector(), (10, 15, 20), k=5, tolerance=1e-2)
    # ground level drift shrinks with refinement and is already below 1e-3
    assert study.deltas[1][0] < study.deltas[0][0]
    assert study.deltas[1][0] < 2e-3
    assert study.converged_count >= 1


def test_convergence_count_is_prefix():
    sec = flatten_sector(H3_SEQ, (2, 1, 3, 4))
    study = convergence_study(sec, (20, 26), k=60, tolerance=0.5)
    d = study.last_deltas
    cc = study.converged_count
    assert np.all(d[:cc] <= 0.5)
    if cc < len(d):
        assert d[cc] > 0.5


def test_solve_spectrum_rejects_indefinite_overlap():
    a = np.eye(3)
    b = np.diag([1.0, -1.0, 1.0])
    from kaleidobilliards.errors import EigensolverError

    with pytest.raises(EigensolverError):
        solve_spectrum(a, b, 3)


def test_spectrum_csv_format(tmp_path):
    spec = solve_sector(octant_sector(), 12, 5)
    path = tmp_path / "spec.csv"
    spectrum_to_csv(spec, path, deltas=np.zeros(3))
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "k,eigenvalue,lambda_eff,delta_last_refinement"
    assert len(lines) == 6
    assert lines[1].startswith("1,")
    assert lines[5].endswith(",")  # delta column empty past the study length
