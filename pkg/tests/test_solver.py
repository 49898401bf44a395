import math

import numpy as np
import pytest
import scipy.sparse.linalg as spla

import oracles
from freqcover.coeffexpr import CoeffSet, parse, validate_coefficients
from freqcover.grid import build_grid
from freqcover.solver import (Discretization, Reference, SingularSystemError, assemble,
                              convergence_study, estimate_dirichlet_eigenvalues, solve)

UNIT1 = CoeffSet.from_strings("1", dim=1)
UNIT2 = CoeffSet.from_strings("1", dim=2)


def test_laplacian_stencil_1d():
    g = build_grid(1, (0, 1), 8)
    A = assemble(g, UNIT1, 0.0, "0").matrix.toarray()
    h2 = g.h[0] ** 2
    assert A[3, 2] == pytest.approx(-1 / h2)
    assert A[3, 3] == pytest.approx(2 / h2)
    assert A[3, 4] == pytest.approx(-1 / h2)
    assert np.count_nonzero(A[3]) == 3


def test_reaction_shift():
    g = build_grid(2, (0, 1), 6)
    c = CoeffSet.from_strings("1", "1", "1", dim=2)
    A0 = assemble(g, c, 0.0, "0").matrix.toarray()
    A2 = assemble(g, c, 2.0, "0").matrix.toarray()
    diff = A2 - A0
    np.testing.assert_allclose(np.diag(diff), -(4 + 2j))
    assert np.count_nonzero(diff - np.diag(np.diag(diff))) == 0


def test_stencil_width_2d():
    g = build_grid(2, (0, 1), 7)
    A = assemble(g, UNIT2, 1.0, "0").matrix
    assert max(np.diff(A.tocsr().indptr)) <= 5


@pytest.mark.parametrize("bc", ["x", "1"])
def test_affine_exact_1d(bc):
    g = build_grid(1, (0, 1), 50)
    f = solve(assemble(g, UNIT1, 0.0, bc))
    expected = parse(bc)
    from freqcover.coeffexpr import evaluate_array
    np.testing.assert_allclose(f.values, evaluate_array(expected, g.coords()), atol=1e-13)
    assert f.residual <= 1e-10


@pytest.mark.parametrize("a", [["1", "1"], ["1.5", "1.5"], ["0.7", "1.8"]])
@pytest.mark.parametrize("bc", ["1", "x", "y", "2 - 3*x + 0.5*y"])
def test_affine_exact_2d(a, bc):
    from freqcover.coeffexpr import evaluate_array
    g = build_grid(2, [(0, 1), (-0.5, 1)], (17, 13))
    c = CoeffSet.from_strings(a, "1", "0", 2.0)
    f = solve(assemble(g, c, 0.0, bc))
    np.testing.assert_allclose(f.values, evaluate_array(parse(bc), g.coords()), atol=1e-12)


def test_boundary_carries_data():
    from freqcover.coeffexpr import evaluate_array
    g = build_grid(2, (0, 1), 10)
    f = solve(assemble(g, UNIT2, 3.0, "x*y + 1"))
    exact = evaluate_array(parse("x*y + 1"), g.coords())
    b = ~g.interior()
    assert np.array_equal(f.values[b], exact[b].astype(complex))


def test_zero_rhs_gives_zero_field():
    g = build_grid(2, (0, 1), 8)
    f = solve(assemble(g, UNIT2, 3.0, "0"))
    assert np.all(f.values == 0) and f.residual == 0.0


def test_closed_form_half_pi():
    w = math.pi / 2
    g = build_grid(1, (0, 1), 64)
    f = solve(assemble(g, UNIT1, w, "1"))
    x = g.axis_coords(0)
    # frozen from the closed form: u(0.5) = sqrt(2)
    assert oracles.u_one(0.5, w) == pytest.approx(math.sqrt(2), rel=1e-15)
    assert f.values[32].real == pytest.approx(math.sqrt(2), abs=10 * g.h[0] ** 2)
    assert np.max(np.abs(f.values - oracles.u_one(x, w))) < 5e-5
    assert not f.flagged_near_eigenvalue


def test_first_eigenfrequency_is_flagged():
    g = build_grid(1, (0, 1), 64)
    try:
        f = solve(assemble(g, UNIT1, math.pi, "1"))
    except SingularSystemError:
        return
    assert f.flagged_near_eigenvalue


def test_exactly_singular_system_raises():
    # n = 4, h = 1/4: mu = 32 is a discrete eigenvalue; eps = 2, omega = 4 hits it exactly
    g = build_grid(1, (0, 1), 4)
    c = CoeffSet.from_strings("1", "2", "0", 2.0, dim=1)
    with pytest.raises(SingularSystemError):
        solve(assemble(g, c, 4.0, "1"))


def test_blowup_factor_flags():
    g = build_grid(1, (0, 1), 64)
    near = estimate_dirichlet_eigenvalues(g, UNIT1, 1).omegas[0] * (1 + 1e-9)
    f = solve(assemble(g, UNIT1, near, "1"), tol_rel=1e-4, near_eig_rel=None)
    assert f.flagged_near_eigenvalue
    f = solve(assemble(g, UNIT1, 2.0, "1"), near_eig_rel=None)
    assert not f.flagged_near_eigenvalue


@pytest.mark.parametrize("dim, n", [(1, 64), (2, 40)])
def test_flag_within_one_percent_of_spectrum(dim, n):
    c = CoeffSet.from_strings("1", dim=dim)
    g = build_grid(dim, (0, 1), n)
    spec = estimate_dirichlet_eigenvalues(g, c, 4).omegas
    disc = Discretization(g, c)
    for wk in spec:
        for rel in (-0.009, -0.003, 0.0, 0.004, 0.0095):
            try:
                f = solve(disc.system(wk * (1 + rel), "1"))
            except SingularSystemError:
                continue
            assert f.flagged_near_eigenvalue, (wk, rel)


def test_not_flagged_between_eigenvalues():
    g = build_grid(1, (0, 1), 64)
    for w in (2.0, 4.7, 7.9, 11.0):
        assert not solve(assemble(g, UNIT1, w, "1")).flagged_near_eigenvalue


@pytest.mark.parametrize("w", [0.3, 2.5, 6.0, 12.0])
def test_realness_without_loss(w):
    g = build_grid(2, (0, 1), 20)
    c = CoeffSet.from_strings(["1 + 0.3*x*y", "1.2"], "1 + 0.2*sin(pi*x)", "0", 2.0)
    tol = 1e-10
    f = solve(assemble(g, c, w, "x + 0.5*y"), tol)
    assert np.max(np.abs(f.values.imag)) <= 10 * tol * np.max(np.abs(f.values))
    assert f.residual <= tol


def test_lossy_solution_is_complex():
    g = build_grid(2, (0, 1), 20)
    c = CoeffSet.from_strings("1", "1", "0.5", 2.0, dim=2)
    f = solve(assemble(g, c, 3.0, "1"))
    assert np.max(np.abs(f.values.imag)) > 1e-3


def test_validated_operator_is_spd_at_zero(rng):
    g = build_grid(2, (0, 1), 9)
    for _ in range(20):
        p, q, r = rng.uniform(-0.4, 0.4, 3)
        a = [f"1.2 + {p}*sin(pi*x*y)", f"1 + {q}*cos(2*x) * y"]
        c = CoeffSet.from_strings(a, f"1 + {r}*x", "0", 2.0)
        assert validate_coefficients(c, g).passed
        A = assemble(g, c, 0.0, "0").matrix.toarray()
        assert np.allclose(A, A.T) and np.allclose(A.imag, 0)
        assert np.linalg.eigvalsh(A.real).min() > 0


def test_eigen_1d_first_and_ascending():
    g = build_grid(1, (0, 1), 64)
    spec = estimate_dirichlet_eigenvalues(g, UNIT1, 3)
    assert spec.omegas == sorted(spec.omegas)
    for k, w in enumerate(spec.omegas, start=1):
        assert w == pytest.approx(k * math.pi, rel=0.01)


def test_eigen_2d_first():
    g = build_grid(2, (0, 1), 64)
    spec = estimate_dirichlet_eigenvalues(g, UNIT2, 1)
    assert spec.omegas[0] == pytest.approx(math.pi * math.sqrt(2), rel=0.01)


def test_eigen_matches_scipy_route():
    # independent route: ARPACK shift-invert on the same matrices
    g = build_grid(2, [(0, 1), (0, 1.3)], (24, 20))
    c = CoeffSet.from_strings(["1 + 0.5*x", "1"], "1 + 0.3*y", "0", 2.0)
    disc = Discretization(g, c)
    import scipy.sparse as sp
    ref = spla.eigsh(disc.stiffness.tocsc(), k=6, M=sp.diags(disc.eps).tocsc(), sigma=0, which="LM")[0]
    ours = estimate_dirichlet_eigenvalues(g, c, 6).omegas
    np.testing.assert_allclose(ours, np.sqrt(np.sort(ref)), rtol=1e-8)


def test_eigen_ignores_sigma():
    g = build_grid(1, (0, 1), 32)
    a = estimate_dirichlet_eigenvalues(g, UNIT1, 2).omegas
    b = estimate_dirichlet_eigenvalues(g, CoeffSet.from_strings("1", "1", "1.5", 2.0, dim=1), 2).omegas
    assert a == b


def test_convergence_1d_oracle():
    w = math.pi / 2
    ref = Reference(exact=lambda x: oracles.u_one(x, w), bc="1")
    levels = convergence_study(UNIT1, w, ref, [32, 64, 128])
    for lv in levels[1:]:
        assert 1.9 <= lv.observed_order <= 2.1
    assert levels[0].observed_order is None


def test_convergence_mms_2d():
    u = parse("sin(pi*x)*sin(pi*y)")
    g = parse("(2*pi^2 - 1)*sin(pi*x)*sin(pi*y)")
    levels = convergence_study(UNIT2, 1.0, Reference(u, source=g), [16, 32, 64])
    assert abs(levels[-1].observed_order - 2.0) < 0.15


@pytest.mark.parametrize("w", [0.0, 1.7, 5.3])
def test_convergence_constant_exact(w):
    c = CoeffSet.from_strings("1", "1.3", "0.4", 2.0, dim=2)
    source = lambda x, y: -(w**2 * 1.3 + 1j * w * 0.4) + 0 * x
    levels = convergence_study(c, w, Reference("1", source=source), [16, 32, 64])
    assert all(lv.max_error < 1e-12 for lv in levels)
