import math

import numpy as np
import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from randsource import estimator as E
from randsource import inversion as I
from randsource.forward import GeometryError
from randsource.randfield import Grid, SmoothBump

BUMP = SmoothBump((0.0, 0.0), 1.0)


def _circle(n, r):
    ang = np.linspace(0, 2 * np.pi, n, endpoint=False)
    return r * np.stack([np.cos(ang), np.sin(ang)], 1)


@pytest.fixture(scope="module")
def grid():
    return Grid((-1.1, -1.1), 16, 2.2 / 16)


@pytest.fixture(scope="module")
def op(grid):
    return I.assemble_kernel(_circle(12, 3.0), grid, 1)


def test_single_entry():
    op = I.assemble_kernel(np.array([[2.0, 0.0]]), np.array([[0.0, 0.0]]), 1, 1.0, cell_volume=1.0)
    assert op.matrix.shape == (1, 1)
    assert op.matrix[0, 0] == 0.5


def test_symmetric_configuration_entries(grid):
    op = I.assemble_kernel(np.array([[3.0, 0.0], [-3.0, 0.0]]), grid, 2, 0.7)
    nodes = grid.nodes().reshape(-1, 2)
    # reflection x -> -x maps node j to its mirror image
    mirror = np.array([np.argmin(np.sum((nodes - [-p[0], p[1]]) ** 2, 1)) for p in nodes])
    assert np.allclose(op.matrix[0], op.matrix[1][mirror], rtol=1e-14)
    assert np.all(op.matrix > 0) and np.all(np.isfinite(op.matrix))


def test_point_inside_grid_rejected(grid):
    with pytest.raises(GeometryError):
        I.assemble_kernel(np.array([[0.03, 0.05]]), grid, 1)


def test_kernel_consistency_with_analytic_strength():
    fine = Grid((-1.05, -1.05), 96, 2.1 / 96)
    pts = _circle(8, 3.0)
    c = E.strength_constant("acoustic2", 2.0)
    op = I.assemble_kernel(pts, fine, 1, c)
    ref = E.analytic_strength([BUMP], pts, "acoustic2", 2.0, "paper")
    assert np.max(np.abs(op.apply(I.discretized_bump([BUMP], fine)) - ref) / np.abs(ref)) <= 5e-3


def test_zero_data(op):
    for nonneg in (False, True):
        rec = I.tikhonov_solve(op, np.zeros(op.shape[0]), 1e-3, nonneg)
        assert np.all(rec.phi == 0)


def test_linearity_in_data(op):
    T = np.random.default_rng(0).uniform(0.5, 1.0, op.shape[0])
    a = I.tikhonov_solve(op, T, 1e-3).phi
    b = I.tikhonov_solve(op, 2 * T, 1e-3).phi
    assert np.allclose(b, 2 * a, rtol=1e-12, atol=1e-14)


def test_unregularised_rank_deficient(op):
    with pytest.raises(I.ConditioningError):
        I.tikhonov_solve(op, np.ones(op.shape[0]), 0.0)


def test_unregularised_tall_system():
    nodes = np.array([[0.0, 0.0], [0.3, 0.0]])
    op = I.assemble_kernel(_circle(6, 2.0), nodes, 1, 1.0, cell_volume=0.01)
    truth = np.array([1.0, 2.0])
    rec = I.tikhonov_solve(op, op.apply(truth), 0.0, truth=truth)
    assert rec.truth_error < 1e-8


def test_against_normal_equations(op):
    T = np.random.default_rng(1).uniform(size=op.shape[0])
    lam = 1e-2
    A = op.matrix
    ref = np.linalg.solve(A.T @ A + lam**2 * np.eye(A.shape[1]), A.T @ T)
    assert np.allclose(I.tikhonov_solve(op, T, lam).phi, ref, rtol=1e-8, atol=1e-10)


def test_nonneg_projection_and_stationarity(op, grid):
    T = op.apply(I.discretized_bump([BUMP], grid)) * (1 + 0.05 * np.random.default_rng(2).standard_normal(op.shape[0]))
    rec = I.tikhonov_solve(op, T, 1e-3, nonneg=True)
    assert np.all(rec.phi >= 0)
    assert rec.stationarity <= 1e-8 * max(1.0, np.linalg.norm(op.matrix.T @ T))


@settings(max_examples=25, deadline=None)
@given(st.floats(-6, 0), st.floats(0.01, 2))
def test_residual_monotone_in_lambda(log_lam, dlog):
    grid = Grid((-1.1, -1.1), 8, 2.2 / 8)
    op = I.assemble_kernel(_circle(10, 3.0), grid, 1)
    T = op.apply(I.discretized_bump([BUMP], grid))
    r1 = I.tikhonov_solve(op, T, 10**log_lam).residual
    r2 = I.tikhonov_solve(op, T, 10 ** (log_lam + dlog)).residual
    assert r2 >= r1 - 1e-12 * max(1.0, r1)


def test_lambda_sweep_reports(op, grid):
    truth = I.discretized_bump([BUMP], grid)
    sweep = I.lambda_sweep(op, op.apply(truth), np.logspace(-6, -1, 6), truth=truth)
    assert 0 <= sweep.corner < 6 and sweep.best is not None
    assert np.all(np.diff(sweep.residuals) >= -1e-12)
    assert np.all(np.diff(sweep.norms) <= 1e-12)


def test_lcurve_corner_on_synthetic_l():
    t = np.linspace(0, 1, 21)
    residuals = np.where(t < 0.5, 1e-3, 1e-3 + (t - 0.5) * 10)
    norms = np.where(t < 0.5, 10 - 18 * t, 1.0)
    assert 8 <= I.lcurve_corner(residuals, norms) <= 12


def test_write_reconstruction(tmp_path, op, grid):
    rec = I.tikhonov_solve(op, np.ones(op.shape[0]), 1e-2)
    I.write_reconstruction(tmp_path / "r", grid, rec)
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "x,y,phi" and len(lines) == 1 + grid.n**2
    assert '"lambda": 0.01' in (tmp_path / "r.json").read_text()


@pytest.mark.parametrize("d", [2, 3])
@pytest.mark.parametrize("k", [1, 2, 3, 5])
def test_laplacian_factor_symbolic(d, k):
    xs = sympy.symbols(f"x0:{d}", positive=True)
    r = sympy.sqrt(sum(v**2 for v in xs))
    lap = sum(sympy.diff(r ** (-k), v, 2) for v in xs)
    ratio = sympy.simplify(lap / r ** (-k - 2))
    assert ratio == I.laplacian_factor(k, d)


def test_iterated_factor_2d_is_square_product():
    assert I.iterated_factor(1, 1, 2) == 1
    assert I.iterated_factor(1, 2, 2) == 1 * 9
    assert I.iterated_factor(2, 2, 2) == 4 * 16


@pytest.mark.parametrize("n, l", [(1, 1), (2, 1), (1, 2)])
def test_laplacian_consistency_2d(n, l):
    assert I.laplacian_consistency([BUMP], (3.0, 0.0), l, n) <= 1e-3


def test_laplacian_consistency_3d():
    bump3 = SmoothBump((0.0, 0.0, 0.0), 1.0)
    assert I.laplacian_consistency([bump3], (3.0, 0.0, 0.0), 1, 1, nr=24, nang=24) <= 1e-3


def test_laplacian_consistency_zero_strength():
    assert I.laplacian_consistency([SmoothBump((0.0, 0.0), 1.0, 0.0)], (3.0, 0.0), 1, 1) == 0.0


def test_laplacian_stencil_geometry():
    with pytest.raises(GeometryError):
        I.laplacian_consistency([BUMP], (1.04, 0.0), 1, 1)


def test_spherical_mean_outside_range():
    assert I.spherical_mean([BUMP], np.array([3.0, 0.0]), 4.5) == 0.0
    assert I.spherical_mean([BUMP], np.array([3.0, 0.0]), 1.5) == 0.0


def test_spherical_mean_center_closed_form():
    # circle of radius r about the bump center: 2 pi r phi(r)
    r = 0.4
    assert I.spherical_mean([BUMP], np.array([0.0, 0.0]), r) == pytest.approx(2 * math.pi * r * BUMP.profile(r))
    b3 = SmoothBump((0.0, 0.0, 0.0), 1.0)
    assert I.spherical_mean([b3], np.zeros(3), r) == pytest.approx(4 * math.pi * r**2 * b3.profile(r), rel=1e-12)


@pytest.mark.parametrize("l", [1, 2])
def test_layered_riesz_matches_direct(l):
    x = np.array([3.0, 0.0])
    assert I.layered_riesz([BUMP], x, l) == pytest.approx(E.riesz_potential([BUMP], x, l), rel=5e-3)


def test_spherical_mean_continuous():
    x = np.array([3.0, 0.0])
    r = np.linspace(2.0, 4.0, 2001)
    s = I.spherical_mean([BUMP], x, r)
    # the derivative of S is bounded by 2 pi times a few, so jumps shrink with the step
    assert np.max(np.abs(np.diff(s))) <= 10 * (r[1] - r[0])
