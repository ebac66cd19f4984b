import numpy as np
import pytest

from conftest import dense_affine_operator, random_operator
from hydrate_transport.discrete_operator import (
    Grid,
    OperatorCoefficients,
    OperatorError,
    apply,
    assemble_operator,
    l1h,
    resolvent_solve,
)


def test_diffusion_stencil():
    op = assemble_operator(Grid(0, 1, 4), OperatorCoefficients(diffusion=1.0))
    assert op.grid.h == 0.25
    np.testing.assert_allclose(op.diag[1:-1], 32.0)
    np.testing.assert_allclose(op.lower, -16.0)
    np.testing.assert_allclose(op.upper, -16.0)
    # boundary faces sit at half a cell: 3 D / h^2
    assert op.diag[0] == op.diag[-1] == pytest.approx(48.0)


def test_upwind_stencil():
    op = assemble_operator(Grid(0, 1, 4), OperatorCoefficients(velocity=1.0, dirichlet_right=None))
    np.testing.assert_allclose(op.diag, 4.0)
    np.testing.assert_allclose(op.lower, -4.0)
    np.testing.assert_allclose(op.upper, 0.0)


def test_constant_velocity_interior_rows_sum_to_zero():
    op = assemble_operator(Grid(0, 1, 10), OperatorCoefficients(diffusion=0.3, velocity=-0.7))
    np.testing.assert_allclose(op.row_sums()[1:-1], 0.0, atol=1e-12)


def test_apply_examples():
    g = Grid(0, 1, 6)
    op = assemble_operator(g, OperatorCoefficients(diffusion=1.0, velocity=0.5, dirichlet_left=0.2, dirichlet_right=0.1))
    np.testing.assert_allclose(apply(op, np.zeros(6)), op.offset)
    hom = assemble_operator(g, OperatorCoefficients(diffusion=1.0))
    out = apply(hom, np.ones(6))
    np.testing.assert_allclose(out[1:-1], 0.0, atol=1e-12)
    assert out[0] > 0 and out[-1] > 0


def test_apply_linear_field_pure_advection():
    # the inflow value is the linear field continued to the ghost center x_left - h/2
    g, q = Grid(0.0, 1.0, 8), 1.7
    op = assemble_operator(g, OperatorCoefficients(velocity=q, dirichlet_left=-g.h / 2, dirichlet_right=None))
    np.testing.assert_allclose(apply(op, g.centers), q, rtol=1e-12)


def test_apply_grid_mismatch():
    op = assemble_operator(Grid(0, 1, 4), OperatorCoefficients(diffusion=1.0))
    with pytest.raises(OperatorError):
        apply(op, np.zeros(5))


@pytest.mark.parametrize(
    "coeffs",
    [
        OperatorCoefficients(diffusion=-1.0),
        OperatorCoefficients(reaction=-0.1),
        OperatorCoefficients(velocity=np.linspace(1.0, 0.0, 5), dirichlet_right=None),  # 2a + q' < 0
        OperatorCoefficients(diffusion=1.0, dirichlet_right=None),
        OperatorCoefficients(velocity=1.0, dirichlet_left=None),
        OperatorCoefficients(velocity=-1.0, dirichlet_right=None),
    ],
)
def test_rejects_invalid(coeffs):
    with pytest.raises(OperatorError):
        assemble_operator(Grid(0, 1, 4), coeffs)


def test_grid_invariants():
    with pytest.raises(OperatorError):
        Grid(0, 1, 1)
    with pytest.raises(OperatorError):
        Grid(1, 0, 4)
    g = Grid(-0.5, 1.0, 6)
    assert np.all(np.diff(g.centers) > 0) and g.h == pytest.approx(0.25)


def test_matches_independent_dense_assembly(rng):
    for _ in range(200):
        op = random_operator(rng)
        M, off = dense_affine_operator(op.grid, op.coeffs)
        np.testing.assert_allclose(op.dense(), M, rtol=1e-12, atol=1e-12 * np.abs(M).max())
        np.testing.assert_allclose(op.offset, off, rtol=1e-12, atol=1e-14)


def test_m_matrix_structure(rng):
    for _ in range(200):
        op = random_operator(rng)
        assert np.all(op.lower <= 0) and np.all(op.upper <= 0) and np.all(op.diag > 0)
        assert np.all(op.row_sums() >= -1e-12 * op.diag.max())
        assert np.all(op.column_sums() >= -1e-12 * op.diag.max())


def test_injective(rng):
    for _ in range(100):
        op = random_operator(rng)
        assert np.linalg.matrix_rank(op.dense()) == op.n


class TestResolvent:
    def test_zero(self):
        op = assemble_operator(Grid(0, 1, 5), OperatorCoefficients(diffusion=1.0))
        np.testing.assert_array_equal(resolvent_solve(op, 1.0, np.zeros(5)), 0.0)

    def test_constant_data_bounds(self):
        op = assemble_operator(Grid(0, 1, 20), OperatorCoefficients(diffusion=0.5))
        v = resolvent_solve(op, 2.0, np.full(20, 0.3))
        assert v.max() <= 0.3 and v.min() >= 0.0

    def test_three_cells_against_dense_lu(self):
        op = assemble_operator(Grid(0, 3, 3), OperatorCoefficients(diffusion=1.0, velocity=1.0,
                                                                  dirichlet_left=1.0, dirichlet_right=2.0))
        # h = 1, D/h^2 = 1, q/h = 1; a boundary face at h/2 adds 2 D/h^2 to the diagonal
        M = np.array([[4.0, -1.0, 0.0], [-2.0, 3.0, -1.0], [0.0, -2.0, 4.0]])
        np.testing.assert_allclose(op.dense(), M)
        f = np.array([0.5, -1.0, 2.0])
        ref = np.linalg.solve(np.eye(3) + M, f - op.offset)
        np.testing.assert_allclose(resolvent_solve(op, 1.0, f), ref, rtol=1e-13)

    def test_rejects_nonpositive_lambda(self):
        op = assemble_operator(Grid(0, 1, 4), OperatorCoefficients(diffusion=1.0))
        with pytest.raises(ValueError):
            resolvent_solve(op, 0.0, np.zeros(4))

    def test_residual_and_dense_oracle(self, rng):
        for _ in range(200):
            op = random_operator(rng)
            lam = 10 ** rng.uniform(-4, 2)
            f = rng.normal(size=op.n)
            v = resolvent_solve(op, lam, f)
            res = v + lam * apply(op, v) - f
            assert np.abs(res).max() <= 1e-12 * np.abs(f).max()
            scale = np.abs(f).max() + lam * np.abs(op.offset).max()
            M, off = dense_affine_operator(op.grid, op.coeffs)
            np.testing.assert_allclose(v, np.linalg.solve(np.eye(op.n) + lam * M, f - lam * off),
                                       rtol=1e-9, atol=1e-12 * scale)

    def test_property_A_contraction(self, rng):
        for _ in range(500):
            op = random_operator(rng).homogeneous()
            lam = 10 ** rng.uniform(-4, 2)
            f1, f2 = rng.normal(size=(2, op.n))
            d = l1h(resolvent_solve(op, lam, f1) - resolvent_solve(op, lam, f2), op.grid.h)
            assert d <= l1h(f1 - f2, op.grid.h) + 1e-12

    def test_property_C_sup_bound(self, rng):
        for _ in range(500):
            op = random_operator(rng).homogeneous()
            lam = 10 ** rng.uniform(-4, 2)
            f = rng.normal(size=op.n)
            assert resolvent_solve(op, lam, f).max() <= max(0.0, f.max()) + 1e-12

    def test_order_preservation(self, rng):
        for _ in range(300):
            op = random_operator(rng)
            lam = 10 ** rng.uniform(-4, 2)
            f1 = rng.normal(size=op.n)
            f2 = f1 + rng.uniform(0, 1, op.n)
            assert np.all(resolvent_solve(op, lam, f1) <= resolvent_solve(op, lam, f2) + 1e-12)


def test_conservativity(rng):
    """With div q = 0 and a = 0, h * sum(A v) equals the net boundary outflow."""
    for _ in range(200):
        n = int(rng.integers(2, 30))
        kind = rng.choice(["diffusion", "advection"])
        q = float(rng.uniform(-2, 2))
        D = 0.0 if kind == "advection" else float(rng.uniform(0.01, 1))
        gl = float(rng.uniform(-1, 1)) if (D > 0 or q > 0) else None
        gr = float(rng.uniform(-1, 1)) if (D > 0 or q < 0) else None
        op = assemble_operator(Grid(0, 1, n), OperatorCoefficients(D, q, 0.0, gl, gr))
        v = rng.normal(size=n)
        assert op.grid.h * apply(op, v).sum() == pytest.approx(op.net_outflow(v), abs=1e-12 * (1 + np.abs(v).max() / op.grid.h))


def test_homogeneous_keeps_free_outflow():
    op = assemble_operator(Grid(0, 1, 4), OperatorCoefficients(velocity=1.0, dirichlet_left=0.3, dirichlet_right=None))
    hom = op.homogeneous()
    assert hom.coeffs.dirichlet_left == 0.0 and hom.coeffs.dirichlet_right is None
    np.testing.assert_array_equal(hom.offset, 0.0)
