import numpy as np
import pytest

from magfem.errors import ConvergenceError
from magfem.material import BrauerReluctivity, LinearReluctivity
from magfem.mesh import structured_square_mesh
from magfem.problem import MagnetostaticProblem

BRAUER = BrauerReluctivity(k1=49.4, k2=1.46, k3=520.6)


class TestLinear:
    def test_one_newton_step(self):
        mesh = structured_square_mesh(8)
        prob = MagnetostaticProblem(mesh, LinearReluctivity(1.0), source=1.0)
        sol, info = prob.solve()
        assert info.converged
        assert info.iterations == 1
        assert info.residuals[-1] <= 1e-10 * info.residuals[0]
        assert np.linalg.norm(prob.residual(sol.coeffs)) <= 1e-10 * info.residuals[0]

    def test_patch_linear_polynomial(self):
        mesh = structured_square_mesh(6)
        poly = lambda p: 0.5 - p[:, 0] + 2.0 * p[:, 1]
        prob = MagnetostaticProblem(
            mesh, LinearReluctivity(3.0), source=0.0, dirichlet=poly
        )
        sol, info = prob.solve()
        assert info.iterations == 1
        assert np.allclose(sol.coeffs, poly(mesh.nodes), atol=1e-10)

    def test_region_dict_matches_single_model(self):
        mesh = structured_square_mesh(
            6, region_fn=lambda c: np.where(c[:, 0] > 0, 2, 1)
        )
        m = LinearReluctivity(2.0)
        sol_a, _ = MagnetostaticProblem(mesh, m, source=1.0).solve()
        sol_b, _ = MagnetostaticProblem(mesh, {1: m, 2: m}, source=1.0).solve()
        assert np.allclose(sol_a.coeffs, sol_b.coeffs, atol=1e-12)

    def test_missing_region_material(self):
        mesh = structured_square_mesh(
            4, region_fn=lambda c: np.where(c[:, 0] > 0, 2, 1)
        )
        with pytest.raises(ValueError, match="region"):
            MagnetostaticProblem(mesh, {1: LinearReluctivity(1.0)}, source=1.0)

    def test_region_source_dict(self):
        mesh = structured_square_mesh(
            4, region_fn=lambda c: np.where(c[:, 0] > 0, 2, 1)
        )
        prob = MagnetostaticProblem(
            mesh, LinearReluctivity(1.0), source={1: 1.0, 2: -1.0}
        )
        sol, _ = prob.solve()
        # antisymmetric source on a point-symmetric mesh: u(-x,-y) = -u(x,y)
        flipped = sol.eval(-mesh.nodes[:: 7])
        assert np.allclose(flipped, -sol.coeffs[:: 7], atol=1e-9)

    def test_zero_everything_converges_immediately(self):
        mesh = structured_square_mesh(4)
        prob = MagnetostaticProblem(mesh, LinearReluctivity(1.0), source=0.0)
        sol, info = prob.solve()
        assert info.iterations == 0
        assert np.array_equal(sol.coeffs, np.zeros(mesh.num_nodes))


class TestNewton:
    def test_quadratic_tail_on_brauer(self):
        # tol 1e-7 stops before the final step hits the fp floor, which
        # would flatten the measured order
        mesh = structured_square_mesh(8)
        prob = MagnetostaticProblem(mesh, BRAUER, source=1000.0)
        sol, info = prob.solve(newton_tol=1e-7, cg_tol=1e-14)
        assert info.converged
        r = info.residuals
        assert len(r) >= 4
        order = np.log(r[-1] / r[-2]) / np.log(r[-2] / r[-3])
        assert order >= 1.8

    def test_saturation_actually_active(self):
        mesh = structured_square_mesh(8)
        prob = MagnetostaticProblem(mesh, BRAUER, source=1000.0)
        sol, _ = prob.solve(cg_tol=1e-14)
        s = np.linalg.norm(sol.element_gradients(), axis=1)
        assert s.max() > 0.5

    def test_converged_iterate_is_fixed_point(self):
        mesh = structured_square_mesh(6)
        prob = MagnetostaticProblem(mesh, BRAUER, source=500.0)
        sol, info = prob.solve(cg_tol=1e-14)
        # one more Newton step from the solution moves it by less than tol
        assert np.linalg.norm(prob.residual(sol.coeffs)) <= 1e-10 * info.residuals[0]

    def test_maxit_raises_with_residual_history(self):
        mesh = structured_square_mesh(6)
        prob = MagnetostaticProblem(mesh, BRAUER, source=1000.0)
        with pytest.raises(ConvergenceError) as exc:
            prob.solve(newton_maxit=1, cg_tol=1e-14)
        assert len(exc.value.residuals) == 2

    def test_strong_source_still_converges(self):
        mesh = structured_square_mesh(4)
        prob = MagnetostaticProblem(mesh, BRAUER, source=5000.0)
        sol, info = prob.solve(cg_tol=1e-14)
        assert info.converged
        assert np.isfinite(sol.coeffs).all()
