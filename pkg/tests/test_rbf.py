import numpy as np
import pytest

from magfem.assembly import gauss_rule
from magfem.errors import FitError
from magfem.mesh import structured_square_mesh
from magfem.rbf import PolyharmonicFitter, fit, kernel, kernel_d1, kernel_d2


def l2_reconstruction_error(mesh, interp, exact, quad_degree=2):
    bary, w = gauss_rule(quad_degree)
    pts3 = mesh.tri_coords()
    area = mesh.signed_areas()
    acc = np.zeros(mesh.num_triangles)
    for lam, wq in zip(bary, w):
        x = np.einsum("i,mid->md", lam, pts3)
        d = interp.eval(x) - exact(x)
        acc += wq * d * d
    return float(np.sqrt(np.sum(2.0 * area * acc)))


def random_centers(n, seed):
    """Jittered lattice in [-1,1]^2: scattered but with bounded separation,
    like FE nodes; fully random points can nearly coincide and push the
    quintic system's conditioning past the tested tolerances."""
    side = int(np.ceil(np.sqrt(n)))
    g = np.linspace(-1.0, 1.0, side)
    xx, yy = np.meshgrid(g, g)
    pts = np.stack([xx.ravel(), yy.ravel()], axis=1)[:n]
    rng = np.random.default_rng(seed)
    h = 2.0 / max(side - 1, 1)
    return pts + rng.uniform(-0.3 * h, 0.3 * h, size=pts.shape)


class TestKernels:
    def test_values(self):
        assert kernel(1, 1.0) == 0.0
        assert kernel(2, 2.0) == 8.0
        assert kernel(3, 2.0) == 32.0
        assert kernel(1, 0.0) == 0.0

    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_first_derivative_matches_fd(self, k):
        r, h = 0.7, 1e-7
        fd = (kernel(k, r + h) - kernel(k, r - h)) / (2 * h)
        assert np.isclose(kernel_d1(k, r), fd, rtol=1e-6)

    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_second_derivative_matches_fd(self, k):
        r, h = 0.7, 1e-5
        fd = (kernel_d1(k, r + h) - kernel_d1(k, r - h)) / (2 * h)
        assert np.isclose(kernel_d2(k, r), fd, rtol=1e-6)

    def test_bad_order(self):
        with pytest.raises(ValueError):
            kernel(4, 1.0)


class TestFit:
    def test_linear_reproduction_coefficients(self):
        q = lambda p: 1.0 + 2.0 * p[:, 0] - p[:, 1]
        centers = random_centers(30, 0)
        interp = fit(2, centers, q(centers), normalize=False)
        assert np.abs(interp.alpha).max() < 1e-10
        assert np.allclose(interp.poly_coeffs, [1.0, 2.0, -1.0], atol=1e-10)

    def test_linear_reproduction_normalized(self):
        q = lambda p: 1.0 + 2.0 * p[:, 0] - p[:, 1]
        centers = random_centers(30, 1) * np.array([0.01, 0.02]) + 3.0
        interp = fit(2, centers, q(centers))
        assert np.abs(interp.alpha).max() < 1e-9
        rng = np.random.default_rng(2)
        lo, hi = centers.min(axis=0), centers.max(axis=0)
        pts = rng.uniform(lo, hi, size=(40, 2))
        assert np.allclose(interp.eval(pts), q(pts), atol=1e-9)
        assert np.allclose(interp.eval_grad(pts), [2.0, -1.0], atol=1e-8)

    def test_three_points_exact(self):
        centers = np.array([[0.0, 0.0], [1.0, 0.0], [0.3, 0.8]])
        vals = np.array([1.0, -2.0, 0.5])
        interp = fit(2, centers, vals)
        assert np.allclose(interp.eval(centers), vals, atol=1e-12)

    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_interpolation_and_moments(self, k):
        centers = random_centers(60, k)
        rng = np.random.default_rng(10 + k)
        vals = rng.standard_normal(len(centers))
        interp = fit(k, centers, vals)
        got = interp.eval(centers)
        assert np.abs(got - vals).max() <= 1e-9 * max(1.0, np.abs(vals).max())
        # discrete moment conditions against the normalized monomials
        from magfem.rbf import POLY_DEGREE, _poly_block

        moments = _poly_block(interp.centers, POLY_DEGREE[k]).T @ interp.alpha
        scale = max(1.0, np.abs(interp.alpha).max())
        assert np.abs(moments).max() <= 1e-9 * scale

    def test_quadratic_reproduction_quintic(self):
        q = lambda p: 0.3 - p[:, 0] + p[:, 0] * p[:, 1] + 2.0 * p[:, 1] ** 2
        centers = random_centers(50, 4)
        interp = fit(3, centers, q(centers))
        rng = np.random.default_rng(5)
        pts = rng.uniform(centers.min(axis=0), centers.max(axis=0), size=(100, 2))
        qmax = np.abs(q(pts)).max()
        assert np.abs(interp.eval(pts) - q(pts)).max() <= 1e-9 * qmax

    def test_factorization_reuse(self):
        centers = random_centers(40, 6)
        fitter = PolyharmonicFitter(2, centers)
        f1 = lambda p: np.sin(p[:, 0])
        f2 = lambda p: np.cos(3 * p[:, 1])
        i1, i2 = fitter.fit(f1(centers)), fitter.fit(f2(centers))
        assert np.allclose(i1.eval(centers), f1(centers), atol=1e-9)
        assert np.allclose(i2.eval(centers), f2(centers), atol=1e-9)


class TestDerivatives:
    def test_gradient_matches_fd(self):
        f = lambda p: np.sin(2 * p[:, 0]) * np.cos(p[:, 1])
        centers = random_centers(80, 7)
        interp = fit(3, centers, f(centers))
        rng = np.random.default_rng(8)
        pts = rng.uniform(-0.8, 0.8, size=(20, 2))
        g = interp.eval_grad(pts)
        best = np.full(len(pts), np.inf)
        for h in (1e-4, 1e-5, 1e-6):
            fd = np.empty_like(g)
            for d in range(2):
                dv = np.zeros(2)
                dv[d] = h
                fd[:, d] = (interp.eval(pts + dv) - interp.eval(pts - dv)) / (2 * h)
            best = np.minimum(
                best, np.abs(fd - g).max(axis=1) / max(1.0, np.abs(g).max())
            )
        assert best.max() < 1e-6

    def test_hessian_converges_to_analytic(self):
        u4 = lambda p: p[:, 0] ** 4 - 6 * p[:, 0] ** 2 * p[:, 1] ** 2 + p[:, 1] ** 4
        x0 = np.array([[0.1, 0.1]])
        exact = np.array([[12 * 0.01 - 12 * 0.01, -24 * 0.01], [-24 * 0.01, 0.0]])
        exact[1, 1] = 12 * 0.01 - 12 * 0.01
        errs = []
        for n in (10, 20):
            mesh = structured_square_mesh(n)
            interp = fit(3, mesh.nodes, u4(mesh.nodes))
            h = interp.eval_hess(x0)[0]
            errs.append(np.abs(h - exact).max())
        assert errs[1] < 0.5 * errs[0]
        assert errs[1] < 5e-3

    def test_hessian_k1_refused_at_center(self):
        centers = random_centers(20, 9)
        interp = fit(1, centers, np.sin(centers[:, 0]))
        with pytest.raises(ValueError, match="singular"):
            interp.eval_hess(centers[:1])
        off = centers[:1] + 0.013
        assert np.isfinite(interp.eval_hess(off)).all()

    def test_hessian_symmetry(self):
        centers = random_centers(40, 11)
        interp = fit(2, centers, np.cos(centers[:, 0] + centers[:, 1]))
        rng = np.random.default_rng(12)
        pts = rng.uniform(-0.9, 0.9, size=(15, 2))
        h = interp.eval_hess(pts)
        assert np.array_equal(h[:, 0, 1], h[:, 1, 0])


class TestEquivariance:
    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_shift_scale(self, k):
        f = lambda p: np.sin(2 * p[:, 0]) + p[:, 1] ** 2
        centers = random_centers(50, 20 + k)
        a, b = np.array([0.013, 0.008]), np.array([5.0, -3.0])
        i_ref = fit(k, centers, f(centers))
        i_map = fit(k, centers * a + b, f(centers))
        rng = np.random.default_rng(30 + k)
        pts = rng.uniform(-0.9, 0.9, size=(40, 2))
        v_ref = i_ref.eval(pts)
        v_map = i_map.eval(pts * a + b)
        scale = max(1.0, np.abs(v_ref).max())
        assert np.abs(v_ref - v_map).max() <= 1e-9 * scale


class TestErrors:
    def test_duplicate_centers(self):
        c = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 0.0]])
        with pytest.raises(FitError, match="distinct"):
            fit(2, c, np.zeros(4))

    def test_collinear_centers(self):
        c = np.stack([np.linspace(0, 1, 8), np.linspace(0, 2, 8)], axis=1)
        with pytest.raises(FitError, match="rank-deficient"):
            fit(2, c, np.zeros(8))

    def test_bad_kernel_order(self):
        with pytest.raises(FitError):
            fit(5, random_centers(10, 0), np.zeros(14))

    def test_wrong_value_count(self):
        with pytest.raises(FitError, match="one value per center"):
            fit(2, random_centers(10, 0), np.zeros(3))

    def test_eval_outside_domain(self):
        centers = random_centers(20, 1)
        interp = fit(2, centers, np.zeros(len(centers)))
        with pytest.raises(ValueError, match="outside"):
            interp.eval(np.array([[4.0, 0.0]]))


class TestApproximationOrders:
    def test_thin_plate_order(self):
        f = lambda p: np.sin(np.pi * p[:, 0]) * np.sin(np.pi * p[:, 1])
        errs = []
        for n in (20, 40, 80):
            mesh = structured_square_mesh(n)
            interp = fit(1, mesh.nodes, f(mesh.nodes))
            errs.append(l2_reconstruction_error(mesh, interp, f))
        assert np.log2(errs[1] / errs[2]) >= 2.3

    @pytest.mark.parametrize("k,threshold", [(2, 2.7), (3, 3.6)])
    def test_cubic_quintic_orders(self, k, threshold):
        f = lambda p: np.sin(np.pi * p[:, 0]) * np.sin(np.pi * p[:, 1])
        errs = []
        for n in (10, 20, 40):
            mesh = structured_square_mesh(n)
            interp = fit(k, mesh.nodes, f(mesh.nodes))
            errs.append(l2_reconstruction_error(mesh, interp, f))
        assert np.log2(errs[1] / errs[2]) >= threshold
