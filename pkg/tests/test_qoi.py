import numpy as np
import pytest
from helpers import multipole_problem, u3, u4

from magfem.errors import ConvergenceError
from magfem.qoi import (
    FieldGradientSpec,
    FourierSpec,
    field_gradient,
    fourier_line,
    fourier_vector,
    fourier_volume_density,
    interface_resolution_check,
)
from magfem.mesh import structured_square_mesh
from magfem.rbf import fit

# scipy dblquad of x/hypot(x,y) over [1,2]^2, cross-checked against the
# closed antiderivative hypot(2,y)-hypot(1,y)
F_TAU_XY = 0.700624519523299


def harmonic(n, kind="cos"):
    trig = np.cos if kind == "cos" else np.sin

    def u(p):
        r = np.hypot(p[:, 0], p[:, 1])
        phi = np.arctan2(p[:, 1], p[:, 0])
        return r**n * trig(n * phi)

    return u


def disk_pairing(density, u, r0, nr=24, nphi=64):
    """Independent polar quadrature of density*u over the disk r < r0."""
    xr, wr = np.polynomial.legendre.leggauss(nr)
    r = 0.5 * r0 * (xr + 1.0)
    wr = 0.5 * r0 * wr
    phi = 2.0 * np.pi * np.arange(nphi) / nphi
    wphi = 2.0 * np.pi / nphi
    rr, pp = np.meshgrid(r, phi, indexing="ij")
    pts = np.stack([(rr * np.cos(pp)).ravel(), (rr * np.sin(pp)).ravel()], axis=1)
    vals = density(pts) * u(pts) * rr.ravel()
    return float(np.sum(vals.reshape(nr, nphi) * wr[:, None] * wphi))


# spec construction


def test_spec_validation():
    with pytest.raises(ValueError, match="positive integer"):
        FourierSpec(0, 0.2)
    with pytest.raises(ValueError, match="radius"):
        FourierSpec(3, 0.0)
    with pytest.raises(ValueError, match="parity"):
        FourierSpec(3, 0.2, parity="odd")
    with pytest.raises(ValueError, match="nonzero"):
        FieldGradientSpec(direction=(0.0, 0.0))
    assert FieldGradientSpec(direction=(2.0, 0.0)).direction == (1.0, 0.0)


# line coefficients


def test_line_coefficient_of_pure_harmonics():
    for r0 in (0.1, 0.2, 0.5):
        for n in range(1, 9):
            val = fourier_line(FourierSpec(n, r0), harmonic(n))
            assert abs(val - r0**n) <= 1e-10


def test_sextupole_and_octupole_values():
    assert abs(fourier_line(FourierSpec(3, 0.2), u3) - 0.008) <= 1e-10
    assert abs(fourier_line(FourierSpec(4, 0.2), u4) - 0.0016) <= 1e-10


def test_skew_part_of_cosine_field_vanishes():
    val = fourier_line(FourierSpec(3, 0.2, parity="skew"), u3)
    assert abs(val) <= 1e-12


def test_skew_coefficient_of_sine_field():
    val = fourier_line(FourierSpec(5, 0.3, parity="skew"), harmonic(5, "sin"))
    assert abs(val - 0.3**5) <= 1e-10


def test_rotation_covariance():
    # rotating the field by theta rotates (F_n, E_n) by n*theta
    n, r0, theta = 3, 0.2, np.pi / 7
    rot = np.array(
        [[np.cos(-theta), -np.sin(-theta)], [np.sin(-theta), np.cos(-theta)]]
    )
    rotated = lambda p: harmonic(n)(p @ rot.T)
    F = fourier_line(FourierSpec(n, r0), rotated)
    E = fourier_line(FourierSpec(n, r0, parity="skew"), rotated)
    assert abs(F - r0**n * np.cos(n * theta)) <= 1e-10
    assert abs(E - r0**n * np.sin(n * theta)) <= 1e-10


def test_off_center_circle():
    c = (0.3, -0.1)
    shifted = lambda p: harmonic(4)(p - np.asarray(c))
    val = fourier_line(FourierSpec(4, 0.15, center=c), shifted)
    assert abs(val - 0.15**4) <= 1e-10


def test_line_coefficient_of_fe_field():
    prob, _ = multipole_problem(16, 3)
    u_h, _ = prob.solve(cg_tol=1e-13)
    val = fourier_line(FourierSpec(3, 0.2), u_h, tol=1e-9)
    assert abs(val - 0.008) <= 5e-3


def test_quadrature_stall_raises():
    calls = [0]

    def noisy(p):
        # dipole with an amplitude that grows every call: estimates never agree
        calls[0] += 1
        return float(calls[0]) * p[:, 0]

    with pytest.raises(ConvergenceError, match="stalled"):
        fourier_line(FourierSpec(1, 0.2), noisy)


# volume density


def test_density_closed_form_and_support():
    spec = FourierSpec(3, 0.2)
    g = fourier_volume_density(spec)
    pts = np.array([[0.1, 0.05], [0.3, 0.0], [0.0, 0.21]])
    vals = g(pts)
    r = np.hypot(pts[0, 0], pts[0, 1])
    phi = np.arctan2(pts[0, 1], pts[0, 0])
    expect = (8.0 / (np.pi * 0.2**5)) * r**3 * np.cos(3 * phi)
    assert abs(vals[0] - expect) <= 1e-14
    assert vals[1] == 0.0 and vals[2] == 0.0


def test_density_pairs_like_line_coefficient():
    rng = np.random.default_rng(7)
    spec = FourierSpec(3, 0.2)
    g = fourier_volume_density(spec)
    for _ in range(20):
        coeffs = rng.standard_normal((7, 2))

        def u(p, c=coeffs):
            r = np.hypot(p[:, 0], p[:, 1])
            phi = np.arctan2(p[:, 1], p[:, 0])
            acc = np.zeros(p.shape[0])
            for m in range(7):
                acc += r**m * (
                    c[m, 0] * np.cos(m * phi) + c[m, 1] * np.sin(m * phi)
                )
            return acc

        line = fourier_line(spec, u)
        vol = disk_pairing(g, u, spec.r0)
        assert abs(line - vol) <= 1e-9


def test_density_pairing_with_constant_vanishes():
    g = fourier_volume_density(FourierSpec(2, 0.3))
    val = disk_pairing(g, lambda p: np.ones(p.shape[0]), 0.3)
    assert abs(val) <= 1e-12


def test_density_dipole_case():
    spec = FourierSpec(1, 0.25)
    g = fourier_volume_density(spec)
    ux = lambda p: p[:, 0]
    assert abs(fourier_line(spec, ux) - 0.25) <= 1e-12
    assert abs(disk_pairing(g, ux, 0.25) - 0.25) <= 1e-10


# harmonic distortion


def test_distortion_of_pure_harmonic():
    coeffs, distortion = fourier_vector(u3, 6, FourierSpec(3, 0.2), main_index=3)
    assert coeffs.shape == (6,)
    assert abs(coeffs[2] - 0.008) <= 1e-10
    assert distortion <= 1e-9


def test_distortion_of_contaminated_dipole():
    # sextupole admixture scaled so F3 = 1e-5 * F1
    r0 = 0.2
    u = lambda p: p[:, 0] + (1e-5 / r0**2) * u3(p)
    _, distortion = fourier_vector(u, 6, FourierSpec(1, r0), main_index=1)
    assert abs(distortion - 1e-5) <= 1e-7


def test_distortion_errors():
    with pytest.raises(ValueError, match="outside"):
        fourier_vector(u3, 6, FourierSpec(3, 0.2), main_index=7)
    zero = lambda p: np.zeros(p.shape[0])
    with pytest.raises(ValueError, match="vanishes"):
        fourier_vector(zero, 3, FourierSpec(1, 0.2), main_index=1)


# averaged flux-density derivative


def unit_mesh_and_fit(k, fn, n=8, bounds=(1.0, 1.0, 2.0, 2.0)):
    mesh = structured_square_mesh(n, bounds=bounds)
    return mesh, fit(k, mesh.nodes, fn(mesh.nodes))


def test_field_gradient_uniform_field_is_zero():
    mesh, recon = unit_mesh_and_fit(2, lambda p: p[:, 0])
    val = field_gradient(FieldGradientSpec(), recon, mesh)
    assert abs(val) <= 1e-8


def test_field_gradient_quadratic_field():
    # u = x^2/2 on a region with x > 0: |grad u| = x, d/dx = 1.
    # k=3 carries a quadratic polynomial part, so the fit is exact
    mesh, recon = unit_mesh_and_fit(3, lambda p: 0.5 * p[:, 0] ** 2)
    val = field_gradient(FieldGradientSpec(), recon, mesh)
    assert abs(val - 1.0) <= 1e-8


def test_field_gradient_quadratic_field_cubic_kernel():
    # k=2 reproduces only linears; its Hessian error shrinks under refinement
    errs = []
    for n in (8, 16):
        mesh, recon = unit_mesh_and_fit(2, lambda p: 0.5 * p[:, 0] ** 2, n=n)
        errs.append(abs(field_gradient(FieldGradientSpec(), recon, mesh) - 1.0))
    assert errs[1] < errs[0]
    assert errs[1] <= 0.05


def test_field_gradient_quadrupole_value():
    mesh, recon = unit_mesh_and_fit(3, lambda p: p[:, 0] * p[:, 1])
    val = field_gradient(FieldGradientSpec(), recon, mesh, quad_degree=6)
    assert abs(val - F_TAU_XY) <= 1e-6


def test_field_gradient_direction_and_region():
    def region(c):
        return np.where(c[:, 0] > 1.5, 2, 1)

    mesh = structured_square_mesh(8, bounds=(1.0, 1.0, 2.0, 2.0), region_fn=region)
    recon = fit(3, mesh.nodes, mesh.nodes[:, 0] * mesh.nodes[:, 1])
    # d/dy of |grad(xy)| integrated over x in (1.5, 2): symmetric oracle
    val = field_gradient(
        FieldGradientSpec(region_tag=2, direction=(0.0, 1.0)), recon, mesh
    )
    xr, wr = np.polynomial.legendre.leggauss(24)
    x = 1.75 + 0.25 * xr
    y = 1.5 + 0.5 * xr
    wx = 0.25 * wr
    wy = 0.5 * wr
    xx, yy = np.meshgrid(x, y, indexing="ij")
    ww = np.outer(wx, wy)
    oracle = np.sum(ww * yy / np.hypot(xx, yy)) / 0.5
    assert abs(val - oracle) <= 1e-6
    with pytest.raises(ValueError, match="region tag"):
        field_gradient(FieldGradientSpec(region_tag=9), recon, mesh)


def test_field_gradient_constant_shift_invariance():
    mesh, recon = unit_mesh_and_fit(3, lambda p: p[:, 0] * p[:, 1])
    shifted = fit(3, mesh.nodes, mesh.nodes[:, 0] * mesh.nodes[:, 1] + 7.5)
    a = field_gradient(FieldGradientSpec(), recon, mesh)
    b = field_gradient(FieldGradientSpec(), shifted, mesh)
    assert abs(a - b) <= 1e-10


def test_field_gradient_rejects_degenerate_field():
    mesh, recon = unit_mesh_and_fit(2, lambda p: np.zeros(p.shape[0]))
    with pytest.raises(ValueError, match="not defined"):
        field_gradient(FieldGradientSpec(), recon, mesh)


def test_field_gradient_rejects_fe_and_low_order():
    prob, _ = multipole_problem(4)
    u_h, _ = prob.solve()
    with pytest.raises(TypeError, match="piecewise-linear"):
        field_gradient(FieldGradientSpec(), u_h, prob.mesh)
    mesh = structured_square_mesh(4, bounds=(1.0, 1.0, 2.0, 2.0))
    lin = fit(1, mesh.nodes, mesh.nodes[:, 0])
    with pytest.raises(ValueError, match="order 1"):
        field_gradient(FieldGradientSpec(), lin, mesh)


# interface resolution


def test_interface_check_detects_straddling():
    mesh = structured_square_mesh(4)
    assert not interface_resolution_check(mesh, FourierSpec(3, 0.5))


def test_interface_check_accepts_nonstraddling():
    mesh = structured_square_mesh(2)
    # circle far outside the mesh: every node strictly inside it
    assert interface_resolution_check(mesh, FourierSpec(1, 3.0))
    # tiny circle buried within one cell, away from its nodes
    assert interface_resolution_check(
        mesh, FourierSpec(1, 0.05, center=(0.5, 0.25))
    )


def test_interface_check_nodes_on_circle_are_neutral():
    # radius-1 circle passes exactly through the edge-midpoint nodes of the
    # 2-cell structured square; triangles with {inside, on} nodes are fine
    # but an {inside, outside} pair is not
    mesh = structured_square_mesh(2)
    assert not interface_resolution_check(mesh, FourierSpec(1, 1.0))
    on_only = structured_square_mesh(1)
    # h=2 mesh: nodes at the four corners, all at distance sqrt(2)
    assert interface_resolution_check(on_only, FourierSpec(1, np.sqrt(2.0)))
