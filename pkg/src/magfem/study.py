"""Study drivers behind the command line: uniform-refinement convergence
studies on the two harmonic benchmarks and the global-adaptive magnet run.

A study is configured from an INI file (see StudyConfig.from_ini for the
schema); the drivers return a QoiReport whose rows the report module
serializes. Any analytic reference the fixture provides (exact field,
exact Fourier coefficient) is carried along so error columns and observed
orders can be filled in.
"""

import configparser
import os
from dataclasses import dataclass, field

import numpy as np

from .adjoint import boundary_term, error_estimate, solve_adjoint
from .defect import local_correct, repeat_correct
from .errors import ConfigError, FitError
from .estimator import mark_elements, residual_estimate
from .geometry import (
    GAP_BOX,
    aligned_disk_square_mesh,
    c_magnet_mesh,
    c_magnet_problem,
)
from .material import LinearReluctivity
from .mesh import adaptive_refine, extract_submesh, mesh_size, structured_square_mesh
from .problem import MagnetostaticProblem
from .qoi import (
    FieldGradientSpec,
    FourierSpec,
    field_gradient,
    fourier_line,
    fourier_volume_density,
)
from .rbf import fit

HARMONIC_FIXTURES = ("sextupole", "octupole", "zero")


def _u3(p):
    x, y = p[:, 0], p[:, 1]
    return x**3 - 3.0 * x * y**2


def _u4(p):
    x, y = p[:, 0], p[:, 1]
    return x**4 - 6.0 * x**2 * y**2 + y**4


# fixture -> (boundary field, default harmonic index)
_FIXTURE_FIELDS = {
    "sextupole": (_u3, 3),
    "octupole": (_u4, 4),
    "zero": (None, 3),
}


@dataclass
class StudyConfig:
    """Validated run configuration (INI sections in brackets).

    [problem] fixture; family; current/mu_r/base/gap_refine for the magnet
    [discretization] kernel; correction_rounds; adjoint_rounds; quad_degree;
                     correction_quad
    [refinement] mode; start/levels (uniform); gamma/n_ref (adaptive)
    [qoi] fourier_index; fourier_radius; estimate; gradient_region
    [tolerances] newton_tol; cg_tol; line_tol; center_cap
    """

    fixture: str = "sextupole"
    family: str = "aligned"
    current: float = 2600.0
    mu_r: float = 1000.0
    base: float = 0.01
    gap_refine: int = 3

    kernel: int = 2
    correction_rounds: int = 1
    adjoint_rounds: int = 0
    quad_degree: int = 2
    correction_quad: int = 4

    mode: str = "uniform"
    start: int = 2
    levels: int = 4
    gamma: float = 0.8
    n_ref: int = 30

    fourier_index: int = 0  # 0 = fixture default
    fourier_radius: float = 0.2
    estimate: bool = False
    gradient_region: int = GAP_BOX

    newton_tol: float = 1e-10
    cg_tol: float = 0.0  # 0 = solver default
    line_tol: float = 1e-12
    center_cap: int = 20000

    def __post_init__(self):
        if self.fixture not in HARMONIC_FIXTURES + ("cmagnet",):
            raise ConfigError(f"unknown fixture {self.fixture!r}")
        if self.family not in ("structured", "aligned"):
            raise ConfigError(f"unknown mesh family {self.family!r}")
        if self.kernel not in (1, 2, 3):
            raise ConfigError("kernel must be 1, 2 or 3")
        if self.mode not in ("uniform", "adaptive"):
            raise ConfigError(f"unknown refinement mode {self.mode!r}")
        if not 0.0 < self.gamma <= 1.0:
            raise ConfigError("gamma must lie in (0, 1]")
        if self.levels < 1 or self.start < 1:
            raise ConfigError("levels and start must be >= 1")
        if self.n_ref < 0:
            raise ConfigError("n_ref must be >= 0")
        if self.correction_rounds < 1:
            raise ConfigError("correction_rounds must be >= 1")
        if self.adjoint_rounds < 0:
            raise ConfigError("adjoint_rounds must be >= 0")
        if self.fixture == "cmagnet" and self.mode != "adaptive":
            raise ConfigError("the magnet fixture runs with mode = adaptive")
        if self.fixture != "cmagnet" and self.mode == "adaptive":
            raise ConfigError("adaptive mode needs the cmagnet fixture")

    @classmethod
    def from_ini(cls, path):
        if not os.path.exists(path):
            raise ConfigError(f"config file not found: {path}")
        parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
        try:
            parser.read(path)
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
        kw = {}
        spec = {
            "problem": {
                "fixture": str,
                "family": str,
                "current": float,
                "mu_r": float,
                "base": float,
                "gap_refine": int,
            },
            "discretization": {
                "kernel": int,
                "correction_rounds": int,
                "adjoint_rounds": int,
                "quad_degree": int,
                "correction_quad": int,
            },
            "refinement": {
                "mode": str,
                "start": int,
                "levels": int,
                "gamma": float,
                "n_ref": int,
            },
            "qoi": {
                "fourier_index": int,
                "fourier_radius": float,
                "estimate": bool,
                "gradient_region": int,
            },
            "tolerances": {
                "newton_tol": float,
                "cg_tol": float,
                "line_tol": float,
                "center_cap": int,
            },
        }
        for section in parser.sections():
            if section not in spec:
                raise ConfigError(f"unknown config section [{section}]")
            for key, raw in parser[section].items():
                if key not in spec[section]:
                    raise ConfigError(f"unknown key {key!r} in [{section}]")
                if raw.strip() == "":
                    continue
                typ = spec[section][key]
                try:
                    if typ is bool:
                        kw[key] = parser[section].getboolean(key)
                    else:
                        kw[key] = typ(raw)
                except ValueError as exc:
                    raise ConfigError(
                        f"bad value for {key} in [{section}]: {raw!r}"
                    ) from exc
        return cls(**kw)


@dataclass
class Row:
    """One report line; None marks a column that does not apply."""

    level: int
    n: int = 0
    h: float = 0.0
    dofs: int = 0
    l2_p1: float = None
    l2_corrected: float = None
    qoi_raw: float = None
    qoi_recon: float = None
    qoi_corrected: float = None
    qoi_estimate: float = None
    qoi_boundary_term: float = None
    eta_rel: float = None
    qoi_true: float = None
    order_l2: float = None
    order_qoi: float = None


@dataclass
class QoiReport:
    kind: str  # "uniform" | "adaptive"
    meta: dict
    rows: list = field(default_factory=list)
    # finest-level nodal fields for VTK emission: (mesh, {name: values})
    field_dump: tuple = None


def _level_mesh(config, level):
    n = config.start * 2**level
    if config.family == "structured":
        return structured_square_mesh(n)
    return aligned_disk_square_mesh(n)


def _l2_error(mesh, values_or_eval, exact, quad_degree=6):
    """L2 distance between a field (nodal P1 values or an eval callable)
    and an exact pointwise field."""
    from .assembly import gauss_rule

    pts3 = mesh.tri_coords()
    area2 = 2.0 * np.abs(mesh.signed_areas())
    bary, w = gauss_rule(quad_degree)
    nodal = None
    if isinstance(values_or_eval, np.ndarray):
        nodal = values_or_eval[mesh.triangles]
    total = 0.0
    for lam, wq in zip(bary, w):
        x = np.einsum("i,mid->md", lam, pts3)
        if nodal is not None:
            v = nodal @ lam
        else:
            v = values_or_eval(x)
        total += wq * float(np.sum(area2 * (v - exact(x)) ** 2))
    return np.sqrt(0.5 * total)


def _orders(rows, get_err):
    prev = None
    for row in rows:
        err = get_err(row)
        order = None
        if (
            prev is not None
            and err is not None
            and prev > 0.0
            and err > 0.0
        ):
            order = float(np.log2(prev / err))
        prev = err
        yield order


def run_study(config):
    """Uniform-refinement study on a harmonic fixture: solve, correct,
    evaluate QoIs per level; flush-friendly (partial rows are attached to
    any raised error as err.partial)."""
    if config.mode != "uniform":
        raise ConfigError("run_study drives uniform refinement only")
    bc, default_n = _FIXTURE_FIELDS[config.fixture]
    n_idx = config.fourier_index or default_n
    spec = FourierSpec(n=n_idx, r0=config.fourier_radius)
    exact_qoi = config.fourier_radius**n_idx if bc is not None else 0.0
    g_density = fourier_volume_density(spec)
    cg_tol = config.cg_tol or None
    report = QoiReport(
        kind="uniform",
        meta={
            "fixture": config.fixture,
            "family": config.family,
            "kernel": config.kernel,
            "correction_rounds": config.correction_rounds,
            "adjoint_rounds": config.adjoint_rounds,
            "fourier_index": n_idx,
            "fourier_radius": config.fourier_radius,
        },
    )
    try:
        for level in range(config.levels):
            mesh = _level_mesh(config, level)
            problem = MagnetostaticProblem(
                mesh,
                LinearReluctivity(1.0),
                source=0.0,
                dirichlet=bc if bc is not None else 0.0,
                quad_degree=config.quad_degree,
            )
            u_h, _ = problem.solve(newton_tol=config.newton_tol, cg_tol=cg_tol)
            recon_only = fit(config.kernel, mesh.nodes, u_h.coeffs)
            corrected = repeat_correct(
                problem,
                u_h,
                config.kernel,
                config.correction_rounds,
                quad_degree=config.correction_quad,
            )
            resid = residual_estimate(problem, u_h)
            row = Row(
                level=level,
                n=config.start * 2**level,
                h=mesh_size(mesh),
                dofs=mesh.num_nodes,
                eta_rel=resid.eta_rel,
                qoi_raw=fourier_line(spec, u_h, tol=config.line_tol),
                qoi_recon=fourier_line(spec, recon_only, tol=config.line_tol),
                qoi_corrected=fourier_line(spec, corrected, tol=config.line_tol),
                qoi_true=exact_qoi,
            )
            if bc is not None:
                row.l2_p1 = _l2_error(mesh, u_h.coeffs, bc)
                row.l2_corrected = _l2_error(mesh, corrected.eval, bc)
            else:
                row.l2_p1 = _l2_error(mesh, u_h.coeffs, lambda p: 0.0)
                row.l2_corrected = _l2_error(mesh, corrected.eval, lambda p: 0.0)
            if config.estimate:
                adj = solve_adjoint(
                    problem,
                    g_density,
                    config.kernel,
                    rounds=config.adjoint_rounds,
                )
                row.qoi_estimate = error_estimate(adj, corrected)
                row.qoi_boundary_term = boundary_term(adj, corrected)
            report.rows.append(row)
            if level == config.levels - 1:
                report.field_dump = (
                    mesh,
                    {
                        "u_h": u_h.coeffs,
                        "u_corrected": corrected.corrected_coeffs,
                    },
                )
    except Exception as exc:
        exc.partial = report
        raise
    for row, o in zip(report.rows, _orders(report.rows, lambda r: r.l2_corrected)):
        row.order_l2 = o
    qoi_err = lambda r: (
        None if r.qoi_corrected is None else abs(r.qoi_true - r.qoi_corrected)
    )
    for row, o in zip(report.rows, _orders(report.rows, qoi_err)):
        row.order_qoi = o
    return report


def run_adaptive(config):
    """Residual-driven adaptive loop on the magnet fixture, then the
    region-local correction and the averaged flux-density derivative."""
    if config.fixture != "cmagnet":
        raise ConfigError("run_adaptive needs the cmagnet fixture")
    mesh = c_magnet_mesh(base=config.base, gap_refine=config.gap_refine)
    cg_tol = config.cg_tol or None
    report = QoiReport(
        kind="adaptive",
        meta={
            "fixture": config.fixture,
            "kernel": config.kernel,
            "correction_rounds": config.correction_rounds,
            "gamma": config.gamma,
            "n_ref": config.n_ref,
            "gradient_region": config.gradient_region,
        },
    )
    try:
        problem = c_magnet_problem(
            mesh=mesh, current=config.current, mu_r=config.mu_r
        )
        for it in range(config.n_ref):
            u_h, _ = problem.solve(newton_tol=config.newton_tol, cg_tol=cg_tol)
            resid = residual_estimate(problem, u_h)
            report.rows.append(
                Row(
                    level=it,
                    n=it,
                    h=mesh_size(mesh),
                    dofs=mesh.num_nodes,
                    eta_rel=resid.eta_rel,
                )
            )
            mesh = adaptive_refine(mesh, mark_elements(resid, config.gamma))
            problem = c_magnet_problem(
                mesh=mesh, current=config.current, mu_r=config.mu_r
            )
        u_h, _ = problem.solve(newton_tol=config.newton_tol, cg_tol=cg_tol)
        resid = residual_estimate(problem, u_h)
        sub, _ = extract_submesh(mesh, config.gradient_region)
        if sub.num_nodes > config.center_cap:
            raise FitError(
                f"field-quality submesh has {sub.num_nodes} centers, beyond "
                f"the dense-fit cap {config.center_cap}; use a coarser "
                "field-quality region or fewer refinements"
            )
        corrected = local_correct(
            problem,
            u_h,
            config.gradient_region,
            config.kernel,
            rounds=config.correction_rounds,
            quad_degree=config.correction_quad,
        )
        ftau = field_gradient(
            FieldGradientSpec(region_tag=config.gradient_region),
            corrected.reconstruction,
            corrected.mesh,
        )
        report.rows.append(
            Row(
                level=config.n_ref,
                n=config.n_ref,
                h=mesh_size(mesh),
                dofs=mesh.num_nodes,
                eta_rel=resid.eta_rel,
                qoi_corrected=ftau,
            )
        )
        report.field_dump = (mesh, {"u_h": u_h.coeffs})
    except Exception as exc:
        exc.partial = report
        raise
    return report
