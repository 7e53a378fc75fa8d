"""2D magnetostatic P1 finite elements with polyharmonic-RBF defect
correction, adjoint error estimation, and field-quality functionals."""

__version__ = "0.1.0"

from .adjoint import (  # noqa: F401
    AdjointSolution,
    boundary_term,
    error_estimate,
    solve_adjoint,
)
from .assembly import (  # noqa: F401
    DofMap,
    FeSolution,
    assemble_load,
    assemble_stiffness,
    gauss_rule,
    h1_norm,
    make_system,
    solve_dirichlet,
)
from .defect import (  # noqa: F401
    CorrectedSolution,
    local_correct,
    primal_correct,
    repeat_correct,
)
from .errors import (  # noqa: F401
    ConfigError,
    ConvergenceError,
    FitError,
    MeshError,
    MshParseError,
    SingularMatrixError,
)
from .estimator import (  # noqa: F401
    ErrorEstimate,
    mark_elements,
    residual_estimate,
)
from .geometry import (  # noqa: F401
    AIR,
    COIL_NEG,
    COIL_POS,
    GAP_BOX,
    IRON,
    VACUUM_NU,
    aligned_disk_square_mesh,
    c_magnet_mesh,
    c_magnet_problem,
    cmagnet_region,
)
from .material import BrauerReluctivity, LinearReluctivity  # noqa: F401
from .mesh import (  # noqa: F401
    INTERIOR,
    OUTER_BOUNDARY,
    SUBMESH_BOUNDARY,
    SubmeshMap,
    TriMesh,
    adaptive_refine,
    extract_submesh,
    load_msh,
    load_txt,
    mesh_size,
    save_msh,
    save_txt,
    structured_square_mesh,
    uniform_refine,
)
from .problem import MagnetostaticProblem, NewtonInfo  # noqa: F401
from .qoi import (  # noqa: F401
    FieldGradientSpec,
    FourierSpec,
    field_gradient,
    fourier_line,
    fourier_vector,
    fourier_volume_density,
    interface_resolution_check,
)
from .rbf import PolyharmonicFitter, RbfInterpolant, fit  # noqa: F401
from .report import emit_vtk, format_table, render_figures, write_csv  # noqa: F401
from .study import QoiReport, Row, StudyConfig, run_adaptive, run_study  # noqa: F401
