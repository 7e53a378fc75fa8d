"""Exception types shared across the package."""


class MeshError(ValueError):
    """Invalid mesh: bad connectivity, inverted elements, dangling nodes."""


class MshParseError(MeshError):
    """Malformed Gmsh file; message carries the offending line number."""


class SingularMatrixError(ValueError):
    """Dense factorization hit a pivot too small to trust."""


class FitError(ValueError):
    """RBF fit cannot be built (duplicate centers, degenerate geometry, size)."""


class ConvergenceError(RuntimeError):
    """An iterative process (CG, Newton, adaptive quadrature) failed to converge."""


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""
