"""Report emission: delimited output (the stable, versioned contract),
a human-readable table, log-log convergence figures, and legacy-VTK field
dumps for external viewers.
"""

import os

import numpy as np

CSV_TAG = "magfem-csv 1"
CSV_COLUMNS = (
    "level",
    "n",
    "h",
    "dofs",
    "l2_p1",
    "l2_corrected",
    "qoi_raw",
    "qoi_recon",
    "qoi_corrected",
    "qoi_estimate",
    "qoi_boundary_term",
    "eta_rel",
    "qoi_true",
    "order_l2",
    "order_qoi",
)


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".12e")


def write_csv(report, path):
    """Fixed-column CSV with a format tag and the run metadata up front.
    Identical configs produce byte-identical files (assembly and solves
    are sequential and deterministic)."""
    lines = [f"# {CSV_TAG}", f"# kind={report.kind}"]
    for key in sorted(report.meta):
        lines.append(f"# {key}={report.meta[key]}")
    lines.append(",".join(CSV_COLUMNS))
    for row in report.rows:
        lines.append(",".join(_cell(getattr(row, c)) for c in CSV_COLUMNS))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def format_table(report):
    """Aligned text table; em dash for columns that do not apply."""
    headers = [c for c in CSV_COLUMNS if any(
        getattr(r, c) is not None for r in report.rows
    )]
    cells = [headers]
    for row in report.rows:
        line = []
        for c in headers:
            v = getattr(row, c)
            if v is None:
                line.append("-")
            elif c in ("level", "n", "dofs"):
                line.append(str(int(v)))
            elif c.startswith("order"):
                line.append(f"{v:.2f}")
            else:
                line.append(f"{v:.6e}")
        cells.append(line)
    widths = [max(len(r[i]) for r in cells) for i in range(len(headers))]
    out = []
    for r in cells:
        out.append("  ".join(s.rjust(w) for s, w in zip(r, widths)))
    meta = ", ".join(f"{k}={v}" for k, v in sorted(report.meta.items()))
    return f"[{report.kind}] {meta}\n" + "\n".join(out)


def render_figures(report, directory):
    """Matplotlib renderings of the report: error curves for uniform
    studies, the estimator trajectory for adaptive runs. Returns the list
    of files written."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    os.makedirs(directory, exist_ok=True)
    written = []
    rows = report.rows
    if report.kind == "uniform":
        h = np.array([r.h for r in rows])
        fig, ax = plt.subplots(figsize=(5.4, 4.2))
        for attr, label, marker in (
            ("l2_p1", "P1", "o"),
            ("l2_corrected", "corrected", "s"),
        ):
            e = np.array([getattr(r, attr) or np.nan for r in rows])
            if np.isfinite(e).any() and np.nanmax(e) > 0:
                ax.loglog(h, e, marker=marker, label=label)
        ax.set_xlabel("h")
        ax.set_ylabel("L2 error")
        ax.grid(True, which="both", alpha=0.3)
        ax.legend()
        fig.tight_layout()
        p = os.path.join(directory, "l2_convergence.png")
        fig.savefig(p, dpi=150)
        plt.close(fig)
        written.append(p)

        true = rows[0].qoi_true
        fig, ax = plt.subplots(figsize=(5.4, 4.2))
        any_curve = False
        for attr, label, marker in (
            ("qoi_raw", "P1", "o"),
            ("qoi_recon", "reconstruction only", "^"),
            ("qoi_corrected", "corrected", "s"),
        ):
            e = np.array(
                [
                    abs(true - getattr(r, attr))
                    if getattr(r, attr) is not None
                    else np.nan
                    for r in rows
                ]
            )
            if np.isfinite(e).any() and np.nanmax(e) > 0:
                ax.loglog(h, e, marker=marker, label=label)
                any_curve = True
        est = np.array(
            [
                abs(r.qoi_estimate) if r.qoi_estimate is not None else np.nan
                for r in rows
            ]
        )
        if np.isfinite(est).any():
            ax.loglog(h, est, marker="x", linestyle="--", label="adjoint estimate")
            any_curve = True
        if any_curve:
            ax.set_xlabel("h")
            ax.set_ylabel("coefficient error")
            ax.grid(True, which="both", alpha=0.3)
            ax.legend()
            fig.tight_layout()
            p = os.path.join(directory, "qoi_convergence.png")
            fig.savefig(p, dpi=150)
            written.append(p)
        plt.close(fig)
    else:
        its = [r.level for r in rows if r.eta_rel is not None]
        eta = [r.eta_rel for r in rows if r.eta_rel is not None]
        fig, ax = plt.subplots(figsize=(5.4, 4.2))
        ax.semilogy(its, eta, marker="o")
        ax.set_xlabel("refinement step")
        ax.set_ylabel("eta_rel")
        ax.grid(True, which="both", alpha=0.3)
        final = rows[-1]
        if final.qoi_corrected is not None:
            ax.set_title(f"final F_tau = {final.qoi_corrected:.6f}")
        fig.tight_layout()
        p = os.path.join(directory, "adaptive_eta.png")
        fig.savefig(p, dpi=150)
        plt.close(fig)
        written.append(p)
    return written


def emit_vtk(mesh, point_data, path):
    """Legacy ASCII VTK unstructured grid with point scalars."""
    lines = [
        "# vtk DataFile Version 3.0",
        "magfem field dump",
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {mesh.num_nodes} double",
    ]
    for x, y in mesh.nodes:
        lines.append(f"{x:.16g} {y:.16g} 0")
    m = mesh.num_triangles
    lines.append(f"CELLS {m} {4 * m}")
    for a, b, c in mesh.triangles:
        lines.append(f"3 {a} {b} {c}")
    lines.append(f"CELL_TYPES {m}")
    lines.extend(["5"] * m)
    lines.append(f"POINT_DATA {mesh.num_nodes}")
    for name, values in point_data.items():
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (mesh.num_nodes,):
            raise ValueError(
                f"point data {name!r} has shape {values.shape}, expected "
                f"({mesh.num_nodes},)"
            )
        lines.append(f"SCALARS {name} double 1")
        lines.append("LOOKUP_TABLE default")
        lines.extend(f"{v:.16g}" for v in values)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return path
