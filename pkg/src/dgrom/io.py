"""File outputs: legacy ASCII VTK, CSV tables, mesh text and matrix dumps."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np
import scipy.io

EIGEN_COLUMNS = ("index", "theta_vx", "theta_vy", "theta_v", "theta_p")
ERROR_COLUMNS = ("N", "mean_ev", "max_ev", "mean_ep", "max_ep")
TIMING_COLUMNS = ("mu_x", "mu_y", "t_fom_assemble", "t_fom_solve", "t_online_assemble", "t_online_solve", "speedup")


def _num(x) -> str:
    # shortest round-trip text of a float, independent of the numpy scalar type
    return repr(float(x))


def _fmt(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return _num(x)


def write_csv(path, columns, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def read_csv(path):
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        return header, [[float(v) for v in row] for row in r]


def write_vtk(path, cells_xy, point_data=None, cell_data=None, title="dgrom"):
    """Discontinuous triangle field as a legacy ASCII unstructured grid.

    ``cells_xy`` is (Nel, 3, 2); each element gets its own three points so
    per-element vertex values stay discontinuous. ``point_data`` values are
    (Nel, 3) scalars or (Nel, 3, 2) vectors.
    """
    cells_xy = np.asarray(cells_xy, dtype=float)
    nel = len(cells_xy)
    pts = cells_xy.reshape(-1, 2)
    lines = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {len(pts)} double"]
    lines += [f"{_num(x)} {_num(y)} 0.0" for x, y in pts]
    lines.append(f"CELLS {nel} {4 * nel}")
    lines += [f"3 {3 * e} {3 * e + 1} {3 * e + 2}" for e in range(nel)]
    lines.append(f"CELL_TYPES {nel}")
    lines += ["5"] * nel
    if point_data:
        lines.append(f"POINT_DATA {len(pts)}")
        for name, vals in point_data.items():
            vals = np.asarray(vals, dtype=float)
            if vals.ndim == 3:
                lines.append(f"VECTORS {name} double")
                lines += [f"{_num(a)} {_num(b)} 0.0" for a, b in vals.reshape(-1, 2)]
            else:
                lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
                lines += [_num(v) for v in vals.ravel()]
    if cell_data:
        lines.append(f"CELL_DATA {nel}")
        for name, vals in cell_data.items():
            lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
            lines += [_num(v) for v in np.asarray(vals).ravel()]
    Path(path).write_text("\n".join(lines) + "\n")


def read_vtk_points(path):
    """Minimal reader for files written by :func:`write_vtk` (points and point scalars)."""
    tokens = Path(path).read_text().split("\n")
    out = {}
    i = 0
    while i < len(tokens):
        line = tokens[i]
        if line.startswith("POINTS"):
            n = int(line.split()[1])
            out["points"] = np.array([[float(v) for v in tokens[i + 1 + k].split()[:2]] for k in range(n)])
            i += n
        elif line.startswith("SCALARS"):
            name = line.split()[1]
            n = len(out["points"])
            out[name] = np.array([float(tokens[i + 2 + k]) for k in range(n)])
            i += n + 1
        i += 1
    return out


def fields_vtk(path, cells, uv=None, pv=None, extra=None, title="dgrom"):
    """Velocity vector, its components and pressure from per-element vertex values."""
    data = {}
    if uv is not None:
        data["velocity"] = uv
        data["u_x"] = uv[..., 0]
        data["u_y"] = uv[..., 1]
    if pv is not None:
        data["p"] = pv
    data.update(extra or {})
    write_vtk(path, cells, data, title=title)


def write_mesh_text(path, mesh, domain=None):
    doc = {"vertices": mesh.p.tolist(), "triangles": mesh.t.tolist(), "subdomain": mesh.subdomain.tolist()}
    if domain is not None:
        doc["domain"] = json.loads(domain.to_json())
    Path(path).write_text(json.dumps(doc))


def write_mesh_vtk(path, mesh):
    write_vtk(path, mesh.element_coords(), cell_data={"subdomain": mesh.subdomain}, title="mesh")


def export_system(directory, system):
    """Matrix Market dumps of A and B and plain-text right-hand sides."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    scipy.io.mmwrite(d / "A.mtx", system.A)
    scipy.io.mmwrite(d / "B.mtx", system.B)
    np.savetxt(d / "F1.txt", system.F1)
    np.savetxt(d / "F2.txt", system.F2)
