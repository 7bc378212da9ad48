# -*- coding: utf-8 -*-
"""Legacy ASCII VTK export of meshes, cell fields, and eigenfunctions."""

import numpy as np


def write_vtk(path, mesh, cell_data=None, point_data=None, title="brinkeig output"):
    """Write a triangle mesh as a legacy VTK 3.0 unstructured grid.

    Parameters
    ----------
    path : str or Path
    mesh : Mesh
    cell_data : dict, optional
        name -> (nc,) array; integer arrays are written as int scalars.
    point_data : dict, optional
        name -> (nv,) scalars or (nv, 2) vectors (padded with a zero z).
    """
    nv = mesh.num_vertices
    nc = mesh.num_cells
    lines = [
        "# vtk DataFile Version 3.0",
        title,
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        "POINTS %d double" % nv,
    ]
    for x, y in mesh.vertices:
        lines.append("%.16g %.16g 0" % (x, y))
    lines.append("CELLS %d %d" % (nc, 4 * nc))
    for a, b, c in mesh.cells:
        lines.append("3 %d %d %d" % (a, b, c))
    lines.append("CELL_TYPES %d" % nc)
    lines.extend(["5"] * nc)

    if cell_data:
        lines.append("CELL_DATA %d" % nc)
        for name, values in cell_data.items():
            values = np.asarray(values)
            if values.shape != (nc,):
                raise ValueError("cell data %r must have one value per cell" % name)
            if np.issubdtype(values.dtype, np.integer):
                lines.append("SCALARS %s int 1" % name)
                lines.append("LOOKUP_TABLE default")
                lines.extend(str(int(v)) for v in values)
            else:
                lines.append("SCALARS %s double 1" % name)
                lines.append("LOOKUP_TABLE default")
                lines.extend("%.16g" % v for v in values)

    if point_data:
        lines.append("POINT_DATA %d" % nv)
        for name, values in point_data.items():
            values = np.asarray(values, dtype=float)
            if values.shape == (nv,):
                lines.append("SCALARS %s double 1" % name)
                lines.append("LOOKUP_TABLE default")
                lines.extend("%.16g" % v for v in values)
            elif values.shape == (nv, 2):
                lines.append("VECTORS %s double" % name)
                lines.extend("%.16g %.16g 0" % (vx, vy) for vx, vy in values)
            else:
                raise ValueError(
                    "point data %r must be (nv,) scalars or (nv, 2) vectors" % name
                )

    with open(path, "w") as handle:
        handle.write("\n".join(lines) + "\n")


def eigenpair_point_data(layout, pair):
    """Vertex velocity vector and vertex pressure of an eigenpair."""
    nv = layout.mesh.num_vertices
    n_s = layout.n_scalar
    velocity = np.column_stack([pair.u[:nv], pair.u[n_s : n_s + nv]])
    return {"velocity": velocity, "pressure": np.asarray(pair.p[:nv])}
