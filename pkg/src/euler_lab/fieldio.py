"""Field and mask files, CSV output, atomic writes.

Field files are JSON documents

    {"grid": {"x0":, "y0":, "h":, "nx":, "ny":}, "kind": "scalar"|"vector",
     "data": [row-major values; vector components interleaved (ux, uy)]}

Rows run along y (node (i, j) lives at data[j*nx + i] for scalars).
Round-tripping reproduces the array bit-for-bit on the same platform.
Mask files additionally store the boundary polylines, the distance field,
and the nearest-component labels, so they reload without re-tracing.
"""

import csv
import json
import os
import tempfile

import numpy as np

from .contours import OrientedPolyline
from .domain import DomainMask
from .grid import Grid2, ScalarField, VectorField2, make_grid


def _atomic_write_text(path, text):
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _grid_doc(grid):
    return {"x0": grid.x0, "y0": grid.y0, "h": grid.h, "nx": grid.nx, "ny": grid.ny}


def _grid_from_doc(doc):
    return make_grid(doc["x0"], doc["y0"], doc["h"], int(doc["nx"]), int(doc["ny"]))


def write_field(field, path):
    if isinstance(field, ScalarField):
        doc = {
            "grid": _grid_doc(field.grid),
            "kind": "scalar",
            "data": field.values.ravel().tolist(),
        }
    elif isinstance(field, VectorField2):
        inter = np.empty(field.grid.n_nodes * 2)
        inter[0::2] = field.ux.ravel()
        inter[1::2] = field.uy.ravel()
        doc = {"grid": _grid_doc(field.grid), "kind": "vector", "data": inter.tolist()}
    else:
        raise TypeError(f"cannot serialize {type(field).__name__}")
    _atomic_write_text(path, json.dumps(doc))


def read_field(path):
    with open(path) as handle:
        doc = json.load(handle)
    grid = _grid_from_doc(doc["grid"])
    data = np.asarray(doc["data"], dtype=float)
    if doc["kind"] == "scalar":
        if data.size != grid.n_nodes:
            raise ValueError("scalar data length does not match the grid")
        return ScalarField(grid, data.reshape(grid.shape))
    if doc["kind"] == "vector":
        if data.size != 2 * grid.n_nodes:
            raise ValueError("vector data length does not match the grid")
        return VectorField2(
            grid, data[0::2].reshape(grid.shape), data[1::2].reshape(grid.shape)
        )
    raise ValueError(f"unknown field kind {doc['kind']!r}")


def write_mask(mask: DomainMask, path):
    doc = {
        "grid": _grid_doc(mask.grid),
        "kind": "mask",
        "inside": mask.inside.ravel().astype(int).tolist(),
        "components": [c.vertices.tolist() for c in mask.components],
        "distance": mask.distance.values.ravel().tolist(),
        "nearest": mask.nearest_component.ravel().tolist(),
    }
    _atomic_write_text(path, json.dumps(doc))


def read_mask(path) -> DomainMask:
    with open(path) as handle:
        doc = json.load(handle)
    grid = _grid_from_doc(doc["grid"])
    inside = np.asarray(doc["inside"], dtype=int).reshape(grid.shape).astype(bool)
    comps = [OrientedPolyline(np.asarray(v, dtype=float)) for v in doc["components"]]
    dist = ScalarField(grid, np.asarray(doc["distance"], dtype=float).reshape(grid.shape))
    nearest = np.asarray(doc["nearest"], dtype=int).reshape(grid.shape)
    return DomainMask(grid, inside, comps, dist, nearest)


def write_csv(path, header, rows):
    """Comma-separated, dot decimals, LF line endings, one header row."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path, doc):
    _atomic_write_text(path, json.dumps(doc, indent=2, sort_keys=True))


def write_matrix_coo(matrix, path):
    """Coordinate text export: one `row col value` line per entry."""
    coo = matrix.tocoo()
    lines = [f"{i} {j} {v!r}" for i, j, v in zip(coo.row, coo.col, coo.data)]
    _atomic_write_text(path, "\n".join(lines) + "\n")
