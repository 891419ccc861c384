"""Legacy VTK snapshots and the energy CSV."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

ENERGY_HEADER = ("step", "t", "kinetic", "potential", "total", "crack_length", "pe_crack", "ge")
Z_CAP = 5.0


def _fmt(x: float) -> str:
    return f"{x:.9g}"


def write_vtk(path, mesh, point_data: dict, title: str = "pdfem fields") -> None:
    """ASCII legacy VTK 3.0 unstructured grid of linear triangles.

    ``point_data`` maps names to (N,) scalars or (N, 2) vectors (padded to 3-d).
    """
    path = Path(path)
    lines = ["# vtk DataFile Version 3.0", title[:255], "ASCII", "DATASET UNSTRUCTURED_GRID"]
    n = mesh.num_nodes
    lines.append(f"POINTS {n} double")
    lines += [f"{_fmt(x)} {_fmt(y)} 0" for x, y in mesh.nodes]
    ne = mesh.num_elements
    lines.append(f"CELLS {ne} {4 * ne}")
    lines += [f"3 {a} {b} {c}" for a, b, c in mesh.elements]
    lines.append(f"CELL_TYPES {ne}")
    lines += ["5"] * ne
    if point_data:
        lines.append(f"POINT_DATA {n}")
    for name, values in point_data.items():
        v = np.asarray(values, dtype=float)
        if v.ndim == 1:
            lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
            lines += [_fmt(x) for x in v]
        else:
            lines.append(f"VECTORS {name} double")
            lines += [f"{_fmt(a)} {_fmt(b)} 0" for a, b in v[:, :2]]
    path.write_text("\n".join(lines) + "\n")


def snapshot_fields(U, V, Z=None, strain=None) -> dict:
    fields = {"displacement": U, "velocity": V}
    if Z is not None:
        fields["Z"] = np.minimum(Z, Z_CAP)
    if strain is not None:
        fields["strain_xx"] = strain[:, 0]
    return fields


class EnergyLog:
    """Append-only energy CSV with a fixed header."""

    def __init__(self, path):
        self.path = Path(path)
        self._fh = self.path.open("w", newline="")
        self._w = csv.writer(self._fh)
        self._w.writerow(ENERGY_HEADER)

    def write(self, step: int, t: float, report) -> None:
        self._w.writerow([step, repr(float(t))] + [repr(float(x)) for x in report.row()])

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_energy_csv(path) -> dict:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    cols = {h: np.array([float(r[k]) for r in body]) for k, h in enumerate(header)}
    return cols
