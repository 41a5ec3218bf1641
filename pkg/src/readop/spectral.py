"""Numerical witnesses on truncations: Perron pairs, norm decay, irreducibility.

Exact entries are downcast to hardware floats once; everything after that
is evidence, not proof, and is labeled accordingly in reports.  Pattern
computations (strong connectivity, subdiagonal positivity, returns to row
zero) use the exact nonzero structure, never floats.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .growth import GrowthSequence
from .operator import TruncatedOperator, modulus_split, t_column_oracle

__all__ = [
    "IrreducibilityReport",
    "SpectralReport",
    "ZeroImage",
    "dump_eigenvector_csv",
    "dump_norm_sequence_csv",
    "irreducibility_check",
    "power_iteration",
    "power_norm_sequence",
    "tminus_eigenvector_check",
]


class ZeroImage(RuntimeError):
    """Power iteration hit an exactly zero image (nilpotent pattern)."""


@dataclass
class SpectralReport:
    operator: str
    dim: int
    eigenvalue: float
    eigenvector: np.ndarray
    residual: float
    iterations: int
    converged: bool

    def to_json(self) -> dict:
        return {
            "schema": "readop-spectral-report/1",
            "kind": "witness",  # finite sections carry no spectral convergence claim
            "operator": self.operator,
            "dim": self.dim,
            "eigenvalue": repr(self.eigenvalue),
            "residual_l1": repr(self.residual),
            "iterations": self.iterations,
            "converged": self.converged,
            "eigenvector_min": repr(float(self.eigenvector.min())),
            "eigenvector_l1": repr(float(np.abs(self.eigenvector).sum())),
        }


def power_iteration(trunc: TruncatedOperator, which: str = "modulus",
                    tol: float = 1e-12, max_iter: int = 10000,
                    eval_precision: int = 128) -> SpectralReport:
    """Perron witness for a nonnegative part, from the uniform start vector.

    Iterates v <- Mv / ||Mv||_1 and stops when consecutive eigenvalue
    estimates differ by less than tol; the final residual is reported
    honestly whether or not that happened.
    """
    if which == "T":
        raise ValueError("T is not entrywise nonnegative; no Perron iteration")
    m = trunc.to_dense(which, eval_precision)
    if m.min() < 0:
        raise ValueError(f"part {which!r} has negative entries")
    dim = trunc.dim
    v = np.full(dim, 1.0 / dim)
    lam = 0.0
    iterations = 0
    converged = False
    for iterations in range(1, max_iter + 1):
        w = m @ v
        norm = w.sum()  # w >= 0
        if norm == 0.0:
            raise ZeroImage(f"{which} image vanished at iteration {iterations}")
        v = w / norm
        if abs(norm - lam) < tol:
            lam = norm
            converged = True
            break
        lam = norm
    residual = float(np.abs(m @ v - lam * v).sum())
    return SpectralReport(which, dim, float(lam), v, residual, iterations, converged)


def power_norm_sequence(trunc: TruncatedOperator, which: str = "T",
                        k_max: int = 64, eval_precision: int = 128) -> list[float]:
    """||M^k||_1^(1/k) for k = 1..k_max (operator norm = max column abs sum)."""
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    m = trunc.to_dense(which, eval_precision)
    out = []
    power = np.eye(trunc.dim)
    for k in range(1, k_max + 1):
        power = m @ power
        norm = float(np.abs(power).sum(axis=0).max())
        out.append(norm ** (1.0 / k) if norm > 0 else 0.0)
    return out


@dataclass
class IrreducibilityReport:
    operator: str
    dim: int
    component_sizes: list[int]
    strongly_connected: bool
    flagged_columns: list[int]
    strongly_connected_excluding_flagged: bool
    component_of_zero: list[int]
    subdiagonal_all_positive: bool
    row_zero_columns: list[int]

    def to_json(self) -> dict:
        return {
            "schema": "readop-irreducibility-report/1",
            "operator": self.operator,
            "dim": self.dim,
            "component_sizes": self.component_sizes,
            "strongly_connected": self.strongly_connected,
            "flagged_columns": self.flagged_columns,
            "strongly_connected_excluding_flagged":
                self.strongly_connected_excluding_flagged,
            "component_of_zero_size": len(self.component_of_zero),
            "subdiagonal_all_positive": self.subdiagonal_all_positive,
            "row_zero_columns": self.row_zero_columns,
        }


def _scc(edges: list[tuple[int, int]], nodes: list[int]) -> tuple[int, np.ndarray]:
    index = {node: k for k, node in enumerate(nodes)}
    rows, cols = [], []
    for j, k in edges:
        if j in index and k in index:
            rows.append(index[j])
            cols.append(index[k])
    graph = csr_matrix((np.ones(len(rows)), (rows, cols)),
                       shape=(len(nodes), len(nodes)))
    return connected_components(graph, directed=True, connection="strong")


def irreducibility_check(trunc: TruncatedOperator, which: str = "modulus",
                         drop_row_zero: bool = False) -> IrreducibilityReport:
    """SCC analysis of the exact nonzero pattern (edge j -> k when (k, j) != 0).

    The verdict is reported both on the full node set and with the flagged
    boundary columns excluded: a flagged column lost its outgoing
    continuation to the cut, so only the unflagged subgraph reflects the
    operator rather than the truncation artifact.  drop_row_zero removes
    all returns to row 0 (the negative control for irreducibility).
    """
    columns = trunc.part(which)
    edges = []
    row_zero_cols = []
    for col in columns:
        for row in col.entries:
            if drop_row_zero and row == 0:
                continue
            edges.append((col.index, row))
        if 0 in col.entries:
            row_zero_cols.append(col.index)

    all_nodes = list(range(trunc.dim))
    n_comp, labels = _scc(edges, all_nodes)
    sizes = sorted((int(c) for c in np.bincount(labels)), reverse=True)
    comp_zero = [n for n in all_nodes if labels[n] == labels[0]]

    flagged = sorted(trunc.flags)
    kept = [n for n in all_nodes if n not in trunc.flags]
    n_comp_ex, _ = _scc(edges, kept)

    subdiag_ok = all(
        (i + 1) in trunc.columns[i].entries for i in range(trunc.n_trunc))
    return IrreducibilityReport(
        which, trunc.dim, sizes, n_comp == 1, flagged, n_comp_ex == 1,
        comp_zero, subdiag_ok, sorted(row_zero_cols))


def tminus_eigenvector_check(d: GrowthSequence) -> bool:
    """Column 0 of the negative part is exactly empty (T^- kills f_0)."""
    _, neg, _ = modulus_split(t_column_oracle(0, d))
    return not neg.entries


def dump_eigenvector_csv(report: SpectralReport, path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "value"])
        for idx, val in enumerate(report.eigenvector):
            writer.writerow([idx, repr(float(val))])


def dump_norm_sequence_csv(roots: list[float], path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "norm_root"])
        for k, val in enumerate(roots, start=1):
            writer.writerow([k, repr(val)])
