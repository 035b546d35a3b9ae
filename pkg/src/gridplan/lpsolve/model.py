from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.sparse as sp

SENSES = ("L", "E", "G")


class Status(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITERATION_LIMIT = "iteration_limit"


class LPError(ValueError):
    pass


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class LinearProgram:
    """``min c.x  s.t.  A x (<=|=|>=) b,  lb <= x <= ub``.

    ``A`` is canonical CSR: duplicates summed, explicit zeros dropped.
    Row and column groups tag constraint families for relaxation searches.
    """

    c: np.ndarray
    A: sp.csr_matrix
    senses: tuple[str, ...]
    b: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    row_names: tuple[str, ...] = ()
    col_names: tuple[str, ...] = ()
    name: str = "MODEL"
    row_groups: dict = field(default_factory=dict)
    bound_groups: dict = field(default_factory=dict)

    def __post_init__(self):
        m, n = self.A.shape
        A = sp.csr_matrix(self.A, dtype=float, copy=True)
        A.sum_duplicates()
        A.eliminate_zeros()
        A.sort_indices()
        object.__setattr__(self, "A", A)
        for attr, size in (("c", n), ("b", m), ("lb", n), ("ub", n)):
            arr = _frozen(getattr(self, attr))
            if arr.shape != (size,):
                raise LPError(f"{attr} has shape {arr.shape}, expected ({size},)")
            object.__setattr__(self, attr, arr)
        senses = tuple(self.senses)
        if len(senses) != m or any(s not in SENSES for s in senses):
            raise LPError("row senses must be one of L/E/G per row")
        object.__setattr__(self, "senses", senses)
        rn = tuple(self.row_names) or tuple(f"r{i}" for i in range(m))
        cn = tuple(self.col_names) or tuple(f"x{j}" for j in range(n))
        if len(rn) != m or len(cn) != n:
            raise LPError("name tables do not match matrix shape")
        if len(set(rn)) != m or len(set(cn)) != n:
            raise LPError("row and column names must be unique")
        object.__setattr__(self, "row_names", rn)
        object.__setattr__(self, "col_names", cn)
        if not (np.all(np.isfinite(A.data)) and np.all(np.isfinite(self.c)) and np.all(np.isfinite(self.b))):
            raise LPError("coefficients must be finite")
        if np.any(self.lb > self.ub):
            raise LPError("lower bound above upper bound")
        if np.any(self.lb == np.inf) or np.any(self.ub == -np.inf):
            raise LPError("invalid infinite bound")

    @classmethod
    def from_triplets(cls, n_rows, n_cols, rows, cols, vals, **kw) -> "LinearProgram":
        A = sp.coo_matrix((np.asarray(vals, float), (np.asarray(rows, int), np.asarray(cols, int))),
                          shape=(n_rows, n_cols))
        return cls(A=A.tocsr(), **kw)

    @classmethod
    def from_dense(cls, c, A, senses, b, lb=None, ub=None, **kw) -> "LinearProgram":
        A = np.atleast_2d(np.asarray(A, float))
        if A.size == 0:
            A = A.reshape(len(b), len(c))
        n = A.shape[1]
        lb = np.zeros(n) if lb is None else lb
        ub = np.full(n, np.inf) if ub is None else ub
        return cls(c=c, A=sp.csr_matrix(A), senses=tuple(senses), b=b, lb=lb, ub=ub, **kw)

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]

    @property
    def n_cols(self) -> int:
        return self.A.shape[1]

    def objective(self, x) -> float:
        return float(np.dot(self.c, x))

    def activity(self, x) -> np.ndarray:
        return self.A @ np.asarray(x, dtype=float)

    def triplets(self):
        coo = self.A.tocoo()
        return coo.row, coo.col, coo.data

    def replace(self, **changes) -> "LinearProgram":
        kw = dict(c=self.c, A=self.A, senses=self.senses, b=self.b, lb=self.lb, ub=self.ub,
                  row_names=self.row_names, col_names=self.col_names, name=self.name,
                  row_groups=self.row_groups, bound_groups=self.bound_groups)
        kw.update(changes)
        return LinearProgram(**kw)

    def relaxed(self, row_groups=(), bound_groups=()) -> "LinearProgram":
        """Copy with the given row groups dropped and bound groups reset to [lb, inf)."""
        drop = set()
        for g in row_groups:
            drop.update(self.row_groups.get(g, ()))
        ub = self.ub.copy()
        for g in bound_groups:
            cols = list(self.bound_groups.get(g, ()))
            ub[cols] = np.inf
        keep = np.array([i for i in range(self.n_rows) if i not in drop], dtype=int)
        remap = {old: new for new, old in enumerate(keep)}
        groups = {g: tuple(remap[i] for i in idx if i in remap) for g, idx in self.row_groups.items()}
        return self.replace(
            A=self.A[keep] if keep.size else sp.csr_matrix((0, self.n_cols)),
            senses=tuple(self.senses[i] for i in keep),
            b=self.b[keep],
            ub=ub,
            row_names=tuple(self.row_names[i] for i in keep),
            row_groups=groups,
        )

    def structurally_equal(self, other: "LinearProgram", rtol: float = 1e-11) -> bool:
        if (self.A.shape != other.A.shape or self.senses != other.senses
                or self.row_names != other.row_names or self.col_names != other.col_names):
            return False

        def close(a, b):
            a, b = np.asarray(a), np.asarray(b)
            same_inf = np.array_equal(np.isinf(a), np.isinf(b)) and np.array_equal(a[np.isinf(a)], b[np.isinf(b)])
            fin = ~np.isinf(a)
            return same_inf and np.allclose(a[fin], b[fin], rtol=rtol, atol=0.0)

        diff = (self.A - other.A).tocoo()
        scale = max(1.0, float(abs(self.A).max()) if self.A.nnz else 1.0)
        return (close(self.c, other.c) and close(self.b, other.b) and close(self.lb, other.lb)
                and close(self.ub, other.ub) and (diff.nnz == 0 or float(abs(diff.data).max()) <= rtol * scale))

    # binary persistence (npz); the MPS writer is the interchange format
    def save(self, path) -> None:
        A = self.A.tocoo()
        with open(path, "wb") as fh:
            np.savez(fh, c=self.c, rows=A.row, cols=A.col, vals=A.data, shape=np.array(A.shape),
                     senses=np.array(self.senses, dtype="U1"), b=self.b, lb=self.lb, ub=self.ub,
                     row_names=np.array(self.row_names, dtype=str), col_names=np.array(self.col_names, dtype=str),
                     name=np.array(self.name))

    @classmethod
    def load(cls, path) -> "LinearProgram":
        with np.load(path, allow_pickle=False) as z:
            m, n = (int(v) for v in z["shape"])
            return cls.from_triplets(m, n, z["rows"], z["cols"], z["vals"], c=z["c"], senses=tuple(z["senses"]),
                                     b=z["b"], lb=z["lb"], ub=z["ub"], row_names=tuple(z["row_names"]),
                                     col_names=tuple(z["col_names"]), name=str(z["name"]))


@dataclass
class Solution:
    status: Status
    objective: float
    x: np.ndarray
    duals: np.ndarray | None = None
    iterations: int = 0
    wall_time: float = 0.0
    method: str = ""
    message: str = ""

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL
