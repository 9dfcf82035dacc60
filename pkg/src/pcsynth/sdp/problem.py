"""Strict LMI feasibility problems over named matrix variables.

A block is a symmetric matrix partitioned into square sub-blocks, each an
affine combination of terms ``L @ V @ R`` in the matrix variables ``V``.
Off-diagonal sub-blocks are mirrored; diagonal sub-blocks are symmetrized.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional, Sequence

import numpy as np


class ProblemError(ValueError):
    pass


class VariableKind(str, Enum):
    SYMMETRIC = "symmetric"
    RECTANGULAR = "rectangular"


@dataclass(frozen=True)
class MatrixVariable:
    id: Any
    kind: VariableKind
    rows: int
    cols: int

    @classmethod
    def symmetric(cls, id, n: int) -> "MatrixVariable":
        return cls(id, VariableKind.SYMMETRIC, n, n)

    @classmethod
    def rectangular(cls, id, m: int, n: int) -> "MatrixVariable":
        return cls(id, VariableKind.RECTANGULAR, m, n)

    @property
    def is_symmetric(self) -> bool:
        return self.kind is VariableKind.SYMMETRIC

    @property
    def size(self) -> int:
        if self.is_symmetric:
            return self.rows * (self.rows + 1) // 2
        return self.rows * self.cols

    def basis(self) -> np.ndarray:
        """Matrices ``E_k`` with ``V = sum_k v_k E_k`` (upper triangle for symmetric)."""
        E = np.zeros((self.size, self.rows, self.cols))
        if self.is_symmetric:
            for k, (p, q) in enumerate(zip(*np.triu_indices(self.rows))):
                E[k, p, q] = E[k, q, p] = 1.0
        else:
            E.reshape(self.size, -1)[np.arange(self.size), np.arange(self.size)] = 1.0
        return E

    def unpack(self, v: np.ndarray) -> np.ndarray:
        if self.is_symmetric:
            S = np.zeros((self.rows, self.rows))
            iu = np.triu_indices(self.rows)
            S[iu] = v
            S.T[iu] = v
            return S
        return np.asarray(v, dtype=float).reshape(self.rows, self.cols).copy()

    def pack(self, V: np.ndarray) -> np.ndarray:
        V = np.asarray(V, dtype=float)
        if self.is_symmetric:
            return V[np.triu_indices(self.rows)].copy()
        return V.reshape(-1).copy()


@dataclass(frozen=True)
class Term:
    """Contribution ``left @ V @ right`` of variable ``var`` to sub-block ``(row, col)``."""

    row: int
    col: int
    var: Any
    left: np.ndarray
    right: np.ndarray


@dataclass(frozen=True)
class LmiBlock:
    partition: tuple[int, ...]
    terms: tuple[Term, ...]
    tag: Any = None
    constant: Optional[np.ndarray] = None

    @property
    def size(self) -> int:
        return sum(self.partition)

    def offsets(self) -> list[int]:
        return [0, *np.cumsum(self.partition).tolist()]


@dataclass(frozen=True)
class FeasibilityProblem:
    """Find variables making every block positive definite.

    ``scaling`` multiplies the (2,2) sub-block of every two-part block; it is
    how a decay rate gamma enters (scaling = gamma**2). ``normalization`` is
    the prescribed sum of traces of the symmetric variables; by default the
    sum of their dimensions.
    """

    variables: tuple[MatrixVariable, ...]
    blocks: tuple[LmiBlock, ...]
    scaling: float = 1.0
    normalization: Optional[float] = None

    def __post_init__(self):
        ids = [v.id for v in self.variables]
        if len(set(ids)) != len(ids):
            raise ProblemError("variable ids must be unique")
        if not self.blocks:
            raise ProblemError("problem needs at least one block")
        if not self.scaling > 0:
            raise ProblemError(f"scaling must be positive, got {self.scaling}")
        known = set(ids)
        by_id = {v.id: v for v in self.variables}
        for blk in self.blocks:
            part = blk.partition
            for t in blk.terms:
                if t.var not in known:
                    raise ProblemError(f"block {blk.tag}: unknown variable {t.var!r}")
                v = by_id[t.var]
                L, R = np.atleast_2d(t.left), np.atleast_2d(t.right)
                if not (0 <= t.row < len(part) and 0 <= t.col < len(part)):
                    raise ProblemError(f"block {blk.tag}: sub-block index out of range")
                if L.shape != (part[t.row], v.rows) or R.shape != (v.cols, part[t.col]):
                    raise ProblemError(
                        f"block {blk.tag}: term in {t.var!r} has inconsistent dimensions"
                    )

    def variable(self, id) -> MatrixVariable:
        for v in self.variables:
            if v.id == id:
                return v
        raise KeyError(id)

    @property
    def trace_target(self) -> float:
        if self.normalization is not None:
            return float(self.normalization)
        return float(sum(v.rows for v in self.variables if v.is_symmetric))

    def compile(self) -> "CompiledProblem":
        return CompiledProblem.build(self)

    def evaluate(self, assignments: dict) -> list[np.ndarray]:
        """Numeric value of every block at the given variable assignments."""
        out = []
        for blk in self.blocks:
            off = blk.offsets()
            S = np.zeros((blk.size, blk.size))
            if blk.constant is not None:
                S += blk.constant
            for t in blk.terms:
                C = np.atleast_2d(t.left) @ assignments[t.var] @ np.atleast_2d(t.right)
                if len(blk.partition) == 2 and t.row == t.col == 1:
                    C = self.scaling * C
                r, c = slice(off[t.row], off[t.row + 1]), slice(off[t.col], off[t.col + 1])
                if t.row == t.col:
                    S[r, c] += 0.5 * (C + C.T)
                else:
                    S[r, c] += C
                    S[c, r] += C.T
            out.append(S)
        return out


@dataclass
class BlockGroup:
    """Blocks sharing size ``s`` and local variable count ``k``, stacked."""

    size: int
    index: np.ndarray  # (B, k) global scalar variable indices
    coef: np.ndarray  # (B, k, s, s) symmetric coefficient matrices
    const: np.ndarray  # (B, s, s)
    members: list[int]  # block order positions

    def evaluate(self, y: np.ndarray) -> np.ndarray:
        return self.const + np.einsum("bk,bkij->bij", y[self.index], self.coef)

    def adjoint(self, X: np.ndarray, out: np.ndarray) -> None:
        """Accumulate ``<coef_k, X>`` into ``out`` at the global indices."""
        vals = np.einsum("bkij,bij->bk", self.coef, X)
        np.add.at(out, self.index, vals)


@dataclass
class CompiledProblem:
    """Scalar form: blocks ``F_j(y) = C_j + sum_k y_k F_jk`` over one vector ``y``.

    The last entry of ``y`` is the uniform margin ``t`` entering every block
    as ``-t * I``; ``trace_row @ y == trace_target`` normalizes the scale.
    """

    problem: FeasibilityProblem
    offsets: dict
    nvar: int
    groups: list[BlockGroup]
    trace_row: np.ndarray
    trace_target: float
    block_count: int
    margin_index: int = field(init=False)

    def __post_init__(self):
        self.margin_index = self.nvar - 1

    @classmethod
    def build(cls, p: FeasibilityProblem, bound_variables: bool = True) -> "CompiledProblem":
        offsets = {}
        pos = 0
        for v in p.variables:
            offsets[v.id] = pos
            pos += v.size
        nvar = pos + 1
        t_index = pos
        bases = {v.id: v.basis() for v in p.variables}

        raw = []  # (size, {global_index: coef matrix}, const)
        for blk in p.blocks:
            s = blk.size
            off = blk.offsets()
            coefs: dict[int, np.ndarray] = {}
            for t in blk.terms:
                L, R = np.atleast_2d(t.left), np.atleast_2d(t.right)
                if len(blk.partition) == 2 and t.row == t.col == 1:
                    L = p.scaling * L
                contrib = L[None] @ bases[t.var] @ R[None]
                r, c = slice(off[t.row], off[t.row + 1]), slice(off[t.col], off[t.col + 1])
                base = offsets[t.var]
                for k in range(contrib.shape[0]):
                    F = coefs.get(base + k)
                    if F is None:
                        F = coefs[base + k] = np.zeros((s, s))
                    Ck = contrib[k]
                    if t.row == t.col:
                        F[r, c] += 0.5 * (Ck + Ck.T)
                    else:
                        F[r, c] += Ck
                        F[c, r] += Ck.T
            coefs = {k: F for k, F in coefs.items() if np.any(F)}
            coefs[t_index] = -np.eye(s)
            const = np.zeros((s, s)) if blk.constant is None else np.asarray(blk.constant, float)
            raw.append((s, coefs, const))
        if bound_variables:
            # every symmetric variable is itself required to exceed t * I
            for v in p.variables:
                if v.is_symmetric:
                    coefs = {offsets[v.id] + k: E for k, E in enumerate(bases[v.id])}
                    coefs[t_index] = -np.eye(v.rows)
                    raw.append((v.rows, coefs, np.zeros((v.rows, v.rows))))

        grouped: dict[tuple[int, int], list[int]] = {}
        for j, (s, coefs, _) in enumerate(raw):
            grouped.setdefault((s, len(coefs)), []).append(j)
        groups = []
        for (s, k), members in sorted(grouped.items()):
            index = np.empty((len(members), k), dtype=np.int64)
            coef = np.empty((len(members), k, s, s))
            const = np.empty((len(members), s, s))
            for b, j in enumerate(members):
                _, coefs, C = raw[j]
                keys = sorted(coefs)
                index[b] = keys
                coef[b] = [coefs[q] for q in keys]
                const[b] = C
            groups.append(BlockGroup(s, index, coef, const, members))

        trace_row = np.zeros(nvar)
        for v in p.variables:
            if v.is_symmetric:
                iu = np.triu_indices(v.rows)
                diag = np.flatnonzero(iu[0] == iu[1])
                trace_row[offsets[v.id] + diag] = 1.0
        return cls(p, offsets, nvar, groups, trace_row, p.trace_target, len(raw))

    def unpack(self, y: np.ndarray) -> dict:
        return {
            v.id: v.unpack(y[self.offsets[v.id] : self.offsets[v.id] + v.size])
            for v in self.problem.variables
        }

    def pack(self, assignments: dict, margin: float = 0.0) -> np.ndarray:
        y = np.zeros(self.nvar)
        for v in self.problem.variables:
            y[self.offsets[v.id] : self.offsets[v.id] + v.size] = v.pack(assignments[v.id])
        y[-1] = margin
        return y

    def used_variables(self) -> np.ndarray:
        used = np.zeros(self.nvar, dtype=bool)
        for g in self.groups:
            used[g.index.ravel()] = True
        return used
