"""Primal-dual interior-point method for maximum-margin LMI feasibility.

Solves

    maximize t  subject to  F_j(y) - t I >= 0 for every block j,
                            trace_row @ y = trace_target,

with a Mehrotra predictor-corrector on the HKM search direction. The block
structure is many small dense PSD cones sharing variables, so the Schur
complement matrix is assembled block by block by the compiled kernel.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, TextIO

import numpy as np
from scipy import linalg, sparse
from scipy.sparse import linalg as splinalg

from .._backend import kernels as _default_kernels
from .problem import CompiledProblem, FeasibilityProblem

log = logging.getLogger(__name__)

# best merit accepted as a converged-at-lower-accuracy run
REDUCED_ACCURACY = 1e-6


class Status(str, Enum):
    FEASIBLE = "feasible"
    INFEASIBLE = "infeasible"
    NUMERICAL_FAILURE = "numerical-failure"


@dataclass
class SolverOptions:
    tolerance: float = 1e-8
    max_iter: int = 200
    margin_floor: float = 1e-7
    step_fraction: float = 0.98
    # Schur systems larger than this use the sparse LU path
    dense_limit: int = 400
    trace: Optional[TextIO] = None


@dataclass
class SdpSolution:
    status: Status
    assignments: dict
    margin: float
    iterations: int
    primal_residual: float
    dual_residual: float
    gap: float
    dual_bound: float
    converged: bool
    reduced_accuracy: bool = False
    solve_time: float = 0.0
    block_min_eigenvalues: np.ndarray = field(default=None, repr=False)

    @property
    def feasible(self) -> bool:
        return self.status is Status.FEASIBLE


def _batched_inverse_chol(S):
    L = np.linalg.cholesky(S)
    Linv = np.linalg.inv(L)
    return L, Linv, np.swapaxes(Linv, -1, -2) @ Linv


def _max_step(Linv, D):
    """Largest alpha with ``S + alpha D >= 0`` given ``Linv = chol(S)^-1``."""
    W = Linv @ D @ np.swapaxes(Linv, -1, -2)
    lam = np.linalg.eigvalsh(0.5 * (W + np.swapaxes(W, -1, -2)))[..., 0].min()
    return np.inf if lam >= 0 else -1.0 / lam


def _sym(A):
    return 0.5 * (A + np.swapaxes(A, -1, -2))


class _Reduced:
    """Compiled problem restricted to variables that appear in some block."""

    def __init__(self, cp: CompiledProblem):
        used = cp.used_variables()
        self.active = np.flatnonzero(used)
        remap = -np.ones(cp.nvar, dtype=np.int64)
        remap[self.active] = np.arange(len(self.active))
        self.n = len(self.active)
        self.groups = []
        for g in cp.groups:
            self.groups.append(
                (np.ascontiguousarray(remap[g.index]), np.ascontiguousarray(g.coef), g.const)
            )
        self.g = cp.trace_row[self.active]
        self.h = cp.trace_target
        self.t = int(remap[cp.margin_index])
        self.sizes = [g.size for g in cp.groups]
        self.total_dim = sum(idx.shape[0] * s for (idx, _, _), s in zip(self.groups, self.sizes))

    def linear(self, y):
        return [np.einsum("bk,bkij->bij", y[idx], F) for idx, F, _ in self.groups]

    def affine(self, y):
        return [C + np.einsum("bk,bkij->bij", y[idx], F) for idx, F, C in self.groups]

    def adjoint(self, Xs):
        out = np.zeros(self.n)
        for (idx, F, _), X in zip(self.groups, Xs):
            np.add.at(out, idx, np.einsum("bkij,bij->bk", F, X))
        return out


class _SchurPattern:
    """Fixed sparsity pattern of the Schur matrix and the scatter map into it."""

    def __init__(self, R: _Reduced):
        n = R.n
        keys = []
        for idx, _, _ in R.groups:
            keys.append((idx[:, None, :] * n + idx[:, :, None]).ravel())
        keys = np.concatenate(keys)
        uniq, self.inverse = np.unique(keys, return_inverse=True)
        self.rows = (uniq % n).astype(np.int32)
        cols = uniq // n
        self.indptr = np.searchsorted(cols, np.arange(n + 1)).astype(np.int32)
        self.n = n
        self.nnz = len(uniq)

    def assemble(self, local_blocks) -> sparse.csc_matrix:
        data = np.bincount(
            self.inverse, weights=np.concatenate([b.ravel() for b in local_blocks]), minlength=self.nnz
        )
        return sparse.csc_matrix((data, self.rows, self.indptr), shape=(self.n, self.n))


class _SchurFactor:
    """Factorization of the positive definite Schur matrix.

    Dense Cholesky for small systems, SuperLU without pivoting (stable for
    positive definite matrices) with a fill-reducing ordering otherwise. A
    growing diagonal shift is tried when the matrix is numerically singular.
    """

    def __init__(self, M: sparse.csc_matrix, dense_limit: int):
        self.M = M
        n = M.shape[0]
        diag = M.diagonal()
        scale = float(np.max(diag)) if n else 0.0
        if not np.isfinite(scale) or scale <= 0:
            raise linalg.LinAlgError("Schur complement is not positive")
        self.dense = n <= dense_limit
        for reg in (0.0, 1e-14, 1e-12, 1e-10, 1e-8):
            A = M if not reg else M + sparse.identity(n, format="csc") * (reg * scale)
            try:
                if self.dense:
                    self._f = linalg.cho_factor(A.toarray(), lower=True, check_finite=False)
                else:
                    self._f = splinalg.splu(
                        A,
                        permc_spec="MMD_AT_PLUS_A",
                        diag_pivot_thresh=0.0,
                        options={"SymmetricMode": True},
                    )
                self.shift = reg * scale
                return
            except (linalg.LinAlgError, RuntimeError):
                continue
        raise linalg.LinAlgError("Schur complement factorization failed")

    def _raw(self, rhs):
        if self.dense:
            return linalg.cho_solve(self._f, rhs, check_finite=False)
        return self._f.solve(rhs)

    def solve(self, rhs):
        u = self._raw(rhs)
        # one step of iterative refinement against the unshifted matrix
        return u + self._raw(rhs - self.M @ u)


def solve_feasibility(
    problem: FeasibilityProblem,
    options: Optional[SolverOptions] = None,
    kernels=None,
    **kw,
) -> SdpSolution:
    """Maximize the uniform margin t of a strict LMI feasibility problem.

    Feasible exactly when the margin re-evaluated from the returned
    assignments exceeds ``margin_floor``. Infeasible requires a converged run:
    the primal iterate then bounds every achievable margin from above.
    """
    opts = options or SolverOptions(**kw)
    kern = kernels or _default_kernels
    start = time.perf_counter()
    cp = problem.compile()
    R = _Reduced(cp)
    pattern = _SchurPattern(R)
    n, tol = R.n, opts.tolerance
    b = np.zeros(n)
    b[R.t] = 1.0
    g, h = R.g, R.h

    X = [np.broadcast_to(np.eye(s), (idx.shape[0], s, s)).copy() for (idx, _, _), s in zip(R.groups, R.sizes)]
    Z = [x.copy() for x in X]
    local = [np.empty((idx.shape[0], idx.shape[1], idx.shape[1])) for idx, _, _ in R.groups]
    y = np.zeros(n)
    nu = 0.0
    best = (np.inf, 0, y, nu, np.inf, np.inf, np.inf)
    it = 0
    for it in range(1, opts.max_iter + 1):
        Fy = R.affine(y)
        Rd = [f - z for f, z in zip(Fy, Z)]
        Rp = b + R.adjoint(X) - g * nu
        Rg = h - g @ y
        xz = sum(float(np.einsum("bij,bji->", x, z)) for x, z in zip(X, Z))
        mu = xz / R.total_dim
        pobj, dobj = h * nu, y[R.t]
        gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        pinf = float(np.linalg.norm(Rp)) / (1.0 + np.linalg.norm(b))
        dinf = float(np.sqrt(sum(float(np.sum(r * r)) for r in Rd)) + abs(Rg) / (1.0 + abs(h)))
        merit = max(gap, pinf, dinf)
        if opts.trace is not None:
            opts.trace.write(
                f"{it:4d} pinf={pinf:.3e} dinf={dinf:.3e} gap={gap:.3e} "
                f"mu={mu:.3e} margin={dobj:+.6e}\n"
            )
        if merit < best[0]:
            best = (merit, it, y.copy(), nu, pinf, dinf, gap)
        if merit < tol:
            break
        if it - best[1] >= 5:
            log.debug("interior-point stagnated at iteration %d", it)
            break
        try:
            Zinv = [_batched_inverse_chol(z)[2] for z in Z]
            Lx = [_batched_inverse_chol(x)[1] for x in X]
            Lz = [_batched_inverse_chol(z)[1] for z in Z]
            for (idx, F, _), x, zi, out in zip(R.groups, X, Zinv, local):
                kern.schur_blocks(F, np.ascontiguousarray(x), np.ascontiguousarray(zi), out)
            factor = _SchurFactor(pattern.assemble(local), opts.dense_limit)
        except (np.linalg.LinAlgError, linalg.LinAlgError) as exc:
            log.debug("interior-point breakdown at iteration %d: %s", it, exc)
            break
        w = factor.solve(g)
        gw = float(g @ w)
        XRdZ = [x @ rd @ zi for x, rd, zi in zip(X, Rd, Zinv)]
        base = Rp - R.adjoint(X) - R.adjoint(XRdZ)

        def direction(sigma_mu, corr):
            rhs = base + R.adjoint([sigma_mu * zi for zi in Zinv])
            if corr is not None:
                rhs = rhs - R.adjoint([c @ zi for c, zi in zip(corr, Zinv)])
            u = factor.solve(rhs)
            dnu = (float(g @ u) - Rg) / gw
            dy = u - w * dnu
            dZ = [rd + f for rd, f in zip(Rd, R.linear(dy))]
            dX = []
            for k, (x, zi, dz) in enumerate(zip(X, Zinv, dZ)):
                num = x @ dz
                if corr is not None:
                    num = num + corr[k]
                dX.append(sigma_mu * zi - x - _sym(num @ zi))
            return dy, dnu, dX, dZ

        def steps(dX, dZ):
            ap = min(_max_step(L, d) for L, d in zip(Lx, dX))
            ad = min(_max_step(L, d) for L, d in zip(Lz, dZ))
            return min(1.0, opts.step_fraction * ap), min(1.0, opts.step_fraction * ad)

        # Mehrotra predictor, then corrector with second-order term
        dy, dnu, dX, dZ = direction(0.0, None)
        ap, ad = steps(dX, dZ)
        mu_aff = sum(
            float(np.einsum("bij,bji->", x + ap * dx, z + ad * dz))
            for x, dx, z, dz in zip(X, dX, Z, dZ)
        ) / R.total_dim
        sigma = min(1.0, max(0.0, (mu_aff / mu) ** 3)) if mu > 0 else 0.0
        corr = [dx @ dz for dx, dz in zip(dX, dZ)]
        dy, dnu, dX, dZ = direction(sigma * mu, corr)
        ap, ad = steps(dX, dZ)
        if not (np.all(np.isfinite(dy)) and np.isfinite(dnu)):
            log.debug("non-finite search direction at iteration %d", it)
            break
        X = [x + ap * dx for x, dx in zip(X, dX)]
        nu += ap * dnu
        y = y + ad * dy
        Z = [z + ad * dz for z, dz in zip(Z, dZ)]

    merit, _, y_best, nu_best, pinf, dinf, gap = best
    converged = merit < tol
    reduced = not converged and merit < REDUCED_ACCURACY
    candidates = []
    for cand in (y, y_best):
        y_full = np.zeros(cp.nvar)
        y_full[R.active] = cand
        candidates.append(_certified_margin(cp, y_full))
    margin, block_eigs, y_full = max(candidates, key=lambda c: c[0])
    dual_bound = h * nu_best
    if margin > opts.margin_floor:
        status = Status.FEASIBLE
    elif converged or (reduced and dual_bound <= opts.margin_floor):
        status = Status.INFEASIBLE
    else:
        status = Status.NUMERICAL_FAILURE
    sol = SdpSolution(
        status=status,
        assignments=cp.unpack(y_full),
        margin=margin,
        iterations=it,
        primal_residual=pinf,
        dual_residual=dinf,
        gap=gap,
        dual_bound=dual_bound,
        converged=converged,
        reduced_accuracy=reduced,
        solve_time=time.perf_counter() - start,
        block_min_eigenvalues=block_eigs,
    )
    log.debug(
        "sdp: %s margin=%.3e bound=%.3e iters=%d time=%.2fs",
        status.value, margin, dual_bound, it, sol.solve_time,
    )
    return sol


def _certified_margin(cp: CompiledProblem, y: np.ndarray):
    """Exact normalization, then the minimum eigenvalue over all blocks at ``y``."""
    y = y.copy()
    y[cp.margin_index] = 0.0
    s = float(cp.trace_row @ y)
    homogeneous = all(not np.any(gr.const) for gr in cp.groups)
    if homogeneous and s > 0:
        y *= cp.trace_target / s
    eigs = np.empty(cp.block_count)
    for gr in cp.groups:
        S = gr.evaluate(y)
        eigs[gr.members] = np.linalg.eigvalsh(_sym(S))[:, 0]
    margin = float(eigs.min())
    y[cp.margin_index] = margin
    return margin, eigs, y
