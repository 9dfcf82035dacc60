"""Evaluate, verify and simulate min-of-quadratics feedback certificates.

The Lyapunov function is ``W(x) = min_s x' P_s x`` and the active node is
the first minimizer in graph node order. Robust feedback applies
``K_{node} x``; mode-dependent feedback applies ``K_{node, i} x`` for the
active mode ``i``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ._backend import kernels
from .graph import is_complete, is_deterministic
from .model import SwitchedSystem, SwitchingSignal, check_weights, convex_combination
from .sdp.linalg import max_eigenvalue, max_eigenvalue_cholesky, min_eigenvalue
from .synthesis import Certificate, Kind


class CertificateError(ValueError):
    """Certificate structure does not match the system or graph requirements."""


def _points(x) -> np.ndarray:
    return np.ascontiguousarray(np.atleast_2d(np.asarray(x, dtype=float)))


def selector(cert: Certificate, x) -> int:
    """Index of the first node minimizing ``x' P_s x`` (node 0 at the origin)."""
    _, node = kernels.min_quadratic(cert.P_stack, _points(x))
    return int(node[0])


def lyapunov_value(cert: Certificate, x) -> float:
    W, _ = kernels.min_quadratic(cert.P_stack, _points(x))
    return float(W[0])


def evaluate_many(cert: Certificate, X) -> tuple[np.ndarray, np.ndarray]:
    """``(W, node)`` for each row of ``X``."""
    return kernels.min_quadratic(cert.P_stack, _points(X))


def feedback(cert: Certificate, x, mode: Optional[int] = None) -> np.ndarray:
    """Piecewise-linear control input at state ``x``."""
    if cert.kind is Kind.ROBUST and mode is not None:
        raise CertificateError("robust feedback takes no mode")
    if cert.kind is Kind.MODE_DEPENDENT and mode is None:
        raise CertificateError("mode-dependent feedback requires the active mode")
    x = np.asarray(x, dtype=float)
    return cert.gain(selector(cert, x), mode) @ x


@dataclass
class MarginReport:
    """Per-edge ``lambda_max((A_i + B_i K_e)' P_b (A_i + B_i K_e) - gamma^2 P_a)``."""

    edges: list
    edge_margins: np.ndarray
    min_P_eigenvalue: float
    gamma: float

    @property
    def max_margin(self) -> float:
        return float(np.max(self.edge_margins))

    @property
    def valid(self) -> bool:
        return self.max_margin < 0 and self.min_P_eigenvalue > 0

    def lines(self, names) -> list[str]:
        out = []
        for (a, b, i), v in zip(self.edges, self.edge_margins):
            out.append(f"{names[a]} -> {names[b]} [{i}]  {v:+.6e}")
        out.append(f"max margin {self.max_margin:+.6e}  min eig(P) {self.min_P_eigenvalue:.6e}")
        out.append("VALID" if self.valid else "INVALID")
        return out


def _check_structure(sys_: SwitchedSystem, cert: Certificate) -> None:
    g = cert.graph
    if g.alphabet_size != sys_.M:
        raise CertificateError(f"certificate graph has {g.alphabet_size} labels, system {sys_.M} modes")
    if cert.n != sys_.n or cert.m != sys_.m:
        raise CertificateError(
            f"certificate dimensions (n={cert.n}, m={cert.m}) do not match system "
            f"(n={sys_.n}, m={sys_.m})"
        )
    if not is_complete(g):
        raise CertificateError("certificate graph is not complete")
    if cert.kind is Kind.MODE_DEPENDENT and not is_deterministic(g):
        raise CertificateError("mode-dependent certificate needs a deterministic graph")


def closed_loop(sys_: SwitchedSystem, cert: Certificate, node: int, mode: int) -> np.ndarray:
    A, B = sys_.mode(mode)
    gain = cert.gain(node, mode if cert.kind is Kind.MODE_DEPENDENT else None)
    return A + B @ gain


def verify_certificate(
    sys_: SwitchedSystem,
    cert: Certificate,
    gamma: Optional[float] = None,
    method: str = "eigen",
) -> MarginReport:
    """Solver-independent check of the per-edge decrease inequalities.

    ``method="cholesky"`` locates each largest eigenvalue by bisection on
    Cholesky factorizations instead of calling the eigensolver.
    """
    _check_structure(sys_, cert)
    gamma = cert.gamma if gamma is None else float(gamma)
    lam = {"eigen": max_eigenvalue, "cholesky": max_eigenvalue_cholesky}[method]
    margins = []
    for a, b, i in cert.graph.edges:
        F = closed_loop(sys_, cert, a, i)
        S = F.T @ cert.P[b] @ F - gamma**2 * cert.P[a]
        margins.append(lam(0.5 * (S + S.T)))
    pmin = min(min_eigenvalue(P) for P in cert.P)
    return MarginReport(list(cert.graph.edges), np.array(margins), pmin, gamma)


@dataclass
class Trajectory:
    states: np.ndarray  # (T+1, n)
    inputs: np.ndarray  # (T, m)
    lyapunov: np.ndarray  # (T+1,)
    active_nodes: np.ndarray  # (T+1,)
    signal: object  # SwitchingSignal or (T, M) weights
    diverged_at: Optional[int] = None

    @property
    def steps(self) -> int:
        return len(self.inputs)

    def decrease_violations(self, gamma: float = 1.0, rtol: float = 0.0) -> list[int]:
        """Steps k with ``x(k) != 0`` where ``W(k+1) < W(k)`` or ``W(k+1) <= gamma^2 W(k)`` fails."""
        W = self.lyapunov
        bad = []
        for k in range(len(W) - 1):
            if not np.any(self.states[k]):
                continue
            if not W[k + 1] < W[k] or W[k + 1] > gamma**2 * W[k] * (1 + rtol):
                bad.append(k)
        return bad

    def to_csv(self, labels: Optional[Sequence[int]] = None, names=None) -> str:
        n, m = self.states.shape[1], self.inputs.shape[1] if self.inputs.ndim == 2 else 0
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", *[f"x{j + 1}" for j in range(n)], *[f"u{j + 1}" for j in range(m)], "W", "node", "label"])
        T = self.steps
        for k in range(len(self.states)):
            u = [repr(float(v)) for v in self.inputs[k]] if k < T else [""] * m
            node = int(self.active_nodes[k])
            label = "" if labels is None or k >= T else labels[k]
            w.writerow([k, *[repr(float(v)) for v in self.states[k]], *u,
                        repr(float(self.lyapunov[k])), names[node] if names else node, label])
        return buf.getvalue()


def _run(cert, x0, T, step):
    x = np.asarray(x0, dtype=float).copy()
    n = x.shape[0]
    if n != cert.n:
        raise CertificateError(f"initial state has dimension {n}, certificate {cert.n}")
    if not np.all(np.isfinite(x)):
        raise ValueError("initial state must be finite")
    states = np.zeros((T + 1, n))
    inputs = np.zeros((T, cert.m))
    W = np.zeros(T + 1)
    nodes = np.zeros(T + 1, dtype=np.int64)
    P = cert.P_stack
    diverged = None
    for k in range(T + 1):
        states[k] = x
        Wk, node = kernels.min_quadratic(P, x[None, :])
        W[k], nodes[k] = Wk[0], node[0]
        if k == T:
            break
        with np.errstate(over="ignore", invalid="ignore"):
            u, x = step(k, x, int(node[0]))
        inputs[k] = u
        if not np.all(np.isfinite(x)):
            diverged = k + 1
            states, inputs, W, nodes = states[: k + 1], inputs[: k + 1], W[: k + 1], nodes[: k + 1]
            break
    return states, inputs, W, nodes, diverged


def simulate(sys_: SwitchedSystem, cert: Certificate, signal: SwitchingSignal, x0, T: int) -> Trajectory:
    """Closed loop ``x(k+1) = A_s x + B_s u`` with ``s = signal[k]`` for T steps."""
    if len(signal) < T:
        raise ValueError(f"switching signal has {len(signal)} values, need {T}")
    signal.validate(sys_.M)
    md = cert.kind is Kind.MODE_DEPENDENT

    def step(k, x, node):
        i = signal[k]
        A, B = sys_.A[i - 1], sys_.B[i - 1]
        u = cert.gain(node, i if md else None) @ x
        return u, A @ x + B @ u

    states, inputs, W, nodes, diverged = _run(cert, x0, T, step)
    return Trajectory(states, inputs, W, nodes, signal, diverged)


def simulate_lpv(sys_: SwitchedSystem, cert: Certificate, weights, x0, T: int) -> Trajectory:
    """Closed loop of the convex combination ``A(w(k)), B(w(k))`` under robust feedback."""
    if cert.kind is not Kind.ROBUST:
        raise CertificateError("LPV simulation requires a robust certificate")
    weights = np.asarray(weights, dtype=float)
    if len(weights) < T:
        raise ValueError(f"weight sequence has {len(weights)} entries, need {T}")
    for w in weights[:T]:
        check_weights(w, sys_.M)

    def step(k, x, node):
        A, B = convex_combination(sys_, weights[k])
        u = cert.K[node] @ x
        return u, A @ x + B @ u

    states, inputs, W, nodes, diverged = _run(cert, x0, T, step)
    return Trajectory(states, inputs, W, nodes, weights[:T], diverged)


def level_set_samples(cert: Certificate, resolution: int) -> list[tuple[float, float, int]]:
    """Unit level set ``W(r u(theta)) = 1`` sampled on ``resolution`` directions."""
    if cert.n != 2:
        raise CertificateError(f"level sets are only supported for n = 2, got n = {cert.n}")
    if resolution < 1:
        raise ValueError("resolution must be positive")
    theta = 2 * np.pi * np.arange(resolution) / resolution
    U = np.ascontiguousarray(np.column_stack([np.cos(theta), np.sin(theta)]))
    W, node = kernels.min_quadratic(cert.P_stack, U)
    r = 1.0 / np.sqrt(W)
    return [(float(t), float(rr), int(s)) for t, rr, s in zip(theta, r, node)]


def level_set_csv(samples, names=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["theta", "radius", "node"])
    for t, r, s in samples:
        w.writerow([repr(t), repr(r), names[s] if names else s])
    return buf.getvalue()
