"""Graph-indexed LMI synthesis of piecewise-linear state feedback.

For every edge ``(a, b, i)`` of a complete graph the block

    [ Pbar_b                      A_i Pbar_a + B_i Kbar_a ]
    [ (A_i Pbar_a + B_i Kbar_a)'  gamma^2 Pbar_a          ]  > 0

is imposed. With ``P_s = Pbar_s^-1`` and ``K_s = Kbar_s P_s`` this is
equivalent to ``(A_i + B_i K_a)' P_b (A_i + B_i K_a) < gamma^2 P_a``. The
mode-dependent variant uses one gain ``Kbar_{a,i}`` per (node, label).
"""

from __future__ import annotations

import json
from importlib import resources
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Union

import numpy as np

from .graph import LabeledGraph, debruijn, is_complete, is_deterministic
from .model import SwitchedSystem, example_family
from .sdp import (
    FeasibilityProblem,
    LmiBlock,
    MatrixVariable,
    SdpSolution,
    SolverOptions,
    Status,
    Term,
    solve_feasibility,
)

log = logging.getLogger(__name__)

CONDITION_LIMIT = 1e12


class Kind(str, Enum):
    ROBUST = "robust"
    MODE_DEPENDENT = "mode_dependent"

    @classmethod
    def parse(cls, value: Union[str, "Kind"]) -> "Kind":
        if isinstance(value, Kind):
            return value
        try:
            return cls(str(value).replace("-", "_"))
        except ValueError:
            raise ValueError(f"unknown synthesis kind {value!r}") from None


class SynthesisError(Exception):
    """Base class for synthesis outcomes other than success."""


class Infeasible(SynthesisError):
    pass


class NumericalFailure(SynthesisError):
    pass


class BracketError(SynthesisError):
    pass


def _check_gamma(gamma: float) -> None:
    if not 0 < gamma <= 1:
        raise ValueError(f"decay rate gamma must lie in (0, 1], got {gamma}")


def _check_graph(sys_: SwitchedSystem, g: LabeledGraph, kind: Kind) -> None:
    if g.alphabet_size != sys_.M:
        raise ValueError(f"graph alphabet size {g.alphabet_size} != number of modes {sys_.M}")
    if not is_complete(g):
        raise ValueError("synthesis requires a complete graph")
    if kind is Kind.MODE_DEPENDENT and not is_deterministic(g):
        raise ValueError("mode-dependent synthesis requires a deterministic graph")


def _assemble(sys_, g, gamma, kind):
    _check_gamma(gamma)
    _check_graph(sys_, g, kind)
    n, m = sys_.n, sys_.m
    I = np.eye(n)
    variables = [MatrixVariable.symmetric(("P", s), n) for s in range(g.node_count)]
    if kind is Kind.ROBUST:
        variables += [MatrixVariable.rectangular(("K", s), m, n) for s in range(g.node_count)]
    else:
        variables += [
            MatrixVariable.rectangular(("K", s, i), m, n)
            for s in range(g.node_count)
            for i in g.labels
        ]
    blocks = []
    for a, b, i in g.edges:
        A, B = sys_.mode(i)
        gain = ("K", a) if kind is Kind.ROBUST else ("K", a, i)
        terms = (
            Term(0, 0, ("P", b), I, I),
            Term(0, 1, ("P", a), A, I),
            Term(0, 1, gain, B, I),
            Term(1, 1, ("P", a), I, I),
        )
        blocks.append(LmiBlock((n, n), terms, tag=(a, b, i)))
    return FeasibilityProblem(tuple(variables), tuple(blocks), scaling=gamma**2)


def assemble_robust(sys_: SwitchedSystem, g: LabeledGraph, gamma: float = 1.0) -> FeasibilityProblem:
    """One block per edge with a single gain variable per node."""
    return _assemble(sys_, g, gamma, Kind.ROBUST)


def assemble_mode_dependent(
    sys_: SwitchedSystem, g: LabeledGraph, gamma: float = 1.0
) -> FeasibilityProblem:
    """One block per edge with a gain variable per (node, label)."""
    return _assemble(sys_, g, gamma, Kind.MODE_DEPENDENT)


@dataclass(frozen=True)
class Certificate:
    """Node matrices ``P_s`` and gains of a min-of-quadratics certificate.

    ``K[s]`` is an m x n gain (robust) or a tuple of M gains indexed by
    mode - 1 (mode-dependent).
    """

    graph: LabeledGraph
    kind: Kind
    P: tuple
    K: tuple
    gamma: float = 1.0
    alpha: Optional[float] = None
    margin: Optional[float] = None
    debruijn: Optional[tuple[int, int]] = None
    _stack: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind.parse(self.kind))
        P = tuple(np.array(p, dtype=float) for p in self.P)
        if len(P) != self.graph.node_count:
            raise ValueError("certificate needs one P matrix per graph node")
        if self.kind is Kind.ROBUST:
            K = tuple(np.array(k, dtype=float) for k in self.K)
        else:
            K = tuple(tuple(np.array(k, dtype=float) for k in ks) for ks in self.K)
            if any(len(ks) != self.graph.alphabet_size for ks in K):
                raise ValueError("mode-dependent certificate needs M gains per node")
        if len(K) != self.graph.node_count:
            raise ValueError("certificate needs gains for every graph node")
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "_stack", np.ascontiguousarray(np.stack(P)))

    @property
    def n(self) -> int:
        return self.P[0].shape[0]

    @property
    def m(self) -> int:
        k = self.K[0] if self.kind is Kind.ROBUST else self.K[0][0]
        return k.shape[0]

    @property
    def P_stack(self) -> np.ndarray:
        return self._stack

    def gain(self, node: int, mode: Optional[int] = None) -> np.ndarray:
        if self.kind is Kind.ROBUST:
            return self.K[node]
        return self.K[node][mode - 1]

    def with_gamma(self, gamma: float) -> "Certificate":
        return Certificate(
            self.graph, self.kind, self.P, self.K, gamma, self.alpha, self.margin, self.debruijn
        )

    def to_dict(self) -> dict:
        names = self.graph.node_names
        if self.debruijn is not None:
            graph = {"debruijn": {"M": self.debruijn[0], "l": self.debruijn[1]}}
        else:
            graph = self.graph.to_dict()
        if self.kind is Kind.ROBUST:
            K = {s: k.tolist() for s, k in zip(names, self.K)}
        else:
            K = {s: {str(i + 1): k.tolist() for i, k in enumerate(ks)} for s, ks in zip(names, self.K)}
        meta = {"margin": self.margin}
        if self.alpha is not None:
            meta["alpha"] = self.alpha
        return {
            "kind": self.kind.value,
            "graph": graph,
            "gamma": self.gamma,
            "P": {s: p.tolist() for s, p in zip(names, self.P)},
            "K": K,
            "meta": meta,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Certificate":
        try:
            kind = Kind.parse(doc["kind"])
            gdoc = doc["graph"]
            if "debruijn" in gdoc:
                M, l = int(gdoc["debruijn"]["M"]), int(gdoc["debruijn"]["l"])
                g, db = debruijn(M, l), (M, l)
            else:
                g, db = LabeledGraph.from_dict(gdoc), None
            names = g.node_names
            P = [doc["P"][s] for s in names]
            if kind is Kind.ROBUST:
                K = [doc["K"][s] for s in names]
            else:
                K = [[doc["K"][s][str(i)] for i in g.labels] for s in names]
            meta = doc.get("meta", {})
        except (KeyError, TypeError) as exc:
            raise ValueError(f"certificate document missing field: {exc}") from None
        return cls(
            g, kind, tuple(P), tuple(K), float(doc.get("gamma", 1.0)),
            meta.get("alpha"), meta.get("margin"), db,
        )


def load_certificate(text: str) -> Certificate:
    return Certificate.from_dict(json.loads(text))


def save_certificate(cert: Certificate) -> str:
    return json.dumps(cert.to_dict(), indent=1)


BUNDLED = {"bundled-ex2": "ex2_certificate.json", "bundled-ex4": "ex4_certificate.json"}


def bundled_certificate(name: str) -> tuple[Certificate, dict]:
    """Four-decimal certificates for ex2 and ex4 shipped with the package.

    Returns the certificate and its ``meta`` block, which names the system
    it belongs to.
    """
    if name not in BUNDLED:
        raise KeyError(f"unknown bundled certificate {name!r}; choose from {sorted(BUNDLED)}")
    text = resources.files("pcsynth.data").joinpath(BUNDLED[name]).read_text(encoding="utf-8")
    doc = json.loads(text)
    return Certificate.from_dict(doc), doc.get("meta", {})


@dataclass(frozen=True)
class SynthesisRequest:
    system: SwitchedSystem
    graph: LabeledGraph
    kind: Kind = Kind.ROBUST
    decay_gamma: float = 1.0
    alpha: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind.parse(self.kind))
        _check_gamma(self.decay_gamma)
        _check_graph(self.system, self.graph, self.kind)


@dataclass
class Attempt:
    """Outcome of one synthesis solve."""

    status: Status
    certificate: Optional[Certificate]
    solution: Optional[SdpSolution]
    reason: str = ""

    @property
    def feasible(self) -> bool:
        return self.status is Status.FEASIBLE


def _debruijn_params(g: LabeledGraph) -> Optional[tuple[int, int]]:
    M, N = g.alphabet_size, g.node_count
    l = 0
    while M**l < N:
        l += 1
    if M**l == N and g == debruijn(M, l):
        return (M, l)
    return None


def recover(request: SynthesisRequest, solution: SdpSolution) -> Certificate:
    """Change of variables ``P_s = Pbar_s^-1``, ``K = Kbar Pbar_s^-1``."""
    g = request.graph
    P, K = [], []
    for s in range(g.node_count):
        Pbar = solution.assignments[("P", s)]
        if np.linalg.cond(Pbar) > CONDITION_LIMIT:
            raise NumericalFailure(f"Pbar for node {g.node_names[s]} is ill-conditioned")
        Ps = np.linalg.inv(Pbar)
        P.append(0.5 * (Ps + Ps.T))
        if request.kind is Kind.ROBUST:
            K.append(solution.assignments[("K", s)] @ Ps)
        else:
            K.append(tuple(solution.assignments[("K", s, i)] @ Ps for i in g.labels))
    return Certificate(
        g,
        request.kind,
        tuple(P),
        tuple(K),
        gamma=request.decay_gamma,
        alpha=request.alpha,
        margin=solution.margin,
        debruijn=_debruijn_params(g),
    )


def attempt(request: SynthesisRequest, options: Optional[SolverOptions] = None) -> Attempt:
    """Assemble, solve, recover and self-verify; never raises on infeasibility."""
    from .controller import verify_certificate

    assemble = assemble_robust if request.kind is Kind.ROBUST else assemble_mode_dependent
    problem = assemble(request.system, request.graph, request.decay_gamma)
    sol = solve_feasibility(problem, options)
    if sol.status is not Status.FEASIBLE:
        return Attempt(sol.status, None, sol, f"solver reported {sol.status.value}")
    try:
        cert = recover(request, sol)
    except NumericalFailure as exc:
        return Attempt(Status.NUMERICAL_FAILURE, None, sol, str(exc))
    report = verify_certificate(request.system, cert)
    if not report.valid:
        return Attempt(
            Status.NUMERICAL_FAILURE, None, sol,
            f"recovered certificate fails verification (max margin {report.max_margin:.3e})",
        )
    return Attempt(Status.FEASIBLE, cert, sol)


def synthesize(request: SynthesisRequest, options: Optional[SolverOptions] = None) -> Certificate:
    """Synthesize a verified certificate or raise :class:`Infeasible` / :class:`NumericalFailure`."""
    res = attempt(request, options)
    if res.status is Status.INFEASIBLE:
        raise Infeasible(res.reason)
    if res.status is Status.NUMERICAL_FAILURE:
        raise NumericalFailure(res.reason)
    return res.certificate


def _probe(sys_, g, kind, gamma, options, alpha=None):
    res = attempt(SynthesisRequest(sys_, g, kind, gamma, alpha), options)
    if res.status is Status.NUMERICAL_FAILURE:
        log.warning("numerical failure at gamma=%.6g alpha=%s (%s); treated as infeasible",
                    gamma, alpha, res.reason)
    return res


def min_decay_rate(
    sys_: SwitchedSystem,
    g: LabeledGraph,
    kind: Union[Kind, str] = Kind.ROBUST,
    tol: float = 1e-4,
    options: Optional[SolverOptions] = None,
    bracket: Optional[tuple[float, float]] = None,
) -> tuple[float, Certificate]:
    """Bisection for the smallest certifiable decay rate gamma in (0, 1].

    ``bracket`` optionally narrows the search to ``(lo, hi)``; ``lo`` must be
    infeasible and ``hi`` feasible, otherwise the full interval is used.
    """
    kind = Kind.parse(kind)
    top = _probe(sys_, g, kind, 1.0, options)
    if not top.feasible:
        raise Infeasible("system not stabilizable with this graph")
    lo, hi, best = 0.0, 1.0, top.certificate
    if bracket is not None:
        blo, bhi = bracket
        upper = _probe(sys_, g, kind, bhi, options) if bhi < 1.0 else top
        if upper.feasible:
            hi, best = min(bhi, 1.0), upper.certificate
            if blo > 0:
                lower = _probe(sys_, g, kind, blo, options)
                if lower.feasible:
                    hi, best = blo, lower.certificate
                else:
                    lo = blo
        else:
            lo = max(lo, bhi)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        res = _probe(sys_, g, kind, mid, options)
        log.info("decay bisection: gamma=%.6f %s", mid, res.status.value)
        if res.feasible:
            hi, best = mid, res.certificate
        else:
            lo = mid
    return hi, best


def max_parameter(
    family: Union[str, Callable[[float], SwitchedSystem]],
    g: LabeledGraph,
    kind: Union[Kind, str] = Kind.ROBUST,
    bracket: tuple[float, float] = (0.3, 0.9),
    tol: float = 1e-4,
    options: Optional[SolverOptions] = None,
    gamma: float = 1.0,
) -> tuple[float, Certificate]:
    """Bisection for the largest parameter alpha keeping the LMIs feasible.

    ``family`` is ``"ex1"``/``"ex2"`` or any callable mapping alpha to a system.
    """
    kind = Kind.parse(kind)
    make = (lambda a: example_family(family, a)) if isinstance(family, str) else family
    lo, hi = bracket
    if not lo < hi:
        raise BracketError(f"bracket {bracket} is empty")
    low = _probe(make(lo), g, kind, gamma, options, alpha=lo)
    high = _probe(make(hi), g, kind, gamma, options, alpha=hi)
    if not low.feasible or high.feasible:
        raise BracketError(
            f"bracket {bracket} invalid: feasible at lo={low.feasible}, at hi={high.feasible}"
        )
    best = low.certificate
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        res = _probe(make(mid), g, kind, gamma, options, alpha=mid)
        log.info("parameter bisection: alpha=%.6f %s", mid, res.status.value)
        if res.feasible:
            lo, best = mid, res.certificate
        else:
            hi = mid
    return lo, best
