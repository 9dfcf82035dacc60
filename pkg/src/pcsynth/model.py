"""Switched linear control systems x(k+1) = A_i x(k) + B_i u(k).

Also provides the built-in example families, switching signals, and LPV
convex combinations of the mode matrices.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

import numpy as np


class ModelError(ValueError):
    """Raised for malformed systems, signals, or weights."""


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SwitchedSystem:
    """A finite family of modes ``(A_i, B_i)``, i = 1..M."""

    A: tuple[np.ndarray, ...]
    B: tuple[np.ndarray, ...]

    def __post_init__(self):
        if len(self.A) != len(self.B):
            raise ModelError("A and B must list the same number of modes")
        if not self.A:
            raise ModelError("system needs at least one mode")
        A = tuple(_frozen(a) for a in self.A)
        B = tuple(_frozen(b) for b in self.B)
        n = A[0].shape[0] if A[0].ndim == 2 else 0
        m = B[0].shape[1] if B[0].ndim == 2 else 0
        if n < 1 or m < 1:
            raise ModelError("mode 1: A must be n x n and B n x m with n, m >= 1")
        for k, (a, b) in enumerate(zip(A, B), start=1):
            if a.shape != (n, n):
                raise ModelError(f"mode {k}: A has shape {a.shape}, expected {(n, n)}")
            if b.shape != (n, m):
                raise ModelError(f"mode {k}: B has shape {b.shape}, expected {(n, m)}")
            if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
                raise ModelError(f"mode {k}: non-finite entries")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def n(self) -> int:
        return self.A[0].shape[0]

    @property
    def m(self) -> int:
        return self.B[0].shape[1]

    @property
    def M(self) -> int:
        return len(self.A)

    def mode(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """Mode ``i`` (1-based)."""
        if not 1 <= i <= self.M:
            raise ModelError(f"mode {i} outside [1, {self.M}]")
        return self.A[i - 1], self.B[i - 1]

    def __eq__(self, other):
        if not isinstance(other, SwitchedSystem) or other.M != self.M:
            return NotImplemented
        return all(np.array_equal(a, c) for a, c in zip(self.A + self.B, other.A + other.B))

    __hash__ = None

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "modes": [{"A": a.tolist(), "B": b.tolist()} for a, b in zip(self.A, self.B)],
        }


def load_system(text: str) -> SwitchedSystem:
    """Parse a system document ``{"n", "m", "modes": [{"A", "B"}, ...]}``."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelError(f"invalid system JSON: {exc}") from None
    return system_from_dict(doc)


def system_from_dict(doc: dict) -> SwitchedSystem:
    try:
        n, m, modes = int(doc["n"]), int(doc["m"]), doc["modes"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelError(f"system document missing field: {exc}") from None
    A, B = [], []
    for k, mode in enumerate(modes, start=1):
        try:
            a = np.array(mode["A"], dtype=float)
            b = np.array(mode["B"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise ModelError(f"mode {k}: cannot read matrices ({exc})") from None
        if a.shape != (n, n):
            raise ModelError(f"mode {k}: A has shape {a.shape}, expected {(n, n)}")
        if b.shape != (n, m):
            raise ModelError(f"mode {k}: B has shape {b.shape}, expected {(n, m)}")
        A.append(a)
        B.append(b)
    return SwitchedSystem(tuple(A), tuple(B))


def save_system(sys_: SwitchedSystem) -> str:
    # json writes floats with repr(), the shortest string that round-trips exactly
    return json.dumps(sys_.to_dict())


EXAMPLES = ("ex1", "ex2", "ex3", "ex4", "ex5")


def example_family(name: str, alpha: Optional[float] = None) -> SwitchedSystem:
    """The five example systems; ``ex1``/``ex2`` take the free parameter alpha."""
    if name not in EXAMPLES:
        raise ModelError(f"unknown example {name!r}; choose from {', '.join(EXAMPLES)}")
    if name in ("ex1", "ex2"):
        if alpha is None:
            raise ModelError(f"{name} requires alpha")
        if not alpha > 0:
            raise ModelError(f"alpha must be positive, got {alpha}")
        a = float(alpha)
        A = ([[0.1, 0.9], [0.0, 0.1]], [[a, 0.0], [1.0, a]])
        B1 = [[0.0], [0.0]] if name == "ex1" else [[1.0], [0.0]]
        return SwitchedSystem(A, (B1, [[a], [-1.0]]))
    if alpha is not None:
        raise ModelError(f"{name} takes no alpha")
    if name == "ex3":
        A = ([[0.0, 1.0], [-1.0, 0.0]], [[-1.0, 0.0], [0.0, -0.95]])
        return SwitchedSystem(A, ([[1.0], [0.0]],) * 2)
    if name == "ex4":
        A = (
            [[1.0, 0.2], [0.0, 0.5]],
            [[1.1, 0.2], [0.0, -0.5]],
            [[0.5, 0.8], [1.1, 0.5]],
        )
        return SwitchedSystem(A, ([[1.0], [0.0]],) * 3)
    # ex5: A_4 first row is (0.32, 0, 0), not symmetric with its first column
    A = (
        [[1.0, 0.25, 0.0], [0.25, 1.0, -0.2], [0.0, 0.0, -0.16]],
        [[1.0, 0.25, 0.0], [0.25, 1.0, -0.05], [0.0, 0.0, 0.16]],
        [[1.0, 0.32, 0.0], [0.32, 1.0, -0.05], [0.0, 0.0, -0.16]],
        [[0.32, 0.0, 0.0], [0.32, 1.0, -0.2], [0.0, 0.0, 0.16]],
    )
    return SwitchedSystem(A, ([[0.0], [0.0], [0.3]],) * 4)


SIMPLEX_TOL = 1e-12


def check_weights(w, M: int) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.shape != (M,):
        raise ModelError(f"weights must have length {M}, got shape {w.shape}")
    if np.any(w < 0) or abs(w.sum() - 1.0) > SIMPLEX_TOL:
        raise ModelError(f"weights {w} are not in the probability simplex")
    return w


def convex_combination(sys_: SwitchedSystem, w) -> tuple[np.ndarray, np.ndarray]:
    """``(sum_i w_i A_i, sum_i w_i B_i)`` for simplex weights ``w``."""
    w = check_weights(w, sys_.M)
    nz = np.flatnonzero(w)
    if len(nz) == 1 and w[nz[0]] == 1.0:
        # exact vertex: return the mode itself, no rounding
        return np.array(sys_.A[nz[0]]), np.array(sys_.B[nz[0]])
    A = np.tensordot(w, np.stack(sys_.A), axes=1)
    B = np.tensordot(w, np.stack(sys_.B), axes=1)
    return A, B


@dataclass(frozen=True)
class SwitchingSignal:
    """A finite mode sequence sigma(0), sigma(1), ... over 1..M."""

    values: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(int(v) for v in self.values))

    def __len__(self):
        return len(self.values)

    def __iter__(self) -> Iterator[int]:
        return iter(self.values)

    def __getitem__(self, k):
        return self.values[k]

    def validate(self, M: int) -> None:
        bad = [v for v in self.values if not 1 <= v <= M]
        if bad:
            raise ModelError(f"switching signal has modes outside [1, {M}]: {bad[:5]}")

    @classmethod
    def periodic(cls, pattern: Sequence[int], length: int) -> "SwitchingSignal":
        if not pattern:
            raise ModelError("periodic pattern must be non-empty")
        return cls(tuple(pattern[k % len(pattern)] for k in range(length)))

    @classmethod
    def random(cls, M: int, length: int, seed: int) -> "SwitchingSignal":
        rng = np.random.default_rng(seed)
        return cls(tuple(int(v) for v in rng.integers(1, M + 1, size=length)))

    @classmethod
    def parse(cls, spec: str, M: int, length: int, seed: int = 0) -> "SwitchingSignal":
        """Parse ``periodic:1,2,3``, ``random`` / ``random:SEED`` or ``1,2,2,1``."""
        kind, _, rest = spec.partition(":")
        try:
            if kind == "periodic":
                sig = cls.periodic([int(v) for v in rest.split(",")], length)
            elif kind == "random":
                sig = cls.random(M, length, int(rest) if rest else seed)
            else:
                sig = cls(tuple(int(v) for v in spec.split(",")))
        except ValueError:
            raise ModelError(f"cannot parse switching signal {spec!r}") from None
        sig.validate(M)
        return sig


def random_simplex_weights(M: int, length: int, seed: int) -> np.ndarray:
    """``length`` weight vectors drawn uniformly from the simplex."""
    rng = np.random.default_rng(seed)
    return rng.dirichlet(np.ones(M), size=length)
