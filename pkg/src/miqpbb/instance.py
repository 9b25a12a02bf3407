from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch


@dataclass(frozen=True)
class Instance:
    """``min x'Qx + c'x + d  s.t.  Ax <= b``, the first ``n1`` variables integer."""

    Q: np.ndarray
    c: np.ndarray
    d: float
    A: np.ndarray
    b: np.ndarray
    n1: int
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=float)
        c = np.asarray(self.c, dtype=float).reshape(-1)
        b = np.asarray(self.b, dtype=float).reshape(-1)
        n = c.size
        A = np.asarray(self.A, dtype=float)
        if A.size == 0:
            A = A.reshape(b.size, n)
        if Q.shape != (n, n):
            raise DimensionMismatch(f"Q has shape {Q.shape}, expected ({n}, {n})")
        if A.shape != (b.size, n):
            raise DimensionMismatch(f"A has shape {A.shape}, expected ({b.size}, {n})")
        if not 0 <= int(self.n1) <= n:
            raise DimensionMismatch(f"n1 = {self.n1} outside [0, {n}]")
        for name, val in (("Q", Q), ("c", c), ("A", A), ("b", b)):
            object.__setattr__(self, name, val)
        object.__setattr__(self, "d", float(self.d))
        object.__setattr__(self, "n1", int(self.n1))

    @property
    def n(self) -> int:
        return self.c.size

    @property
    def m(self) -> int:
        return self.b.size

    def objective(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(x @ (self.Q @ x) + self.c @ x + self.d)

    def violation(self, x) -> float:
        if self.m == 0:
            return 0.0
        return float(max(np.max(self.A @ np.asarray(x, dtype=float) - self.b), 0.0))

    def permuted(self, order) -> "Instance":
        """Reindex variables; ``order`` must keep integer variables first."""
        order = np.asarray(order, dtype=int)
        if sorted(order[: self.n1]) != list(range(self.n1)):
            raise ValueError("permutation must map integer variables onto the first n1 slots")
        return Instance(
            self.Q[np.ix_(order, order)], self.c[order], self.d,
            self.A[:, order], self.b, self.n1, dict(self.metadata),
        )
