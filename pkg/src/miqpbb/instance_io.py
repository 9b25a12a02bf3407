"""Random instance generation and JSON (de)serialisation of instances and results."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, NotPositiveDefinite, ParseError
from .instance import Instance
from .numerics import cholesky_spd

INSTANCE_FORMAT = "miqp-instance"
RESULT_FORMAT = "miqp-result"
RNG_NAME = "numpy.PCG64"
SYMMETRY_TOL = 1e-9


@dataclass(frozen=True)
class GenSpec:
    n: int
    n1: int
    m: int
    kind: str = "a"
    seed: int = 0
    min_eig: float = 0.0

    def __post_init__(self):
        if self.n < 1 or not 0 <= self.n1 <= self.n:
            raise ValueError(f"need n >= 1 and 0 <= n1 <= n, got n={self.n}, n1={self.n1}")
        if self.m < 0:
            raise ValueError("m must be non-negative")
        if self.kind.lower() not in ("a", "b"):
            raise ValueError(f"kind must be 'a' or 'b', got {self.kind!r}")
        if not 0.0 <= self.min_eig < 1.0:
            raise ValueError("min_eig must lie in [0, 1)")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


def _orthonormal_vectors(rng, n):
    V = np.empty((n, n))
    k = 0
    while k < n:
        v = rng.uniform(-1.0, 1.0, n)
        for j in range(k):
            v -= (V[j] @ v) * V[j]
        norm = np.linalg.norm(v)
        if norm < 1e-8:
            continue
        V[k] = v / norm
        k += 1
    return V


def _draw(spec: GenSpec, seed: int) -> Instance:
    rng = np.random.Generator(np.random.PCG64(seed))
    n, m = spec.n, spec.m
    lam = spec.min_eig + (1.0 - spec.min_eig) * rng.uniform(0.0, 1.0, n)
    V = _orthonormal_vectors(rng, n)
    Q = (V.T * lam) @ V
    Q = 0.5 * (Q + Q.T)
    c = rng.uniform(-1.0, 1.0, n)
    if spec.kind.lower() == "a":
        A = rng.uniform(-1.0, 1.0, (m, n))
        b = rng.uniform(-1.0, 1.0, m)
    else:
        A = rng.uniform(0.0, 1.0, (m, n))
        b = 0.5 * A.sum(axis=1)
    return Instance(Q, c, 0.0, A, b, spec.n1)


def generate(spec: GenSpec) -> Instance:
    """Random instance with spectrum U[0, 1] and constraint rows of type a or b."""
    retries = 0
    seed = spec.seed
    inst = _draw(spec, seed)
    try:
        cholesky_spd(inst.Q)
    except NotPositiveDefinite:
        retries = 1
        seed = (spec.seed + 0x9E3779B97F4A7C15) % 2**64
        inst = _draw(spec, seed)
    meta = {
        "seed": spec.seed, "kind": spec.kind.lower(), "rng": RNG_NAME,
        "min_eig": spec.min_eig, "retries": retries,
    }
    return Instance(inst.Q, inst.c, inst.d, inst.A, inst.b, inst.n1, meta)


def instance_to_dict(inst: Instance) -> dict:
    return {
        "format": INSTANCE_FORMAT,
        "version": 1,
        "n": inst.n,
        "n1": inst.n1,
        "m": inst.m,
        "Q": inst.Q.tolist(),
        "c": inst.c.tolist(),
        "d": inst.d,
        "A": inst.A.tolist(),
        "b": inst.b.tolist(),
        "metadata": inst.metadata,
    }


def _field(data, name, kind):
    if name not in data:
        raise ParseError("missing field", field=name)
    value = data[name]
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ParseError(f"expected an integer, got {value!r}", field=name)
        return value
    if kind == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ParseError(f"expected a number, got {value!r}", field=name)
        return float(value)
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise ParseError("expected a numeric array", field=name) from None
    if not np.all(np.isfinite(arr)):
        raise ParseError("non-finite entry", field=name)
    return arr


def instance_from_dict(data: dict) -> Instance:
    if not isinstance(data, dict):
        raise ParseError("top level must be an object")
    if data.get("format", INSTANCE_FORMAT) != INSTANCE_FORMAT:
        raise ParseError(f"unexpected format {data.get('format')!r}", field="format")
    n = _field(data, "n", "int")
    n1 = _field(data, "n1", "int")
    m = _field(data, "m", "int")
    if n < 1 or m < 0:
        raise ParseError(f"need n >= 1 and m >= 0, got n={n}, m={m}", field="n")
    if not 0 <= n1 <= n:
        raise ParseError(f"n1 = {n1} must lie in [0, n = {n}]", field="n1")
    Q = _field(data, "Q", "array")
    c = _field(data, "c", "array")
    A = _field(data, "A", "array")
    b = _field(data, "b", "array")
    d = _field(data, "d", "float")
    if A.size == 0:
        A = A.reshape(m, n)
    for name, arr, shape in (("Q", Q, (n, n)), ("c", c, (n,)), ("A", A, (m, n)), ("b", b, (m,))):
        if arr.shape != shape:
            raise DimensionMismatch(f"field {name!r} has shape {arr.shape}, expected {shape}")
    asym = float(np.max(np.abs(Q - Q.T)))
    if asym > SYMMETRY_TOL:
        raise ParseError(f"Q is not symmetric (max |q_ij - q_ji| = {asym:.3e})", field="Q")
    meta = data.get("metadata") or {}
    if not isinstance(meta, dict):
        raise ParseError("metadata must be an object", field="metadata")
    return Instance(Q, c, d, A, b, n1, meta)


def write_instance(path, inst: Instance) -> None:
    Path(path).write_text(json.dumps(instance_to_dict(inst), indent=1) + "\n")


def read_instance(path) -> Instance:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno) from None
    return instance_from_dict(data)


def _num(v):
    # json has no inf/nan; keep the file strictly valid
    if isinstance(v, float) and not math.isfinite(v):
        return None if math.isnan(v) else ("inf" if v > 0 else "-inf")
    return v


def result_to_dict(result, instance_name: str = "") -> dict:
    return {
        "format": RESULT_FORMAT,
        "instance": instance_name,
        "status": result.status.value,
        "value": _num(result.value),
        "lower_bound": _num(result.lower_bound),
        "x": None if result.x is None else result.x.tolist(),
        "nodes": result.nodes,
        "it_root": result.it_root,
        "it_mean": result.it_per_node_mean,
        "ptime": round(result.preprocess_seconds, 3),
        "time": round(result.solve_seconds, 3),
        "max_violation": result.max_constraint_violation,
        "solver": {k: _num(v) for k, v in result.options.items()},
    }


def write_result(path, result, instance_name: str = "") -> None:
    Path(path).write_text(json.dumps(result_to_dict(result, instance_name), indent=1) + "\n")
