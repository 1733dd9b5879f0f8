"""Dense tensor algebra: vectorization, matricization, low-rank composition,
and the mode contractions used by the Gibbs updates.

Conventions
-----------
Tensors are plain ``numpy.ndarray`` objects; the order of a tensor is
``ndim`` and its dimension vector is ``shape``.  The canonical vectorized
order places the *first* index fastest (Fortran order), so ``vectorize`` and
``matricize`` use ``order="F"`` semantics.  Modes are 0-based.

All functions are pure: they never mutate their inputs and allocate fresh
output arrays, so they are safe to call concurrently.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

__all__ = [
    "vectorize",
    "matricize",
    "inner",
    "cp_compose",
    "tucker_compose",
    "summand_project",
    "margin_contract",
    "stack_contract_all",
    "stack_contract_except",
]

_LETTERS = "abcdefghijklmnopqrstuvwxy"


def _as_tensor(t) -> np.ndarray:
    t = np.asarray(t, dtype=np.float64)
    if t.ndim == 0:
        raise ValueError("tensor must have order >= 1")
    return t


def vectorize(t) -> np.ndarray:
    """Flatten a tensor to a vector with the first index varying fastest."""
    return _as_tensor(t).reshape(-1, order="F")


def matricize(t, mode: int) -> np.ndarray:
    """Mode-``mode`` matricization.

    Row ``l`` of the result collects every entry whose index along ``mode``
    equals ``l``; columns enumerate the remaining indices with earlier modes
    varying fastest.
    """
    t = _as_tensor(t)
    if not 0 <= mode < t.ndim:
        raise ValueError(f"mode {mode} out of range for order-{t.ndim} tensor")
    return np.moveaxis(t, mode, 0).reshape(t.shape[mode], -1, order="F")


def inner(a, b) -> float:
    """Inner product: the dot product of the two vectorized tensors."""
    a = _as_tensor(a)
    b = _as_tensor(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.dot(a.reshape(-1), b.reshape(-1)))


def cp_compose(factors: Sequence[np.ndarray]) -> np.ndarray:
    """Sum of rank-one outer products, one factor column per mode per summand.

    ``factors[j]`` has shape ``(p_j, R)``; all factor matrices must share the
    same column count ``R``.
    """
    factors = [np.atleast_2d(np.asarray(f, dtype=np.float64)) for f in factors]
    if not factors:
        raise ValueError("need at least one factor matrix")
    ncols = {f.shape[1] for f in factors}
    if len(ncols) != 1:
        raise ValueError(f"factor column counts differ: {sorted(ncols)}")
    d = len(factors)
    if d > len(_LETTERS):
        raise ValueError("tensor order too large")
    subs = ",".join(f"{_LETTERS[j]}z" for j in range(d))
    return np.einsum(f"{subs}->{_LETTERS[:d]}", *factors)


def tucker_compose(core, factors: Sequence[np.ndarray]) -> np.ndarray:
    """Compose a full tensor from a core tensor and per-mode factor matrices.

    Entry ``v`` of the result is ``sum_r core[r] * prod_j factors[j][v_j, r_j]``.
    Evaluated as a sequence of single-mode contractions, never by
    materializing the individual rank-one summands.
    """
    core = _as_tensor(core)
    factors = [np.atleast_2d(np.asarray(f, dtype=np.float64)) for f in factors]
    if len(factors) != core.ndim:
        raise ValueError(
            f"core has order {core.ndim} but {len(factors)} factors were given"
        )
    for j, f in enumerate(factors):
        if f.shape[1] != core.shape[j]:
            raise ValueError(
                f"factor {j} has {f.shape[1]} columns, core dim {j} is {core.shape[j]}"
            )
    out = core
    for f in factors:
        # contract the leading core axis; the new spatial axis lands at the
        # end, so after D steps the axes come out in mode order
        out = np.tensordot(out, f, axes=(0, 1))
    return out


def summand_project(x, betas: Sequence[np.ndarray]) -> float:
    """Inner product of ``x`` with the outer product of one vector per mode,
    computed by successive contractions (the outer product is never formed)."""
    x = _as_tensor(x)
    betas = [np.asarray(b, dtype=np.float64).reshape(-1) for b in betas]
    if len(betas) != x.ndim:
        raise ValueError(f"expected {x.ndim} vectors, got {len(betas)}")
    out = x
    for j, b in enumerate(betas):
        if b.shape[0] != x.shape[j]:
            raise ValueError(f"vector {j} has length {b.shape[0]}, dim is {x.shape[j]}")
        out = np.tensordot(b, out, axes=(0, 0))
    return float(out)


def margin_contract(x, mode: int, others: Sequence[np.ndarray]) -> np.ndarray:
    """Contract ``x`` against one vector per mode except ``mode``.

    ``others`` lists the vectors for the remaining modes in ascending mode
    order.  The result ``m`` satisfies ``beta @ m == summand_project(x, full)``
    for any vector ``beta`` placed at ``mode``.
    """
    x = _as_tensor(x)
    if not 0 <= mode < x.ndim:
        raise ValueError(f"mode {mode} out of range for order-{x.ndim} tensor")
    others = [np.asarray(b, dtype=np.float64).reshape(-1) for b in others]
    if len(others) != x.ndim - 1:
        raise ValueError(f"expected {x.ndim - 1} vectors, got {len(others)}")
    out = np.moveaxis(x, mode, -1)
    for b in others:
        if b.shape[0] != out.shape[0]:
            raise ValueError("vector length does not match tensor dim")
        out = np.tensordot(b, out, axes=(0, 0))
    return out


def stack_contract_all(xs, factors: Sequence[np.ndarray]) -> np.ndarray:
    """Contract a stack of tensors ``xs`` of shape ``(n, p_0, ..., p_{D-1})``
    with every factor matrix.

    Returns shape ``(n, R_0, ..., R_{D-1})``; entry ``[i, r]`` is the inner
    product of ``xs[i]`` with the rank-one summand built from columns ``r``.
    """
    out = np.asarray(xs, dtype=np.float64)
    for f in factors:
        out = np.tensordot(out, f, axes=(1, 0))
    return out


def stack_contract_except(xs, factors: Sequence[np.ndarray], skip: int) -> np.ndarray:
    """Like :func:`stack_contract_all` but leaves mode ``skip`` uncontracted.

    Returns shape ``(n, p_skip, R_0, ..., R_{D-1})`` with the rank axis of
    mode ``skip`` omitted and the remaining rank axes in ascending mode order.
    For any column ``b`` of factor ``skip``, contracting the ``p_skip`` axis
    with ``b`` reproduces the matching slice of :func:`stack_contract_all`.
    """
    out = np.asarray(xs, dtype=np.float64)
    axis = 1
    for k, f in enumerate(factors):
        if k == skip:
            axis += 1
            continue
        out = np.tensordot(out, f, axes=(axis, 0))
    return out
