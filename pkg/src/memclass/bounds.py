"""Generalization-bound arithmetic for memory classifiers.

All logarithms are natural. ``rho`` and ``kappa`` are free positive
constants (default 1).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class BoundDomainError(ValueError):
    pass


@dataclass(frozen=True)
class BoundParams:
    n: int
    q: int
    delta: float
    rho: float = 1.0
    kappa: float = 1.0
    rademacher_H: tuple = ()
    empirical_risk: float = 0.0
    n_k_plus: tuple | None = None

    def __post_init__(self):
        if self.n < 1 or self.q < 1:
            raise ValueError("n and q must be at least 1")
        if not 0.0 < self.delta <= 1.0 / self.q:
            raise ValueError(f"delta must lie in (0, 1/q] = (0, {1.0 / self.q}]")
        if self.rho <= 0 or self.kappa <= 0:
            raise ValueError("rho and kappa must be positive")
        rh = tuple(float(r) for r in self.rademacher_H) or (0.0,) * self.q
        if len(rh) != self.q:
            raise ValueError("need one Rademacher estimate per memory")
        if any(not 0.0 <= r <= 1.0 for r in rh):
            raise ValueError("Rademacher estimates must lie in [0, 1]")
        object.__setattr__(self, "rademacher_H", rh)
        if not 0.0 <= self.empirical_risk <= 1.0:
            raise ValueError("empirical_risk must lie in [0, 1]")
        if self.n_k_plus is not None:
            nk = tuple(int(v) for v in self.n_k_plus)
            if len(nk) != self.q or any(not 0 <= v <= self.n for v in nk):
                raise ValueError("n_k_plus needs q entries, each in [0, n]")
            object.__setattr__(self, "n_k_plus", nk)


def c_term(n, q, delta, rho=1.0):
    """Confidence term C(n, q, delta).

    ``(1/delta) sqrt(log q / n) (2 + sqrt(log(rho^2 n / log q))) + sqrt(log(4/delta) / n)``;
    for ``q = 1`` the first summand vanishes.
    """
    if n < 1 or q < 1:
        raise ValueError("n and q must be at least 1")
    if not delta > 0:
        raise ValueError("delta must be positive")
    if rho <= 0:
        raise ValueError("rho must be positive")
    tail = math.sqrt(math.log(4.0 / delta) / n)
    if q == 1:
        return tail
    log_q = math.log(q)
    inner = rho * rho * n / log_q
    if inner <= 1.0:
        raise BoundDomainError(
            f"log(rho^2 n / log q) is not positive: rho^2 n / log q = {inner:.6g} <= 1"
        )
    return (1.0 / delta) * math.sqrt(log_q / n) * (2.0 + math.sqrt(math.log(inner))) + tail


def count_selector_hypotheses(n, q) -> int:
    """``n * C(n-1, q-1)``, exact."""
    if not 1 <= q <= n:
        raise ValueError(f"need 1 <= q <= n, got q={q}, n={n}")
    return n * math.comb(n - 1, q - 1)


def selector_rademacher_bound(n, q):
    """``q (1 + log n) / sqrt(n)``."""
    if n < 1 or q < 1:
        raise ValueError("n and q must be at least 1")
    return q * (1.0 + math.log(n)) / math.sqrt(n)


def generalization_bound_rhs(p: BoundParams) -> float:
    """``R_emp + 4q[(q(1 + log n) + kappa)/sqrt(n) + max_k R(H_k)] + C(n, q, delta)``."""
    n, q = p.n, p.q
    complexity = (q * (1.0 + math.log(n)) + p.kappa) / math.sqrt(n) + max(p.rademacher_H)
    return p.empirical_risk + 4.0 * q * complexity + c_term(n, q, p.delta, p.rho)


def intermediate_bound_rhs(p: BoundParams) -> float:
    """``R_emp + sum_k min(n_k+/n, 4[R(H_k) + R(S'_k)]) + C(n, q+1, delta)``

    with ``R(S'_k)`` bounded by ``q(1 + log n)/sqrt(n) + kappa/sqrt(n)``.
    """
    if p.n_k_plus is None:
        raise ValueError("intermediate bound needs n_k_plus")
    n, q = p.n, p.q
    sel = selector_rademacher_bound(n, q) + p.kappa / math.sqrt(n)
    total = sum(min(nk / n, 4.0 * (rh + sel)) for nk, rh in zip(p.n_k_plus, p.rademacher_H))
    return p.empirical_risk + total + c_term(n, q + 1, p.delta, p.rho)


def is_vacuous(n, q):
    """Whether the selector part alone, ``4q * q(1 + log n)/sqrt(n)``, reaches 1."""
    return 4.0 * q * selector_rademacher_bound(n, q) >= 1.0


def bound_summary(p: BoundParams) -> dict:
    rhs = generalization_bound_rhs(p)
    out = {
        "c_term": c_term(p.n, p.q, p.delta, p.rho),
        "selector_bound": selector_rademacher_bound(p.n, p.q),
        "rhs": rhs,
        "rhs_clamped": min(rhs, 1.0),
        "vacuous": bool(is_vacuous(p.n, p.q)),
    }
    if p.n_k_plus is not None:
        out["intermediate_rhs"] = intermediate_bound_rhs(p)
    return out


def empirical_rademacher_finite(predictions, num_draws=10000, seed=0, chunk=4096):
    """Monte-Carlo ``E_eps sup_h (1/n) sum_i eps_i h(x_i)`` for a finite class.

    ``predictions`` is ``|H| x n`` with entries in [-1, 1].
    """
    P = np.atleast_2d(np.asarray(predictions, dtype=np.float64))
    if P.shape[0] == 0 or P.size == 0:
        raise ValueError("hypothesis set is empty")
    if np.any(np.abs(P) > 1.0):
        raise ValueError("predictions must lie in [-1, 1]")
    n = P.shape[1]
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), 0x72616465])))
    total = 0.0
    done = 0
    while done < num_draws:
        m = min(chunk, num_draws - done)
        eps = rng.integers(0, 2, size=(m, n)) * 2.0 - 1.0
        total += float(np.sum(np.max(eps @ P.T, axis=1)))
        done += m
    return total / (num_draws * n)


def massart_bound(predictions, form="standard"):
    """Massart's finite-class bound on the empirical Rademacher complexity.

    ``form="standard"``: ``max ||a - a_bar|| sqrt(2 log N) / n``.
    ``form="log"``: ``max ||a|| log N / n``, the variant used for the
    selector count. It dominates the uncentered Massart bound
    ``max ||a|| sqrt(2 log N) / n`` only once ``log N >= 2``.
    """
    A = np.atleast_2d(np.asarray(predictions, dtype=np.float64))
    N, n = A.shape
    if N == 0:
        raise ValueError("hypothesis set is empty")
    if form == "standard":
        radius = np.max(np.linalg.norm(A - A.mean(axis=0), axis=1))
        return float(radius * math.sqrt(2.0 * math.log(N)) / n) if N > 1 else 0.0
    if form == "log":
        return float(np.max(np.linalg.norm(A, axis=1)) * math.log(N) / n)
    raise ValueError(f"unknown form {form!r}")
