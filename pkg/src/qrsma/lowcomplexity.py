"""Low-complexity denominator solves for the power iteration.

Under the IID channel-error approximation every denominator block is a
strictly positive diagonal core plus a handful of rank-one signal outer
products, so its inverse is maintained with Sherman-Morrison updates:

* the slot-0 (common stream) block is exactly diagonal;
* private slots share one rank-one chain built once per iteration and differ
  only by a single per-slot downdate.

This turns the per-iteration inversion cost from O(N^3 K) into O(N^2 K).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rates import RateMatrices

__all__ = ["SmWeights", "SmBlockInverse", "build_diag_core", "sm_block_solve"]

_DENOM_GUARD = 1e-12


@dataclass(frozen=True)
class SmWeights:
    """Scalar weights of the denominator assembly.

    c1 weighs the per-antenna power terms, c2 the softmin-weighted common-rate
    denominators (absent without a common stream), c3 the private ones.
    """

    c1: np.ndarray            # (N,)
    c2: np.ndarray | None     # (K,)
    c3: np.ndarray            # (K,)

    @property
    def chain(self) -> np.ndarray:
        """Coefficients of the shared rank-one chain u_k u_k^H."""
        return self.c3 if self.c2 is None else self.c2 + self.c3


def build_diag_core(
    slot: int, weights: SmWeights, alpha: np.ndarray, matrices: RateMatrices, rho: float
) -> np.ndarray:
    """Diagonal core of the denominator block for one stream slot.

    Valid only in IID error mode.  Slot 0 with a common stream present uses
    the common-block form (the whole block; it carries no rank-one terms);
    other slots use the shared private core that the rank-one chain sits on.
    alpha is the per-antenna quantization loss diagonal.
    """
    terms = matrices.terms
    if terms.err_diag is None:
        raise ValueError("diagonal denominator cores require the IID error mode")
    ridge = matrices.ridge
    base = float(np.sum(weights.c1)) + weights.c1 / (rho * alpha)
    if terms.common and slot == 0:
        return (
            base
            + weights.c2 @ (terms.err_diag + terms.dq)
            + weights.c3 @ terms.dq
            + (float(np.sum(weights.c2)) + float(np.sum(weights.c3))) * ridge
        )
    gamma = weights.chain
    return base + gamma @ (terms.err_diag + terms.dq) + float(np.sum(gamma)) * ridge


@dataclass
class SmBlockInverse:
    """Cached Sherman-Morrison state for all denominator blocks of one iterate."""

    d0: np.ndarray | None     # (N,) diagonal of the common block
    z_inv: np.ndarray         # (N, N) inverse of the shared chain matrix
    V: np.ndarray             # (N, K) columns z_inv @ u_k
    q: np.ndarray             # (K,) u_k^H z_inv u_k
    c3: np.ndarray            # (K,)
    steer: np.ndarray         # (N, K)
    offset: int
    d_rest: np.ndarray        # (N,) private-core diagonal (fallback assembly)
    fallback: dict            # slot -> dense block for near-singular downdates
    scale: float              # lam_den multiplier carried by the contract

    @classmethod
    def build(cls, weights: SmWeights, alpha: np.ndarray, matrices: RateMatrices,
              rho: float, lam_den: float = 1.0):
        terms = matrices.terms
        n, k = terms.n_antennas, terms.n_users
        off = 1 if terms.common else 0
        d0 = build_diag_core(0, weights, alpha, matrices, rho) if terms.common else None
        d_rest = build_diag_core(off, weights, alpha, matrices, rho)

        z_inv = np.diag(1.0 / d_rest).astype(complex)
        gamma = weights.chain
        U = terms.steer
        for j in range(k):
            v = z_inv @ U[:, j]
            denom = 1.0 + gamma[j] * float(np.real(U[:, j].conj() @ v))
            z_inv -= (gamma[j] / denom) * np.outer(v, v.conj())
        V = z_inv @ U
        q = np.real(np.einsum("nk,nk->k", U.conj(), V))

        fallback = {}
        for j in range(k):
            if abs(1.0 - weights.c3[j] * q[j]) < _DENOM_GUARD:
                block = np.diag(d_rest).astype(complex)
                for m in range(k):
                    block += gamma[m] * np.outer(U[:, m], U[:, m].conj())
                block -= weights.c3[j] * np.outer(U[:, j], U[:, j].conj())
                fallback[j + off] = block
        return cls(
            d0=d0, z_inv=z_inv, V=V, q=q, c3=weights.c3, steer=U, offset=off,
            d_rest=d_rest, fallback=fallback, scale=lam_den,
        )

    def solve(self, slot: int, rhs: np.ndarray) -> np.ndarray:
        """Apply the inverse of one denominator block to a vector."""
        if self.offset and slot == 0:
            return rhs / (self.scale * self.d0)
        j = slot - self.offset
        if slot in self.fallback:
            return np.linalg.solve(self.scale * self.fallback[slot], rhs)
        y = self.z_inv @ rhs
        corr = self.c3[j] / (1.0 - self.c3[j] * self.q[j])
        y = y + corr * self.V[:, j] * (self.steer[:, j].conj() @ y)
        return y / self.scale

    def solve_all(self, Z: np.ndarray) -> np.ndarray:
        out = np.empty_like(Z)
        for s in range(Z.shape[1]):
            out[:, s] = self.solve(s, Z[:, s])
        return out

    def dense_blocks(self) -> list[np.ndarray]:
        """Materialized denominator blocks (tests and fallbacks only)."""
        k = self.steer.shape[1]
        gamma_chain = np.linalg.inv(self.z_inv)  # shared chain matrix
        blocks = []
        if self.offset:
            blocks.append(self.scale * np.diag(self.d0).astype(complex))
        for j in range(k):
            u = self.steer[:, j]
            blocks.append(self.scale * (gamma_chain - self.c3[j] * np.outer(u, u.conj())))
        return blocks


def sm_block_solve(slot: int, rhs: np.ndarray, state: SmBlockInverse) -> np.ndarray:
    """Solve one denominator block against a right-hand side via the cache."""
    return state.solve(slot, rhs)
