"""Dual gradient, block-sparse dual Hessian and the ADD-N direction.

The gradient is ``g_i^k = sum_j (r_ij^k - r_ji^k) - a_i^k`` (outflow minus
inflow minus arrivals) and the Hessian is its Jacobian with respect to the
duals.  For the quadratic objective every link contributes the symmetric
projector

    P = diag(1_A) - [mu > 0] * 1_A 1_A^T / |A|

(``A`` the link's active set) to blocks ``(i,i)`` and ``(j,j)`` and ``-P`` to
blocks ``(i,j)`` and ``(j,i)``.  Destination coordinates ``(dest[k], k)`` are
zeroed rows/columns in the ``K x K`` blocks and dropped in dense form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rates import ACTIVATION_EPS


class SingularHessianError(np.linalg.LinAlgError):
    """A block or the full Hessian could not be factorized."""


def gradient(net, rates, arrivals) -> np.ndarray:
    """Dual (sub)gradient, shape ``(n, K)``, zero at destination entries."""
    g = net.incidence @ rates - arrivals
    return np.where(net.valid, g, 0.0)


def link_projectors(rates, mu, eps=ACTIVATION_EPS) -> np.ndarray:
    """Jacobian of each link's rate vector w.r.t. its pressures, ``(L, K, K)``."""
    active = (rates > eps).astype(float)
    n_act = active.sum(axis=1)
    shared = np.where((mu > 0) & (n_act > 0), 1.0 / np.maximum(n_act, 1), 0.0)
    K = rates.shape[1]
    P = active[:, :, None] * np.eye(K)[None]
    P -= shared[:, None, None] * active[:, :, None] * active[:, None, :]
    return P


@dataclass
class HessianBlocks:
    """Block-sparse symmetric dual Hessian.

    ``diag[i]`` is ``H_ii``; ``off[p]`` is ``H_ij`` for ``(i, j) = pairs[p]``,
    one entry per ordered neighbor pair.  Blocks of non-adjacent nodes are
    not stored and are zero.
    """

    diag: np.ndarray
    pairs: np.ndarray
    off: np.ndarray
    valid: np.ndarray

    @property
    def n(self):
        return self.diag.shape[0]

    @property
    def K(self):
        return self.diag.shape[1]

    def block(self, i, j) -> np.ndarray:
        if i == j:
            return self.diag[i].copy()
        hit = np.flatnonzero((self.pairs[:, 0] == i) & (self.pairs[:, 1] == j))
        if hit.size == 0:
            return np.zeros((self.K, self.K))
        return self.off[hit[0]].copy()

    def blocks(self) -> dict:
        out = {(i, i): self.diag[i] for i in range(self.n)}
        for (i, j), blk in zip(self.pairs, self.off):
            out[(int(i), int(j))] = blk
        return out

    def full_blocks(self) -> np.ndarray:
        """``(n, n, K, K)`` array of all blocks, zeros where not stored."""
        full = np.zeros((self.n, self.n, self.K, self.K))
        idx = np.arange(self.n)
        full[idx, idx] = self.diag
        if len(self.pairs):
            full[self.pairs[:, 0], self.pairs[:, 1]] = self.off
        return full

    def to_dense(self) -> np.ndarray:
        """Dense matrix over the valid coordinates, ordered row-major in (node, k)."""
        nK = self.n * self.K
        dense = self.full_blocks().transpose(0, 2, 1, 3).reshape(nK, nK)
        keep = self.valid.reshape(-1)
        return dense[np.ix_(keep, keep)]

    def matvec(self, x) -> np.ndarray:
        """``H x`` for ``x`` of shape ``(n, K)`` using only stored blocks."""
        out = np.einsum("iks,is->ik", self.diag, x)
        if len(self.pairs):
            np.add.at(out, self.pairs[:, 0], np.einsum("pks,ps->pk", self.off, x[self.pairs[:, 1]]))
        return out


def hessian(net, rates, mu) -> HessianBlocks:
    """Assemble the dual Hessian at the point that produced ``rates``/``mu``."""
    P = link_projectors(rates, mu)
    K = net.K
    diag = np.zeros((net.n, K, K))
    np.add.at(diag, net.src, P)
    np.add.at(diag, net.dst, P)

    pair_pos = {(int(i), int(j)): p for p, (i, j) in enumerate(net.pairs)}
    off = np.zeros((len(net.pairs), K, K))
    fwd = np.array([pair_pos[(int(s), int(d))] for s, d in zip(net.src, net.dst)], dtype=int)
    bwd = np.array([pair_pos[(int(d), int(s))] for s, d in zip(net.src, net.dst)], dtype=int)
    np.add.at(off, fwd, -P)
    np.add.at(off, bwd, -P)

    v = net.valid.astype(float)
    diag *= v[:, :, None] * v[:, None, :]
    if len(net.pairs):
        off *= v[net.pairs[:, 0], :, None] * v[net.pairs[:, 1], None, :]
    return HessianBlocks(diag=diag, pairs=net.pairs.copy(), off=off, valid=net.valid.copy())


@dataclass
class Splitting:
    """``H = Dbar - Bbar`` with ``Dbar_ii = H_ii + I``, ``Bbar_ii = I``, ``Bbar_ij = -H_ij``."""

    dbar: np.ndarray
    pairs: np.ndarray
    bbar_off: np.ndarray
    valid: np.ndarray

    @property
    def n(self):
        return self.dbar.shape[0]

    @property
    def K(self):
        return self.dbar.shape[1]

    def _dense(self, diag, off):
        H = HessianBlocks(diag=diag, pairs=self.pairs, off=off, valid=self.valid)
        return H.to_dense()

    def dbar_dense(self) -> np.ndarray:
        return self._dense(self.dbar, np.zeros_like(self.bbar_off))

    def bbar_dense(self) -> np.ndarray:
        eye = np.broadcast_to(np.eye(self.K), self.dbar.shape).copy()
        return self._dense(eye, self.bbar_off)

    def solve_diag(self, x) -> np.ndarray:
        """Apply ``Dbar^{-1}`` blockwise to ``x`` of shape ``(n, K)``."""
        try:
            y = np.linalg.solve(self.dbar, x[:, :, None])[:, :, 0]
        except np.linalg.LinAlgError as exc:
            raise SingularHessianError("singular Dbar block") from exc
        return np.where(self.valid, y, 0.0)

    def bbar_matvec(self, x) -> np.ndarray:
        out = x.copy()
        if len(self.pairs):
            np.add.at(out, self.pairs[:, 0], np.einsum("pks,ps->pk", self.bbar_off, x[self.pairs[:, 1]]))
        return np.where(self.valid, out, 0.0)


def split(H: HessianBlocks) -> Splitting:
    eye = np.eye(H.K)
    return Splitting(dbar=H.diag + eye, pairs=H.pairs.copy(), bbar_off=-H.off, valid=H.valid.copy())


def add_direction(sp: Splitting, g, order=1) -> np.ndarray:
    """Approximate Newton direction ``-sum_{t<=N} (Dbar^-1 Bbar)^t Dbar^-1 g``.

    Each term costs one neighbor exchange (``Bbar`` product) and one local
    block solve, so ``d_i`` depends only on nodes within ``order`` hops.
    """
    if order < 0:
        raise ValueError("ADD order must be >= 0")
    g = np.where(sp.valid, g, 0.0)
    term = sp.solve_diag(g)
    acc = term.copy()
    for _ in range(order):
        term = sp.solve_diag(sp.bbar_matvec(term))
        acc += term
    return -acc


def newton_direction_dense(H: HessianBlocks, g, ridge=0.0, net=None) -> np.ndarray:
    """Centralized Newton direction solving ``(H + ridge*I) d = -g`` densely."""
    if ridge < 0:
        raise ValueError("ridge must be >= 0")
    valid = H.valid
    A = H.to_dense() + ridge * np.eye(int(valid.sum()))
    rhs = -np.asarray(g)[valid]
    try:
        d = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularHessianError(f"dense Hessian is singular (ridge={ridge})") from exc
    if not np.all(np.isfinite(d)):
        raise SingularHessianError(f"non-finite Newton direction (ridge={ridge})")
    out = np.zeros(valid.shape)
    out[valid] = d
    return out


def write_triplets(stream, H: HessianBlocks, sp: Splitting | None = None, tol=0.0):
    """Dump ``H`` (and ``Dbar``/``Bbar``) as ``node_i node_j k s value`` lines.

    Each matrix starts with a ``# name`` header; only entries with
    ``|value| > tol`` on valid coordinates are written.
    """
    mats = [("H", H.diag, H.off)]
    if sp is not None:
        eye = np.broadcast_to(np.eye(sp.K), sp.dbar.shape)
        mats.append(("Dbar", sp.dbar, np.zeros_like(sp.bbar_off)))
        mats.append(("Bbar", eye, sp.bbar_off))
    valid = H.valid
    for name, diag, off in mats:
        stream.write(f"# {name}\n")
        entries = [(i, i, diag[i]) for i in range(H.n)]
        entries += [(int(i), int(j), blk) for (i, j), blk in zip(H.pairs, off)]
        for i, j, blk in sorted(entries, key=lambda e: (e[0], e[1])):
            for k, s in zip(*np.nonzero(np.abs(blk) > tol)):
                if valid[i, k] and valid[j, s]:
                    stream.write(f"{i} {j} {k} {s} {blk[k, s]:.17g}\n")


def read_triplets(stream) -> dict:
    """Parse :func:`write_triplets` output into ``{name: [(i, j, k, s, value), ...]}``."""
    out: dict = {}
    current = None
    for line in stream:
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            current = line[1:].strip()
            out[current] = []
            continue
        i, j, k, s, value = line.split()
        out[current].append((int(i), int(j), int(k), int(s), float(value)))
    return out
