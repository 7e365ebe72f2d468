"""Truncated bosonic Fock space: Hamiltonians, Gibbs states, marginals.

The Fock space over K modes is truncated at total occupation n_max and
enumerated in graded colexicographic order, so every operator built here is
block diagonal across total-particle sectors whenever it commutes with the
number operator. States are stored either as per-sector dense blocks (the
cheap representation every Gibbs state admits) or as one dense matrix
(needed for coherent superpositions of sectors).

Reduced k-body matrices follow the binomial-weight convention
tr[A Gamma^(k)] = sum_n C(n,k) tr[(A (x)_s 1) G_n], so tr Gamma^(1) equals
the mean particle number; the mean-field rescaling k!/T^k happens only in
the convergence driver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.linalg import eigh
from scipy.special import gammaln, logsumexp

from . import symspace
from .classical import MomentMatrix
from .kernels import two_body_coo
from .spectral import TwoBodyTensor

__all__ = [
    "FockBasis",
    "FockOperator",
    "FockState",
    "EnergySplit",
    "build_fock_basis",
    "ladder",
    "number_operator",
    "build_hamiltonian",
    "gibbs_state",
    "reduced_density_matrix",
    "reduced_dm_normal_ordered",
    "particle_number",
    "energy_decomposition",
    "relative_entropy",
    "relative_free_energy",
    "free_energy",
    "free_sector_weights",
    "choose_n_max",
    "random_state",
    "state_to_csv",
]

_SUPPORT_EPS = 1e-14
_LOG_FLOOR = 1e-300


@dataclass(frozen=True)
class FockBasis:
    """Occupation basis with total occupation <= n_max, graded colex order."""

    K: int
    n_max: int
    occupations: np.ndarray
    sector_offsets: np.ndarray
    strides: np.ndarray
    table: np.ndarray

    @property
    def dim(self) -> int:
        return self.occupations.shape[0]

    def sector_slice(self, n: int) -> slice:
        return slice(int(self.sector_offsets[n]), int(self.sector_offsets[n + 1]))

    def sector_dim(self, n: int) -> int:
        return int(self.sector_offsets[n + 1] - self.sector_offsets[n])

    def index(self, occ) -> int:
        occ = np.asarray(occ, dtype=np.int64)
        return int(self.table[int(occ @ self.strides)])

    def rank_in_sector(self, occs: np.ndarray, n: int) -> np.ndarray:
        keys = np.asarray(occs, dtype=np.int64) @ self.strides
        return self.table[keys] - int(self.sector_offsets[n])


def build_fock_basis(K: int, n_max: int, dim_budget: int = 20000) -> FockBasis:
    """Enumerate the truncated basis; fails fast on dimension overflow."""
    if K < 1 or n_max < 0:
        raise ValueError("need K >= 1 and n_max >= 0")
    dim = math.comb(K + n_max, K)
    if dim > dim_budget:
        raise ValueError(f"Fock dimension {dim} exceeds the budget {dim_budget}")
    sectors = [symspace.multi_indices(K, n) for n in range(n_max + 1)]
    occs = np.concatenate(sectors, axis=0)
    offsets = np.zeros(n_max + 2, dtype=np.int64)
    for n, sec in enumerate(sectors):
        offsets[n + 1] = offsets[n] + sec.shape[0]
    strides = (n_max + 1) ** np.arange(K, dtype=np.int64)
    span = (n_max + 1) ** K
    if span > (1 << 26):
        raise ValueError("radix lookup too large; reduce K or n_max")
    table = np.full(span, -1, dtype=np.int64)
    table[occs @ strides] = np.arange(dim, dtype=np.int64)
    return FockBasis(K=K, n_max=n_max, occupations=occs,
                     sector_offsets=offsets, strides=strides, table=table)


def ladder(basis: FockBasis, j: int):
    """(a_j, a_j^dagger) as sparse matrices; creation out of the top sector
    is truncated to zero, so [a_i, a_j^dag] = delta_ij only below n_max."""
    if not 1 <= j <= basis.K:
        raise ValueError(f"mode index {j} outside 1..{basis.K}")
    col = j - 1
    occ = basis.occupations
    src = np.flatnonzero(occ[:, col] > 0)
    dst = basis.table[(occ[src] @ basis.strides) - basis.strides[col]]
    vals = np.sqrt(occ[src, col].astype(float))
    a = sparse.csr_matrix((vals, (dst, src)), shape=(basis.dim, basis.dim))
    return a, a.T.tocsr()


@dataclass(frozen=True)
class FockOperator:
    """Hermitian operator on the truncated Fock space."""

    basis: FockBasis
    matrix: sparse.csr_matrix
    sector_diagonal: bool = True

    def sector_block(self, n: int) -> np.ndarray:
        s = self.basis.sector_slice(n)
        return self.matrix[s, s].toarray()

    def hermiticity_defect(self) -> float:
        d = self.matrix - self.matrix.T.conjugate()
        return float(np.abs(d.data).max()) if d.nnz else 0.0


def number_operator(basis: FockBasis) -> FockOperator:
    totals = basis.occupations.sum(axis=1).astype(float)
    return FockOperator(basis, sparse.diags(totals).tocsr())


def build_hamiltonian(basis: FockBasis, eigenvalues: np.ndarray,
                      tensor: TwoBodyTensor | None, lam: float) -> FockOperator:
    """H = sum_j lambda_j a_j+ a_j + lam * (1/2) sum W[ijkl] a_i+ a_j+ a_l a_k.

    The normal-ordered two-body term reproduces sum_{p<q} w(x_p - x_q) on
    every n-particle sector; it annihilates the vacuum and the one-particle
    sector and keeps the operator block diagonal in total particle number.
    """
    eigenvalues = np.asarray(eigenvalues, dtype=float)
    if eigenvalues.size != basis.K:
        raise ValueError("one-body spectrum size does not match the mode count")
    if lam < 0:
        raise ValueError("coupling must be nonnegative")
    diag = basis.occupations @ eigenvalues
    H = sparse.diags(diag).tocsr()
    if lam != 0.0 and tensor is not None and np.any(tensor.entries):
        if tensor.K != basis.K:
            raise ValueError("two-body tensor mode count does not match basis")
        rows, cols, vals = two_body_coo(basis.occupations, basis.table,
                                        basis.strides,
                                        np.real(tensor.entries))
        W = sparse.coo_matrix((vals, (rows, cols)),
                              shape=(basis.dim, basis.dim)).tocsr()
        H = H + lam * W
    return FockOperator(basis, H)


@dataclass(frozen=True)
class FockState:
    """Positive trace-one operator, stored as sector blocks or dense."""

    basis: FockBasis
    blocks: tuple | None = None
    matrix: np.ndarray | None = None

    def __post_init__(self):
        if (self.blocks is None) == (self.matrix is None):
            raise ValueError("provide exactly one of blocks / matrix")

    @property
    def sector_diagonal(self) -> bool:
        return self.blocks is not None

    def diagonal_blocks(self) -> list[np.ndarray]:
        if self.blocks is not None:
            return list(self.blocks)
        return [self.matrix[self.basis.sector_slice(n), self.basis.sector_slice(n)]
                for n in range(self.basis.n_max + 1)]

    def to_dense(self) -> np.ndarray:
        if self.matrix is not None:
            return self.matrix
        out = np.zeros((self.basis.dim, self.basis.dim),
                       dtype=self.blocks[0].dtype)
        for n, blk in enumerate(self.blocks):
            s = self.basis.sector_slice(n)
            out[s, s] = blk
        return out

    def trace(self) -> float:
        if self.blocks is not None:
            return float(sum(np.real(np.trace(b)) for b in self.blocks))
        return float(np.real(np.trace(self.matrix)))

    def sector_probabilities(self) -> np.ndarray:
        return np.array([float(np.real(np.trace(b)))
                         for b in self.diagonal_blocks()])

    def tail_mass(self) -> float:
        """Combined weight of the top two sectors (the truncation diagnostic)."""
        p = self.sector_probabilities()
        return float(p[-2:].sum()) if p.size >= 2 else float(p.sum())


def gibbs_state(H: FockOperator, T: float):
    """exp(-H/T)/Z as sector blocks, plus log Z (log-sum-exp stabilized)."""
    if T <= 0:
        raise ValueError("temperature must be positive")
    if H.hermiticity_defect() > 1e-10:
        raise ValueError("Hamiltonian is not Hermitian")
    basis = H.basis
    eigs, vecs = [], []
    for n in range(basis.n_max + 1):
        lam, U = eigh(H.sector_block(n))
        eigs.append(lam)
        vecs.append(U)
    log_z = float(logsumexp(-np.concatenate(eigs) / T))
    blocks = tuple(U @ np.diag(np.exp(-lam / T - log_z)) @ U.T.conj()
                   for lam, U in zip(eigs, vecs))
    return FockState(basis=basis, blocks=blocks), log_z


def _branching_rows(basis: FockBasis, p: np.ndarray, rest: np.ndarray, n: int):
    """Sector ranks of p + rest and the sqrt(prod C(p_j+r_j, p_j)) weights."""
    source = rest + p[None, :]
    ranks = basis.rank_in_sector(source, n)
    logs = np.zeros(rest.shape[0])
    for j in np.flatnonzero(p):
        pj = int(p[j])
        sj = source[:, j].astype(float)
        logs += gammaln(sj + 1.0) - gammaln(sj - pj + 1.0) - math.lgamma(pj + 1.0)
    return ranks, np.exp(0.5 * logs)


def reduced_density_matrix(state: FockState, k: int) -> MomentMatrix:
    """k-body marginal by symmetric partial trace with binomial weights.

    Expanding each sector's symmetric basis over Sym^k (x) Sym^(n-k) turns
    the weighted partial trace into the gather
        Gamma^(k)[p, q] = sum_n sum_r c(p,r) c(q,r) G_n[p+r, q+r],
    with c(p,r) = sqrt(prod_j C(p_j+r_j, p_j)). Only the sector-diagonal part
    of the state enters, which is exactly what the defining duality sees.
    """
    basis = state.basis
    if not 1 <= k <= basis.n_max:
        raise ValueError(f"order k={k} outside 1..n_max={basis.n_max}")
    occs_k = symspace.multi_indices(basis.K, k)
    Dk = occs_k.shape[0]
    out = np.zeros((Dk, Dk), dtype=np.complex128)
    blocks = state.diagonal_blocks()
    for n in range(k, basis.n_max + 1):
        G = blocks[n]
        rest = symspace.multi_indices(basis.K, n - k)
        ridx = np.arange(rest.shape[0])
        rows, coefs = zip(*[_branching_rows(basis, p, rest, n) for p in occs_k])
        for a in range(Dk):
            ga = G[rows[a]]
            for b in range(Dk):
                out[a, b] += np.sum(coefs[a] * coefs[b] * ga[ridx, rows[b]])
    out = 0.5 * (out + out.conj().T)
    return MomentMatrix(k=k, entries=out, occupations=occs_k)


def reduced_dm_normal_ordered(state: FockState, k: int) -> MomentMatrix:
    """Same marginal from normal-ordered ladder expectations.

    Entry (p, q) is tr[prod_j (a_j+)^{q_j} prod_j a_j^{p_j} state] divided by
    sqrt(prod p_j! prod q_j!), built from explicit sparse operator products;
    an algebraically independent route used to cross-check the partial trace.
    """
    basis = state.basis
    if not 1 <= k <= basis.n_max:
        raise ValueError(f"order k={k} outside 1..n_max={basis.n_max}")
    occs_k = symspace.multi_indices(basis.K, k)
    Dk = occs_k.shape[0]
    lowering = [ladder(basis, j + 1)[0] for j in range(basis.K)]
    dense = state.to_dense()

    def chain(powers, ops):
        M = sparse.identity(basis.dim, format="csr")
        for j, pw in enumerate(powers):
            for _ in range(int(pw)):
                M = ops[j] @ M
        return M

    ann = [chain(p, lowering) for p in occs_k]
    out = np.zeros((Dk, Dk), dtype=np.complex128)
    for b, q in enumerate(occs_k):
        cre = chain(q, lowering).T.conj().tocsr()
        for a, p in enumerate(occs_k):
            O = (cre @ ann[a]).tocoo()
            val = np.sum(O.data * dense[O.col, O.row])
            norm = math.sqrt(math.prod(math.factorial(int(x)) for x in p)
                             * math.prod(math.factorial(int(x)) for x in q))
            out[a, b] = val / norm
    return MomentMatrix(k=k, entries=out, occupations=occs_k)


def particle_number(state: FockState) -> float:
    """tr[N state]; equals tr of the one-body marginal."""
    probs = state.sector_probabilities()
    return float(np.sum(np.arange(probs.size) * probs))


@dataclass(frozen=True)
class EnergySplit:
    total: float
    one_body: float
    two_body: float


def energy_decomposition(state: FockState, eigenvalues: np.ndarray,
                         tensor: TwoBodyTensor | None, lam: float) -> EnergySplit:
    """tr[H state] and its exact split into one- and two-body marginals."""
    H = build_hamiltonian(state.basis, eigenvalues, tensor, lam)
    total = 0.0
    for n, blk in enumerate(state.diagonal_blocks()):
        total += float(np.real(np.trace(H.sector_block(n) @ blk)))
    g1 = reduced_density_matrix(state, 1)
    one_body = float(np.real(np.sum(np.asarray(eigenvalues)
                                    * np.diag(g1.entries))))
    two_body = 0.0
    if lam != 0.0 and tensor is not None and state.basis.n_max >= 2:
        g2 = reduced_density_matrix(state, 2)
        W2 = symspace.two_body_sym_matrix(np.real(tensor.entries))
        two_body = lam * float(np.real(np.trace(W2 @ g2.entries)))
    return EnergySplit(total=total, one_body=one_body, two_body=two_body)


def relative_entropy(state: FockState, ref: FockState) -> float:
    """tr[state (log state - log ref)]; +inf on a support violation.

    Reference eigenvalues below 1e-14 of the largest one in their own
    diagonalized block count as kernel directions (that is the scale the
    eigensolver resolves); if the state carries more than 1e-9 of its mass
    there the support condition fails and +inf is returned. Otherwise the
    kernel weight is entropically negligible and eigenvalues are clipped at
    1e-300 (the 0 log 0 = 0 convention), so deep but genuinely positive
    thermal tails are not mistaken for rank deficiency.
    """
    if state.basis is not ref.basis and state.basis.dim != ref.basis.dim:
        raise ValueError("states live on different bases")
    if state.sector_diagonal and ref.sector_diagonal:
        pairs = list(zip(state.diagonal_blocks(), ref.diagonal_blocks()))
    else:
        pairs = [(state.to_dense(), ref.to_dense())]
    total, stray = 0.0, 0.0
    for G, Gp in pairs:
        p, U = eigh(np.asarray(G))
        q, V = eigh(np.asarray(Gp))
        p = np.clip(p, 0.0, None)
        mask = p > _LOG_FLOOR
        total += float(np.sum(p[mask] * np.log(p[mask])))
        weights = (np.abs(V.conj().T @ U) ** 2) @ p  # mass on each ref mode
        small = q <= _SUPPORT_EPS * max(float(q[-1]), _LOG_FLOOR) if q.size \
            else np.zeros(0, dtype=bool)
        stray += float(weights[small].sum()) if small.any() else 0.0
        total -= float(np.sum(weights * np.log(np.clip(q, _LOG_FLOOR, None))))
    if stray > 1e-9:
        return math.inf
    return total


def free_energy(state: FockState, H: FockOperator, T: float) -> float:
    """tr[H state] + T tr[state log state] (the quantity Gibbs states minimize)."""
    energy = 0.0
    for n, blk in enumerate(state.diagonal_blocks()):
        energy += float(np.real(np.trace(H.sector_block(n) @ blk)))
    ent = 0.0
    mats = state.diagonal_blocks() if state.sector_diagonal else [state.to_dense()]
    for blk in mats:
        p = np.clip(eigh(np.asarray(blk), eigvals_only=True), 0.0, None)
        mask = p > _LOG_FLOOR
        ent += float(np.sum(p[mask] * np.log(p[mask])))
    return energy + T * ent


def relative_free_energy(state: FockState, free_ref: FockState,
                         tensor: TwoBodyTensor | None, lam: float,
                         T: float) -> float:
    """lam tr[w Gamma^(2)] + T S(state | free reference).

    For the interacting Gibbs state this equals T (log Z_0 - log Z_lam); for
    any other state it is an upper bound (variational principle).
    """
    two_body = 0.0
    if lam != 0.0 and tensor is not None and state.basis.n_max >= 2:
        g2 = reduced_density_matrix(state, 2)
        W2 = symspace.two_body_sym_matrix(np.real(tensor.entries))
        two_body = lam * float(np.real(np.trace(W2 @ g2.entries)))
    return two_body + T * relative_entropy(state, free_ref)


def free_sector_weights(eigenvalues: np.ndarray, T: float, n_cap: int) -> np.ndarray:
    """Unnormalized sector weights of the free Gibbs state up to n_cap.

    Convolves the per-mode geometric series exp(-lambda_j n / T); sector n of
    the result is sum over occupations with total n of exp(-E/T).
    """
    poly = np.array([1.0])
    for lam in np.asarray(eigenvalues, dtype=float):
        geo = np.exp(-lam / T * np.arange(n_cap + 1))
        poly = np.convolve(poly, geo)[:n_cap + 1]
    return poly


def choose_n_max(eigenvalues: np.ndarray, T: float, tail: float = 1e-8,
                 dim_budget: int = 20000, floor: int = 4) -> int:
    """Smallest cutoff whose top two free-state sectors carry mass < tail."""
    if tail <= 0 or tail >= 1:
        raise ValueError("tail threshold must lie in (0, 1)")
    K = len(np.asarray(eigenvalues))
    cap = 64
    while True:
        w = free_sector_weights(eigenvalues, T, cap)
        total = w.sum()
        if w[-1] / total < tail / 10.0:
            break
        cap *= 2
        if cap > 1 << 20:
            raise ValueError("tail policy does not converge; temperature too high")
    frac = (w[:-1] + w[1:]) / total  # mass of sectors (n-1, n)
    ok = np.flatnonzero(frac < tail)
    if ok.size == 0:
        raise ValueError("tail policy unreachable within the computed cap")
    n_max = max(int(ok[0]) + 1, floor)
    if math.comb(K + n_max, K) > dim_budget:
        raise ValueError(
            f"tail policy wants n_max={n_max} (dim {math.comb(K + n_max, K)}), "
            f"over the budget {dim_budget}")
    return n_max


def random_state(basis: FockBasis, seed: int, dense: bool = False) -> FockState:
    """Random mixed state (sector-diagonal unless dense=True); test fodder."""
    rng = np.random.default_rng(seed)
    if dense:
        A = rng.standard_normal((basis.dim, basis.dim)) \
            + 1j * rng.standard_normal((basis.dim, basis.dim))
        M = A @ A.conj().T
        return FockState(basis=basis, matrix=M / np.real(np.trace(M)))
    blocks = []
    for n in range(basis.n_max + 1):
        d = basis.sector_dim(n)
        A = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        blocks.append(A @ A.conj().T)
    tr = sum(float(np.real(np.trace(b))) for b in blocks)
    return FockState(basis=basis, blocks=tuple(b / tr for b in blocks))


def state_to_csv(state: FockState, path) -> None:
    """Dense entries as (row, col, real, imag) rows; meant for small states."""
    M = state.to_dense()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("row,col,real,imag\n")
        for i in range(M.shape[0]):
            for j in range(M.shape[1]):
                z = M[i, j]
                fh.write(f"{i},{j},{z.real:.17g},{z.imag:.17g}\n")
