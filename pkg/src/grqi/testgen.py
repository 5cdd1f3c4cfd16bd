"""Random problem generators and ground-truth oracles.

Problems are drawn from counter-based RNG streams (Philox keyed by
``seed XOR trial``), so per-trial results are reproducible bit for bit and
independent of execution order.  The main generator builds mildly
nonnormal diagonalizable matrices with known eigenvector matrix; a second
one builds real matrices with the block structure [[F, G],[H, -F^T]]
(G, H symmetric), whose spectrum is symmetric about the imaginary axis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatchError,
    NearDefectiveError,
    NotSpectralError,
    OddDimensionError,
    UnpairedEigenvalueError,
)
from .kernels import Subspace, orthonormalize, sylvester_solve

__all__ = [
    "trial_rng",
    "GeneratedProblem",
    "random_diagonalizable",
    "random_hamiltonian",
    "random_e_hermitian",
    "random_e_skew_hermitian",
    "subspace_at_angle",
    "nearby_subspace",
    "complement_basis",
    "select_top_modulus",
    "select_matching",
    "select_full_group_max_real",
    "eigenspace_pair_oracle",
    "group_mirror_eigenvalues",
    "build_block_diagonalizer",
]

_PAIR_RTOL = 1e-8
_GAP_RTOL = 1e-8


def trial_rng(seed: int, trial: int = 0) -> np.random.Generator:
    """Counter-based generator for one trial of one batch.

    Streams are keyed by ``seed XOR trial``, so any subset of trials can be
    regenerated without running the others.
    """
    if not (0 <= seed < 2**64):
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    if trial < 0:
        raise ValueError(f"trial index must be nonnegative, got {trial}")
    key = np.uint64(seed) ^ np.uint64(trial)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True, eq=False)
class GeneratedProblem:
    """A random matrix together with its exact left/right eigenspace pair.

    ``spectrum`` lists the eigenvalues carried by the oracle pair and
    ``alpha`` the nonnormality scale of the eigenvector matrix S = I +
    (alpha/||E||) E.
    """

    matrix: np.ndarray
    oracle_right: Subspace
    oracle_left: Subspace
    spectrum: np.ndarray
    alpha: float


def random_diagonalizable(
    n: int,
    p: int,
    rng: np.random.Generator,
) -> GeneratedProblem:
    """Mildly nonnormal diagonalizable matrix with a known oracle pair.

    C = S D S^{-1} with D a random permutation of diag(1..n) and
    S = I + (alpha/||E||_2) E for standard-normal E and alpha uniform on
    (0, 0.1).  The oracle subspaces are spanned by the first p columns of
    S (right) and of S^{-H} (left); the oracle spectrum is the first p
    permuted diagonal entries.
    """
    if not (1 <= p <= n):
        raise DimensionMismatchError(f"need 1 <= p <= n, got n={n}, p={p}")
    d = rng.permutation(np.arange(1.0, n + 1.0))
    e = rng.standard_normal((n, n))
    alpha = float(rng.uniform(0.0, 0.1))
    s = np.eye(n) + (alpha / np.linalg.norm(e, 2)) * e
    s_inv = np.linalg.inv(s)
    c = (s * d) @ s_inv
    return GeneratedProblem(
        matrix=c,
        oracle_right=orthonormalize(s[:, :p]),
        oracle_left=orthonormalize(s_inv.conj().T[:, :p]),
        spectrum=d[:p].astype(complex),
        alpha=alpha,
    )


def random_hamiltonian(n: int, rng: np.random.Generator) -> np.ndarray:
    """Random real matrix of the form [[F, G],[H, -F^T]] with G, H
    symmetric, drawn from standard-normal blocks.  Its spectrum is
    symmetric with respect to the imaginary axis."""
    if n % 2 != 0:
        raise OddDimensionError(f"block form needs even n, got {n}")
    h = n // 2
    f = rng.standard_normal((h, h))
    g = rng.standard_normal((h, h))
    k = rng.standard_normal((h, h))
    return np.block([[f, g + g.T], [k + k.T, -f.T]])


def random_e_hermitian(
    n: int,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Random pair (C, E) with E Hermitian positive definite and
    E C = C^H E.  Built as C = E^{-1} M with M Hermitian."""
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    e = a @ a.conj().T + n * np.eye(n)
    m = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    m = (m + m.conj().T) / 2.0
    c = np.linalg.solve(e, m)
    return c, e


def random_e_skew_hermitian(
    n: int,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Random pair (C, E) with E Hermitian positive definite and
    E C = -C^H E.  Built as C = E^{-1} M with M skew-Hermitian."""
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    e = a @ a.conj().T + n * np.eye(n)
    m = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    m = (m - m.conj().T) / 2.0
    c = np.linalg.solve(e, m)
    return c, e


def complement_basis(v: Subspace) -> np.ndarray:
    """Orthonormal basis of the orthogonal complement of ``v``
    (n-by-(n-p); empty when p = n)."""
    q, _ = np.linalg.qr(v.basis, mode="complete")
    return q[:, v.p:]


def subspace_at_angle(
    v: Subspace,
    theta: float,
    rng: np.random.Generator,
) -> Subspace:
    """A subspace at exactly the prescribed largest principal angle from
    ``v``, in a uniformly random direction.

    Constructed as span(V + V_perp K) with ||K||_2 = tan(theta), which by
    the tangent identity realizes the angle exactly.
    """
    if not (0.0 <= theta < np.pi / 2):
        raise ValueError(f"theta must lie in [0, pi/2), got {theta}")
    if theta == 0.0 or v.p == v.n:
        return Subspace(v.basis.copy())
    perp = complement_basis(v)
    if np.iscomplexobj(v.basis):
        k = rng.standard_normal((v.n - v.p, v.p)) + 1j * rng.standard_normal(
            (v.n - v.p, v.p)
        )
    else:
        k = rng.standard_normal((v.n - v.p, v.p))
    k *= np.tan(theta) / np.linalg.norm(k, 2)
    return orthonormalize(v.basis + perp @ k)


def nearby_subspace(
    v: Subspace,
    delta_max: float,
    rng: np.random.Generator,
) -> Subspace:
    """A random subspace within largest principal angle ``delta_max`` of
    ``v``; the realized angle is uniform on (0, delta_max)."""
    if delta_max < 0.0 or delta_max >= np.pi / 2:
        raise ValueError(
            f"delta_max must lie in [0, pi/2), got {delta_max}"
        )
    if delta_max == 0.0:
        return Subspace(v.basis.copy())
    return subspace_at_angle(v, float(rng.uniform(0.0, delta_max)), rng)


def _stable_order(values: np.ndarray, criterion: np.ndarray) -> np.ndarray:
    """Indices sorting by ``criterion`` descending, ties broken by real
    then imaginary part so the ordering is reproducible."""
    return np.lexsort((values.imag, values.real, -criterion))


def select_top_modulus(p: int):
    """Selector choosing the p eigenvalues of largest modulus."""

    def _select(values: np.ndarray) -> np.ndarray:
        return _stable_order(values, np.abs(values))[:p]

    return _select


def select_matching(targets, rtol: float = 1e-6):
    """Selector matching each requested eigenvalue to the nearest
    computed one (relative to the overall spectrum scale)."""
    targets = np.asarray(targets, dtype=complex)

    def _select(values: np.ndarray) -> np.ndarray:
        scale = max(1.0, float(np.abs(values).max()))
        taken: list[int] = []
        for t in targets:
            dist = np.abs(values - t)
            dist[taken] = np.inf
            j = int(np.argmin(dist))
            if dist[j] > rtol * scale:
                raise NotSpectralError(
                    f"no computed eigenvalue within {rtol * scale:.3e} "
                    f"of requested {t}"
                )
            taken.append(j)
        return np.array(taken)

    return _select


def group_mirror_eigenvalues(
    values: np.ndarray,
    tol: float,
    conjugate_closed: bool = False,
) -> list[np.ndarray]:
    """Partition eigenvalues into groups symmetric about the imaginary
    axis.

    Each eigenvalue is paired with the one nearest to the mirror image
    -conj(lambda); purely imaginary eigenvalues are self-paired.  With
    ``conjugate_closed`` the groups are additionally closed under complex
    conjugation (appropriate for real matrices, whose invariant subspaces
    of interest are real).  Ties are broken by matching in descending
    modulus order.  Raises
    :class:`~grqi.errors.UnpairedEigenvalueError` when a mirror partner is
    missing beyond ``tol``.
    """
    order = _stable_order(values, np.abs(values))
    unused = list(order)
    groups: list[np.ndarray] = []
    while unused:
        member_set = [unused.pop(0)]
        frontier = list(member_set)
        while frontier:
            i = frontier.pop()
            images = [values[i], -np.conj(values[i])]
            if conjugate_closed:
                images.append(np.conj(values[i]))
            for img in images:
                # Absorb every remaining eigenvalue at this image, so
                # multiplicities stay together.
                j = 0
                while j < len(unused):
                    if abs(values[unused[j]] - img) <= tol:
                        member_set.append(unused.pop(j))
                        frontier.append(member_set[-1])
                    else:
                        j += 1
                covered = min(abs(values[j2] - img) for j2 in member_set)
                if covered > tol:
                    raise UnpairedEigenvalueError(
                        f"eigenvalue {values[i]} has no partner near {img} "
                        f"(closest member at distance {covered:.3e})"
                    )
        groups.append(np.array(sorted(member_set)))
    return groups


def select_full_group_max_real(tol: float, conjugate_closed: bool = True):
    """Selector choosing the mirror-symmetric eigenvalue group containing
    the eigenvalue of largest absolute real part."""

    def _select(values: np.ndarray) -> np.ndarray:
        groups = group_mirror_eigenvalues(values, tol, conjugate_closed)
        best = max(
            groups, key=lambda g: float(np.abs(values[g].real).max())
        )
        return best

    return _select


def eigenspace_pair_oracle(
    c: np.ndarray,
    selector,
    *,
    cond_limit: float = 1e8,
) -> tuple[Subspace, Subspace, np.ndarray]:
    """Exact left/right eigenspace pair for a selected eigenvalue subset.

    ``selector`` maps the computed eigenvalue array to the index set of the
    wanted subset.  Returns ``(left, right, spectrum)``.  Raises
    :class:`~grqi.errors.NearDefectiveError` when the eigenvector matrix is
    too ill-conditioned to trust, and
    :class:`~grqi.errors.NotSpectralError` when the selected subset is not
    separated from the remaining spectrum.
    """
    c = np.asarray(c)
    n = c.shape[0]
    if c.shape != (n, n):
        raise DimensionMismatchError(f"matrix must be square, got {c.shape}")
    values, s = np.linalg.eig(c)
    sv = np.linalg.svd(s, compute_uv=False)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0.0 else float("inf")
    if cond > cond_limit:
        raise NearDefectiveError(
            f"eigenvector matrix condition {cond:.3e} exceeds "
            f"{cond_limit:.1e}"
        )
    idx = np.asarray(selector(values), dtype=int)
    if idx.size == 0 or idx.size > n:
        raise NotSpectralError(f"selector returned {idx.size} indices")
    rest = np.setdiff1d(np.arange(n), idx)
    if rest.size:
        gap = np.abs(values[idx][:, None] - values[rest][None, :]).min()
        scale = float(np.linalg.norm(c, 2))
        if gap <= _GAP_RTOL * scale:
            raise NotSpectralError(
                f"selected eigenvalues are separated from the rest by only "
                f"{gap:.3e} (threshold {_GAP_RTOL * scale:.3e})"
            )
    s_inv_h = np.linalg.inv(s).conj().T
    return (
        orthonormalize(s_inv_h[:, idx]),
        orthonormalize(s[:, idx]),
        values[idx],
    )


def build_block_diagonalizer(
    c: np.ndarray,
    p: int,
    x: np.ndarray | None = None,
) -> np.ndarray:
    """Similarity transform splitting a block-triangular matrix.

    Given unitary ``x`` (default identity) such that T = X^H C X is block
    upper triangular with a leading p-by-p block, solves the decoupling
    Sylvester equation T11 L - L T22 = -T12 and returns
    S = X [[I, L], [0, I]].  The first p columns of S span the right
    invariant subspace for T11's spectrum, and the first p columns of
    S^{-H} span the matching left one.
    """
    c = np.asarray(c)
    n = c.shape[0]
    if c.shape != (n, n):
        raise DimensionMismatchError(f"matrix must be square, got {c.shape}")
    if not (1 <= p < n):
        raise DimensionMismatchError(f"need 1 <= p < n, got p={p}, n={n}")
    if x is None:
        t = c
        x = np.eye(n)
    else:
        x = np.asarray(x)
        if x.shape != (n, n):
            raise DimensionMismatchError(
                f"transform is {x.shape}, expected {(n, n)}"
            )
        t = x.conj().T @ (c @ x)
    lower = np.linalg.norm(t[p:, :p])
    if lower > 1e-10 * max(1.0, np.linalg.norm(c, 2)):
        raise ValueError(
            f"matrix is not block upper triangular in the given basis "
            f"(||T21|| = {lower:.3e})"
        )
    t11 = t[:p, :p]
    t12 = t[:p, p:]
    t22 = t[p:, p:]
    if np.linalg.norm(t12) == 0.0:
        coupling = np.zeros((p, n - p), dtype=t.dtype)
    else:
        coupling = sylvester_solve(t11, t22, -t12)
    s = np.eye(n, dtype=np.promote_types(t.dtype, coupling.dtype))
    s[:p, p:] = coupling
    return x @ s
