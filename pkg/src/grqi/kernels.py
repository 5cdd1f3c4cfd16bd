"""Dense linear-algebra kernels shared by all iteration variants.

The public surface is small: an orthonormal-basis container
(:class:`Subspace`), principal/vector angles, a robust small
eigendecomposition (:class:`BlockShift`), shifted solves with an automatic
perturbation fallback, and a Sylvester solver with a spectra-disjointness
guard.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as spla

from .errors import (
    DimensionMismatchError,
    NearDefectiveError,
    RankDeficientError,
    SolveFailedError,
    SpectraOverlapError,
    ZeroVectorError,
)

__all__ = [
    "Subspace",
    "BlockShift",
    "orthonormalize",
    "largest_principal_angle",
    "hermitian_angle",
    "residual_angle",
    "small_eig",
    "solve_eps",
    "shifted_solve",
    "sylvester_solve",
]

# Machine unit roundoff for float64; perturbation sizes are multiples of it.
_U = float(np.finfo(np.float64).eps)

_ORTHO_RTOL = 1e-12
_RANK_RTOL = 1e-15


@dataclass(frozen=True, eq=False)
class Subspace:
    """A p-dimensional subspace of C^n held as an orthonormal basis.

    The basis is an n-by-p matrix with orthonormal columns; construction
    validates shape and orthonormality, so every instance in circulation is
    trustworthy.  Use :func:`orthonormalize` to build one from a general
    full-rank matrix.
    """

    basis: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.basis)
        if b.ndim != 2:
            raise DimensionMismatchError(
                f"subspace basis must be 2-d, got ndim={b.ndim}"
            )
        n, p = b.shape
        if not (1 <= p <= n):
            raise DimensionMismatchError(
                f"subspace basis must be n-by-p with 1 <= p <= n, got {n}x{p}"
            )
        if not np.all(np.isfinite(b)):
            raise ValueError("subspace basis has nonfinite entries")
        gram = b.conj().T @ b
        defect = np.linalg.norm(gram - np.eye(p), 2)
        if defect > _ORTHO_RTOL * np.sqrt(p):
            raise ValueError(
                f"basis is not orthonormal: ||B^H B - I|| = {defect:.3e}"
            )
        object.__setattr__(self, "basis", b)

    @property
    def n(self) -> int:
        return self.basis.shape[0]

    @property
    def p(self) -> int:
        return self.basis.shape[1]


@dataclass(frozen=True, eq=False)
class BlockShift:
    """Eigendecomposition of a small shift block.

    ``eigvecs`` is the p-by-p eigenvector matrix W, ``shifts`` the length-p
    eigenvalue vector rho with R W = W diag(rho), and ``cond`` the 2-norm
    condition number of W (infinite when W is singular, i.e. the block is
    defective).
    """

    eigvecs: np.ndarray
    shifts: np.ndarray
    cond: float

    @property
    def p(self) -> int:
        return self.shifts.shape[0]


def orthonormalize(z: np.ndarray) -> Subspace:
    """Return the subspace spanned by the columns of ``z``.

    Uses an economy QR factorization.  Raises
    :class:`~grqi.errors.RankDeficientError` when the columns are
    numerically dependent (smallest singular value at or below
    ``n * p * 1e-15`` times the largest).
    """
    z = np.asarray(z)
    if z.ndim != 2:
        raise DimensionMismatchError(f"expected a 2-d array, got ndim={z.ndim}")
    n, p = z.shape
    if not (1 <= p <= n):
        raise DimensionMismatchError(
            f"cannot orthonormalize a {n}x{p} matrix: need 1 <= p <= n"
        )
    if not np.all(np.isfinite(z)):
        raise RankDeficientError("matrix has nonfinite entries")
    q, r = np.linalg.qr(z)
    # Singular values of z equal those of the triangular factor.
    sv = np.linalg.svd(r, compute_uv=False)
    if sv[0] == 0.0 or sv[-1] <= n * p * _RANK_RTOL * sv[0]:
        raise RankDeficientError(
            f"columns are numerically rank deficient (sigma_min/sigma_max = "
            f"{0.0 if sv[0] == 0.0 else sv[-1] / sv[0]:.3e})"
        )
    return Subspace(q)


def _check_same_shape(u: Subspace, v: Subspace) -> None:
    if u.n != v.n or u.p != v.p:
        raise DimensionMismatchError(
            f"subspaces have mismatched shapes {u.n}x{u.p} vs {v.n}x{v.p}"
        )


def largest_principal_angle(u: Subspace, v: Subspace) -> float:
    """Largest principal angle between two equal-dimension subspaces.

    The cosine is the smallest singular value of the p-by-p Gram matrix of
    the orthonormal bases.  Because the cosine cannot resolve angles below
    about sqrt(eps), small angles are recomputed through the sine route
    (largest singular value of the part of one basis orthogonal to the
    other), which is accurate down to the underflow threshold.
    """
    _check_same_shape(u, v)
    g = u.basis.conj().T @ v.basis
    sv = np.linalg.svd(g, compute_uv=False)
    c = min(float(sv[-1]), 1.0)
    if c * c <= 0.5:
        return float(np.arccos(c))
    w = v.basis - u.basis @ g
    s = np.linalg.svd(w, compute_uv=False)[0]
    return float(np.arcsin(min(float(s), 1.0)))


def hermitian_angle(x: np.ndarray, y: np.ndarray) -> float:
    """Phase-invariant angle between two nonzero vectors.

    Defined through cos(theta) = |x^H y| / (||x|| ||y||); evaluated with
    atan2 on the (cos, sin) pair so that tiny angles are not flattened to
    zero by the arccos branch.
    """
    x = np.asarray(x).reshape(-1)
    y = np.asarray(y).reshape(-1)
    if x.shape != y.shape:
        raise DimensionMismatchError(
            f"vectors have mismatched lengths {x.shape[0]} vs {y.shape[0]}"
        )
    nx = np.linalg.norm(x)
    ny = np.linalg.norm(y)
    if nx == 0.0 or ny == 0.0:
        raise ZeroVectorError("angle with a zero vector is undefined")
    xh = x / nx
    yh = y / ny
    inner = np.vdot(yh, xh)
    c = abs(inner)
    s = np.linalg.norm(xh - yh * inner)
    return float(np.arctan2(s, c))


def residual_angle(c: np.ndarray, y: Subspace) -> float:
    """Largest principal angle between span(Y) and span(C Y).

    Zero exactly when span(Y) is an invariant subspace of ``c``.  Raises
    :class:`~grqi.errors.RankDeficientError` when C Y loses rank.
    """
    c = np.asarray(c)
    if c.shape != (y.n, y.n):
        raise DimensionMismatchError(
            f"matrix is {c.shape}, expected {(y.n, y.n)}"
        )
    image = orthonormalize(c @ y.basis)
    return largest_principal_angle(y, image)


def _eig2(r: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form eigendecomposition of a 2x2 matrix."""
    a, b = complex(r[0, 0]), complex(r[0, 1])
    c, d = complex(r[1, 0]), complex(r[1, 1])
    scale = max(abs(a), abs(b), abs(c), abs(d))
    # Near-scalar block: the roots coincide but the matrix is not
    # defective, so any basis diagonalizes it; the generic formula below
    # would return two nearly parallel vectors here.
    if max(abs(b), abs(c), abs(a - d)) <= 1e-12 * scale:
        return np.eye(2, dtype=complex), np.array([a, d], dtype=complex)
    tr = a + d
    det = a * d - b * c
    disc = np.sqrt(complex((a - d) ** 2 + 4.0 * b * c))
    # Orient the root so tr + disc does not cancel.
    if (np.conj(tr) * disc).real < 0.0:
        disc = -disc
    l1 = (tr + disc) / 2.0
    l2 = det / l1 if l1 != 0.0 else (tr - disc) / 2.0
    vals = np.array([l1, l2], dtype=complex)
    vecs = np.empty((2, 2), dtype=complex)
    for j, lam in enumerate(vals):
        v1 = np.array([b, lam - a])
        v2 = np.array([lam - d, c])
        v = v1 if np.linalg.norm(v1) >= np.linalg.norm(v2) else v2
        nv = np.linalg.norm(v)
        if nv == 0.0:
            # Diagonal block: the eigenvector is a coordinate axis.
            v = np.array([1.0, 0.0]) if j == 0 else np.array([0.0, 1.0])
            if abs(lam - d) < abs(lam - a):
                v = v[::-1]
            nv = 1.0
        vecs[:, j] = v / nv
    return vecs, vals


def small_eig(
    r: np.ndarray,
    *,
    strict: bool = False,
    cond_limit: float = 1e8,
) -> BlockShift:
    """Eigendecomposition of a small (p x p) shift block.

    For p <= 2 closed forms are used; larger blocks go through the dense
    nonsymmetric eigensolver.  The condition number of the eigenvector
    matrix is always reported; when ``strict`` is set and it exceeds
    ``cond_limit`` a :class:`~grqi.errors.NearDefectiveError` is raised
    instead of proceeding.
    """
    r = np.asarray(r)
    if r.ndim != 2 or r.shape[0] != r.shape[1]:
        raise DimensionMismatchError(f"expected a square block, got {r.shape}")
    p = r.shape[0]
    if p == 1:
        w = np.ones((1, 1), dtype=complex)
        vals = np.array([complex(r[0, 0])])
        cond = 1.0
    else:
        if p == 2:
            w, vals = _eig2(r)
        else:
            vals, w = np.linalg.eig(r)
            w = np.asarray(w, dtype=complex)
            vals = np.asarray(vals, dtype=complex)
        sv = np.linalg.svd(w, compute_uv=False)
        cond = float(sv[0] / sv[-1]) if sv[-1] > 0.0 else float("inf")
    if strict and cond > cond_limit:
        raise NearDefectiveError(
            f"eigenvector basis of the shift block has condition {cond:.3e} "
            f"> {cond_limit:.1e}"
        )
    return BlockShift(eigvecs=w, shifts=vals, cond=cond)


def solve_eps(c: np.ndarray, scale: float = 1e3) -> float:
    """Perturbation magnitude used by the shifted-solve fallback:
    ``scale`` times unit roundoff times the Frobenius norm of ``c``."""
    return scale * _U * float(np.linalg.norm(c, "fro"))


def _solve_finite(m: np.ndarray, b: np.ndarray) -> np.ndarray | None:
    """Dense solve returning None when the result is unusable."""
    try:
        z = np.linalg.solve(m, b)
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(z)):
        return None
    return z


def shifted_solve(
    c: np.ndarray,
    rho: complex,
    b: np.ndarray,
    eps: float | None = None,
) -> tuple[np.ndarray, bool]:
    """Solve (C - rho I) z = b, perturbing the shift if necessary.

    When the direct solve fails outright or produces nonfinite entries
    (shift numerically equal to an eigenvalue), the system is re-solved
    with the shift moved to ``rho - eps``.  Near an eigenvalue this keeps
    the solution direction intact, which is all the iteration needs.
    Returns ``(z, perturbed)``; raises
    :class:`~grqi.errors.SolveFailedError` if the perturbed solve fails
    too.
    """
    c = np.asarray(c)
    n = c.shape[0]
    if c.shape != (n, n):
        raise DimensionMismatchError(f"matrix must be square, got {c.shape}")
    b = np.asarray(b)
    if b.shape[0] != n:
        raise DimensionMismatchError(
            f"right-hand side has {b.shape[0]} rows, expected {n}"
        )
    eye = np.eye(n)
    z = _solve_finite(c - rho * eye, b)
    if z is not None:
        return z, False
    if eps is None:
        eps = solve_eps(c)
    z = _solve_finite(c - (rho - eps) * eye, b)
    if z is None:
        raise SolveFailedError(
            f"shifted solve failed even after moving the shift by {eps:.3e}"
        )
    return z, True


def sylvester_solve(a: np.ndarray, b: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Solve the Sylvester equation A X - X B = Q.

    The equation is uniquely solvable iff the spectra of A and B are
    disjoint.  Rather than gating on an eigenvalue gap up front (which
    would also refuse singular-but-consistent systems), the computed
    solution is verified against the residual bound
    1e-9 * (||A|| + ||B||) * max(1, ||X||); failures raise
    :class:`~grqi.errors.SpectraOverlapError`.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    q = np.asarray(q)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatchError(f"A must be square, got {a.shape}")
    if b.ndim != 2 or b.shape[0] != b.shape[1]:
        raise DimensionMismatchError(f"B must be square, got {b.shape}")
    if q.shape != (a.shape[0], b.shape[0]):
        raise DimensionMismatchError(
            f"Q is {q.shape}, expected {(a.shape[0], b.shape[0])}"
        )
    scale = np.linalg.norm(a, 2) + np.linalg.norm(b, 2)
    try:
        x = spla.solve_sylvester(a, -b, q)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SpectraOverlapError(
            f"Sylvester solve failed, spectra of A and B likely overlap: "
            f"{exc}"
        ) from None
    if np.all(np.isfinite(x)):
        residual = np.linalg.norm(a @ x - x @ b - q, 2)
        # The ||X||-scaled bound alone would accept the huge junk solutions
        # the triangular solver emits for inconsistent singular systems, so
        # the residual must also be small on the scale of Q itself.
        bound = min(
            1e-9 * scale * max(1.0, np.linalg.norm(x, 2)),
            1e-5 * max(1.0, np.linalg.norm(q, 2)),
        )
    else:
        residual, bound = np.inf, 0.0
    if residual > bound:
        ea = np.linalg.eigvals(a)
        eb = np.linalg.eigvals(b)
        gap = np.abs(ea[:, None] - eb[None, :]).min()
        raise SpectraOverlapError(
            f"Sylvester residual {residual:.3e} exceeds bound {bound:.3e} "
            f"(spectra of A and B are separated by only {gap:.3e})"
        )
    return x
