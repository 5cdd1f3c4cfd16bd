"""One-sided iterations for structure-preserving subspace refinement.

When the matrix satisfies E C = C^H E (or the skew variant
E C = -C^H E) for an invertible E with E^H = +/-E, a right subspace
determines the matching left one as E times it.  Tracking only the right
iterate then halves the work while keeping the cubic local convergence of
the two-sided iteration; the block symplectic form J = [[0, I], [-I, 0]]
is the prominent special case.  A generalized variant handles Hermitian
pencils (A, B) without forming B^{-1} A, and a four-coefficient pencil
variant extends the two-sided iteration to deflating subspace pairs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import (
    DegeneratePencilError,
    DimensionMismatchError,
    GramSingularError,
    NearDefectiveError,
    OddDimensionError,
    SingularPencilShiftError,
)
from .iterations import StepConfig, StepDiagnostics
from .kernels import (
    Subspace,
    orthonormalize,
    shifted_solve,
    small_eig,
    solve_eps,
)
from .testgen import group_mirror_eigenvalues

__all__ = [
    "Plain",
    "EHermitian",
    "ESkewHermitian",
    "HamiltonianJ",
    "SkewHamiltonianJ",
    "GeneralizedHermitian",
    "PencilCoefficients",
    "PencilPair",
    "StructureCheck",
    "TargetGroup",
    "apply_j",
    "j_matrix",
    "check_structure",
    "one_sided_step",
    "generalized_hermitian_step",
    "hamiltonian_step",
    "skew_hamiltonian_step",
    "full_eigenspace_targets",
    "pencil_tsgrqi_step",
    "choose_pencil_normalization",
]

_STRUCT_RTOL = 1e-10
_GRAM_TOL = 1e-12


@dataclass(frozen=True)
class Plain:
    """No structure assumed."""


@dataclass(frozen=True, eq=False)
class EHermitian:
    """Structure E C = C^H E for the stored invertible E (E^H = +/-E)."""

    e: np.ndarray


@dataclass(frozen=True, eq=False)
class ESkewHermitian:
    """Structure E C = -C^H E for the stored invertible E (E^H = +/-E)."""

    e: np.ndarray


@dataclass(frozen=True)
class HamiltonianJ:
    """(C J)^H = C J for the block symplectic form J; equivalently C is
    E-skew-Hermitian with E = J."""


@dataclass(frozen=True)
class SkewHamiltonianJ:
    """(C J)^H = -(C J) for the block symplectic form J; equivalently C is
    E-Hermitian with E = J."""


@dataclass(frozen=True, eq=False)
class GeneralizedHermitian:
    """Hermitian pencil structure: both stored matrices Hermitian,
    B invertible."""

    a: np.ndarray
    b: np.ndarray


@dataclass(frozen=True)
class PencilCoefficients:
    """Normalization (alpha, beta, gamma, delta) of a pencil (A, B):
    the iteration runs on A_hat = gamma B - delta A and
    B_hat = alpha B - beta A.  Requires alpha*delta - gamma*beta != 0."""

    alpha: complex = 1.0
    beta: complex = 0.0
    gamma: complex = 0.0
    delta: complex = -1.0

    def __post_init__(self):
        if self.alpha * self.delta - self.gamma * self.beta == 0:
            raise DegeneratePencilError(
                "alpha*delta - gamma*beta must be nonzero"
            )

    def transform(
        self, a: np.ndarray, b: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray]:
        return (
            self.gamma * b - self.delta * a,
            self.alpha * b - self.beta * a,
        )


@dataclass(frozen=True, eq=False)
class PencilPair:
    """Right subspace and transformed left subspace tracked by the pencil
    iteration (the left factor absorbs B_hat^{-H})."""

    hatted_left: Subspace
    right: Subspace

    def __post_init__(self):
        if (
            self.hatted_left.n != self.right.n
            or self.hatted_left.p != self.right.p
        ):
            raise DimensionMismatchError(
                f"left is {self.hatted_left.n}x{self.hatted_left.p}, "
                f"right is {self.right.n}x{self.right.p}"
            )

    @property
    def n(self) -> int:
        return self.right.n

    @property
    def p(self) -> int:
        return self.right.p

    @property
    def left(self) -> Subspace:
        """Alias so drivers can treat any two-sided state uniformly."""
        return self.hatted_left


class StructureCheck(NamedTuple):
    ok: bool
    defect: float


def apply_j(x: np.ndarray) -> np.ndarray:
    """Apply the block symplectic form J = [[0, I], [-I, 0]] without
    materializing it: O(np) row swap with sign."""
    x = np.asarray(x)
    n = x.shape[0]
    if n % 2 != 0:
        raise OddDimensionError(f"J needs even dimension, got {n}")
    h = n // 2
    return np.concatenate([x[h:], -x[:h]], axis=0)


def j_matrix(n: int) -> np.ndarray:
    """Dense block symplectic form, for checks and tests."""
    if n % 2 != 0:
        raise OddDimensionError(f"J needs even dimension, got {n}")
    h = n // 2
    j = np.zeros((n, n))
    j[:h, h:] = np.eye(h)
    j[h:, :h] = -np.eye(h)
    return j


def _pairing_defect(c: np.ndarray, e: np.ndarray, sign: float) -> float:
    """Norm of E C - sign * C^H E, relative scale left to the caller."""
    return float(np.linalg.norm(e @ c - sign * (c.conj().T @ e), 2))


def check_structure(matrices, kind) -> StructureCheck:
    """Verify a claimed structure, returning (ok, defect norm).

    ``matrices`` is the square matrix itself, or the tuple (A, B) for
    :class:`GeneralizedHermitian`.  The defect is compared against
    ``1e-10`` times the natural norm scale of the operands.
    """
    if isinstance(kind, Plain):
        return StructureCheck(True, 0.0)
    if isinstance(kind, GeneralizedHermitian):
        a, b = matrices
        a = np.asarray(a)
        b = np.asarray(b)
        defect = max(
            float(np.linalg.norm(a - a.conj().T, 2)),
            float(np.linalg.norm(b - b.conj().T, 2)),
        )
        scale = max(np.linalg.norm(a, 2), np.linalg.norm(b, 2), 1.0)
        return StructureCheck(defect <= _STRUCT_RTOL * scale, defect)
    c = np.asarray(matrices)
    n = c.shape[0]
    if c.shape != (n, n):
        raise DimensionMismatchError(f"matrix must be square, got {c.shape}")
    if isinstance(kind, (HamiltonianJ, SkewHamiltonianJ)):
        e = j_matrix(n)
        sign = -1.0 if isinstance(kind, HamiltonianJ) else 1.0
    elif isinstance(kind, (EHermitian, ESkewHermitian)):
        e = np.asarray(kind.e)
        if e.shape != (n, n):
            raise DimensionMismatchError(
                f"E is {e.shape}, expected {(n, n)}"
            )
        sign = 1.0 if isinstance(kind, EHermitian) else -1.0
    else:
        raise TypeError(f"unknown structure kind {kind!r}")
    defect = _pairing_defect(c, e, sign)
    scale = float(np.linalg.norm(e, 2) * np.linalg.norm(c, 2))
    return StructureCheck(defect <= _STRUCT_RTOL * max(scale, 1.0), defect)


def _as_operator(e):
    """Normalize an E argument (dense matrix or callable) to a callable."""
    if callable(e):
        return e
    e = np.asarray(e)
    return lambda x: e @ x


def one_sided_step(
    c: np.ndarray,
    e,
    y: Subspace,
    cfg: StepConfig | None = None,
    *,
    full_output: bool = False,
):
    """One structure-exploiting right-subspace step.

    For C with E C = +/- C^H E, the left iterate of the two-sided step
    started from the pair (span(E Y), span(Y)) is always span(E Z_R), so
    only the right update C Z - Z (Y^H E Y)^{-1} (Y^H E C Y) = Y needs to
    be solved.  ``e`` may be a dense matrix or a callable applying it.
    """
    cfg = cfg or StepConfig()
    c = np.asarray(c)
    if c.shape != (y.n, y.n):
        raise DimensionMismatchError(
            f"matrix is {c.shape}, expected {(y.n, y.n)}"
        )
    apply_e = _as_operator(e)
    ey = apply_e(y.basis)
    gram = y.basis.conj().T @ ey
    sv = np.linalg.svd(gram, compute_uv=False)
    if sv[-1] <= _GRAM_TOL * max(1.0, sv[0]):
        raise GramSingularError(
            f"Y^H E Y is numerically singular (sigma_min = {sv[-1]:.3e})"
        )
    quotient = np.linalg.solve(gram, y.basis.conj().T @ apply_e(c @ y.basis))
    block = small_eig(
        quotient,
        strict=cfg.strict_defective,
        cond_limit=cfg.defective_cond_limit,
    )
    rhs = y.basis @ block.eigvecs
    eps = solve_eps(c, cfg.eps_scale)
    z = np.empty((y.n, y.p), dtype=complex)
    perturbed = False
    for i in range(y.p):
        z[:, i], flag = shifted_solve(c, block.shifts[i], rhs[:, i], eps)
        perturbed |= flag
    out = orthonormalize(z)
    if full_output:
        return out, StepDiagnostics(
            perturbed=perturbed, shift_cond=block.cond
        )
    return out


def hamiltonian_step(
    c: np.ndarray,
    y: Subspace,
    cfg: StepConfig | None = None,
    *,
    full_output: bool = False,
):
    """One-sided step for (C J)^H = C J matrices, with J applied
    implicitly.  The matching left subspace is span(J Y)."""
    return one_sided_step(c, apply_j, y, cfg, full_output=full_output)


def skew_hamiltonian_step(
    c: np.ndarray,
    y: Subspace,
    cfg: StepConfig | None = None,
    *,
    full_output: bool = False,
):
    """One-sided step for (C J)^H = -(C J) matrices; identical to
    :func:`one_sided_step` with E = J."""
    return one_sided_step(c, apply_j, y, cfg, full_output=full_output)


def _generalized_shifted_solve(
    a: np.ndarray,
    b: np.ndarray,
    rho: complex,
    rhs: np.ndarray,
    eps: float,
) -> tuple[np.ndarray, bool]:
    """Solve (A - rho B) z = rhs, retrying with rho - eps on failure."""
    try:
        z = np.linalg.solve(a - rho * b, rhs)
        if np.all(np.isfinite(z)):
            return z, False
    except np.linalg.LinAlgError:
        pass
    try:
        z = np.linalg.solve(a - (rho - eps) * b, rhs)
        if np.all(np.isfinite(z)):
            return z, True
    except np.linalg.LinAlgError:
        pass
    raise SingularPencilShiftError(
        f"pencil solve failed at shift {rho} even after moving it by "
        f"{eps:.3e}"
    )


def generalized_hermitian_step(
    a: np.ndarray,
    b: np.ndarray,
    y: Subspace,
    cfg: StepConfig | None = None,
    *,
    full_output: bool = False,
):
    """One-sided step for the Hermitian pencil (A, B) with B invertible.

    Equivalent to the E-Hermitian step with E = B applied to B^{-1} A, but
    implemented with shifted pencil solves (A - rho_i B) so B is never
    inverted.
    """
    cfg = cfg or StepConfig()
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != (y.n, y.n) or b.shape != (y.n, y.n):
        raise DimensionMismatchError(
            f"matrices are {a.shape} and {b.shape}, expected "
            f"{(y.n, y.n)}"
        )
    by = b @ y.basis
    gram = y.basis.conj().T @ by
    sv = np.linalg.svd(gram, compute_uv=False)
    if sv[-1] <= _GRAM_TOL * max(1.0, sv[0]):
        raise GramSingularError(
            f"Y^H B Y is numerically singular (sigma_min = {sv[-1]:.3e})"
        )
    quotient = np.linalg.solve(gram, y.basis.conj().T @ (a @ y.basis))
    block = small_eig(
        quotient,
        strict=cfg.strict_defective,
        cond_limit=cfg.defective_cond_limit,
    )
    rhs = by @ block.eigvecs
    eps = solve_eps(a, cfg.eps_scale)
    z = np.empty((y.n, y.p), dtype=complex)
    perturbed = False
    for i in range(y.p):
        z[:, i], flag = _generalized_shifted_solve(
            a, b, block.shifts[i], rhs[:, i], eps
        )
        perturbed |= flag
    out = orthonormalize(z)
    if full_output:
        return out, StepDiagnostics(
            perturbed=perturbed, shift_cond=block.cond
        )
    return out


class TargetGroup(NamedTuple):
    """One mirror-symmetric eigenvalue group with its eigenspaces.

    ``left`` is None unless an E operator was supplied to
    :func:`full_eigenspace_targets`.
    """

    eigenvalues: np.ndarray
    right: Subspace
    left: Subspace | None


def full_eigenspace_targets(
    c: np.ndarray,
    e=None,
    *,
    conjugate_closed: bool | None = None,
    cond_limit: float = 1e8,
) -> list[TargetGroup]:
    """Eigenvalue groups symmetric about the imaginary axis, with their
    right eigenspaces.

    For matrices whose spectrum carries the mirror symmetry lambda ->
    -conj(lambda) (E-skew-Hermitian ones do), one-sided iterations can
    only converge to eigenspaces of full mirror-symmetric groups; this
    enumerates them.  For real input the groups are additionally closed
    under conjugation, so the spanned subspaces are real: a real pair
    {lambda, -lambda} gives p = 2 and a complex quadruple
    {lambda, conj(lambda), -lambda, -conj(lambda)} gives p = 4.
    When ``e`` (matrix or callable) is given, the matching left eigenspace
    span(E V_R) is attached to each group.  Groups are returned in
    descending order of largest absolute real part.
    """
    c = np.asarray(c)
    n = c.shape[0]
    if c.shape != (n, n):
        raise DimensionMismatchError(f"matrix must be square, got {c.shape}")
    if conjugate_closed is None:
        conjugate_closed = bool(np.isrealobj(c))
    values, s = np.linalg.eig(c)
    sv = np.linalg.svd(s, compute_uv=False)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0.0 else float("inf")
    if cond > cond_limit:
        raise NearDefectiveError(
            f"eigenvector matrix condition {cond:.3e} exceeds "
            f"{cond_limit:.1e}; grouping would be unreliable"
        )
    apply_e = _as_operator(e) if e is not None else None
    tol = 1e-8 * max(1.0, float(np.linalg.norm(c, 2)))
    groups = group_mirror_eigenvalues(values, tol, conjugate_closed)
    out = []
    for g in groups:
        right = orthonormalize(s[:, g])
        left = (
            orthonormalize(apply_e(right.basis))
            if apply_e is not None
            else None
        )
        out.append(TargetGroup(values[g], right, left))
    out.sort(key=lambda t: -float(np.abs(t.eigenvalues.real).max()))
    return out


def pencil_tsgrqi_step(
    a: np.ndarray,
    b: np.ndarray,
    pair: PencilPair,
    coeffs: PencilCoefficients | None = None,
    cfg: StepConfig | None = None,
) -> tuple[PencilPair, StepDiagnostics]:
    """One two-sided step on the pencil (A, B) for deflating subspace
    pairs.

    With A_hat, B_hat the normalized combination of the pencil, the right
    update solves A_hat Z (Yl^H B_hat Yr) - B_hat Z (Yl^H A_hat Yr) =
    B_hat Yr.  Diagonalizing M = (Yl^H B_hat Yr)^{-1} (Yl^H A_hat Yr) =
    W diag(rho) W^{-1} decouples it into columns
    (A_hat - rho_i B_hat) z = B_hat Yr W e_i, and the adjoint system
    decouples the same way under the conjugated shifts with the left
    eigenvector factor (Gb W)^{-H}.  For B = I and the default
    normalization this reduces to the plain two-sided step.
    """
    coeffs = coeffs or PencilCoefficients()
    cfg = cfg or StepConfig()
    a = np.asarray(a)
    b = np.asarray(b)
    n = pair.n
    if a.shape != (n, n) or b.shape != (n, n):
        raise DimensionMismatchError(
            f"matrices are {a.shape} and {b.shape}, expected {(n, n)}"
        )
    a_hat, b_hat = coeffs.transform(a, b)
    sv_b = np.linalg.svd(b_hat, compute_uv=False)
    if sv_b[-1] <= n * np.finfo(float).eps * sv_b[0]:
        raise DegeneratePencilError(
            "normalized B_hat is numerically singular; pick a different "
            "(alpha, beta)"
        )
    yl = pair.hatted_left.basis
    yr = pair.right.basis
    gram_b = yl.conj().T @ (b_hat @ yr)
    sv = np.linalg.svd(gram_b, compute_uv=False)
    if sv[-1] <= _GRAM_TOL * max(1.0, sv[0]):
        raise GramSingularError(
            f"Yl^H B_hat Yr is numerically singular "
            f"(sigma_min = {sv[-1]:.3e})"
        )
    gram_a = yl.conj().T @ (a_hat @ yr)
    quotient = np.linalg.solve(gram_b, gram_a)
    block = small_eig(
        quotient,
        strict=cfg.strict_defective,
        cond_limit=cfg.defective_cond_limit,
    )
    w = block.eigvecs
    w_left = np.linalg.inv(gram_b @ w).conj().T
    rhs_r = b_hat @ (yr @ w)
    rhs_l = b_hat.conj().T @ (yl @ w_left)
    a_hat_h = a_hat.conj().T
    b_hat_h = b_hat.conj().T
    eps = solve_eps(a_hat, cfg.eps_scale)
    z_r = np.empty((n, pair.p), dtype=complex)
    z_l = np.empty((n, pair.p), dtype=complex)
    perturbed = False
    for i in range(pair.p):
        rho = block.shifts[i]
        z_r[:, i], flag_r = _generalized_shifted_solve(
            a_hat, b_hat, rho, rhs_r[:, i], eps
        )
        z_l[:, i], flag_l = _generalized_shifted_solve(
            a_hat_h, b_hat_h, np.conj(rho), rhs_l[:, i], eps
        )
        perturbed |= flag_r or flag_l
    out = PencilPair(
        hatted_left=orthonormalize(z_l), right=orthonormalize(z_r)
    )
    return out, StepDiagnostics(perturbed=perturbed, shift_cond=block.cond)


def choose_pencil_normalization(
    a: np.ndarray,
    b: np.ndarray,
    rng: np.random.Generator | None = None,
    *,
    cond_limit: float = 1e8,
    tries: int = 50,
) -> PencilCoefficients:
    """Pick pencil coefficients with a well-conditioned B_hat.

    The default normalization (B_hat = B) is kept when B is invertible
    with condition below ``cond_limit``; otherwise random unit-circle
    combinations (alpha, beta) are tried, with (gamma, delta) =
    (-beta, alpha) to keep the pair nondegenerate.  Raises
    :class:`~grqi.errors.DegeneratePencilError` when no acceptable
    combination is found.
    """
    a = np.asarray(a)
    b = np.asarray(b)

    def _cond(m: np.ndarray) -> float:
        sv = np.linalg.svd(m, compute_uv=False)
        return float(sv[0] / sv[-1]) if sv[-1] > 0.0 else float("inf")

    default = PencilCoefficients()
    if _cond(default.transform(a, b)[1]) < cond_limit:
        return default
    rng = rng or np.random.default_rng(0)
    for _ in range(tries):
        t = float(rng.uniform(0.0, 2.0 * np.pi))
        alpha, beta = np.cos(t), np.sin(t)
        coeffs = PencilCoefficients(
            alpha=alpha, beta=beta, gamma=-beta, delta=alpha
        )
        if _cond(coeffs.transform(a, b)[1]) < cond_limit:
            return coeffs
    raise DegeneratePencilError(
        f"no normalization with cond(B_hat) < {cond_limit:.1e} found in "
        f"{tries} tries"
    )
