"""Subspace iteration steps and the trace-recording driver.

The central step is :func:`tsgrqi_step`, which refines a pair of left and
right subspaces simultaneously and converges locally cubically to pairs of
spectral left-right invariant subspaces of a general square matrix.  The
classical one-vector and one-sided variants (:func:`rqi_step`,
:func:`grqi_step`, :func:`two_sided_rqi_step`) and a Newton baseline
(:func:`newton_chatelin_step`) are provided for comparison and as
degeneration checks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BiorthogonalityLostError,
    DimensionMismatchError,
    GramSingularError,
    GrqiError,
    NotHermitianError,
    ZeroVectorError,
)
from .kernels import (
    Subspace,
    largest_principal_angle,
    orthonormalize,
    shifted_solve,
    small_eig,
    solve_eps,
    sylvester_solve,
)

__all__ = [
    "StepConfig",
    "StepDiagnostics",
    "SubspacePair",
    "IterationRecord",
    "IterationTrace",
    "CONVERGED",
    "MAX_ITERS",
    "FAILURE",
    "rqi_step",
    "grqi_step",
    "two_sided_rqi_step",
    "tsgrqi_step",
    "newton_chatelin_step",
    "iterate",
]

_GRAM_TOL = 1e-12
_BIORTH_TOL = 1e-13
_HERM_RTOL = 1e-12

CONVERGED = "converged"
MAX_ITERS = "max_iters"
FAILURE = "failure"


@dataclass(frozen=True)
class StepConfig:
    """Knobs shared by the iteration steps and the driver.

    ``eps_scale`` controls the fallback perturbation of near-singular
    shifted solves (``eps_scale * u * ||C||_F``).  ``strict_defective``
    turns the near-defective shift-block warning into a hard error at
    condition ``defective_cond_limit``.
    """

    max_iters: int = 50
    angle_tol: float = 1e-12
    eps_scale: float = 1e3
    strict_defective: bool = False
    defective_cond_limit: float = 1e8
    seed: int | None = None

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if not (self.angle_tol > 0.0):
            raise ValueError(f"angle_tol must be > 0, got {self.angle_tol}")
        if self.eps_scale <= 0.0:
            raise ValueError(f"eps_scale must be > 0, got {self.eps_scale}")


@dataclass(frozen=True)
class StepDiagnostics:
    """Per-step bookkeeping: whether any shifted solve needed the
    perturbation fallback, and the condition number of the shift-block
    eigenvector basis."""

    perturbed: bool = False
    shift_cond: float = float("nan")


@dataclass(frozen=True, eq=False)
class SubspacePair:
    """A left subspace and a right subspace of equal dimension.

    The cross Gram matrix of the two bases is tracked by the iteration but
    is not required to be invertible here; the step itself raises when it
    degenerates.
    """

    left: Subspace
    right: Subspace

    def __post_init__(self):
        if self.left.n != self.right.n or self.left.p != self.right.p:
            raise DimensionMismatchError(
                f"left is {self.left.n}x{self.left.p}, "
                f"right is {self.right.n}x{self.right.p}"
            )

    @property
    def n(self) -> int:
        return self.right.n

    @property
    def p(self) -> int:
        return self.right.p


@dataclass(frozen=True)
class IterationRecord:
    """One row of an iteration trace.

    ``left_err``/``right_err`` are principal angles to the oracle
    subspaces (NaN when no oracle was supplied), ``err_sum`` their sum,
    ``residual`` the invariance residual angle of the current iterate.
    """

    index: int
    right_err: float = float("nan")
    left_err: float = float("nan")
    err_sum: float = float("nan")
    residual: float = float("nan")
    perturbed: bool = False
    shift_cond: float = float("nan")


@dataclass
class IterationTrace:
    """Complete record of one refinement run."""

    records: list[IterationRecord] = field(default_factory=list)
    status: str = MAX_ITERS
    failure_reason: str | None = None

    @property
    def iterates(self) -> int:
        return len(self.records)

    def errors(self) -> np.ndarray:
        """Per-iterate oracle error sums, NaN where unavailable."""
        return np.array([r.err_sum for r in self.records])


def rqi_step(a: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, bool]:
    """One Rayleigh quotient iteration step for a Hermitian matrix.

    Returns the normalized next vector and a terminal flag; the flag is set
    when the shifted matrix is numerically singular, in which case the
    returned vector is a kernel direction (an eigenvector, so iteration can
    stop).
    """
    a = np.asarray(a)
    n = a.shape[0]
    if a.shape != (n, n):
        raise DimensionMismatchError(f"matrix must be square, got {a.shape}")
    herm_defect = np.linalg.norm(a - a.conj().T, 2)
    if herm_defect > _HERM_RTOL * max(1.0, np.linalg.norm(a, 2)):
        raise NotHermitianError(
            f"matrix is not Hermitian: ||A - A^H|| = {herm_defect:.3e}"
        )
    y = np.asarray(y).reshape(-1)
    if y.shape[0] != n:
        raise DimensionMismatchError(
            f"vector has length {y.shape[0]}, expected {n}"
        )
    ny = np.linalg.norm(y)
    if ny == 0.0:
        raise ZeroVectorError("cannot iterate from the zero vector")
    y = y / ny
    rho = float(np.real(np.vdot(y, a @ y)))
    try:
        z = np.linalg.solve(a - rho * np.eye(n), y)
        if not np.all(np.isfinite(z)):
            raise np.linalg.LinAlgError
    except np.linalg.LinAlgError:
        # rho is an eigenvalue to working precision: return a kernel vector.
        _, _, vh = np.linalg.svd(a - rho * np.eye(n))
        return vh[-1].conj(), True
    return z / np.linalg.norm(z), False


def grqi_step(
    a: np.ndarray,
    y: Subspace,
    cfg: StepConfig | None = None,
    *,
    full_output: bool = False,
):
    """One block Rayleigh quotient step for a Hermitian matrix.

    The block Rayleigh quotient Y^H A Y is diagonalized (it is Hermitian,
    so the eigenvector basis is unitary) and each column is refined by an
    independently shifted solve.
    """
    cfg = cfg or StepConfig()
    a = np.asarray(a)
    if a.shape != (y.n, y.n):
        raise DimensionMismatchError(
            f"matrix is {a.shape}, expected {(y.n, y.n)}"
        )
    herm_defect = np.linalg.norm(a - a.conj().T, 2)
    if herm_defect > _HERM_RTOL * max(1.0, np.linalg.norm(a, 2)):
        raise NotHermitianError(
            f"matrix is not Hermitian: ||A - A^H|| = {herm_defect:.3e}"
        )
    rayleigh = y.basis.conj().T @ (a @ y.basis)
    rayleigh = (rayleigh + rayleigh.conj().T) / 2.0
    shifts, w = np.linalg.eigh(rayleigh)
    rhs = y.basis @ w
    eps = solve_eps(a, cfg.eps_scale)
    cols = np.empty((y.n, y.p), dtype=np.promote_types(a.dtype, rhs.dtype))
    perturbed = False
    for i in range(y.p):
        cols[:, i], flag = shifted_solve(a, shifts[i], rhs[:, i], eps)
        perturbed |= flag
    out = orthonormalize(cols)
    if full_output:
        return out, StepDiagnostics(perturbed=perturbed, shift_cond=1.0)
    return out


def two_sided_rqi_step(
    c: np.ndarray,
    v: np.ndarray,
    u: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, bool]:
    """One two-sided Rayleigh quotient step on a left/right vector pair.

    ``v`` is the left vector, ``u`` the right one.  The shared shift is the
    two-sided Rayleigh quotient v^H C u / v^H u; the right vector is
    refined with C and the left one with C^H under the conjugated shift.
    Returns ``(v_next, u_next, terminal)`` with unit vectors; ``terminal``
    is set when the shift is an eigenvalue to working precision, in which
    case kernel vectors (left and right eigenvectors) are returned.
    """
    c = np.asarray(c)
    n = c.shape[0]
    if c.shape != (n, n):
        raise DimensionMismatchError(f"matrix must be square, got {c.shape}")
    v = np.asarray(v).reshape(-1)
    u = np.asarray(u).reshape(-1)
    if v.shape[0] != n or u.shape[0] != n:
        raise DimensionMismatchError(
            f"vectors have lengths {v.shape[0]}, {u.shape[0]}, expected {n}"
        )
    v = v / np.linalg.norm(v)
    u = u / np.linalg.norm(u)
    pairing = np.vdot(v, u)
    if abs(pairing) <= _BIORTH_TOL:
        raise BiorthogonalityLostError(
            f"|v^H u| = {abs(pairing):.3e}: two-sided quotient undefined"
        )
    rho = complex(np.vdot(v, c @ u) / pairing)
    eye = np.eye(n)
    try:
        u_next = np.linalg.solve(c - rho * eye, u)
        v_next = np.linalg.solve(c.conj().T - np.conj(rho) * eye, v)
        if not (np.all(np.isfinite(u_next)) and np.all(np.isfinite(v_next))):
            raise np.linalg.LinAlgError
    except np.linalg.LinAlgError:
        # Shift hit the spectrum: extract the kernel pair and stop.
        uu, _, vh = np.linalg.svd(c - rho * eye)
        return uu[:, -1], vh[-1].conj(), True
    u_next = u_next / np.linalg.norm(u_next)
    v_next = v_next / np.linalg.norm(v_next)
    if abs(np.vdot(v_next, u_next)) <= _BIORTH_TOL:
        raise BiorthogonalityLostError(
            "updated vectors are numerically orthogonal"
        )
    return v_next, u_next, False


def tsgrqi_step(
    c: np.ndarray,
    pair: SubspacePair,
    cfg: StepConfig | None = None,
) -> tuple[SubspacePair, StepDiagnostics]:
    """One two-sided Grassmann Rayleigh quotient step.

    The right block quotient R = (Y_L^H Y_R)^{-1} (Y_L^H C Y_R) is
    eigendecomposed, which decouples the coupled update equations into 2p
    independent shifted solves: columns of the right update solve
    (C - rho_i I) z = Y_R W e_i and columns of the left update solve the
    adjoint system (C^H - conj(rho_i) I) z = Y_L W_L^{-H} e_i with
    W_L = (Y_L^H Y_R) W.  Solves that hit the spectrum are retried with a
    perturbed shift; both updates are orthonormalized.
    """
    cfg = cfg or StepConfig()
    c = np.asarray(c)
    if c.shape != (pair.n, pair.n):
        raise DimensionMismatchError(
            f"matrix is {c.shape}, expected {(pair.n, pair.n)}"
        )
    yl = pair.left.basis
    yr = pair.right.basis
    gram = yl.conj().T @ yr
    sv = np.linalg.svd(gram, compute_uv=False)
    if sv[-1] <= _GRAM_TOL:
        raise GramSingularError(
            f"cross Gram matrix is numerically singular "
            f"(sigma_min = {sv[-1]:.3e})"
        )
    quotient = np.linalg.solve(gram, yl.conj().T @ (c @ yr))
    block = small_eig(
        quotient,
        strict=cfg.strict_defective,
        cond_limit=cfg.defective_cond_limit,
    )
    w_r = block.eigvecs
    w_l_inv_h = np.linalg.inv(gram @ w_r).conj().T
    rhs_r = yr @ w_r
    rhs_l = yl @ w_l_inv_h
    eps = solve_eps(c, cfg.eps_scale)
    ch = c.conj().T
    z_r = np.empty((pair.n, pair.p), dtype=complex)
    z_l = np.empty((pair.n, pair.p), dtype=complex)
    perturbed = False
    for i in range(pair.p):
        rho = block.shifts[i]
        z_r[:, i], flag_r = shifted_solve(c, rho, rhs_r[:, i], eps)
        z_l[:, i], flag_l = shifted_solve(ch, np.conj(rho), rhs_l[:, i], eps)
        perturbed |= flag_r or flag_l
    out = SubspacePair(left=orthonormalize(z_l), right=orthonormalize(z_r))
    return out, StepDiagnostics(perturbed=perturbed, shift_cond=block.cond)


def newton_chatelin_step(
    c: np.ndarray,
    y: Subspace,
    *,
    full_output: bool = False,
):
    """One Newton step for the invariant-subspace equation.

    With Y_perp an orthonormal complement of Y, the correction K solves the
    Sylvester equation
    (Y_perp^H C Y_perp) K - K (Y^H C Y) = -Y_perp^H C Y,
    and the next iterate is the orthonormalized Y + Y_perp K.  Quadratically
    convergent in general, cubically for Hermitian C.
    """
    c = np.asarray(c)
    if c.shape != (y.n, y.n):
        raise DimensionMismatchError(
            f"matrix is {c.shape}, expected {(y.n, y.n)}"
        )
    if y.p == y.n:
        # The whole space is invariant; nothing to correct.
        out = y
    else:
        q, _ = np.linalg.qr(y.basis, mode="complete")
        perp = q[:, y.p:]
        a22 = perp.conj().T @ (c @ perp)
        a11 = y.basis.conj().T @ (c @ y.basis)
        a21 = perp.conj().T @ (c @ y.basis)
        k = sylvester_solve(a22, a11, -a21)
        out = orthonormalize(y.basis + perp @ k)
    if full_output:
        return out, StepDiagnostics(perturbed=False, shift_cond=float("nan"))
    return out


def _as_tuple(state) -> tuple[Subspace, ...]:
    if isinstance(state, Subspace):
        return (state,)
    # Any two-sided state exposing .left/.right components.
    return (state.left, state.right)


def _state_angle(a, b) -> float:
    """Largest principal angle between matching components of two states."""
    return max(
        largest_principal_angle(x, y)
        for x, y in zip(_as_tuple(a), _as_tuple(b))
    )


def _oracle_record(state, oracle, index, residual, diag) -> IterationRecord:
    right_err = left_err = err_sum = float("nan")
    if oracle is not None:
        if isinstance(state, Subspace):
            right_err = largest_principal_angle(state, oracle)
            err_sum = right_err
        else:
            left_err = largest_principal_angle(state.left, oracle.left)
            right_err = largest_principal_angle(state.right, oracle.right)
            err_sum = left_err + right_err
    return IterationRecord(
        index=index,
        right_err=right_err,
        left_err=left_err,
        err_sum=err_sum,
        residual=residual,
        perturbed=diag.perturbed,
        shift_cond=diag.shift_cond,
    )


def iterate(
    step,
    start,
    cfg: StepConfig | None = None,
    *,
    residual=None,
    oracle=None,
) -> IterationTrace:
    """Drive a step function to convergence, recording a full trace.

    ``step`` maps a state (a :class:`~grqi.kernels.Subspace` or a
    :class:`SubspacePair`) to ``(next_state, StepDiagnostics)``;
    ``residual`` optionally maps a state to its invariance residual angle;
    ``oracle`` is a reference state used to fill the error columns.

    The run is declared converged when both the angle between successive
    iterates and the residual angle fall below ``cfg.angle_tol`` at the
    same iterate (the successive-iterate angle alone can stall small while
    the iterate is still wrong).  Step failures are captured in the trace
    status, never raised.
    """
    cfg = cfg or StepConfig()

    def _residual(state) -> float:
        return float(residual(state)) if residual is not None else float("nan")

    trace = IterationTrace()
    state = start
    trace.records.append(
        _oracle_record(state, oracle, 0, _residual(state), StepDiagnostics())
    )
    for k in range(1, cfg.max_iters + 1):
        try:
            nxt, diag = step(state)
        except GrqiError as exc:
            trace.status = FAILURE
            trace.failure_reason = f"{type(exc).__name__}: {exc}"
            return trace
        res = _residual(nxt)
        trace.records.append(_oracle_record(nxt, oracle, k, res, diag))
        move = _state_angle(state, nxt)
        state = nxt
        if move <= cfg.angle_tol and (np.isnan(res) or res <= cfg.angle_tol):
            trace.status = CONVERGED
            return trace
    trace.status = MAX_ITERS
    return trace
