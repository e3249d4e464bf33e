"""Complex-adjoint embedding and the SVD-backed kernel: rank, pseudoinverse, projectors.

A quaternion matrix ``A = A1 + A2 j`` (A1, A2 complex) is embedded as the
``2m x 2n`` complex matrix ``[[A1, A2], [-conj(A2), conj(A1)]]``. The embedding
is an injective algebra homomorphism that commutes with conjugate transpose and
with the Moore-Penrose inverse, and it doubles ranks.
"""
from __future__ import annotations

import logging
from collections.abc import Mapping, Sequence
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ConfigDict, Field

from qsylv.core.config import get_settings
from qsylv.core.errors import DimError, PairingViolation, StructureViolation
from qsylv.services.quat_core import QMatrix, hstack, vstack

logger = logging.getLogger(__name__)

ComplexMatrix = npt.NDArray[np.complex128]

STRUCTURE_TOL = 1e-8

# singular values within this factor of the threshold make a rank decision fragile
NEAR_THRESHOLD_FACTOR = 1e3


class RankPolicy(BaseModel):
    """Relative singular-value threshold shared by every rank decision of one report."""

    model_config = ConfigDict(frozen=True)

    rel_tol: float = Field(1e-10, gt=0.0)

    @classmethod
    def from_settings(cls) -> RankPolicy:
        return cls(rel_tol=get_settings().rel_tol)

    def threshold(self, sigma_max: float, shape: tuple[int, ...]) -> float:
        return self.rel_tol * sigma_max * max(shape)


@dataclass(frozen=True)
class SvdPinv:
    """Thresholded pseudoinverse of a plain (real or complex) matrix."""

    pinv: npt.NDArray
    kept: int
    sigma_min_kept: float
    sigma_max_dropped: float


@dataclass(frozen=True)
class PinvResult:
    pinv: QMatrix
    rank: int
    sigma_min_kept: float
    sigma_max_dropped: float


def _resolve(policy: RankPolicy | None) -> RankPolicy:
    return policy if policy is not None else RankPolicy.from_settings()


def singular_values(matrix: npt.NDArray) -> npt.NDArray[np.float64]:
    if matrix.size == 0:
        return np.zeros(0)
    return np.linalg.svd(matrix, compute_uv=False)


def _kept_count(sigma: npt.NDArray[np.float64], shape: tuple[int, ...], policy: RankPolicy) -> int:
    if sigma.size == 0 or sigma[0] == 0.0:
        return 0
    return int(np.count_nonzero(sigma > policy.threshold(float(sigma[0]), shape)))


def near_threshold(
    sigma: npt.NDArray[np.float64], shape: tuple[int, ...], policy: RankPolicy
) -> bool:
    """True when the smallest kept or largest dropped value is close to the threshold."""
    if sigma.size == 0 or sigma[0] == 0.0:
        return False
    threshold = policy.threshold(float(sigma[0]), shape)
    low, high = threshold / NEAR_THRESHOLD_FACTOR, threshold * NEAR_THRESHOLD_FACTOR
    return bool(np.any((sigma > low) & (sigma < high)))


def svd_pinv(matrix: npt.NDArray, policy: RankPolicy | None = None) -> SvdPinv:
    """Moore-Penrose inverse through a truncated SVD, for real or complex arrays."""
    policy = _resolve(policy)
    rows, cols = matrix.shape
    if matrix.size == 0:
        return SvdPinv(np.zeros((cols, rows), dtype=matrix.dtype), 0, 0.0, 0.0)
    u, sigma, vh = np.linalg.svd(matrix, full_matrices=False)
    kept = _kept_count(sigma, matrix.shape, policy)
    pinv = (vh[:kept].conj().T / sigma[:kept]) @ u[:, :kept].conj().T
    sigma_min_kept = float(sigma[kept - 1]) if kept else 0.0
    sigma_max_dropped = float(sigma[kept]) if kept < sigma.size else 0.0
    return SvdPinv(pinv, kept, sigma_min_kept, sigma_max_dropped)


def to_complex_adjoint(A: QMatrix) -> ComplexMatrix:
    data = A.data
    a1 = data[:, :, 0] + 1j * data[:, :, 1]
    a2 = data[:, :, 2] + 1j * data[:, :, 3]
    return np.block([[a1, a2], [-np.conj(a2), np.conj(a1)]])


def from_complex_adjoint(M: ComplexMatrix) -> QMatrix:
    """Inverse of the embedding; the two redundant copies are averaged first."""
    rows2, cols2 = M.shape
    if rows2 % 2 or cols2 % 2:
        raise DimError(f"complex-adjoint matrix must have even dimensions, got {rows2}x{cols2}")
    m, n = rows2 // 2, cols2 // 2
    top_left, top_right = M[:m, :n], M[:m, n:]
    bottom_left, bottom_right = M[m:, :n], M[m:, n:]
    scale = float(np.linalg.norm(M))
    residual = float(
        np.linalg.norm(bottom_right - np.conj(top_left)) + np.linalg.norm(bottom_left + np.conj(top_right))
    )
    if residual > STRUCTURE_TOL * scale:
        raise StructureViolation(residual / scale if scale else residual)
    a1 = (top_left + np.conj(bottom_right)) / 2
    a2 = (top_right - np.conj(bottom_left)) / 2
    return QMatrix(np.stack([a1.real, a1.imag, a2.real, a2.imag], axis=-1))


def rank(A: QMatrix, policy: RankPolicy | None = None) -> int:
    """Quaternion rank: half the number of embedding singular values above threshold."""
    policy = _resolve(policy)
    embedded = to_complex_adjoint(A)
    sigma = singular_values(embedded)
    count = _kept_count(sigma, embedded.shape, policy)
    if count % 2:
        logger.warning("odd singular value count %d for %dx%d matrix", count, A.rows, A.cols)
        raise PairingViolation(count)
    if near_threshold(sigma, embedded.shape, policy):
        logger.warning(
            "rank %d of %dx%d matrix is fragile: a singular value lies within %.0e of the "
            "threshold; blocks on very different scales can misreport the certificate",
            count // 2,
            A.rows,
            A.cols,
            NEAR_THRESHOLD_FACTOR,
        )
    return count // 2


def pinv(A: QMatrix, policy: RankPolicy | None = None) -> PinvResult:
    policy = _resolve(policy)
    result = svd_pinv(to_complex_adjoint(A), policy)
    if result.kept % 2:
        raise PairingViolation(result.kept)
    return PinvResult(
        pinv=from_complex_adjoint(result.pinv),
        rank=result.kept // 2,
        sigma_min_kept=result.sigma_min_kept,
        sigma_max_dropped=result.sigma_max_dropped,
    )


def _null_space_projectors(A: QMatrix, policy: RankPolicy) -> tuple[ComplexMatrix, ComplexMatrix]:
    """Embedded ``R_A`` and ``L_A`` built from the singular vectors dropped by the threshold.

    Built this way a full-rank side gives an exactly zero projector instead of roundoff.
    """
    embedded = to_complex_adjoint(A)
    rows2, cols2 = embedded.shape
    if embedded.size == 0:
        return np.eye(rows2, dtype=complex), np.eye(cols2, dtype=complex)
    u, sigma, vh = np.linalg.svd(embedded, full_matrices=True)
    kept = _kept_count(sigma, embedded.shape, policy)
    if kept % 2:
        raise PairingViolation(kept)
    left_null = u[:, kept:]
    right_null = vh[kept:].conj().T
    return left_null @ left_null.conj().T, right_null @ right_null.conj().T


def proj_L(A: QMatrix, policy: RankPolicy | None = None) -> QMatrix:
    """``L_A = I - A^dagger A`` (cols x cols)."""
    _, right = _null_space_projectors(A, _resolve(policy))
    return from_complex_adjoint(right)


def proj_R(A: QMatrix, policy: RankPolicy | None = None) -> QMatrix:
    """``R_A = I - A A^dagger`` (rows x rows)."""
    left, _ = _null_space_projectors(A, _resolve(policy))
    return from_complex_adjoint(left)


def drop_roundoff(
    product: QMatrix, factors: Sequence[QMatrix | float], policy: RankPolicy | None = None
) -> QMatrix:
    """Return exact zero when ``product`` is roundoff relative to the norms of its factors.

    A relative rank threshold counts pure roundoff as full rank, so products that
    vanish in exact arithmetic have to be cleared before their ranks are taken.
    """
    policy = _resolve(policy)
    scale = 1.0
    for factor in factors:
        scale *= factor if isinstance(factor, float) else factor.frobenius_norm()
    floor = policy.rel_tol * max(product.rows, product.cols, 1) * scale
    if product.frobenius_norm() <= floor:
        return QMatrix.zeros(*product.shape)
    return product


def block_matrix(
    cells: Mapping[tuple[int, int], QMatrix] | Sequence[Sequence[QMatrix | None]],
    row_dims: Sequence[int],
    col_dims: Sequence[int],
) -> QMatrix:
    """Assemble a dense matrix from a grid of blocks; absent cells are zero.

    ``cells`` is either a nested grid (``None`` for zero) or a mapping from
    (row band, column band) to the block placed there.
    """
    if not isinstance(cells, Mapping):
        grid = cells
        cells = {
            (i, j): block
            for i, row in enumerate(grid)
            for j, block in enumerate(row)
            if block is not None
        }
        if len(grid) != len(row_dims) or any(len(row) != len(col_dims) for row in grid):
            raise DimError(f"grid does not match {len(row_dims)}x{len(col_dims)} band layout")
    if any(d < 0 for d in (*row_dims, *col_dims)):
        raise DimError("band dimensions must be non-negative")
    row_offsets = np.concatenate([[0], np.cumsum(row_dims, dtype=int)])
    col_offsets = np.concatenate([[0], np.cumsum(col_dims, dtype=int)])
    out = np.zeros((int(row_offsets[-1]), int(col_offsets[-1]), 4))
    for (i, j), block in cells.items():
        if not (0 <= i < len(row_dims) and 0 <= j < len(col_dims)):
            raise DimError(f"cell ({i}, {j}) lies outside the {len(row_dims)}x{len(col_dims)} layout")
        if block.shape != (row_dims[i], col_dims[j]):
            raise DimError(
                f"cell ({i}, {j}) is {block.rows}x{block.cols}, band is {row_dims[i]}x{col_dims[j]}"
            )
        out[row_offsets[i] : row_offsets[i + 1], col_offsets[j] : col_offsets[j + 1]] = block.data
    return QMatrix(out)


def rank_calculus_gaps(
    A: QMatrix, B: QMatrix, C: QMatrix, policy: RankPolicy | None = None
) -> dict[str, int]:
    """Integer gaps of the projector rank identities; every value is zero.

    ``A`` and ``B`` share rows, ``A`` and ``C`` share columns.
    """
    policy = _resolve(policy)
    r_ab = rank(hstack([A, B]), policy)
    r_ac = rank(vstack([A, C]), policy)
    return {
        "r(A)+r(R_A B)-r(A B)": rank(A, policy) + rank(proj_R(A, policy) @ B, policy) - r_ab,
        "r(B)+r(R_B A)-r(A B)": rank(B, policy) + rank(proj_R(B, policy) @ A, policy) - r_ab,
        "r(A)+r(C L_A)-r(A;C)": rank(A, policy) + rank(C @ proj_L(A, policy), policy) - r_ac,
        "r(C)+r(A L_C)-r(A;C)": rank(C, policy) + rank(A @ proj_L(C, policy), policy) - r_ac,
    }
