"""Brute-force consistency oracle: the chain as one real linear system.

Every quaternion entry of every unknown contributes four real coordinates. The
left side of the chain is R-linear in them, so applying it to each coordinate
basis element gives one column of a real matrix ``M`` with ``M vec(X) = e``.
"""
from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from qsylv.core.config import get_settings
from qsylv.core.errors import SizeCapExceeded
from qsylv.services.chain_solver import ChainSystem, validate
from qsylv.services.numlin import RankPolicy, svd_pinv
from qsylv.services.quat_core import QMatrix

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RealLinearization:
    M: npt.NDArray[np.float64]
    e: npt.NDArray[np.float64]

    @property
    def unknowns(self) -> int:
        return int(self.M.shape[1])

    @property
    def equations(self) -> int:
        return int(self.M.shape[0])


@dataclass(frozen=True)
class OracleVerdict:
    consistent: bool
    residual: float
    linearization: RealLinearization


def vectorize(X: Sequence[QMatrix]) -> npt.NDArray[np.float64]:
    """Row-major entries, four real components each, unknowns concatenated."""
    if not X:
        return np.zeros(0)
    return np.concatenate([matrix.data.reshape(-1) for matrix in X])


def _basis(rows: int, cols: int, flat: int) -> QMatrix:
    data = np.zeros(rows * cols * 4)
    data[flat] = 1.0
    return QMatrix(data.reshape(rows, cols, 4))


def linearize(system: ChainSystem, cap: int | None = None) -> RealLinearization:
    validate(system)
    cap = cap if cap is not None else get_settings().oracle_size_cap
    shapes = system.unknown_shapes()
    sizes = [4 * rows * cols for rows, cols in shapes]
    total = sum(sizes)
    if total > cap:
        raise SizeCapExceeded(total, cap)

    eqs = system.equations
    heights = [4 * eq.E.rows * eq.E.cols for eq in eqs]
    row_offsets = np.concatenate([[0], np.cumsum(heights, dtype=int)])
    M = np.zeros((int(row_offsets[-1]), total))
    column = 0
    for j, (rows, cols) in enumerate(shapes):
        for flat in range(sizes[j]):
            unit = _basis(rows, cols, flat)
            # X_j is the first unknown of equation j and the second of equation j-1
            if j < system.k:
                eq = eqs[j]
                M[row_offsets[j] : row_offsets[j + 1], column] = (eq.A @ unit @ eq.B).data.reshape(-1)
            if j > 0:
                eq = eqs[j - 1]
                M[row_offsets[j - 1] : row_offsets[j], column] += (eq.C @ unit @ eq.D).data.reshape(-1)
            column += 1
    e = vectorize([eq.E for eq in eqs])
    logger.debug("linearized k=%d chain into %dx%d real system", system.k, *M.shape)
    return RealLinearization(M, e)


def least_squares_residual(
    linearization: RealLinearization, policy: RankPolicy | None = None
) -> float:
    M, e = linearization.M, linearization.e
    if M.shape[1] == 0:
        return float(np.linalg.norm(e))
    x = svd_pinv(M, policy).pinv @ e
    return float(np.linalg.norm(M @ x - e))


def oracle_verdict(
    system: ChainSystem,
    tol: float | None = None,
    policy: RankPolicy | None = None,
    cap: int | None = None,
) -> OracleVerdict:
    tol = tol if tol is not None else get_settings().residual_tol
    linearization = linearize(system, cap)
    residual = least_squares_residual(linearization, policy)
    scale = 1.0 + float(np.linalg.norm(linearization.e))
    return OracleVerdict(residual <= tol * scale, residual, linearization)


def oracle_consistent(
    system: ChainSystem,
    tol: float | None = None,
    policy: RankPolicy | None = None,
    cap: int | None = None,
) -> bool:
    return oracle_verdict(system, tol, policy, cap).consistent


def apply_residual(linearization: RealLinearization, X: Sequence[QMatrix]) -> float:
    """``||M vec(X) - e||``, the linearized residual of a candidate solution."""
    return float(np.linalg.norm(linearization.M @ vectorize(X) - linearization.e))
