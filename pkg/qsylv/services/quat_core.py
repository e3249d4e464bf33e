"""Quaternion scalars and dense quaternion matrices.

A quaternion matrix is stored as a read-only float64 array of shape
``(rows, cols, 4)`` holding the components ``(w, x, y, z)`` of
``w + x i + y j + z k``. Zero rows or columns are legal everywhere.
"""
from __future__ import annotations

import enum
from collections.abc import Sequence
from typing import Any

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ConfigDict

from qsylv.core.errors import DimError

# (left unit, right unit, result unit, sign) for every product of basis units 1, i, j, k.
_PRODUCT_TERMS: tuple[tuple[int, int, int, float], ...] = (
    (0, 0, 0, 1.0), (0, 1, 1, 1.0), (0, 2, 2, 1.0), (0, 3, 3, 1.0),
    (1, 0, 1, 1.0), (1, 1, 0, -1.0), (1, 2, 3, 1.0), (1, 3, 2, -1.0),
    (2, 0, 2, 1.0), (2, 1, 3, -1.0), (2, 2, 0, -1.0), (2, 3, 1, 1.0),
    (3, 0, 3, 1.0), (3, 1, 2, 1.0), (3, 2, 1, -1.0), (3, 3, 0, -1.0),
)

_CONJ_SIGN = np.array([1.0, -1.0, -1.0, -1.0])


class Quaternion(BaseModel):
    """Scalar ``w + x i + y j + z k`` over double-precision reals."""

    model_config = ConfigDict(frozen=True)

    w: float = 0.0
    x: float = 0.0
    y: float = 0.0
    z: float = 0.0

    @classmethod
    def from_array(cls, components: npt.ArrayLike) -> Quaternion:
        w, x, y, z = (float(c) for c in np.asarray(components, dtype=np.float64))
        return cls(w=w, x=x, y=y, z=z)

    def as_array(self) -> npt.NDArray[np.float64]:
        return np.array([self.w, self.x, self.y, self.z], dtype=np.float64)

    def conj(self) -> Quaternion:
        return Quaternion(w=self.w, x=-self.x, y=-self.y, z=-self.z)

    def norm(self) -> float:
        return float(np.sqrt(self.w**2 + self.x**2 + self.y**2 + self.z**2))

    def __mul__(self, other: Quaternion) -> Quaternion:
        return quat_mul(self, other)

    def __neg__(self) -> Quaternion:
        return Quaternion.from_array(-self.as_array())


class EtaUnit(str, enum.Enum):
    """Imaginary unit used by the eta-involution."""

    I = "i"
    J = "j"
    K = "k"

    @property
    def quaternion(self) -> Quaternion:
        return Quaternion.from_array(self.components())

    def components(self) -> npt.NDArray[np.float64]:
        unit = np.zeros(4)
        unit[{"i": 1, "j": 2, "k": 3}[self.value]] = 1.0
        return unit


def quat_mul(a: Quaternion, b: Quaternion) -> Quaternion:
    """Hamilton product ``a * b``."""
    left, right = a.as_array(), b.as_array()
    out = np.zeros(4)
    for p, q, r, sign in _PRODUCT_TERMS:
        out[r] += sign * left[p] * right[q]
    return Quaternion.from_array(out)


class QMatrix:
    """Dense row-major quaternion matrix with explicit ``(rows, cols)``."""

    __slots__ = ("_data",)

    def __init__(self, data: npt.ArrayLike) -> None:
        array = np.array(data, dtype=np.float64)
        if array.ndim != 3 or array.shape[2] != 4:
            raise DimError(f"quaternion matrix data must have shape (rows, cols, 4), got {array.shape}")
        array.flags.writeable = False
        self._data = array

    # -- constructors -----------------------------------------------------

    @classmethod
    def zeros(cls, rows: int, cols: int) -> QMatrix:
        if rows < 0 or cols < 0:
            raise DimError(f"negative dimensions {rows}x{cols}")
        return cls(np.zeros((rows, cols, 4)))

    @classmethod
    def identity(cls, n: int) -> QMatrix:
        return cls.from_real(np.eye(n))

    @classmethod
    def from_real(cls, real: npt.ArrayLike) -> QMatrix:
        part = np.asarray(real, dtype=np.float64)
        if part.ndim != 2:
            raise DimError(f"real part must be two-dimensional, got shape {part.shape}")
        data = np.zeros(part.shape + (4,))
        data[:, :, 0] = part
        return cls(data)

    @classmethod
    def from_quaternions(cls, entries: Sequence[Sequence[Quaternion]], cols: int | None = None) -> QMatrix:
        rows = len(entries)
        width = len(entries[0]) if rows else (cols or 0)
        data = np.zeros((rows, width, 4))
        for p, row in enumerate(entries):
            if len(row) != width:
                raise DimError(f"row {p} has {len(row)} entries, expected {width}")
            for q, entry in enumerate(row):
                data[p, q] = entry.as_array()
        return cls(data)

    @classmethod
    def random(cls, rng: np.random.Generator, rows: int, cols: int) -> QMatrix:
        return cls(rng.standard_normal((rows, cols, 4)))

    # -- shape and access -------------------------------------------------

    @property
    def data(self) -> npt.NDArray[np.float64]:
        return self._data

    @property
    def rows(self) -> int:
        return int(self._data.shape[0])

    @property
    def cols(self) -> int:
        return int(self._data.shape[1])

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows, self.cols

    @property
    def is_empty(self) -> bool:
        return self.rows == 0 or self.cols == 0

    def __getitem__(self, key: tuple[Any, Any]) -> Any:
        row, col = key
        if isinstance(row, int) and isinstance(col, int):
            return Quaternion.from_array(self._data[row, col])
        if isinstance(row, int):
            row = slice(row, row + 1)
        if isinstance(col, int):
            col = slice(col, col + 1)
        return QMatrix(self._data[row, col])

    def to_nested(self) -> list[list[list[float]]]:
        return [[[float(c) for c in self._data[p, q]] for q in range(self.cols)] for p in range(self.rows)]

    # -- arithmetic -------------------------------------------------------

    def _check_same_shape(self, other: QMatrix, op: str) -> None:
        if self.shape != other.shape:
            raise DimError(f"cannot {op} {self.rows}x{self.cols} and {other.rows}x{other.cols}")

    def __add__(self, other: QMatrix) -> QMatrix:
        self._check_same_shape(other, "add")
        return QMatrix(self._data + other._data)

    def __sub__(self, other: QMatrix) -> QMatrix:
        self._check_same_shape(other, "subtract")
        return QMatrix(self._data - other._data)

    def __neg__(self) -> QMatrix:
        return QMatrix(-self._data)

    def __mul__(self, scalar: float) -> QMatrix:
        return QMatrix(self._data * float(scalar))

    __rmul__ = __mul__

    def __matmul__(self, other: QMatrix) -> QMatrix:
        return mat_mul(self, other)

    @property
    def H(self) -> QMatrix:
        return conj_transpose(self)

    def eta_conj_transpose(self, eta: EtaUnit) -> QMatrix:
        return eta_conj_transpose(self, eta)

    def frobenius_norm(self) -> float:
        return float(np.sqrt(np.sum(self._data**2)))

    def allclose(self, other: QMatrix, atol: float = 1e-12) -> bool:
        return self.shape == other.shape and bool(np.allclose(self._data, other._data, rtol=0.0, atol=atol))

    def __repr__(self) -> str:
        return f"QMatrix({self.rows}x{self.cols})"


def mat_mul(A: QMatrix, B: QMatrix) -> QMatrix:
    """Matrix product over H: entry (p, q) is sum_r A[p, r] * B[r, q] in that order."""
    if A.cols != B.rows:
        raise DimError(f"cannot multiply {A.rows}x{A.cols} by {B.rows}x{B.cols}")
    left, right = A.data, B.data
    out = np.zeros((A.rows, B.cols, 4))
    for p, q, r, sign in _PRODUCT_TERMS:
        out[:, :, r] += sign * (left[:, :, p] @ right[:, :, q])
    return QMatrix(out)


def conj_transpose(A: QMatrix) -> QMatrix:
    return QMatrix(np.transpose(A.data, (1, 0, 2)) * _CONJ_SIGN)


def _unit_left(unit: npt.NDArray[np.float64], data: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
    out = np.zeros_like(data)
    for p, q, r, sign in _PRODUCT_TERMS:
        if unit[p]:
            out[..., r] += sign * unit[p] * data[..., q]
    return out


def _unit_right(data: npt.NDArray[np.float64], unit: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
    out = np.zeros_like(data)
    for p, q, r, sign in _PRODUCT_TERMS:
        if unit[q]:
            out[..., r] += sign * data[..., p] * unit[q]
    return out


def eta_conj_transpose(A: QMatrix, eta: EtaUnit) -> QMatrix:
    """``A^{eta*} = -eta A* eta``, entrywise."""
    unit = eta.components()
    starred = conj_transpose(A).data
    return QMatrix(-_unit_left(unit, _unit_right(starred, unit)))


def hstack(blocks: Sequence[QMatrix]) -> QMatrix:
    if not blocks:
        raise DimError("hstack needs at least one block")
    rows = blocks[0].rows
    for index, block in enumerate(blocks):
        if block.rows != rows:
            raise DimError(f"hstack block {index} has {block.rows} rows, expected {rows}")
    return QMatrix(np.concatenate([b.data for b in blocks], axis=1))


def vstack(blocks: Sequence[QMatrix]) -> QMatrix:
    if not blocks:
        raise DimError("vstack needs at least one block")
    cols = blocks[0].cols
    for index, block in enumerate(blocks):
        if block.cols != cols:
            raise DimError(f"vstack block {index} has {block.cols} cols, expected {cols}")
    return QMatrix(np.concatenate([b.data for b in blocks], axis=0))
