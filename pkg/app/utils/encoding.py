"""
행렬 덤프 인코딩 유틸리티

바이너리 형식 (little-endian):
    b"HMAT" | uint32 version | uint32 dim | uint32 label_len | label (UTF-8)
    | dim*dim 개의 (float64 re, float64 im) 쌍 (row-major)

CSV 형식:
    row,col,re,im
"""

from __future__ import annotations

import io
import struct
from typing import Tuple

import numpy as np

MAGIC = b"HMAT"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIII")


def encode_matrix(matrix: np.ndarray, label: str = "") -> bytes:
    """
    정사각 복소 행렬을 HMAT 바이너리로 인코딩

    Args:
        matrix: (dim, dim) 행렬
        label: 행렬 이름

    Returns:
        인코딩된 바이트
    """
    m = np.asarray(matrix, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"square matrix required, got shape {m.shape}")
    label_bytes = label.encode("utf-8")
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, m.shape[0], len(label_bytes))
    body = np.ascontiguousarray(m).astype("<c16").tobytes()
    return header + label_bytes + body


def decode_matrix(content: bytes) -> Tuple[np.ndarray, str]:
    """
    HMAT 바이너리 디코딩

    Returns:
        (행렬, 라벨)

    Raises:
        ValueError: 매직/버전/길이 불일치
    """
    if len(content) < _HEADER.size:
        raise ValueError("truncated header")
    magic, version, dim, label_len = _HEADER.unpack_from(content, 0)
    if magic != MAGIC:
        raise ValueError(f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported version {version}")
    offset = _HEADER.size
    label = content[offset:offset + label_len].decode("utf-8")
    offset += label_len
    expected = dim * dim * 16
    if len(content) - offset != expected:
        raise ValueError(f"body size {len(content) - offset} != {expected}")
    data = np.frombuffer(content, dtype="<c16", count=dim * dim, offset=offset)
    return data.reshape(dim, dim).astype(complex), label


def matrix_to_csv(matrix: np.ndarray) -> str:
    """row,col,re,im 행 단위 CSV 문자열"""
    m = np.asarray(matrix, dtype=complex)
    buf = io.StringIO()
    buf.write("row,col,re,im\n")
    for (i, j), z in np.ndenumerate(m):
        buf.write(f"{i},{j},{z.real!r},{z.imag!r}\n")
    return buf.getvalue()


def matrix_from_csv(text: str) -> np.ndarray:
    """matrix_to_csv 의 역변환"""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0].strip() != "row,col,re,im":
        raise ValueError("missing row,col,re,im header")
    rows = [ln.split(",") for ln in lines[1:]]
    dim = int(np.sqrt(len(rows)))
    if dim * dim != len(rows):
        raise ValueError(f"{len(rows)} entries is not a square matrix")
    out = np.zeros((dim, dim), dtype=complex)
    for r, c, re, im in rows:
        out[int(r), int(c)] = complex(float(re), float(im))
    return out
