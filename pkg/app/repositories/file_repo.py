"""
결과/설정 파일 저장소

- YAML 실험 설정 읽기/쓰기
- report.json, 수렴표 CSV, κ CSV, .dat 플롯 데이터
- 행렬 덤프 (HMAT 바이너리 또는 CSV)
"""

import csv
import json
import logging
import os
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import yaml
from pydantic import ValidationError

from app.core.config import settings
from app.core.exceptions import ConfigError
from app.schemas.config import ExperimentConfig
from app.schemas.report import ConvergenceTableModel, VerificationReport
from app.utils.encoding import encode_matrix, matrix_to_csv

logger = logging.getLogger(__name__)


def resolve_output_dir(directory: Optional[str] = None) -> str:
    path = directory or settings.OUTPUT_DIR
    os.makedirs(path, exist_ok=True)
    return path


# ========== 설정 ==========

def _field_path(loc: Sequence[Any]) -> str:
    return ".".join(str(p) for p in loc)


def parse_config(data: Any, source: str = "<config>") -> ExperimentConfig:
    """
    Raises:
        ConfigError: 스키마 위반 (필드 경로 포함)
    """
    if not isinstance(data, dict):
        raise ConfigError(detail=f"{source}: top level must be a mapping")
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        first = exc.errors()[0]
        raise ConfigError(
            message="설정 검증에 실패했습니다",
            detail=f"{source}: {_field_path(first['loc']) or '<root>'}: {first['msg']}",
        ) from exc


def load_config(path: str) -> ExperimentConfig:
    """
    YAML 설정 파일 로드

    Raises:
        ConfigError: 파일 없음, YAML 문법 오류 (줄 번호 포함), 스키마 위반
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f)
    except FileNotFoundError as exc:
        raise ConfigError(detail=f"{path}: file not found") from exc
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}, column {mark.column + 1}" if mark is not None else "unknown position"
        raise ConfigError(detail=f"{path}: {where}: {getattr(exc, 'problem', exc)}") from exc
    return parse_config(data, source=path)


def dump_config(data: Dict[str, Any], path: str) -> str:
    """설정 dict 를 YAML 로 저장하고 경로 반환"""
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        yaml.safe_dump(data, f, sort_keys=False, allow_unicode=True)
    return path


def load_state(path: str) -> np.ndarray:
    """
    .npy 상태 벡터 로드

    Raises:
        ConfigError: 파일 없음 또는 1차원 배열이 아님
    """
    try:
        vector = np.load(path, allow_pickle=False)
    except (FileNotFoundError, ValueError) as exc:
        raise ConfigError(detail=f"state.path {path}: {exc}") from exc
    if vector.ndim != 1:
        raise ConfigError(detail=f"state.path {path}: expected a 1-d array, got shape {vector.shape}")
    return vector.astype(complex)


# ========== 결과 ==========

def write_report(report: VerificationReport, directory: str) -> str:
    path = os.path.join(directory, "report.json")
    with open(path, "w", encoding="utf-8") as f:
        f.write(report.model_dump_json(indent=2))
    logger.info("wrote %s", path)
    return path


def read_report(path: str) -> VerificationReport:
    with open(path, "r", encoding="utf-8") as f:
        return VerificationReport.model_validate(json.load(f))


def write_convergence_csv(table: ConvergenceTableModel, directory: str) -> str:
    path = os.path.join(directory, f"convergence_{table.label}.csv")
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["r", "I_r", "t_max", "tail", "err"])
        for row in table.rows:
            writer.writerow([repr(row.r), repr(row.I_r), repr(row.t_max), repr(row.tail), repr(row.err)])
    return path


def write_kappa_csv(report: VerificationReport, directory: str) -> str:
    path = os.path.join(directory, "kappa.csv")
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["method", "lambda", "hprime_sq_min", "delta", "threshold"])
        for record in report.kappa:
            for point in record.points:
                writer.writerow([record.method, repr(point.lam), repr(point.hprime_sq_min), repr(record.delta), repr(record.threshold)])
    return path


def write_plot_data(points: Iterable[Tuple[float, float]], path: str) -> str:
    """공백으로 구분된 x y 열"""
    with open(path, "w", encoding="utf-8") as f:
        for x, y in points:
            f.write(f"{x!r} {y!r}\n")
    return path


def write_report_files(report: VerificationReport, directory: Optional[str] = None, formats: str = "both") -> List[str]:
    """
    report.json, CSV 표, .dat 플롯 데이터를 기록

    Args:
        formats: "json", "csv", "both"
    """
    out = resolve_output_dir(directory)
    written: List[str] = []
    if formats in ("json", "both"):
        written.append(write_report(report, out))
    if formats in ("csv", "both"):
        for table in report.tables:
            written.append(write_convergence_csv(table, out))
        if report.kappa:
            written.append(write_kappa_csv(report, out))
    for table in report.tables:
        written.append(
            write_plot_data(((row.r, row.I_r) for row in table.rows), os.path.join(out, f"convergence_{table.label}.dat"))
        )
    for record in report.checks:
        profile = record.details.get("profile")
        grid = record.details.get("t_grid")
        if record.name == "weyl" and profile and grid:
            written.append(write_plot_data(zip(grid, profile), os.path.join(out, "weyl.dat")))
    return written


def write_matrix(matrix: np.ndarray, label: str, directory: str, fmt: str = "bin") -> str:
    """
    Args:
        fmt: "bin" (HMAT) 또는 "csv" (row,col,re,im)
    """
    safe = "".join(c if c.isalnum() or c in "_-" else "_" for c in label)
    if fmt == "csv":
        path = os.path.join(directory, f"{safe}.csv")
        with open(path, "w", encoding="utf-8") as f:
            f.write(matrix_to_csv(matrix))
    else:
        path = os.path.join(directory, f"{safe}.bin")
        with open(path, "wb") as f:
            f.write(encode_matrix(matrix, label))
    return path
