"""
내장 프리셋 저장소 (app/data/presets.json)
"""

import copy
import json
import os
from functools import lru_cache
from typing import Any, Dict, List

from app.core.exceptions import UnknownPreset
from app.repositories.file_repo import dump_config, parse_config

_PRESETS_PATH = os.path.join(os.path.dirname(os.path.dirname(__file__)), "data", "presets.json")


@lru_cache(maxsize=1)
def _load_presets() -> Dict[str, Dict[str, Any]]:
    with open(_PRESETS_PATH, "r", encoding="utf-8") as f:
        return json.load(f)


def preset_names() -> List[str]:
    return list(_load_presets())


def get_preset(name: str) -> Dict[str, Any]:
    """
    프리셋 설정 dict (사본)

    Raises:
        UnknownPreset: 없는 이름
    """
    presets = _load_presets()
    if name not in presets:
        raise UnknownPreset(detail=f"'{name}' (available: {', '.join(presets)})")
    return copy.deepcopy(presets[name])


def emit_preset(name: str, path: str) -> str:
    """프리셋을 검증한 뒤 YAML 로 저장"""
    data = get_preset(name)
    parse_config(data, source=f"preset {name}")
    return dump_config(data, path)
