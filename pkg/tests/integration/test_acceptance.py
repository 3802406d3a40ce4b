"""
내장 프리셋 전체 실행 (느림, -m "not slow" 로 제외)
"""
import numpy as np
import pytest

from app.repositories.file_repo import parse_config
from app.repositories.preset_repo import get_preset, preset_names
from app.services.runner import run_experiment

pytestmark = pytest.mark.slow


def _run(name, **kwargs):
    return run_experiment(parse_config(get_preset(name), source=name), **kwargs)


def _joint_kappa(report):
    record = next(k for k in report.kappa if k.method == "joint_spectral")
    return sorted(p.lam for p in record.points)


@pytest.mark.parametrize("name", preset_names())
def test_preset_passes(name):
    report = _run(name)
    failed = [(c.name, c.residual, c.tolerance) for c in report.failed_checks()]
    assert report.checks
    assert report.passed, failed


@pytest.mark.parametrize(
    "name, expected",
    [
        ("mourre-laguerre", [0.0]),
        ("convolution-2cos", [-2.0, 2.0]),
        ("kappa-waveguide", [1.0, 4.0]),
    ],
)
def test_kappa_sets(name, expected):
    report = _run(name)
    found = _joint_kappa(report)
    assert len(found) == len(expected)
    np.testing.assert_allclose(found, expected, atol=0.05)
    mourre = next(k for k in report.kappa if k.method == "mourre")
    np.testing.assert_allclose(sorted(p.lam for p in mourre.points), found, atol=0.05)


def test_friedrichs_transport_target():
    report = _run("friedrichs-transport")
    assert _joint_kappa(report) == []
    assert report.tables[0].target == pytest.approx(8.0, rel=1e-2)
    assert any(c.name == "sojourn.scaling" and c.passed for c in report.checks)


def test_sojourn_tables_are_ascending():
    report = _run("sojourn-2cos")
    rs = [row.r for row in report.tables[0].rows]
    assert rs == sorted(rs)
    assert report.tables[0].relative_gap < 0.05


def test_reruns_are_identical():
    first = _run("convolution-2cos", seed=1)
    second = _run("convolution-2cos", seed=1)
    assert [(c.name, c.residual, c.passed) for c in first.checks] == [
        (c.name, c.residual, c.passed) for c in second.checks
    ]


# Jacobi 모델은 기저 인덱스 위 묶음, 나머지는 위치 묶음
CCR_MODELS = {
    "jacobi_hermite": (
        {"id": "jacobi_hermite", "params": {"N": 512}},
        {"kind": "gaussian", "center": 2.0, "width": 2.0},
        {"center": 0.0, "half_width": 1.5, "margin": 0.5},
    ),
    "jacobi_laguerre": (
        {"id": "jacobi_laguerre", "params": {"N": 512}},
        {"kind": "gaussian", "center": 2.0, "width": 2.0},
        {"center": 1.0, "half_width": 0.5, "margin": 0.3},
    ),
    "friedrichs": (
        {"id": "friedrichs", "params": {"N": 512, "box_length": 128.0}},
        {"kind": "gaussian", "center": 0.0, "width": 3.0},
        {"center": 0.0, "half_width": 1.5, "margin": 0.5},
    ),
    "convolution_zd": (
        {"id": "convolution_zd", "params": {"coeffs": {"1": 1.0, "-1": 1.0}, "box": 256}},
        {"kind": "gaussian", "center": 0.0, "width": 4.0, "momentum": float(np.pi / 2)},
        {"center": 0.0, "half_width": 1.0, "margin": 0.4},
    ),
    "dispersive": (
        {"id": "dispersive", "params": {"symbol": "quadratic", "N": 512, "box_length": 128.0}},
        {"kind": "gaussian", "center": 0.0, "width": 4.0, "momentum": 1.0},
        {"center": 1.0, "half_width": 0.3, "margin": 0.2},
    ),
    "adjacency": (
        {"id": "adjacency", "params": {"z_min": -32, "z_max": 31, "multiplicities": "alternating"}},
        {"kind": "gaussian", "center": 0.0, "width": 3.0, "momentum": 1.0},
        {"center": 1.5, "half_width": 0.4, "margin": 0.3},
    ),
    "waveguide": (
        {"id": "waveguide", "params": {"transverse_length": float(np.pi), "modes": 2, "N": 256, "box_length": 64.0}},
        {"kind": "gaussian", "center": 0.0, "width": 3.0, "momentum": 1.2, "mode": 0},
        {"center": 2.5, "half_width": 0.5, "margin": 0.4},
    ),
}


@pytest.mark.parametrize("model_id", sorted(CCR_MODELS))
def test_ccr_on_twenty_states(model_id):
    model, state, spectral_filter = CCR_MODELS[model_id]
    config = parse_config(
        {"model": model, "state": state, "filter": spectral_filter, "run": {"checks": ["ccr"], "extra_states": 19}},
        source=f"ccr-{model_id}",
    )
    report = run_experiment(config, seed=7)
    record = next(c for c in report.checks if c.name == "ccr")
    assert record.details["states"] == 20
    assert record.residual <= 1e-6, record.details
