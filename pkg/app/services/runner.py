"""
실험 실행기

설정 하나를 받아 모델 → 교환자 사슬 → 동시 스펙트럼 → 선택된 검사 순서로 실행하고
VerificationReport 를 조립합니다.
"""

from __future__ import annotations

import logging
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Any, Dict, Iterator, List, Optional

import numpy as np

from app.core.config import settings
from app.core.exceptions import ConfigError, EmptyWindow, UnsupportedModel
from app.repositories.file_repo import load_state
from app.schemas.config import ExperimentConfig, FilterSection, ModelSection, ProfileSection, StateSection
from app.schemas.report import CheckRecord, KappaPoint, KappaRecord, VerificationReport
from app.services import commutators, mourre, sojourn, spectral, time_operator
from app.services.graphs import GraphSpec, validate_admissible
from app.services.linalg import JointSpectralData, SpectralFilter
from app.services.localisation import (
    LocalisationProfile,
    check_euler_relation,
    check_homogeneity,
    check_log_shift,
    check_radial_closed_form,
    sample_grid,
    validate_even,
)
from app.services.model_catalog import OperatorPair, get_entry

logger = logging.getLogger(__name__)

# 검사 이름 → 기본 허용 오차 (run.tolerances 로 덮어씀)
DEFAULT_TOLERANCES: Dict[str, float] = {
    "rf": 1e-8,
    "commutator_chain": 1e-8,
    "commute_family": 1e-9,
    "undos": 1e-9,
    "virial": 1e-10,
    "kappa": 1.0,  # δ 배수
    "commutator_identity": 1e-8,
    "mourre_window": 1e-8,
    "ccr": 1e-6,
    "weyl": 1e-6,
    "form_consistency": 1e-6,
    "hermiticity": 1e-9,
    "spectral_derivative": 1e-3,
    "sojourn": 0.05,
    "eigenspace": 1e-12,
    "reference": 1e-6,
    "scaling": 0.1,
}


@dataclass
class ExperimentContext:
    config: ExperimentConfig
    seed: int
    jobs: int = 1
    pair: Optional[OperatorPair] = None
    derived: Optional[commutators.DerivedOperators] = None
    spectral: Optional[JointSpectralData] = None
    kappa: Optional[spectral.CriticalSetEstimate] = None
    checks: List[CheckRecord] = field(default_factory=list)
    kappa_records: List[KappaRecord] = field(default_factory=list)
    tables: List[Any] = field(default_factory=list)
    timing: Dict[str, float] = field(default_factory=dict)

    def tolerance(self, name: str) -> float:
        return self.config.tolerance(name, DEFAULT_TOLERANCES[name])

    @contextmanager
    def stage(self, name: str) -> Iterator[None]:
        start = time.perf_counter()
        try:
            yield
        finally:
            self.timing[name] = self.timing.get(name, 0.0) + time.perf_counter() - start


# ========== 설정 → 객체 ==========

def _parse_coefficients(raw: Any) -> Dict[Any, complex]:
    """YAML 키 "1", "-1", "1,0" 을 정수 또는 정수 튜플로"""
    if not isinstance(raw, dict):
        raise ConfigError(detail="model.params.coeffs must be a mapping")
    out: Dict[Any, complex] = {}
    for key, value in raw.items():
        try:
            parts = [int(p) for p in str(key).replace(" ", "").split(",")]
        except ValueError as exc:
            raise ConfigError(detail=f"model.params.coeffs: bad site '{key}'") from exc
        site = parts[0] if len(parts) == 1 else tuple(parts)
        out[site] = complex(value) if not isinstance(value, (list, tuple)) else complex(value[0], value[1])
    return out


def _graph_spec(params: Dict[str, Any]) -> GraphSpec:
    z_min = int(params.get("z_min", -32))
    z_max = int(params.get("z_max", 31))
    pattern = params.get("multiplicities", "alternating")
    if pattern == "alternating":
        pattern = [1, 2]
    if not isinstance(pattern, list) or not pattern:
        raise ConfigError(detail="model.params.multiplicities must be 'alternating' or a list of ints")
    levels = {z: int(pattern[(z - z_min) % len(pattern)]) for z in range(z_min, z_max + 1)}
    return GraphSpec(
        levels=levels,
        boundary=params.get("boundary", "twisted"),
        seam_phase=float(params.get("seam_phase", np.pi / 2)),
    )


def build_model(section: ModelSection) -> OperatorPair:
    """
    Raises:
        UnsupportedModel: 모르는 model_id
        ConfigError: 빌더가 받지 않는 파라미터
    """
    entry = get_entry(section.id)
    params = dict(section.params)
    if section.id == "adjacency":
        return entry.builder(_graph_spec(params))
    if "coeffs" in params:
        params["coeffs"] = _parse_coefficients(params["coeffs"])
    if section.id == "friedrichs" and params.get("potential") is not None:
        poly = [float(c) for c in params["potential"]]
        params["potential"] = lambda q: np.polynomial.polynomial.polyval(q, poly)
    try:
        return entry.builder(**params)
    except TypeError as exc:
        raise ConfigError(detail=f"model.params for {section.id}: {exc}") from exc


def build_profile(section: ProfileSection, dimension: int) -> LocalisationProfile:
    try:
        return LocalisationProfile(
            dimension=dimension,
            kind=section.kind,
            plateau_radius=section.plateau_radius,
            decay_scale=section.decay_scale,
            smooth_order=section.smooth_order or settings.SMOOTH_ORDER,
            decay_exponent=section.decay_exponent,
        )
    except ValueError as exc:
        raise ConfigError(detail=f"profile: {exc}") from exc


def build_filter(section: FilterSection) -> SpectralFilter:
    return SpectralFilter(
        center=section.center,
        half_width=section.half_width,
        margin=section.margin,
        order=section.order or settings.SMOOTH_ORDER,
    )


def seed_state(pair: OperatorPair, section: StateSection, shift: float = 0.0) -> np.ndarray:
    if section.kind == "basis":
        return spectral.basis_state(pair, int(section.index))
    if section.kind == "file":
        vector = load_state(section.path)
        if vector.shape != (pair.dim,):
            raise ConfigError(detail=f"state.path: expected shape ({pair.dim},), got {vector.shape}")
        return vector
    center = np.atleast_1d(np.asarray(section.center, dtype=float)) + shift
    return spectral.gaussian_packet(pair, center, section.width, section.momentum, section.mode)


# ========== 단계 ==========

def _rf_checks(ctx: ExperimentContext) -> None:
    cfg = ctx.config
    tol = ctx.tolerance("rf")
    for d in (1, 2, 3):
        profile = build_profile(cfg.profile, d)
        validate_even(profile)
        xs = sample_grid(d, n=cfg.run.rf_points, seed=ctx.seed)
        if not profile.differentiable:
            ctx.checks.append(
                CheckRecord.evaluate("rf.log_shift", "R_f(tx) - R_f(x) = -ln t", check_log_shift(profile, xs[:10]), 1e-6, d=d)
            )
            continue
        ctx.checks.append(
            CheckRecord.evaluate("rf.euler", "x . R_f'(x) = -1", check_euler_relation(profile, xs), tol, d=d, kind=profile.kind)
        )
        if profile.is_radial:
            ctx.checks.append(
                CheckRecord.evaluate(
                    "rf.closed_form", "R_f'(x) = -x/|x|^2", check_radial_closed_form(profile, xs), tol, d=d
                )
            )
        report = check_homogeneity(profile, xs[:8], ts=(0.5, 2.0), max_order=1)
        ctx.checks.append(
            CheckRecord.evaluate(
                "rf.homogeneity",
                "t^|a| (d^a R_f)(tx) = (d^a R_f)(x)",
                max(report.max_residual_by_order.values()),
                1e-6,
                d=d,
                by_order={str(k): v for k, v in report.max_residual_by_order.items()},
            )
        )


def _model_stage(ctx: ExperimentContext) -> None:
    cfg = ctx.config
    with ctx.stage("model"):
        ctx.pair = build_model(cfg.model)
    with ctx.stage("commutators"):
        ctx.derived = commutators.commutator_chain(ctx.pair, depth=max(cfg.run.depth, 2))
    with ctx.stage("spectral"):
        ctx.spectral = spectral.joint_spectral(ctx.pair, ctx.derived, seed=ctx.seed)
        ctx.kappa = spectral.kappa_estimate(ctx.spectral, cfg.run.kappa_delta, cfg.run.kappa_threshold)
    ctx.kappa_records.append(_kappa_record(ctx.kappa))


def _kappa_record(estimate: spectral.CriticalSetEstimate) -> KappaRecord:
    return KappaRecord(
        method=estimate.method,
        threshold=estimate.threshold,
        delta=estimate.delta,
        points=[KappaPoint(lam=p.lam, hprime_sq_min=p.hprime_sq_min) for p in estimate.points],
    )


def _commutator_checks(ctx: ExperimentContext) -> None:
    pair, derived = ctx.pair, ctx.derived
    for key, value in derived.agreement.items():
        ctx.checks.append(
            CheckRecord.evaluate(
                f"commutator_chain.{key}",
                "H' = i[H, Phi], H'' = i[H', Phi] on the interior",
                value,
                ctx.tolerance("commutator_chain"),
                provenance=derived.provenance,
            )
        )
    samples = commutators.default_x_samples(pair, seed=ctx.seed)
    ctx.checks.append(commutators.check_commute_family(pair, samples, tolerance=ctx.tolerance("commute_family")))
    ctx.checks.append(commutators.check_undos(pair, derived, samples[:4], tolerance=ctx.tolerance("undos")))
    ctx.checks.append(commutators.virial_check(pair, derived, ctx.spectral, tolerance=ctx.tolerance("virial")))
    if pair.graph is not None:
        report = validate_admissible(pair.graph.spec)
        ctx.checks.append(
            CheckRecord.evaluate(
                "graph.admissible",
                "zero-index cycles and matched father/son counts",
                0.0 if report.passed else 1.0,
                0.5,
                violation=report.violation,
                cycles=report.cycles_checked,
            )
        )
        ctx.checks.append(commutators.phase_formula_residual(pair, 0.7))
        split = spectral.kernel_split(ctx.spectral)
        if split.kernel_dim:
            ctx.checks.append(
                CheckRecord.evaluate(
                    "graph.eigenspace",
                    "sum_{h>g} phi(h) = 0 = sum_{h<g} phi(h)",
                    commutators.eigenspace_equation_residual(pair, split.K_basis),
                    ctx.tolerance("eigenspace"),
                    kernel_dim=split.kernel_dim,
                )
            )


def _kappa_checks(ctx: ExperimentContext) -> None:
    pair = ctx.pair
    if pair.exact is not None:
        symbolic = spectral.kappa_symbolic(pair.exact)
        ctx.kappa_records.append(_kappa_record(symbolic))
        tol = ctx.kappa.delta * ctx.tolerance("kappa")
        # 유한 격자 κ 는 연속 심볼 κ 의 부분집합
        missing = [p.lam for p in ctx.kappa.points if not symbolic.contains(p.lam, tol)]
        ctx.checks.append(
            CheckRecord.evaluate(
                "kappa.symbolic",
                "kappa(H) = {m(xi) : grad m(xi) = 0}",
                float(len(missing)),
                0.5,
                matrix=ctx.kappa.values,
                symbolic=symbolic.values,
            )
        )


def _mourre_checks(ctx: ExperimentContext) -> None:
    pair, derived, data_spectral = ctx.pair, ctx.derived, ctx.spectral
    with ctx.stage("mourre"):
        data = mourre.build_conjugate(pair, derived)
        ctx.checks.append(
            mourre.check_commutator_identity(pair, data, derived, tolerance=ctx.tolerance("commutator_identity"))
        )
        scan = mourre.kappa_a_scan(data, data_spectral, ctx.kappa.delta)
        ctx.kappa_records.append(_kappa_record(scan))
        ctx.checks.append(
            CheckRecord.evaluate(
                "kappa.mourre_scan",
                "kappa(H) = kappa^A(H)",
                0.0 if scan.matches(ctx.kappa) else 1.0,
                0.5,
                joint=ctx.kappa.values,
                mourre=scan.values,
            )
        )
        for center, delta in _windows(ctx):
            try:
                result = mourre.mourre_window(data, data_spectral, center, delta)
            except EmptyWindow as exc:
                logger.warning("mourre window (%.6g, %.3g) skipped: %s", center, delta, exc)
                continue
            ctx.checks.append(result.record(expect_positive=True))
        for point in ctx.kappa.points:
            result = mourre.mourre_window(data, data_spectral, point.lam, ctx.kappa.delta)
            ctx.checks.append(result.record(expect_positive=False))


def _windows(ctx: ExperimentContext, count: int = 10) -> List[tuple[float, float]]:
    """κ 에서 3δ 이상 떨어진 창 (설정이 비어 있으면 스펙트럼 분위수에서 선택)"""
    if ctx.config.run.mourre_windows:
        return [(w.center, w.delta) for w in ctx.config.run.mourre_windows]
    lam = np.sort(ctx.spectral.values("H"))
    delta = ctx.kappa.delta
    lo, hi = np.quantile(lam, [0.1, 0.6])
    out: List[tuple[float, float]] = []
    for center in np.linspace(lo, hi, 4 * count):
        if any(abs(center - p) < 3.0 * delta for p in ctx.kappa.values):
            continue
        if not np.any(np.abs(lam - center) < delta):
            continue
        out.append((float(center), float(delta)))
        if len(out) == count:
            break
    return out


def _reference_operator(
    pair: OperatorPair, data_spectral: JointSpectralData, eta: SpectralFilter, profile: LocalisationProfile
) -> Optional[time_operator.TimeOperatorForm]:
    """H'' 없이 만든 기준 T (방사형 프로파일의 심볼 모델만)"""
    if not profile.is_radial or pair.exact is None:
        return None
    if pair.model_id == "waveguide":
        return time_operator.reference_time_operator_waveguide(pair, data_spectral, eta)
    return time_operator.fourier_time_operator(pair, data_spectral, eta)


def _velocity_scaling(
    ctx: ExperimentContext,
    pair: OperatorPair,
    data_spectral: JointSpectralData,
    profile: LocalisationProfile,
    phi: np.ndarray,
) -> CheckRecord:
    """같은 상태에서 v 를 두 배로 한 friedrichs 모델과 I_r 비교"""
    params = pair.params
    fast = get_entry("friedrichs").builder(v=2.0 * params["v"], N=params["N"], box_length=params["box_length"])
    r_list = ctx.config.run.r_list
    return sojourn.scaling_check(
        pair,
        data_spectral,
        fast,
        spectral.joint_from_symbol(fast),
        profile,
        phi,
        r_list[len(r_list) // 2],
        tolerance=ctx.tolerance("scaling"),
    )


def _time_operator_checks(ctx: ExperimentContext) -> None:
    cfg = ctx.config
    pair, derived, data_spectral = ctx.pair, ctx.derived, ctx.spectral
    eta = build_filter(cfg.filter)
    if pair.graph is not None:
        # κ 의 커널 성분을 떼어낸 모델 위에서 T_f 를 구성
        split = spectral.kernel_split(data_spectral)
        if split.kernel_dim:
            pair = spectral.reduced_pair(pair, derived, split)
            derived = commutators.commutator_chain(pair, depth=2)
            data_spectral = spectral.joint_spectral(pair, derived, seed=ctx.seed)
            ctx.checks.append(
                CheckRecord.evaluate(
                    "graph.reduced_spectrum",
                    "spec(H_G) within [-2 sqrt 2 - 10/W, 2 sqrt 2 + 10/W]",
                    max(float(np.max(np.abs(data_spectral.values("H")))) - (2 * np.sqrt(2) + 10.0 / pair.box_extent), 0.0),
                    1e-12,
                )
            )
    profile = build_profile(cfg.profile, pair.d)
    validate_even(profile)
    kappa = spectral.kappa_estimate(data_spectral, cfg.run.kappa_delta, cfg.run.kappa_threshold)

    rng = np.random.default_rng(ctx.seed)
    filtered = [spectral.make_Dt_state(pair, data_spectral, kappa, eta, seed_state(pair, cfg.state))]
    for _ in range(cfg.run.extra_states):
        shift = rng.uniform(-1.0, 1.0) * cfg.state.width
        filtered.append(spectral.make_Dt_state(pair, data_spectral, kappa, eta, seed_state(pair, cfg.state, shift)))
    states = [s.vector for s in filtered]
    mass_summary = spectral.localisation_summary(filtered)

    with ctx.stage("time_operator"):
        tf = time_operator.build_Tf(pair, derived, data_spectral, profile, eta)
    checks = set(cfg.run.checks)
    if "ccr" in checks:
        ctx.checks.append(time_operator.ccr_residual(tf, states, tolerance=ctx.tolerance("ccr"), **mass_summary))
        ctx.checks.append(
            CheckRecord.evaluate(
                "hermiticity",
                "<psi, T phi> = conj <phi, T psi>",
                time_operator.hermiticity_defect(tf, states),
                ctx.tolerance("hermiticity"),
            )
        )
        ctx.checks.append(
            time_operator.form_consistency(tf, pair, derived, data_spectral, states, ctx.tolerance("form_consistency"))
        )
        discrepancy = time_operator.simplified_tf_discrepancy(tf, pair, data_spectral, states)
        logger.info("simplified T_f discrepancy: %.3e", discrepancy)
        reference = _reference_operator(pair, data_spectral, eta, profile)
        if reference is not None:
            ctx.checks.append(
                CheckRecord.evaluate(
                    "time_operator.reference",
                    "T_f = T_ref on filtered states",
                    time_operator.reference_discrepancy(tf, reference, states),
                    ctx.tolerance("reference"),
                    route=reference.ingredients.get("route", ""),
                )
            )
    if "weyl" in checks:
        ctx.checks.append(
            time_operator.weyl_residual(tf, cfg.run.t_grid, states, tolerance=ctx.tolerance("weyl"), **mass_summary)
        )
    if "spectral-derivative" in checks:
        ctx.checks.append(
            time_operator.spectral_derivative_check(tf, pair, states[0], states[-1], ctx.tolerance("spectral_derivative"))
        )
    if "sojourn" in checks:
        phi = states[0]
        target = time_operator.eval_tf_form(pair, derived, data_spectral, profile, eta, phi)
        with ctx.stage("sojourn"):
            table = sojourn.sojourn_sweep(
                pair,
                data_spectral,
                profile,
                phi,
                cfg.run.r_list,
                target,
                label=f"{pair.model_id}_{profile.kind}",
                tail_tol=cfg.run.tail_tol,
                jobs=ctx.jobs,
            )
        ctx.tables.append(table.to_model())
        ctx.checks.append(
            CheckRecord.evaluate(
                "sojourn",
                "lim_r I_r = t_f(phi)",
                table.relative_gap,
                ctx.tolerance("sojourn"),
                extrapolated=table.extrapolated,
                target=table.target,
                exponent=table.exponent,
                norm_defect=table.norm_defect,
                **mass_summary,
            )
        )
        if pair.model_id == "friedrichs" and pair.exact is not None:
            ctx.checks.append(_velocity_scaling(ctx, pair, data_spectral, profile, phi))


# ========== 진입점 ==========

def run_experiment(config: ExperimentConfig, seed: Optional[int] = None, jobs: int = 1) -> VerificationReport:
    """
    설정된 검사를 의존 순서대로 실행

    Returns:
        VerificationReport (passed 는 선택된 검사들의 논리곱)
    """
    resolved_seed = seed if seed is not None else (config.run.seed if config.run.seed is not None else settings.DEFAULT_SEED)
    ctx = ExperimentContext(config=config, seed=resolved_seed, jobs=max(jobs, 1))
    checks = set(config.run.checks)
    logger.info("run: model=%s checks=%s seed=%d", config.model.id, sorted(checks), resolved_seed)

    if "rf" in checks:
        with ctx.stage("rf"):
            _rf_checks(ctx)
    if checks - {"rf"}:
        _model_stage(ctx)
        if "commutators" in checks:
            with ctx.stage("commutator_checks"):
                _commutator_checks(ctx)
        if "kappa" in checks:
            with ctx.stage("kappa"):
                _kappa_checks(ctx)
        if "mourre" in checks:
            _mourre_checks(ctx)
        if checks & {"ccr", "weyl", "spectral-derivative", "sojourn"}:
            if ctx.pair.d != 1 and "spectral-derivative" in checks:
                raise UnsupportedModel(detail="spectral-derivative needs a one-dimensional model")
            _time_operator_checks(ctx)

    report = VerificationReport(
        tool=settings.APP_NAME,
        version=settings.APP_VERSION,
        config={**config.model_dump(mode="json"), "resolved_seed": resolved_seed},
        checks=ctx.checks,
        tables=ctx.tables,
        kappa=ctx.kappa_records,
        timing=ctx.timing,
    )
    failed = report.failed_checks()
    logger.info("run: %d checks, %d failed", len(report.checks), len(failed))
    for record in failed:
        logger.warning("failed: %s residual=%.3e tolerance=%.1e", record.name, record.residual, record.tolerance)
    return report
