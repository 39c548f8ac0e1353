"""Experiment orchestration: configs, grid execution, and CSV emission.

Configs are YAML documents with one section per experiment kind.  Every
cell of a grid derives its own random stream from the base seed and the
cell's labels, so outputs are byte-identical across reruns and independent
of worker scheduling; rows are sorted before writing.
"""

from __future__ import annotations

import dataclasses
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np
import yaml

from .bandit import RegretTrace, dprse_baseline_run, prae_run
from .env import (
    BanditInstance,
    ContaminationSpec,
    Gaussian,
    InlierSpec,
    ParetoShifted,
    PointMass,
    make_hard_instance,
    make_linear_means_instance,
    sample_rewards,
)
from .estimators import (
    _prm_raw_batch,
    central_schedule,
    prm_central,
    raw_schedule,
)
from .privacy import audit_sensitivity, truncated_mean_sensitivity
from .rng import RngStream, derive_stream_id

PROFILES = {"paper": (100_000, 30), "desk": (10_000, 10)}
KINDS = ("regret", "concentration", "audit", "hard-instance")
ALGORITHMS = ("prae-r", "prae-c", "dprse")

# Batch size at which elimination starts even if the theoretical minimum
# sample count is larger; the histogram step is already reliable here and
# the theoretical thresholds are unreachable at desk-scale horizons.
DEFAULT_PHASE_CAP = 1024


class ConfigError(ValueError):
    """Raised for malformed or out-of-domain experiment configurations."""


@dataclass(frozen=True)
class RegretRow:
    run_id: str
    algorithm: str
    epsilon: float
    alpha: float
    seed: int
    t: int
    cum_regret: float


@dataclass(frozen=True)
class ConcentrationRow:
    n: int
    epsilon: float
    delta: float
    alpha: float
    k: float
    estimator: str
    empirical_quantile: float
    theoretical_beta: float


@dataclass(frozen=True)
class AuditRow:
    n: int
    truncation: float
    trials: int
    max_observed: float
    bound: float


@dataclass(frozen=True)
class OutlierConfig:
    kind: str = "gaussian"  # gaussian | point_mass
    mean: float = 0.0
    std: float = 50.0
    value: float = 0.0

    def build(self):
        if self.kind == "gaussian":
            return Gaussian(self.mean, self.std)
        if self.kind == "point_mass":
            return PointMass(self.value)
        raise ConfigError(f"unknown outlier kind {self.kind!r}")


@dataclass(frozen=True)
class RegretConfig:
    algorithms: tuple[str, ...] = ("prae-r", "prae-c", "dprse")
    family: str = "student_t"  # student_t | pareto
    arms: int = 5
    epsilons: tuple[float, ...] = (0.5,)
    alphas: tuple[float, ...] = (0.05,)
    horizon: int = 0  # 0 means: take from profile
    repeats: int = 0
    delta: float = 1e-5
    moment_order: float = 2.0
    outlier: OutlierConfig = field(default_factory=OutlierConfig)
    stride: int = 0  # 0 means: auto (<= 1000 points per run); 1 = full resolution
    phase_cap: int | None = DEFAULT_PHASE_CAP


@dataclass(frozen=True)
class HardInstanceConfig:
    algorithms: tuple[str, ...] = ("prae-r", "dprse")
    arms: int = 5
    gamma: float = 1.0
    moment_order: float = 2.0
    boosted_arm: int | None = None
    epsilons: tuple[float, ...] = (1.0,)
    horizon: int = 0
    repeats: int = 0
    delta: float = 1e-5
    stride: int = 0
    phase_cap: int | None = DEFAULT_PHASE_CAP


@dataclass(frozen=True)
class ConcentrationConfig:
    estimator: str = "raw"  # raw | central
    sample_sizes: tuple[int, ...] = (1024, 4096, 16384, 65536)
    reps: int = 2000
    epsilon: float = 1.0
    delta: float = 0.05
    alpha: float = 0.0
    moment_order: float = 2.0
    inlier_mean: float = 0.0
    mean_range: float = 100.0
    outlier: OutlierConfig = field(default_factory=OutlierConfig)


@dataclass(frozen=True)
class AuditConfig:
    sizes: tuple[int, ...] = tuple(range(1, 65))
    truncations: tuple[float, ...] = (0.0, 0.1, 1.0, 10.0)
    trials: int = 200


Section = RegretConfig | HardInstanceConfig | ConcentrationConfig | AuditConfig


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    section: Section
    base_seed: int = 0
    out: str | None = None


@dataclass
class ExperimentOutcome:
    rows: list
    failures: list[tuple[str, str]] = field(default_factory=list)
    row_type: type | None = None


def _require_keys(data: dict, allowed: set[str], where: str) -> None:
    for key in data:
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r} in {where}")


def _floats(value: Any, where: str) -> tuple[float, ...]:
    if not isinstance(value, (list, tuple)) or not value:
        raise ConfigError(f"{where} must be a nonempty list of numbers")
    try:
        return tuple(float(v) for v in value)
    except (TypeError, ValueError):
        raise ConfigError(f"{where} must contain only numbers") from None


def _ints(value: Any, where: str) -> tuple[int, ...]:
    if not isinstance(value, (list, tuple)) or not value:
        raise ConfigError(f"{where} must be a nonempty list of integers")
    out = []
    for v in value:
        if not isinstance(v, int) or isinstance(v, bool):
            raise ConfigError(f"{where} must contain only integers")
        out.append(v)
    return tuple(out)


def _parse_outlier(data: Any, where: str) -> OutlierConfig:
    if data is None:
        return OutlierConfig()
    if not isinstance(data, dict):
        raise ConfigError(f"{where} must be a mapping")
    _require_keys(data, {"kind", "mean", "std", "value"}, where)
    cfg = OutlierConfig(
        kind=str(data.get("kind", "gaussian")),
        mean=float(data.get("mean", 0.0)),
        std=float(data.get("std", 50.0)),
        value=float(data.get("value", 0.0)),
    )
    if cfg.kind not in ("gaussian", "point_mass"):
        raise ConfigError(f"unknown outlier kind {cfg.kind!r} in {where}")
    if cfg.std < 0:
        raise ConfigError(f"{where}.std must be nonnegative")
    return cfg


def _check_algorithms(algs: Any, where: str) -> tuple[str, ...]:
    if not isinstance(algs, (list, tuple)) or not algs:
        raise ConfigError(f"{where} must be a nonempty list")
    for a in algs:
        if a not in ALGORITHMS:
            raise ConfigError(
                f"unknown algorithm {a!r} in {where}; choose from {ALGORITHMS}"
            )
    return tuple(str(a) for a in algs)


def _check_common(
    alphas: Sequence[float], algorithms: Sequence[str], delta: float, where: str
) -> None:
    if not 0.0 < delta < 1.0:
        raise ConfigError(f"{where}.delta must lie in (0, 1)")
    for a in alphas:
        if not 0.0 <= a <= 1.0:
            raise ConfigError(f"{where}.alphas entries must lie in [0, 1]")
        if "prae-c" in algorithms and a >= 0.133:
            raise ConfigError(
                f"alpha={a} is at or above the central estimator's breakdown "
                f"point 0.133; prae-c cannot run at this contamination level"
            )
        if "prae-r" in algorithms and a > 0.5:
            raise ConfigError(
                f"alpha={a} exceeds 0.5, outside the raw schedule's domain"
            )


def _parse_regret(data: dict, profile: str) -> RegretConfig:
    where = "regret"
    _require_keys(
        data,
        {
            "algorithms",
            "family",
            "arms",
            "epsilons",
            "alphas",
            "horizon",
            "repeats",
            "delta",
            "moment_order",
            "outlier",
            "stride",
            "phase_cap",
        },
        where,
    )
    default_t, default_r = PROFILES[profile]
    cfg = RegretConfig(
        algorithms=_check_algorithms(data.get("algorithms", list(ALGORITHMS)), where),
        family=str(data.get("family", "student_t")),
        arms=int(data.get("arms", 5)),
        epsilons=_floats(data.get("epsilons", [0.5]), f"{where}.epsilons"),
        alphas=_floats(data.get("alphas", [0.05]), f"{where}.alphas"),
        horizon=int(data.get("horizon", default_t)),
        repeats=int(data.get("repeats", default_r)),
        delta=float(data.get("delta", 1e-5)),
        moment_order=float(data.get("moment_order", 2.0)),
        outlier=_parse_outlier(data.get("outlier"), f"{where}.outlier"),
        stride=int(data.get("stride", 0)),
        phase_cap=(
            None if data.get("phase_cap", DEFAULT_PHASE_CAP) is None
            else int(data.get("phase_cap", DEFAULT_PHASE_CAP))
        ),
    )
    if cfg.family not in ("student_t", "pareto"):
        raise ConfigError(f"unknown reward family {cfg.family!r}")
    if cfg.arms < 2:
        raise ConfigError("regret.arms must be at least 2")
    if cfg.horizon < 1 or cfg.repeats < 1:
        raise ConfigError("regret.horizon and regret.repeats must be positive")
    for eps in cfg.epsilons:
        if eps <= 0 or ("prae-c" in cfg.algorithms and eps > 1.0):
            raise ConfigError(
                f"epsilon={eps} invalid; prae-c requires epsilon in (0, 1]"
            )
    _check_common(cfg.alphas, cfg.algorithms, cfg.delta, where)
    return cfg


def _parse_hard(data: dict, profile: str) -> HardInstanceConfig:
    where = "hard_instance"
    _require_keys(
        data,
        {
            "algorithms",
            "arms",
            "gamma",
            "moment_order",
            "boosted_arm",
            "epsilons",
            "horizon",
            "repeats",
            "delta",
            "stride",
            "phase_cap",
        },
        where,
    )
    default_t, default_r = PROFILES[profile]
    boosted = data.get("boosted_arm")
    cfg = HardInstanceConfig(
        algorithms=_check_algorithms(data.get("algorithms", ["prae-r", "dprse"]), where),
        arms=int(data.get("arms", 5)),
        gamma=float(data.get("gamma", 1.0)),
        moment_order=float(data.get("moment_order", 2.0)),
        boosted_arm=None if boosted is None else int(boosted),
        epsilons=_floats(data.get("epsilons", [1.0]), f"{where}.epsilons"),
        horizon=int(data.get("horizon", default_t)),
        repeats=int(data.get("repeats", default_r)),
        delta=float(data.get("delta", 1e-5)),
        stride=int(data.get("stride", 0)),
        phase_cap=(
            None if data.get("phase_cap", DEFAULT_PHASE_CAP) is None
            else int(data.get("phase_cap", DEFAULT_PHASE_CAP))
        ),
    )
    if "prae-c" in cfg.algorithms:
        raise ConfigError(
            "prae-c cannot run on the hard instance: its mean range 1 is "
            "below twice the histogram bin width"
        )
    if not 0.0 < cfg.gamma <= 1.0:
        raise ConfigError("hard_instance.gamma must lie in (0, 1]")
    if cfg.horizon < 1 or cfg.repeats < 1:
        raise ConfigError("hard_instance horizon and repeats must be positive")
    _check_common([0.0], cfg.algorithms, cfg.delta, where)
    return cfg


def _parse_concentration(data: dict) -> ConcentrationConfig:
    where = "concentration"
    _require_keys(
        data,
        {
            "estimator",
            "sample_sizes",
            "reps",
            "epsilon",
            "delta",
            "alpha",
            "moment_order",
            "inlier_mean",
            "mean_range",
            "outlier",
        },
        where,
    )
    cfg = ConcentrationConfig(
        estimator=str(data.get("estimator", "raw")),
        sample_sizes=_ints(
            data.get("sample_sizes", [1024, 4096, 16384, 65536]),
            f"{where}.sample_sizes",
        ),
        reps=int(data.get("reps", 2000)),
        epsilon=float(data.get("epsilon", 1.0)),
        delta=float(data.get("delta", 0.05)),
        alpha=float(data.get("alpha", 0.0)),
        moment_order=float(data.get("moment_order", 2.0)),
        inlier_mean=float(data.get("inlier_mean", 0.0)),
        mean_range=float(data.get("mean_range", 100.0)),
        outlier=_parse_outlier(data.get("outlier"), f"{where}.outlier"),
    )
    if cfg.estimator not in ("raw", "central"):
        raise ConfigError(f"unknown estimator {cfg.estimator!r}")
    if cfg.reps < 2:
        raise ConfigError("concentration.reps must be at least 2")
    if min(cfg.sample_sizes) < 1:
        raise ConfigError("concentration.sample_sizes must be positive")
    if cfg.estimator == "central" and cfg.alpha >= 0.133 and cfg.alpha > 0:
        raise ConfigError(
            "alpha is at or above the central estimator's breakdown point 0.133"
        )
    if not 0.0 < cfg.delta < 1.0:
        raise ConfigError("concentration.delta must lie in (0, 1)")
    return cfg


def _parse_audit(data: dict) -> AuditConfig:
    where = "audit"
    _require_keys(data, {"sizes", "truncations", "trials"}, where)
    cfg = AuditConfig(
        sizes=_ints(data.get("sizes", list(range(1, 65))), f"{where}.sizes"),
        truncations=_floats(
            data.get("truncations", [0.0, 0.1, 1.0, 10.0]), f"{where}.truncations"
        ),
        trials=int(data.get("trials", 200)),
    )
    if min(cfg.sizes) < 1:
        raise ConfigError("audit.sizes must be positive")
    if cfg.trials < 1:
        raise ConfigError("audit.trials must be at least 1")
    if min(cfg.truncations) < 0:
        raise ConfigError("audit.truncations must be nonnegative")
    return cfg


_SECTION_KEY = {
    "regret": "regret",
    "hard-instance": "hard_instance",
    "concentration": "concentration",
    "audit": "audit",
}


def parse_config(text: str, profile: str = "paper") -> ExperimentConfig:
    """Parse and validate a YAML experiment document.

    Unknown keys are rejected by name.  Omitted horizon/repeats fall back
    to the profile: paper = (100000 rounds, 30 repeats), desk = (10000, 10).
    """
    if profile not in PROFILES:
        raise ConfigError(f"unknown profile {profile!r}; choose from {list(PROFILES)}")
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed YAML: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config document must be a mapping")

    kind = data.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"kind must be one of {KINDS}, got {kind!r}")
    section_key = _SECTION_KEY[kind]
    _require_keys(data, {"kind", "base_seed", "out", section_key}, "top level")

    section_data = data.get(section_key, {})
    if section_data is None:
        section_data = {}
    if not isinstance(section_data, dict):
        raise ConfigError(f"section {section_key!r} must be a mapping")

    if kind == "regret":
        section: Section = _parse_regret(section_data, profile)
    elif kind == "hard-instance":
        section = _parse_hard(section_data, profile)
    elif kind == "concentration":
        section = _parse_concentration(section_data)
    else:
        section = _parse_audit(section_data)

    out = data.get("out")
    return ExperimentConfig(
        kind=kind,
        section=section,
        base_seed=int(data.get("base_seed", 0)),
        out=None if out is None else str(out),
    )


def serialize_config(config: ExperimentConfig) -> str:
    """Render a config back to YAML such that parse(serialize(c)) == c."""
    section = dataclasses.asdict(config.section)
    if "outlier" in section and isinstance(section["outlier"], dict):
        pass  # nested dataclass already expanded by asdict
    for key, value in list(section.items()):
        if isinstance(value, tuple):
            section[key] = list(value)
    doc = {
        "kind": config.kind,
        "base_seed": config.base_seed,
        "out": config.out,
        _SECTION_KEY[config.kind]: section,
    }
    return yaml.safe_dump(doc, sort_keys=False)


def _resolve_stride(stride: int, horizon: int) -> int:
    if stride > 0:
        return stride
    return max(1, math.ceil(horizon / 1000))


def _sample_ts(horizon: int, stride: int) -> np.ndarray:
    ts = np.arange(stride, horizon + 1, stride)
    if ts.size == 0 or ts[-1] != horizon:
        ts = np.append(ts, horizon)
    return ts


def _run_one_cell(
    algorithm: str,
    instance: BanditInstance,
    epsilon: float,
    alpha: float,
    delta: float,
    k: float,
    horizon: int,
    phase_cap: int | None,
    stream: RngStream,
) -> RegretTrace:
    if algorithm == "prae-r":
        return prae_run(instance, "raw", epsilon, delta, alpha, k, horizon, stream, phase_cap)
    if algorithm == "prae-c":
        return prae_run(
            instance, "central", epsilon, delta, alpha, k, horizon, stream, phase_cap
        )
    if algorithm == "dprse":
        return dprse_baseline_run(instance, epsilon, delta, k, horizon, stream, phase_cap)
    raise ValueError(f"unknown algorithm {algorithm!r}")


def _regret_cells(config: ExperimentConfig):
    section = config.section
    if isinstance(section, RegretConfig):
        def build_instance(alpha: float) -> BanditInstance:
            outlier = section.outlier.build() if alpha > 0 else None
            return make_linear_means_instance(
                section.arms, section.family, alpha, outlier
            )

        alphas: tuple[float, ...] = section.alphas
    elif isinstance(section, HardInstanceConfig):
        hard = make_hard_instance(
            section.arms, section.moment_order, section.gamma, section.boosted_arm
        )

        def build_instance(alpha: float) -> BanditInstance:
            return hard

        alphas = (0.0,)
    else:
        raise TypeError("not a bandit experiment")

    instances = {alpha: build_instance(alpha) for alpha in alphas}
    for algorithm in section.algorithms:
        for epsilon in section.epsilons:
            for alpha in alphas:
                for repeat in range(section.repeats):
                    run_id = (
                        f"{algorithm}-eps{epsilon:g}-alpha{alpha:g}-rep{repeat:03d}"
                    )
                    yield run_id, algorithm, epsilon, alpha, repeat, instances[alpha]


def _execute_regret(
    config: ExperimentConfig, threads: int
) -> ExperimentOutcome:
    section = config.section
    assert isinstance(section, (RegretConfig, HardInstanceConfig))
    horizon = section.horizon
    stride = _resolve_stride(section.stride, horizon)
    ts = _sample_ts(horizon, stride)
    k = section.moment_order
    delta = section.delta

    cells = list(_regret_cells(config))
    rows: list[RegretRow] = []
    failures: list[tuple[str, str]] = []

    def work(cell):
        run_id, algorithm, epsilon, alpha, repeat, instance = cell
        stream = RngStream(
            config.base_seed,
            derive_stream_id(config.kind, algorithm, f"{epsilon!r}", f"{alpha!r}", repeat),
        )
        trace = _run_one_cell(
            algorithm,
            instance,
            epsilon,
            alpha,
            delta,
            k,
            horizon,
            section.phase_cap,
            stream,
        )
        return [
            RegretRow(
                run_id=run_id,
                algorithm=algorithm,
                epsilon=epsilon,
                alpha=alpha,
                seed=repeat,
                t=int(t),
                cum_regret=float(trace.cumulative[t - 1]),
            )
            for t in ts
        ]

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = {pool.submit(work, cell): cell[0] for cell in cells}
            for future, run_id in futures.items():
                try:
                    rows.extend(future.result())
                except Exception as exc:  # cell failure must not abort siblings
                    failures.append((run_id, str(exc)))
    else:
        for cell in cells:
            try:
                rows.extend(work(cell))
            except Exception as exc:
                failures.append((cell[0], str(exc)))

    rows.sort(key=lambda r: (r.run_id, r.t))
    failures.sort()
    return ExperimentOutcome(rows=rows, failures=failures, row_type=RegretRow)


def _concentration_instance(section: ConcentrationConfig) -> BanditInstance:
    inlier = InlierSpec(
        ParetoShifted(2.5, 1.5, section.inlier_mean - 2.5), k=section.moment_order
    )
    contamination = ContaminationSpec(
        section.alpha, section.outlier.build() if section.alpha > 0 else None
    )
    return BanditInstance(
        arms=((inlier, contamination),),
        mean_range=max(section.mean_range, abs(section.inlier_mean)),
        label="concentration-pareto",
    )


def run_concentration_study(
    section: ConcentrationConfig, base_seed: int
) -> list[ConcentrationRow]:
    """Monte-Carlo quantile of the estimation error against its radius."""
    instance = _concentration_instance(section)
    mean = instance.true_means[0]
    rows = []
    for n in section.sample_sizes:
        stream = RngStream(base_seed, derive_stream_id("concentration", section.estimator, n))
        errors = np.empty(section.reps)
        if section.estimator == "raw":
            params = raw_schedule(
                n, section.epsilon, section.delta, section.moment_order, section.alpha
            )
            chunk = max(1, min(section.reps, 2**24 // max(n, 1)))
            done = 0
            while done < section.reps:
                m = min(chunk, section.reps - done)
                data = sample_rewards(instance, 0, m * n, stream).reshape(m, n)
                errors[done : done + m] = np.abs(
                    _prm_raw_batch(data, params, stream) - mean
                )
                done += m
            beta = params.radius
        else:
            params = central_schedule(
                n,
                section.epsilon,
                section.delta,
                section.moment_order,
                section.alpha,
                section.mean_range,
            )
            for rep in range(section.reps):
                data = sample_rewards(instance, 0, 2 * n, stream)
                est = prm_central(data, params, stream)
                errors[rep] = abs(est.value - mean)
            beta = params.radius
        rows.append(
            ConcentrationRow(
                n=n,
                epsilon=section.epsilon,
                delta=section.delta,
                alpha=section.alpha,
                k=section.moment_order,
                estimator=section.estimator,
                empirical_quantile=float(np.quantile(errors, 1.0 - section.delta)),
                theoretical_beta=float(beta),
            )
        )
    return rows


def run_audit_study(section: AuditConfig, base_seed: int) -> list[AuditRow]:
    """Empirical sensitivity sweep over dataset sizes and truncation levels."""
    rows = []
    for n in section.sizes:
        for truncation in section.truncations:
            stream = RngStream(
                base_seed, derive_stream_id("audit", n, f"{truncation!r}")
            )
            observed = audit_sensitivity(n, truncation, section.trials, stream)
            rows.append(
                AuditRow(
                    n=n,
                    truncation=truncation,
                    trials=section.trials,
                    max_observed=observed,
                    bound=truncated_mean_sensitivity(n, truncation),
                )
            )
    return rows


def run_experiment(config: ExperimentConfig, threads: int = 1) -> ExperimentOutcome:
    """Execute every cell of the configured grid with derived seeds.

    Cell errors are collected per cell id without aborting the remaining
    cells.
    """
    if config.kind in ("regret", "hard-instance"):
        return _execute_regret(config, threads)
    if config.kind == "concentration":
        assert isinstance(config.section, ConcentrationConfig)
        rows = run_concentration_study(config.section, config.base_seed)
        return ExperimentOutcome(rows=rows, row_type=ConcentrationRow)
    if config.kind == "audit":
        assert isinstance(config.section, AuditConfig)
        rows = run_audit_study(config.section, config.base_seed)
        return ExperimentOutcome(rows=rows, row_type=AuditRow)
    raise ConfigError(f"unknown experiment kind {config.kind!r}")


def _format_field(value: Any) -> str:
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


def emit_csv(rows: Sequence[Any], path: str | Path, row_type: type | None = None) -> None:
    """Write rows as UTF-8 CSV: header, 17-significant-digit floats.

    ``row_type`` is only needed for an empty row list, where it supplies
    the header.
    """
    if rows:
        row_type = type(rows[0])
    if row_type is None:
        raise ValueError("row_type is required when rows is empty")
    names = [f.name for f in dataclasses.fields(row_type)]
    path = Path(path)
    try:
        with path.open("w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(names) + "\n")
            for row in rows:
                fh.write(
                    ",".join(_format_field(getattr(row, n)) for n in names) + "\n"
                )
    except OSError as exc:
        raise OSError(f"cannot write CSV to {path}: {exc}") from exc
