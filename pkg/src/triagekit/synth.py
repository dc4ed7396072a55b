"""Desk-scale synthetic surrogate for the access-controlled hospital dataset.

The generator draws a latent per-patient severity (0 for patients who never
need special care, ~N(1, sd^2) for those who do), shifts feature means with
it, and couples the days-under-care target to the same latent so both
targets are learnable from the lab values. Lab panels are observed together
and sick patients get labs more often, while each feature's marginal
coverage stays at the configured value.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import FeatureSpec, RecordTable
from .errors import DomainError


@dataclass(frozen=True)
class DaysModel:
    """Zero-inflated days generator: positives draw a rounded log-normal
    whose log-mean shifts with severity, negatives get 0."""

    log_mean: float = 2.8683
    log_sd: float = 0.20
    severity_link: float = 2.0


@dataclass(frozen=True)
class SyntheticFeature:
    spec: FeatureSpec
    mean: float
    std: float
    coverage: float
    signal: float = 0.0        # positive-class mean shift, in std units per unit severity
    panel: str = ""            # features sharing a panel are observed together
    coverage_boost: float = 1.0  # positive-class coverage multiplier; marginal coverage preserved


@dataclass(frozen=True)
class SyntheticSpec:
    n_patients: int
    prevalence: float
    features: tuple[SyntheticFeature, ...]
    days: DaysModel = DaysModel()
    severity_sd: float = 0.31
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_patients < 1:
            raise DomainError("n_patients must be positive")
        if not 0.0 <= self.prevalence <= 1.0:
            raise DomainError("prevalence must lie in [0, 1]")
        for f in self.features:
            if not 0.0 <= f.coverage <= 1.0:
                raise DomainError(f"coverage out of [0,1] for {f.spec.name!r}")
            if f.std < 0:
                raise DomainError(f"negative std for {f.spec.name!r}")
            if f.coverage_boost < 1.0:
                raise DomainError(f"coverage_boost must be >= 1 for {f.spec.name!r}")
            # the negative class must absorb the positive-class boost
            pos_cov = min(1.0, f.coverage * f.coverage_boost)
            if self.prevalence < 1.0:
                neg_cov = (f.coverage - self.prevalence * pos_cov) / (1.0 - self.prevalence)
                if neg_cov < 0.0:
                    raise DomainError(
                        f"coverage_boost too large for {f.spec.name!r} at this prevalence"
                    )

    def schema(self) -> tuple[FeatureSpec, ...]:
        return tuple(f.spec for f in self.features)


def _class_coverages(spec: SyntheticSpec, feature: SyntheticFeature) -> tuple[float, float]:
    """(negative, positive) observation rates preserving the marginal."""
    pos = min(1.0, feature.coverage * feature.coverage_boost)
    if spec.prevalence >= 1.0:
        return pos, pos
    neg = (feature.coverage - spec.prevalence * pos) / (1.0 - spec.prevalence)
    return neg, pos


def synth_generate(spec: SyntheticSpec) -> RecordTable:
    """Generate a table; deterministic for a given spec and seed."""
    rng = np.random.default_rng(spec.seed)
    n = spec.n_patients
    p = len(spec.features)

    positive = rng.random(n) < spec.prevalence
    severity_noise = rng.standard_normal(n)
    severity = np.where(positive, 1.0 + spec.severity_sd * severity_noise, 0.0)

    # One uniform per (patient, panel): features in a panel are observed
    # together, with lower-coverage features forming nested subsets.
    panel_u: dict[str, np.ndarray] = {}
    obs_u = np.empty((n, p))
    for j, feature in enumerate(spec.features):
        if feature.panel:
            if feature.panel not in panel_u:
                panel_u[feature.panel] = rng.random(n)
            obs_u[:, j] = panel_u[feature.panel]
        else:
            obs_u[:, j] = rng.random(n)

    values = np.empty((n, p))
    for j, feature in enumerate(spec.features):
        shift = severity * feature.signal * feature.std
        if feature.spec.kind == "binary":
            prob = np.clip(feature.mean + shift, 0.02, 0.98)
            values[:, j] = (rng.random(n) < prob).astype(np.float64)
        else:
            eps = rng.standard_normal(n)
            values[:, j] = feature.mean + feature.std * eps + shift

    for j, feature in enumerate(spec.features):
        neg_cov, pos_cov = _class_coverages(spec, feature)
        threshold = np.where(positive, pos_cov, neg_cov)
        values[obs_u[:, j] >= threshold, j] = np.nan

    eta = rng.standard_normal(n)
    log_days = spec.days.log_mean + spec.days.severity_link * (severity - 1.0) + spec.days.log_sd * eta
    days = np.where(positive, np.maximum(np.round(np.exp(log_days)), 0.0), 0.0)

    ids = tuple(f"P{i:06d}" for i in range(n))
    return RecordTable(ids, spec.schema(), values, positive.astype(np.int8), days)


# Marginals mirror a large hospital triage cohort's per-exam statistics;
# signals follow the blood markers that run abnormal in acute respiratory
# infection (inflammation and white-cell lines up, lymphocytes and
# red-cell lines down).
_DEMO30 = [
    # name, unit, kind, mean, std, coverage, signal, panel, boost
    ("Sex", "", "binary", 0.46, 0.50, 1.00, 0.35, "demographics", 1.0),
    ("Age", "years", "continuous", 42.48, 13.99, 0.99, 0.90, "demographics", 1.0),
    ("MCH", "pg", "continuous", 29.16, 2.26, 0.18, -0.45, "cbc", 4.0),
    ("Hematocrit", "%", "continuous", 39.61, 5.48, 0.18, -0.50, "cbc", 4.0),
    ("CMCH", "pg", "continuous", 33.09, 1.23, 0.18, 0.00, "cbc", 4.0),
    ("Erythrocytes", "million/mm3", "continuous", 4.06, 0.80, 0.18, -0.45, "cbc", 4.0),
    ("Leukocytes", "/mm3", "continuous", 6258.91, 3541.01, 0.18, 1.50, "cbc", 4.0),
    ("RDW", "%", "continuous", 13.22, 2.51, 0.18, 0.35, "cbc", 4.0),
    ("Hemoglobin", "g/dL", "continuous", 12.97, 1.99, 0.18, -0.60, "cbc", 4.0),
    ("Platelets", "/mm3", "continuous", 205748.36, 78948.08, 0.18, -0.70, "cbc", 4.0),
    ("Neutrophils_pct", "%", "continuous", 61.71, 14.57, 0.18, 1.35, "cbc", 4.0),
    ("Eosinophils_abs", "/mm3", "continuous", 81.96, 112.61, 0.18, -0.75, "cbc", 4.0),
    ("Monocytes_pct", "%", "continuous", 9.24, 4.49, 0.18, -0.45, "cbc", 4.0),
    ("Eosinophils_pct", "%", "continuous", 1.04, 1.72, 0.18, -0.75, "cbc", 4.0),
    ("Lymphocytes_pct", "%", "continuous", 25.75, 12.38, 0.18, -1.40, "cbc", 4.0),
    ("Basophils_pct", "%", "continuous", 0.07, 0.30, 0.18, -0.35, "cbc", 4.0),
    ("Neutrophils_abs", "/mm3", "continuous", 4132.13, 3142.68, 0.18, 1.40, "cbc", 4.0),
    ("Lymphocytes_abs", "/mm3", "continuous", 1463.58, 841.17, 0.18, -1.35, "cbc", 4.0),
    ("Basophils_abs", "/mm3", "continuous", 24.15, 25.71, 0.18, -0.30, "cbc", 4.0),
    ("Monocytes_abs", "/mm3", "continuous", 575.24, 420.51, 0.18, -0.30, "cbc", 4.0),
    ("Platelet_Volume", "fL", "continuous", 9.85, 0.92, 0.18, 0.50, "cbc", 4.0),
    ("Creatinine", "mg/dL", "continuous", 0.51, 0.86, 0.16, 0.85, "renal", 4.0),
    ("Urea", "mg/dL", "continuous", 34.71, 18.32, 0.16, 1.00, "renal", 4.0),
    ("Potassium", "mEq/L", "continuous", 3.54, 0.55, 0.15, 0.30, "electrolytes", 4.0),
    ("Sodium", "mEq/L", "continuous", 138.42, 3.05, 0.14, -0.45, "electrolytes", 4.0),
    ("ALT", "U/L", "continuous", 37.26, 38.03, 0.13, 0.80, "liver", 4.0),
    ("AST", "U/L", "continuous", 35.76, 45.41, 0.13, 1.00, "liver", 4.0),
    ("DHL", "U/L", "continuous", 488.87, 345.04, 0.11, 1.55, "inflammation", 4.0),
    ("CRP", "mg/L", "continuous", 28.0, 40.0, 0.12, 1.70, "inflammation", 4.0),
    ("D_Dimer", "ng/mL", "continuous", 520.0, 380.0, 0.10, 1.50, "inflammation", 4.0),
]


def demo_spec(n_patients: int = 2000, prevalence: float = 0.07, seed: int = 20) -> SyntheticSpec:
    """The bundled 30-feature demo profile."""
    features = tuple(
        SyntheticFeature(
            spec=FeatureSpec(name, unit, kind),
            mean=mean, std=std, coverage=coverage, signal=signal,
            panel=panel, coverage_boost=boost,
        )
        for name, unit, kind, mean, std, coverage, signal, panel, boost in _DEMO30
    )
    return SyntheticSpec(n_patients=n_patients, prevalence=prevalence,
                         features=features, seed=seed)


def nosignal_spec(n_patients: int = 5000, prevalence: float = 0.5, seed: int = 0) -> SyntheticSpec:
    """Demo marginals with every class effect removed (signals and boosts off).

    A null-distribution diagnostic: balanced classes and coverage floored
    at 0.5 keep per-class observed samples large enough that the KS column
    reflects only sampling noise (well under 0.1 at n = 5000).
    """
    base = demo_spec(n_patients=n_patients, seed=seed)
    features = tuple(
        SyntheticFeature(spec=f.spec, mean=f.mean, std=f.std,
                         coverage=max(f.coverage, 0.5),
                         signal=0.0, panel=f.panel, coverage_boost=1.0)
        for f in base.features
    )
    return SyntheticSpec(n_patients=n_patients, prevalence=prevalence,
                         features=features, days=base.days,
                         severity_sd=base.severity_sd, seed=seed)


PROFILES = {
    "demo30": demo_spec,
    "nosignal30": nosignal_spec,
}
