"""Seeded generators for admission-style tables.

The public Kaggle admission files cannot be shipped, so these generators
produce tables with the same schemas. Labels depend mostly on GRE, TOEFL
and CGPA; knobs control group base-rate offsets, injected label anomalies
and extra pure-noise columns.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np
import yaml

from ._random import substream
from .data import CATEGORICAL, NUMERIC, CleaningRule, DataTable

PARENTAL_LEVELS = (
    "some high school",
    "high school",
    "some college",
    "associate's degree",
    "bachelor's degree",
    "master's degree",
)
PARENTAL_PROBS = (0.15, 0.20, 0.22, 0.18, 0.15, 0.10)
HIGH_PARENTAL = frozenset({"bachelor's degree", "master's degree"})

GRAD_SCHEMA = {
    "GRE": NUMERIC, "TOEFL": NUMERIC, "SOP": NUMERIC, "LOR": NUMERIC, "CGPA": NUMERIC,
    "Research": NUMERIC, "gender": CATEGORICAL, "parental_education": CATEGORICAL,
    "admit_prob": NUMERIC,
}


class ConfigError(ValueError):
    pass


@dataclass
class SyntheticConfig:
    """Generator knobs.

    ``gender_offset`` / ``parental_offset`` shift the latent admission score
    of female / high-parental-education applicants up by half the value and
    the other group down by half. ``anomalies`` rows of the graduate table
    are rewritten into label-contradicting profiles.
    """

    grad_rows: int = 400
    hs_rows: int = 0
    sec_rows: int = 0
    ug_rows: int = 0
    anomalies: int = 0
    noise: float = 1.0
    gender_offset: float = 0.0
    parental_offset: float = 0.0
    noise_features: int = 0
    missing_rate: float = 0.0

    def validate(self) -> None:
        for name in ("grad_rows", "hs_rows", "sec_rows", "ug_rows", "anomalies", "noise_features"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if self.grad_rows <= 0:
            raise ConfigError("grad_rows must be > 0")
        if self.anomalies > self.grad_rows:
            raise ConfigError("anomalies cannot exceed grad_rows")
        if self.noise < 0:
            raise ConfigError("noise must be >= 0")
        if not 0.0 <= self.missing_rate < 1.0:
            raise ConfigError("missing_rate must lie in [0, 1)")

    @classmethod
    def from_mapping(cls, mapping) -> "SyntheticConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(mapping) - known
        if unknown:
            raise ConfigError(f"unknown generator keys: {sorted(unknown)}")
        cfg = cls(**mapping)
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path) -> "SyntheticConfig":
        with open(path) as fh:
            return cls.from_mapping(yaml.safe_load(fh) or {})

    def to_dict(self) -> dict:
        return asdict(self)


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def _groups(rng, n):
    gender = rng.choice(["F", "M"], size=n)
    parental = rng.choice(PARENTAL_LEVELS, size=n, p=PARENTAL_PROBS)
    return gender, parental


def _group_shift(cfg: SyntheticConfig, gender, parental):
    female = np.where(gender == "F", 0.5, -0.5)
    high = np.where(np.isin(parental, list(HIGH_PARENTAL)), 0.5, -0.5)
    return cfg.gender_offset * female + cfg.parental_offset * high


def _grad_table(cfg: SyntheticConfig, seed: int) -> dict:
    rng = substream(seed, "synthetic", "grad")
    n = cfg.grad_rows
    ability = rng.standard_normal(n)
    e = rng.standard_normal((n, 6))
    gre = np.clip(np.round(316 + 11 * (0.8 * ability + 0.6 * e[:, 0])), 260, 340)
    toefl = np.clip(np.round(107 + 6 * (0.8 * ability + 0.6 * e[:, 1])), 0, 120)
    cgpa = np.clip(np.round(8.6 + 0.6 * (0.85 * ability + 0.53 * e[:, 2]), 2), 0, 10)
    sop = np.clip(np.round(2 * (3.4 + 0.9 * (0.3 * ability + 0.95 * e[:, 3]))) / 2, 1, 5)
    lor = np.clip(np.round(2 * (3.5 + 0.9 * (0.3 * ability + 0.95 * e[:, 4]))) / 2, 1, 5)
    research = (rng.random(n) < _sigmoid(0.8 * ability)).astype(float)
    gender, parental = _groups(rng, n)

    z_gre = (gre - 316) / 11
    z_toefl = (toefl - 107) / 6
    z_cgpa = (cgpa - 8.6) / 0.6
    score = (1.2 * z_gre + 1.0 * z_toefl + 1.6 * z_cgpa
             + 0.1 * (sop - 3.4) + 0.1 * (lor - 3.5) + 0.2 * research + 0.4
             + _group_shift(cfg, gender, parental)
             + cfg.noise * e[:, 5])
    chance = np.round(np.clip(_sigmoid(score), 0.01, 0.99), 2)

    # Clean rows never trip the default anomaly rule.
    rule = CleaningRule()
    strong = (gre >= rule.gre_min) & (cgpa >= rule.cgpa_min)
    weak = (gre <= rule.gre_max) & (cgpa <= rule.cgpa_max)
    chance = np.where(strong & (chance < 0.5), 0.5, chance)
    chance = np.where(weak & (chance >= 0.5), 0.49, chance)

    if cfg.anomalies:
        arng = substream(seed, "synthetic", "anomalies")
        rows = arng.choice(n, size=cfg.anomalies, replace=False)
        for i, r in enumerate(rows):
            if i % 2 == 0:
                gre[r] = arng.integers(320, 341)
                cgpa[r] = np.round(arng.uniform(9.5, 10.0), 2)
                chance[r] = np.round(arng.uniform(0.20, 0.45), 2)
            else:
                gre[r] = arng.integers(285, 301)
                cgpa[r] = np.round(arng.uniform(7.0, 8.0), 2)
                chance[r] = np.round(arng.uniform(0.55, 0.90), 2)

    cols = {
        "GRE": gre, "TOEFL": toefl, "SOP": sop, "LOR": lor, "CGPA": cgpa,
        "Research": research, "gender": gender, "parental_education": parental,
    }
    nrng = substream(seed, "synthetic", "noise-features")
    for k in range(cfg.noise_features):
        cols[f"noise_{k}"] = np.round(nrng.standard_normal(n), 4)
    cols["admit_prob"] = chance
    return cols


def _hs_table(cfg, seed):
    rng = substream(seed, "synthetic", "hs")
    n = cfg.hs_rows
    ability = rng.standard_normal(n)
    e = rng.standard_normal((n, 4))
    gender, parental = _groups(rng, n)
    math = np.clip(np.round(66 + 15 * (0.85 * ability + 0.5 * e[:, 0])), 0, 100)
    reading = np.clip(np.round(69 + 14 * (0.85 * ability + 0.5 * e[:, 1])), 0, 100)
    writing = np.clip(np.round(68 + 15 * (0.85 * ability + 0.5 * e[:, 2])), 0, 100)
    perf = (math + reading + writing) / 3
    score = (perf - 67.7) / 10 + 0.3 + _group_shift(cfg, gender, parental) + cfg.noise * e[:, 3]
    chance = np.round(np.clip(_sigmoid(score), 0.01, 0.99), 2)
    return {"math_score": math, "reading_score": reading, "writing_score": writing,
            "gender": gender, "parental_education": parental, "admit_prob": chance}


def _sec_table(cfg, seed):
    rng = substream(seed, "synthetic", "sec")
    n = cfg.sec_rows
    ability = rng.standard_normal(n)
    e = rng.standard_normal((n, 3))
    gender, parental = _groups(rng, n)
    grades = np.clip(np.round(11 + 3 * (0.85 * ability + 0.5 * e[:, 0])), 0, 20)
    absences = np.clip(np.round(rng.gamma(1.5, 3.0, n) - 1.5 * ability), 0, 75)
    support = np.where(rng.random(n) < _sigmoid(0.5 * ability), "yes", "no")
    score = (grades - 11) / 3 - 0.05 * (absences - 4) + _group_shift(cfg, gender, parental) + cfg.noise * e[:, 2]
    chance = np.round(np.clip(_sigmoid(score), 0.01, 0.99), 2)
    return {"grades": grades, "parental_support": support, "absences": absences,
            "gender": gender, "parental_education": parental, "admit_prob": chance}


def _ug_table(cfg, seed):
    rng = substream(seed, "synthetic", "ug")
    n = cfg.ug_rows
    ability = rng.standard_normal(n)
    e = rng.standard_normal((n, 4))
    gender, parental = _groups(rng, n)
    gpa = np.clip(np.round(3.2 + 0.4 * (0.85 * ability + 0.5 * e[:, 0]), 2), 0, 4)
    sat = np.clip(np.round(1150 + 160 * (0.85 * ability + 0.5 * e[:, 1]), -1), 400, 1600)
    extra = np.clip(np.round(2 + 1.2 * (0.4 * ability + 0.9 * e[:, 2])), 0, 5)
    score = (1.5 * (gpa - 3.2) / 0.4 + 1.2 * (sat - 1150) / 160 + 0.2 * (extra - 2)
             + _group_shift(cfg, gender, parental) + cfg.noise * e[:, 3])
    chance = np.round(np.clip(_sigmoid(score), 0.01, 0.99), 2)
    return {"GPA": gpa, "SAT": sat, "extracurriculars": extra,
            "gender": gender, "parental_education": parental, "admit_prob": chance}


_PROTECTED = {"gender", "parental_education", "admit_prob"}


def _to_table(cols: dict, cfg: SyntheticConfig, seed: int, name: str) -> DataTable:
    table = {}
    rng = substream(seed, "synthetic", "missing", name)
    for key, values in cols.items():
        values = list(values.tolist())
        if cfg.missing_rate and key not in _PROTECTED:
            holes = rng.random(len(values)) < cfg.missing_rate
            values = [None if h else v for v, h in zip(values, holes)]
        table[key] = values
    kinds = {k: (CATEGORICAL if k in ("gender", "parental_education", "parental_support") else NUMERIC)
             for k in table}
    return DataTable.from_columns(table, kinds)


def generate_synthetic(config: SyntheticConfig | None = None, seed: int = 0) -> DataTable:
    """Graduate-schema admission table, deterministic in ``(config, seed)``."""
    cfg = config or SyntheticConfig()
    cfg.validate()
    return _to_table(_grad_table(cfg, seed), cfg, seed, "grad")


def generate_sources(config: SyntheticConfig | None = None, seed: int = 0) -> dict[str, DataTable]:
    """All configured sources keyed by context flag (grad, hs, sec, ug)."""
    cfg = config or SyntheticConfig()
    cfg.validate()
    out = {"grad": generate_synthetic(cfg, seed)}
    for flag, size, make in (("hs", cfg.hs_rows, _hs_table), ("sec", cfg.sec_rows, _sec_table),
                             ("ug", cfg.ug_rows, _ug_table)):
        if size:
            out[flag] = _to_table(make(cfg, seed), cfg, seed, flag)
    return out
