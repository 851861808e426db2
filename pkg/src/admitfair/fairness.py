"""Group fairness audit: demographic parity and equalized odds gaps."""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

logger = logging.getLogger(__name__)

DEFAULT_TAU = 0.05

# Parental education is audited as two groups.
PARENTAL_EDUCATION_GROUPS = {
    "bachelor's degree": "high",
    "master's degree": "high",
    "*": "low",
}


@dataclass
class SensitiveAttribute:
    name: str
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=object)

    @classmethod
    def from_column(cls, name: str, raw, mapping: Mapping[str, str] | None = None) -> "SensitiveAttribute":
        """Map raw cell values to audit groups; a ``"*"`` key catches unmapped values."""
        raw = np.asarray(raw, dtype=object)
        if not mapping:
            return cls(name, raw)
        default = mapping.get("*")
        out = []
        for v in raw:
            key = str(v)
            if key in mapping:
                out.append(mapping[key])
            elif default is not None:
                out.append(default)
            else:
                raise ValueError(f"attribute {name!r}: value {key!r} has no group mapping")
        return cls(name, np.asarray(out, dtype=object))

    @property
    def groups(self) -> list[str]:
        return sorted({str(v) for v in self.values})

    def __len__(self):
        return len(self.values)


@dataclass
class GroupRates:
    label: str
    support: int
    positive_rate: float
    base_rate: float
    tpr: float | None
    fpr: float | None
    tp: int
    fp: int
    fn: int
    tn: int

    def to_dict(self) -> dict:
        return {"label": self.label, "positive_rate": self.positive_rate, "tpr": self.tpr,
                "fpr": self.fpr, "support": self.support, "base_rate": self.base_rate}


@dataclass
class FairnessReport:
    attribute: str
    groups: list[GroupRates]
    dp_gap: float
    eo_gap: float
    tau: float
    flagged: bool
    excluded_from_eo: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "attribute": self.attribute,
            "groups": [g.to_dict() for g in self.groups],
            "dp_gap": self.dp_gap,
            "eo_gap": self.eo_gap,
            "tau": self.tau,
            "flagged": self.flagged,
            "excluded_from_eo": list(self.excluded_from_eo),
        }


def _as_attribute(attribute, n) -> SensitiveAttribute:
    if not isinstance(attribute, SensitiveAttribute):
        attribute = SensitiveAttribute("attribute", attribute)
    if len(attribute) != n:
        raise ValueError(f"attribute {attribute.name!r} has {len(attribute)} rows, expected {n}")
    return attribute


def _binary(v, what):
    v = np.asarray(v).astype(int)
    if not np.isin(v, (0, 1)).all():
        raise ValueError(f"{what} must be 0/1")
    return v


def group_rates(predictions, labels, attribute) -> list[GroupRates]:
    pred = _binary(predictions, "predictions")
    y = _binary(labels, "labels")
    if len(y) != len(pred):
        raise ValueError("predictions and labels must have equal lengths")
    attribute = _as_attribute(attribute, len(pred))
    out = []
    for g in attribute.groups:
        mask = np.asarray([str(v) == g for v in attribute.values])
        p, t = pred[mask], y[mask]
        tp = int(((p == 1) & (t == 1)).sum())
        fp = int(((p == 1) & (t == 0)).sum())
        fn = int(((p == 0) & (t == 1)).sum())
        tn = int(((p == 0) & (t == 0)).sum())
        out.append(GroupRates(
            g, int(mask.sum()), float(p.mean()), float(t.mean()),
            tp / (tp + fn) if tp + fn else None,
            fp / (fp + tn) if fp + tn else None,
            tp, fp, fn, tn))
    return out


def max_pairwise_gap(rates: Mapping[str, float] | Sequence[float]) -> float:
    """Largest absolute difference between any two group rates."""
    values = list(rates.values()) if isinstance(rates, Mapping) else list(rates)
    if len(values) < 2:
        raise ValueError("need at least two groups")
    return max(abs(a - b) for a, b in itertools.combinations(values, 2))


def demographic_parity_gap(predictions, attribute) -> float:
    """``|P(pred=1 | A=a) - P(pred=1 | A=b)|``, maximised over group pairs."""
    pred = _binary(predictions, "predictions")
    attribute = _as_attribute(attribute, len(pred))
    groups = attribute.groups
    if len(groups) < 2:
        raise ValueError(f"attribute {attribute.name!r} needs at least two nonempty groups")
    rates = {g: float(pred[np.asarray([str(v) == g for v in attribute.values])].mean()) for g in groups}
    return max_pairwise_gap(rates)


def _eo_from_rates(rates: Sequence[GroupRates], name: str):
    usable = [r for r in rates if r.tpr is not None and r.fpr is not None]
    excluded = [r.label for r in rates if r.tpr is None or r.fpr is None]
    for label in excluded:
        logger.warning("attribute %r: group %r lacks positives or negatives; excluded from equalized odds",
                       name, label)
    if len(usable) < 2:
        raise ValueError(f"attribute {name!r}: fewer than two groups have both outcomes; "
                         "equalized odds is undefined")
    gap = max(0.5 * (abs(a.tpr - b.tpr) + abs(a.fpr - b.fpr)) for a, b in itertools.combinations(usable, 2))
    return gap, excluded


def equalized_odds_gap(predictions, labels, attribute) -> float:
    """``(|TPR_a - TPR_b| + |FPR_a - FPR_b|) / 2``, maximised over usable group pairs."""
    attribute = _as_attribute(attribute, len(np.asarray(predictions)))
    return _eo_from_rates(group_rates(predictions, labels, attribute), attribute.name)[0]


def audit(predictions, labels, attributes: Sequence[SensitiveAttribute], tau: float = DEFAULT_TAU,
          ) -> list[FairnessReport]:
    """One report per attribute; flagged when either gap exceeds ``tau``."""
    reports = []
    for attribute in attributes:
        rates = group_rates(predictions, labels, attribute)
        if len(rates) < 2:
            raise ValueError(f"attribute {attribute.name!r} needs at least two nonempty groups")
        dp = max_pairwise_gap([r.positive_rate for r in rates])
        eo, excluded = _eo_from_rates(rates, attribute.name)
        flagged = dp > tau or eo > tau
        reports.append(FairnessReport(attribute.name, rates, dp, eo, tau, flagged, excluded))
        logger.info("fairness %s: dp=%.4f eo=%.4f tau=%.3f flagged=%s", attribute.name, dp, eo, tau, flagged)
    return reports
