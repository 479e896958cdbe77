"""Vertical scaling of grade-level p-values onto a common logit easiness scale.

A p-value (proportion correct) observed for a grade-g item is converted to
item easiness ``b`` through the one-parameter logistic relationship

    p = sigmoid(theta_g + b)   <=>   b = -theta_g + logit(p)

where ``theta_g`` is the mean ability of grade-g respondents on a published
growth scale (e.g. NWEA MAP or Texas STAAR norms), affinely normalized onto
the logit metric.  The affine normalization is explicit: raw norm scores sit
near 200 (NWEA) or 1500 (STAAR), so each scale carries a ``(center, spread)``
pair mapping raw scores to logit units.  Default affines are calibrated from
two anchor points (grade 3, p=0.6 -> b=0.30 and grade 8, p=0.6 -> b=-1.69),
which pins the normalized grade-3 and grade-8 abilities regardless of the
raw units of the underlying scale.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Mapping, Sequence, Union

import numpy as np

__all__ = [
    "Affine",
    "AbilityScale",
    "CompositeScale",
    "BUILTIN_SCALES",
    "ALTERNATE_SCALE_NAMES",
    "DEFAULT_SCALE_NAME",
    "ANCHOR_P",
    "ANCHOR_B_LOW_GRADE",
    "ANCHOR_B_HIGH_GRADE",
    "sigmoid",
    "logit",
    "normalized_theta",
    "fit_affine_from_anchors",
    "rescale_pvalue",
    "invert_easiness",
    "rescale_bank_pvalues",
    "simulate_grade_pvalue",
    "get_scale",
    "load_scale",
    "scale_to_dict",
]

# Calibration anchors: at p = 0.6 a grade-3 item has easiness 0.30 and a
# grade-8 item has easiness -1.69 on the normalized logit scale.
ANCHOR_P = 0.6
ANCHOR_B_LOW_GRADE = 0.30
ANCHOR_B_HIGH_GRADE = -1.69


def sigmoid(x):
    """Logistic sigmoid 1 / (1 + exp(-x)); accepts scalars or arrays."""
    if isinstance(x, np.ndarray):
        return 1.0 / (1.0 + np.exp(-x))
    return 1.0 / (1.0 + math.exp(-x))


def logit(p):
    """Log-odds log(p / (1 - p)) for p strictly inside (0, 1).

    Raises ValueError for p at or beyond the endpoints, where the
    transform is undefined.
    """
    if isinstance(p, np.ndarray):
        if np.any(p <= 0.0) or np.any(p >= 1.0):
            raise ValueError("logit requires all p strictly inside (0, 1)")
        return np.log(p / (1.0 - p))
    if not (0.0 < p < 1.0):
        raise ValueError(f"logit requires p strictly inside (0, 1), got {p!r}")
    return math.log(p / (1.0 - p))


@dataclass(frozen=True)
class Affine:
    """Normalization of raw scale scores: normalized = (raw - center) / spread."""

    center: float
    spread: float

    def __post_init__(self):
        if not (self.spread > 0.0):
            raise ValueError(f"affine spread must be > 0, got {self.spread}")


@dataclass(frozen=True)
class AbilityScale:
    """A grade -> mean-ability table with an affine map onto the logit metric.

    ``grade_means`` must be strictly increasing in grade: published growth
    norms rise monotonically from grade 3 to grade 8.
    """

    name: str
    grade_means: Mapping[int, float]
    affine: Affine

    def __post_init__(self):
        grades = sorted(self.grade_means)
        if not grades:
            raise ValueError("grade_means must not be empty")
        means = [self.grade_means[g] for g in grades]
        for a, b in zip(means, means[1:]):
            if not (b > a):
                raise ValueError(
                    f"scale {self.name!r}: grade means must be strictly "
                    f"increasing, got {means}"
                )
        object.__setattr__(self, "grade_means", dict(zip(grades, means)))

    @property
    def grades(self) -> list[int]:
        return sorted(self.grade_means)

    def normalized_theta(self, grade: int) -> float:
        if grade not in self.grade_means:
            raise KeyError(
                f"grade {grade} not present in scale {self.name!r} "
                f"(known grades: {self.grades})"
            )
        return (self.grade_means[grade] - self.affine.center) / self.affine.spread


@dataclass(frozen=True)
class CompositeScale:
    """A year-keyed combination of ability scales.

    Each segment is (min_year, max_year, scale); None bounds are open.
    Used for mixed regimes, e.g. one norms table for pre-2020 administrations
    and another afterwards.  Results derived from a composite scale are not
    comparable with single-scale results because the outcome metric shifts
    across years.
    """

    name: str
    segments: tuple = ()

    def select(self, year: int) -> AbilityScale:
        for lo, hi, scale in self.segments:
            if (lo is None or year >= lo) and (hi is None or year <= hi):
                return scale
        raise KeyError(f"composite scale {self.name!r} has no segment for year {year}")

    @property
    def is_composite(self) -> bool:
        return True


def normalized_theta(scale: AbilityScale, grade: int) -> float:
    """Mean grade ability in logit units: (theta_g - center) / spread."""
    return scale.normalized_theta(grade)


def fit_affine_from_anchors(
    theta_a: float, b_a: float, theta_b: float, b_b: float, p: float
) -> Affine:
    """Solve for the unique (center, spread) reproducing two easiness anchors.

    Given two raw grade abilities theta_a, theta_b and the easiness values
    b_a, b_b that an item with the shared p-value ``p`` must receive at those
    grades, the rescaling identities

        logit(p) - (theta_a - c) / s = b_a
        logit(p) - (theta_b - c) / s = b_b

    have the closed-form solution s = (theta_b - theta_a) / (b_a - b_b) and
    c = theta_a - s * (logit(p) - b_a).
    """
    if theta_a == theta_b:
        raise ValueError("degenerate anchors: equal raw abilities")
    if b_a == b_b:
        raise ValueError("degenerate anchors: equal easiness values")
    lp = logit(p)
    spread = (theta_b - theta_a) / (b_a - b_b)
    if spread <= 0.0:
        raise ValueError(
            "anchors imply non-positive spread; easiness must decrease as "
            "raw ability increases"
        )
    center = theta_a - spread * (lp - b_a)
    return Affine(center=center, spread=spread)


def rescale_pvalue(p: float, grade: int, scale: AbilityScale) -> float:
    """Item easiness on the common logit scale: -normalized_theta + logit(p)."""
    return -scale.normalized_theta(grade) + logit(p)


def invert_easiness(b: float, grade: int, scale: AbilityScale) -> float:
    """Inverse of rescale_pvalue: the p-value implied by easiness ``b``."""
    return sigmoid(scale.normalized_theta(grade) + b)


def rescale_bank_pvalues(
    pvalues: Sequence[float],
    grades: Sequence[int],
    years: Sequence[int],
    scale: Union[AbilityScale, CompositeScale],
) -> np.ndarray:
    """Vectorized rescaling; composite scales dispatch per item year."""
    pvalues = list(pvalues)
    grades = list(grades)
    years = list(years)
    if not (len(pvalues) == len(grades) == len(years)):
        raise ValueError("pvalues, grades, and years must have equal lengths")
    out = np.empty(len(pvalues), dtype=float)
    for i, (p, g, yr) in enumerate(zip(pvalues, grades, years)):
        sub = scale.select(yr) if isinstance(scale, CompositeScale) else scale
        out[i] = rescale_pvalue(p, g, sub)
    return out


def simulate_grade_pvalue(
    b: float,
    grade: int,
    scale: AbilityScale,
    n_respondents: int = 10_000,
    ability_sd: float = 1.0,
    seed: int = 0,
) -> float:
    """Simulate the aggregate p-value of an item with known easiness.

    Respondent abilities are drawn Normal(normalized_theta(grade), ability_sd)
    and responses Bernoulli(sigmoid(theta_i + b)).  With ability_sd = 0 every
    respondent sits exactly at the grade mean, so rescaling the simulated
    p-value recovers ``b`` up to binomial noise.  With dispersion > 0 the
    aggregate p-value is attenuated toward 0.5 (mean of a sigmoid is not the
    sigmoid of the mean), so naive rescaling is biased away from ``b``.
    """
    rng = np.random.default_rng(seed)
    theta_bar = scale.normalized_theta(grade)
    if ability_sd > 0.0:
        thetas = rng.normal(theta_bar, ability_sd, size=n_respondents)
    else:
        thetas = np.full(n_respondents, theta_bar)
    probs = 1.0 / (1.0 + np.exp(-(thetas + b)))
    responses = rng.random(n_respondents) < probs
    return float(responses.mean())


def _anchored(name: str, grade_means: dict[int, float]) -> AbilityScale:
    """Build a scale whose affine is calibrated from the standard anchors."""
    grades = sorted(grade_means)
    affine = fit_affine_from_anchors(
        grade_means[grades[0]],
        ANCHOR_B_LOW_GRADE,
        grade_means[grades[-1]],
        ANCHOR_B_HIGH_GRADE,
        ANCHOR_P,
    )
    return AbilityScale(name=name, grade_means=grade_means, affine=affine)


# Published grade-level reading achievement norms, grades 3-8.  The NWEA MAP
# values are RIT scores; the Texas STAAR values are scale-score performance
# standards.  nwea2020-spring is the default outcome scale; the others back
# the robustness sweep.  nwea2020-spring-alt carries the variant grade-5
# value (210.98 vs 210.19) that appears in the alternate-scales listing of
# the same norms study; both are kept, keyed to their sources.
_GRADE_MEANS: dict[str, dict[int, float]] = {
    "nwea2020-spring": {3: 200.74, 4: 204.83, 5: 210.19, 6: 215.36, 7: 216.81, 8: 220.93},
    "nwea2020-spring-alt": {3: 200.74, 4: 204.83, 5: 210.98, 6: 215.36, 7: 216.81, 8: 220.93},
    "nwea2020-fall": {3: 186.62, 4: 196.67, 5: 204.48, 6: 210.17, 7: 214.20, 8: 218.90},
    "nwea2020-winter": {3: 195.91, 4: 202.50, 5: 210.19, 6: 213.81, 7: 217.09, 8: 220.52},
    "nwea2015-literary": {3: 192.4, 4: 201.2, 5: 207.9, 6: 212.3, 7: 216.3, 8: 220.0},
    "nwea2015-informational": {3: 191.6, 4: 200.7, 5: 207.4, 6: 212.1, 7: 216.1, 8: 220.0},
    "texas2023-approaches": {3: 1345.0, 4: 1414.0, 5: 1471.0, 6: 1535.0, 7: 1564.0, 8: 1592.0},
    "texas2023-meets": {3: 1467.0, 4: 1552.0, 5: 1592.0, 6: 1634.0, 7: 1669.0, 8: 1698.0},
    "texas2023-masters": {3: 1596.0, 4: 1663.0, 5: 1700.0, 6: 1749.0, 7: 1771.0, 8: 1803.0},
    "texas2017-readiness": {3: 1386.0, 4: 1473.0, 5: 1508.0, 6: 1554.0, 7: 1603.0, 8: 1625.0},
}

BUILTIN_SCALES: dict[str, AbilityScale] = {
    name: _anchored(name, means) for name, means in _GRADE_MEANS.items()
}

DEFAULT_SCALE_NAME = "nwea2020-spring"

# The eight alternate scales exercised by the robustness sweep (everything
# except the default spring scale and its grade-5 variant).
ALTERNATE_SCALE_NAMES: tuple[str, ...] = (
    "nwea2015-literary",
    "nwea2015-informational",
    "nwea2020-fall",
    "nwea2020-winter",
    "texas2023-approaches",
    "texas2023-meets",
    "texas2023-masters",
    "texas2017-readiness",
)

# Mixed regime: 2015 informational norms through 2019, 2020 spring norms
# afterwards.  Flagged non-comparable wherever it is reported.
MIXED_SCALE_NAME = "mixed-2015inf-2020spring"

_COMPOSITES: dict[str, CompositeScale] = {
    MIXED_SCALE_NAME: CompositeScale(
        name=MIXED_SCALE_NAME,
        segments=(
            (None, 2019, BUILTIN_SCALES["nwea2015-informational"]),
            (2020, None, BUILTIN_SCALES["nwea2020-spring"]),
        ),
    )
}


def get_scale(name: str) -> Union[AbilityScale, CompositeScale]:
    """Resolve a built-in scale (or composite) by name."""
    if name in BUILTIN_SCALES:
        return BUILTIN_SCALES[name]
    if name in _COMPOSITES:
        return _COMPOSITES[name]
    known = sorted(BUILTIN_SCALES) + sorted(_COMPOSITES)
    raise KeyError(f"unknown scale {name!r}; built-ins: {known}")


def load_scale(source) -> AbilityScale:
    """Load a scale definition from a JSON file path, file object, or dict.

    Schema: {"name": str, "grade_means": {"3": float, ...}, and either
    "affine": {"center": float, "spread": float} or
    "anchors": {"grade_a": int, "b_a": float, "grade_b": int, "b_b": float,
    "p": float}}.  With neither, the standard anchor calibration is applied.
    """
    if isinstance(source, dict):
        spec = source
    elif hasattr(source, "read"):
        spec = json.load(source)
    else:
        with open(source, "r", encoding="utf-8") as fh:
            spec = json.load(fh)
    try:
        name = spec["name"]
        grade_means = {int(g): float(v) for g, v in spec["grade_means"].items()}
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed scale definition: {exc}") from exc
    if "affine" in spec:
        aff = spec["affine"]
        affine = Affine(center=float(aff["center"]), spread=float(aff["spread"]))
        return AbilityScale(name=name, grade_means=grade_means, affine=affine)
    if "anchors" in spec:
        anc = spec["anchors"]
        affine = fit_affine_from_anchors(
            grade_means[int(anc["grade_a"])],
            float(anc["b_a"]),
            grade_means[int(anc["grade_b"])],
            float(anc["b_b"]),
            float(anc.get("p", ANCHOR_P)),
        )
        return AbilityScale(name=name, grade_means=grade_means, affine=affine)
    return _anchored(name, grade_means)


def scale_to_dict(scale: AbilityScale) -> dict:
    """JSON-serializable form of a scale, inverse of load_scale."""
    return {
        "name": scale.name,
        "grade_means": {str(g): scale.grade_means[g] for g in scale.grades},
        "affine": {"center": scale.affine.center, "spread": scale.affine.spread},
    }
