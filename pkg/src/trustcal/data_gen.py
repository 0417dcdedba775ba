"""Deterministic generator for an Adult-Income-style CSV corpus.

Produces the five task features with realistic marginals and a ground-truth
label drawn from a Bernoulli whose log-odds are linear in the standardized
features, so a logistic model fitted downstream is well specified and its
confidence scores are intrinsically calibrated. Income is written as the
raw annual amount so the loader's 50K binarization path gets exercised.
"""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .dataset import MARITAL_STATUSES, OCCUPATIONS

DEFAULT_ROWS = 48842

_OCCUPATION_WEIGHTS = {
    "Adm-clerical": 0.12, "Craft-repair": 0.13, "Exec-managerial": 0.13,
    "Farming-fishing": 0.03, "Handlers-cleaners": 0.04,
    "Machine-op-inspct": 0.06, "Other-service": 0.10, "Priv-house-serv": 0.01,
    "Prof-specialty": 0.13, "Protective-serv": 0.02, "Sales": 0.12,
    "Tech-support": 0.03, "Transport-moving": 0.08,
}
_MARITAL_WEIGHTS = {
    "Divorced": 0.14, "Married-AF-spouse": 0.01, "Married-civ-spouse": 0.45,
    "Married-spouse-absent": 0.02, "Never-married": 0.31, "Separated": 0.03,
    "Widowed": 0.04,
}
_OCCUPATION_LOGIT = {
    "Adm-clerical": -0.25, "Craft-repair": -0.15, "Exec-managerial": 0.95,
    "Farming-fishing": -0.75, "Handlers-cleaners": -0.85,
    "Machine-op-inspct": -0.45, "Other-service": -0.95, "Priv-house-serv": -1.2,
    "Prof-specialty": 0.85, "Protective-serv": 0.25, "Sales": 0.15,
    "Tech-support": 0.35, "Transport-moving": -0.35,
}
_MARITAL_LOGIT = {
    "Divorced": -0.55, "Married-AF-spouse": 0.9, "Married-civ-spouse": 1.05,
    "Married-spouse-absent": -0.6, "Never-married": -1.05, "Separated": -0.7,
    "Widowed": -0.65,
}

# standardized-feature coefficients and intercept; tuned for roughly a quarter
# of labels positive and a wide calibrated-confidence spread
_AGE_COEF = 0.35
_EDU_COEF = 0.6
_HOURS_COEF = 0.45
_INTERCEPT = -1.35

_SENIOR_TRADES = ("Craft-repair", "Transport-moving", "Protective-serv")
_PROFESSIONS = ("Exec-managerial", "Prof-specialty")


def true_logit(age, education, hours, occupation, marital) -> np.ndarray:
    """Ground-truth log-odds of >50K. Deliberately not linear in the encoded
    features: income pockets (professional+educated, married part-timers,
    senior overtime trades, an age peak) give the data the kind of regional
    structure a linear model smooths over."""
    age = np.asarray(age, dtype=float)
    education = np.asarray(education, dtype=float)
    hours = np.asarray(hours, dtype=float)
    occupation = np.asarray(occupation)
    marital = np.asarray(marital)

    logit = (
        _INTERCEPT
        + _AGE_COEF * (age - 38.5) / 13.5
        + _EDU_COEF * (education - 10.3) / 2.6
        + _HOURS_COEF * (hours - 40.5) / 12.0
        + np.array([_OCCUPATION_LOGIT[o] for o in occupation.tolist()])
        + np.array([_MARITAL_LOGIT[m] for m in marital.tolist()])
    )
    # concave age profile peaking near 50
    logit += 0.9 - 0.9 * ((age - 50.0) / 25.0) ** 2
    # educated professionals
    logit += 2.2 * (np.isin(occupation, _PROFESSIONS) & (education >= 12))
    # married part-timers rarely clear 50K
    logit -= 2.2 * ((marital == "Married-civ-spouse") & (hours <= 30))
    # senior tradespeople on heavy overtime
    logit += 2.0 * (np.isin(occupation, _SENIOR_TRADES) & (age >= 40) & (hours >= 42))
    # young never-married with little schooling
    logit -= 1.2 * ((marital == "Never-married") & (education <= 9))
    return 1.5 * logit


def _weighted_choice(rng: np.random.Generator, table: dict[str, float], size: int) -> np.ndarray:
    names = list(table)
    probs = np.array([table[n] for n in names], dtype=float)
    probs /= probs.sum()
    return rng.choice(names, size=size, p=probs)


def generate_rows(n: int = DEFAULT_ROWS, seed: int = 20230501) -> list[dict]:
    rng = np.random.default_rng(seed)
    age = np.clip(np.round(rng.normal(38.5, 13.5, size=n)), 17, 90)
    education = np.clip(np.round(rng.normal(10.3, 2.6, size=n)), 1, 16)
    hours = np.clip(np.round(rng.normal(40.5, 12.0, size=n)), 1, 99)
    occupation = _weighted_choice(rng, _OCCUPATION_WEIGHTS, n)
    marital = _weighted_choice(rng, _MARITAL_WEIGHTS, n)

    logit = true_logit(age, education, hours, occupation, marital)
    positive = rng.random(n) < 1.0 / (1.0 + np.exp(-logit))
    low = rng.integers(18000, 49500, size=n)
    high = rng.integers(50500, 220000, size=n)
    income = np.where(positive, high, low)

    return [
        {
            "age": int(age[i]),
            "education-years": int(education[i]),
            "occupation": str(occupation[i]),
            "marital-status": str(marital[i]),
            "hours-per-week": int(hours[i]),
            "income": int(income[i]),
        }
        for i in range(n)
    ]


def write_corpus(path: str | Path, n: int = DEFAULT_ROWS, seed: int = 20230501) -> Path:
    """Write the corpus CSV; returns the path."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = generate_rows(n=n, seed=seed)
    header = ["age", "education-years", "occupation", "marital-status",
              "hours-per-week", "income"]
    with path.open("w", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=header)
        writer.writeheader()
        writer.writerows(rows)
    return path


_CACHE: dict[tuple[int, int], list] = {}


def corpus_instances(n: int = DEFAULT_ROWS, seed: int = 20230501):
    """In-memory TaskInstance list for the generated corpus (memoized)."""
    from .dataset import LABEL_NEG, LABEL_POS, TaskInstance

    key = (n, seed)
    if key not in _CACHE:
        rows = generate_rows(n=n, seed=seed)
        _CACHE[key] = [
            TaskInstance(
                id=f"i{i:06d}",
                values={k: float(v) if isinstance(v, int) and k != "income" else v
                        for k, v in row.items() if k != "income"},
                label=LABEL_POS if row["income"] > 50000 else LABEL_NEG,
            )
            for i, row in enumerate(rows)
        ]
    return list(_CACHE[key])
