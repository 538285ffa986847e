"""Batch evaluation: per-selector episode sweeps, bootstrap confidence
intervals on the median, and report serialization."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .engine import run_lazysp

REPORT_FORMAT = "lazysp-report"
REPORT_FORMAT_VERSION = 1

BOOTSTRAP_RESAMPLES = 10000


@dataclass
class EvalReport:
    """Evaluation summary plus the raw per-episode log it was computed from."""

    selector: str
    n_episodes: int
    seed: int
    median: float
    ci_lower: float
    ci_upper: float
    mean_reward: float
    evaluations: list = field(default_factory=list)

    def to_json_obj(self):
        return {
            "format": REPORT_FORMAT,
            "version": REPORT_FORMAT_VERSION,
            "selector": self.selector,
            "n_episodes": self.n_episodes,
            "seed": self.seed,
            "median": self.median,
            "ci_lower": self.ci_lower,
            "ci_upper": self.ci_upper,
            "mean_reward": self.mean_reward,
            "evaluations": self.evaluations,
        }

    @classmethod
    def from_json_obj(cls, obj):
        if obj.get("format") != REPORT_FORMAT:
            raise ValueError("not an evaluation report")
        return cls(
            selector=obj["selector"],
            n_episodes=obj["n_episodes"],
            seed=obj["seed"],
            median=obj["median"],
            ci_lower=obj["ci_lower"],
            ci_upper=obj["ci_upper"],
            mean_reward=obj["mean_reward"],
            evaluations=list(obj["evaluations"]),
        )


def bootstrap_median_ci(values, seed, resamples=BOOTSTRAP_RESAMPLES, level=0.95):
    """Percentile-bootstrap confidence interval on the median."""
    values = np.asarray(values, dtype=float)
    rng = np.random.default_rng([seed, 0xB007])
    idx = rng.integers(0, len(values), size=(resamples, len(values)))
    medians = np.median(values[idx], axis=1)
    alpha = (1.0 - level) / 2.0
    return (
        float(np.quantile(medians, alpha)),
        float(np.quantile(medians, 1.0 - alpha)),
    )


def evaluate_selector(graph, worlds, selector, seed=0, name=None):
    """Run the selector once per world and summarize evaluation counts.

    Deterministic given the seed: episode i draws its RNG from (seed, i).
    """
    if len(worlds) == 0:
        raise ValueError("at least one evaluation episode is required")
    counts = []
    total_reward = 0
    for i, world in enumerate(worlds):
        rng = np.random.default_rng([seed, i])
        result = run_lazysp(graph, world, selector, rng=rng)
        counts.append(result.n_evaluations)
        total_reward += result.reward
    lo, hi = bootstrap_median_ci(counts, seed)
    return EvalReport(
        selector=name or getattr(selector, "name", type(selector).__name__),
        n_episodes=len(worlds),
        seed=seed,
        median=float(np.median(counts)),
        ci_lower=lo,
        ci_upper=hi,
        mean_reward=total_reward / len(worlds),
        evaluations=counts,
    )


def contaminated_worldsets(clean_worlds, contaminant_worlds, fractions):
    """For each fraction lam, a set of len(clean) worlds where the last
    floor(lam * N) entries come from the contaminant set."""
    n = len(clean_worlds)
    if len(contaminant_worlds) < n:
        raise ValueError("contaminant set must be at least as large as the clean set")
    out = []
    for lam in fractions:
        if not 0.0 <= lam <= 1.0:
            raise ValueError(f"fraction {lam} outside [0, 1]")
        k = int(lam * n)
        out.append((lam, list(clean_worlds[: n - k]) + list(contaminant_worlds[:k])))
    return out


def save_report(path, reports):
    obj = {
        "format": REPORT_FORMAT,
        "version": REPORT_FORMAT_VERSION,
        "reports": [r.to_json_obj() for r in reports],
    }
    with open(path, "w") as fh:
        json.dump(obj, fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_report(path):
    with open(path) as fh:
        obj = json.load(fh)
    if obj.get("format") != REPORT_FORMAT:
        raise ValueError(f"{path}: not a report file")
    return [EvalReport.from_json_obj(r) for r in obj["reports"]]


def format_report_table(reports, extra_col=None):
    """Aligned text table; ``extra_col`` is an optional (header, values) pair."""
    headers = ["selector", "episodes", "median", "ci_lower", "ci_upper", "mean_reward"]
    rows = [
        [
            r.selector,
            str(r.n_episodes),
            f"{r.median:.1f}",
            f"{r.ci_lower:.1f}",
            f"{r.ci_upper:.1f}",
            f"{r.mean_reward:.3f}",
        ]
        for r in reports
    ]
    if extra_col is not None:
        header, values = extra_col
        headers = [header] + headers
        rows = [[str(v)] + row for v, row in zip(values, rows)]
    widths = [max(len(h), *(len(r[i]) for r in rows)) for i, h in enumerate(headers)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(headers, widths))]
    for row in rows:
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)))
    return "\n".join(lines)
