"""Trial parsing, cosine scoring, and EER/minDCF computation.

Decision convention throughout: accept a trial iff its score >= threshold
(ties accept).  The equal error rate is the crossing of the miss-rate and
false-alarm-rate step functions over the swept thresholds, linearly
interpolated between the two bracketing operating points.  minDCF uses
p_target = 0.01 and unit miss/false-alarm costs unless overridden, and is
normalized by min(c_miss * p_target, c_fa * (1 - p_target)).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import TrialParseError


@dataclass(frozen=True)
class Trial:
    is_target: bool
    enroll_id: str
    test_id: str


@dataclass
class TrialList:
    trials: list[Trial]

    def __len__(self) -> int:
        return len(self.trials)

    def __iter__(self):
        return iter(self.trials)


@dataclass
class ScoreReport:
    eer: float
    min_dcf: float
    threshold_at_eer: float
    num_target: int
    num_nontarget: int


def cosine_score(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity of two embeddings, in [-1, 1]."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine score of a zero-norm embedding is undefined")
    return float(np.dot(a, b) / (na * nb))


def parse_trials(text: str) -> TrialList:
    """Parse '<0|1> <enroll> <test>' lines; blank lines are skipped."""
    trials = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 3:
            raise TrialParseError(
                f"line {lineno}: expected 3 fields, got {len(parts)}: {line!r}"
            )
        label, enroll, test = parts
        if label not in ("0", "1"):
            raise TrialParseError(
                f"line {lineno}: label must be 0 or 1, got {label!r}"
            )
        trials.append(Trial(label == "1", enroll, test))
    return TrialList(trials)


def format_score_line(trial: Trial, score: float) -> str:
    label = "1" if trial.is_target else "0"
    return f"{label} {trial.enroll_id} {trial.test_id} {score:.6f}"


def parse_score_dump(text: str) -> tuple[list[float], list[float]]:
    """Read score-dump lines back into (target_scores, nontarget_scores)."""
    targets, nontargets = [], []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 4 or parts[0] not in ("0", "1"):
            raise TrialParseError(f"line {lineno}: malformed score line {line!r}")
        try:
            score = float(parts[3])
        except ValueError as err:
            raise TrialParseError(f"line {lineno}: bad score {parts[3]!r}") from err
        (targets if parts[0] == "1" else nontargets).append(score)
    return targets, nontargets


def _operating_points(target_scores, nontarget_scores):
    """Miss/false-alarm rates at every distinct score plus an accept-none
    point, sorted by ascending threshold."""
    targets = np.sort(np.asarray(target_scores, dtype=np.float64))
    nontargets = np.sort(np.asarray(nontarget_scores, dtype=np.float64))
    if targets.size == 0 or nontargets.size == 0:
        raise ValueError("EER/minDCF need at least one target and one nontarget")
    thresholds = np.unique(np.concatenate([targets, nontargets]))
    thresholds = np.append(thresholds, thresholds[-1] + 1.0)
    # miss: targets strictly below the threshold; false alarm: nontargets at
    # or above it (score >= threshold accepts)
    p_miss = np.searchsorted(targets, thresholds, side="left") / targets.size
    p_fa = 1.0 - np.searchsorted(nontargets, thresholds, side="left") / nontargets.size
    return thresholds, p_miss, p_fa


def compute_eer(target_scores, nontarget_scores) -> tuple[float, float]:
    """Equal error rate and its threshold.

    Returns the raw crossing value without clamping, so label-swapped
    separable inputs report an EER of 1.
    """
    thresholds, p_miss, p_fa = _operating_points(target_scores, nontarget_scores)
    diff = p_miss - p_fa
    cross = int(np.flatnonzero(diff >= 0.0)[0])
    if diff[cross] == 0.0:
        return float(p_miss[cross]), float(thresholds[cross])
    lo, hi = cross - 1, cross
    d_miss = p_miss[hi] - p_miss[lo]
    d_fa = p_fa[hi] - p_fa[lo]
    alpha = (p_fa[lo] - p_miss[lo]) / (d_miss - d_fa)
    eer = p_miss[lo] + alpha * d_miss
    threshold = thresholds[lo] + alpha * (thresholds[hi] - thresholds[lo])
    return float(eer), float(threshold)


def compute_min_dcf(target_scores, nontarget_scores, p_target: float = 0.01,
                    c_miss: float = 1.0, c_fa: float = 1.0) -> float:
    """Minimum normalized detection cost over all thresholds."""
    _, p_miss, p_fa = _operating_points(target_scores, nontarget_scores)
    dcf = c_miss * p_miss * p_target + c_fa * p_fa * (1.0 - p_target)
    return float(dcf.min() / min(c_miss * p_target, c_fa * (1.0 - p_target)))


def evaluate_scores(target_scores, nontarget_scores,
                    p_target: float = 0.01) -> ScoreReport:
    eer, threshold = compute_eer(target_scores, nontarget_scores)
    return ScoreReport(
        eer=eer,
        min_dcf=compute_min_dcf(target_scores, nontarget_scores, p_target),
        threshold_at_eer=threshold,
        num_target=len(target_scores),
        num_nontarget=len(nontarget_scores),
    )
