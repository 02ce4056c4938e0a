"""Simulated extractor: soft predictions for a known ground-truth character.

The generative model behind the per-element correctness probability r:
for each detection, draw a standard-Gaussian score per radical category,
pick the winner (the true category with probability r, otherwise one
uniformly-chosen confuser), lift the winner's score to max(scores) + boost,
and softmax at the configured temperature.  The winner always holds the
argmax, so argmax-correctness is Bernoulli(r) exactly; `boost` only shapes
how peaked the soft distribution is (boost >= 50 is effectively one-hot).
The structure distribution is built the same way with probability s.

Each sample draws from its own counter-based stream keyed by (seed, sample
index), with a fixed draw order inside the sample (per-element blocks,
then the structure block, then box jitter).  A sample is therefore a pure
function of (seed, sample index), and parallel runs over samples are
bit-identical to serial ones.

Sequence hard-matching baselines live here too, with their closed-form
expected accuracy: the product of per-element correctness probabilities.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .ckg import CharacterEntry, CharacterKnowledgeGraph, multiset_key
from .errors import InvalidParamsError, UnknownIdError
from .reasoner import RankedPredictions, ReasonerParams, reason
from .softlabel import (
    BoundingBox,
    PredictionSet,
    RadicalDetection,
    StructurePrediction,
)
from .streams import Stream
from .synth import layout_with_fallback

STRATEGIES = ("hard-top1", "hard-top1-sp", "reason-rp-only", "reason-full")

# keep at most this many categories per detection; plenty for any sane beam
TOP_CATEGORIES = 16

DEFAULT_SIM_JITTER = 0.05


@dataclass(frozen=True)
class NoiseModel:
    """Extractor error model.

    r: per-element correctness probability, scalar or one value per
       detection position; s: structure correctness probability.
    Confusers are uniform over the other categories (fixed policy).
    """

    r: float | tuple[float, ...] = 0.9
    s: float = 0.9
    boost: float = 3.0
    temperature: float = 1.0

    def __post_init__(self):
        rs = self.r if isinstance(self.r, tuple) else (self.r,)
        for v in rs + (self.s,):
            if not 0.0 <= v <= 1.0:
                raise InvalidParamsError(f"correctness probabilities must be in [0, 1]: {v}")
        if self.boost <= 0 or self.temperature <= 0:
            raise InvalidParamsError("boost and temperature must be positive")

    def r_for(self, position: int, num: int) -> float:
        if isinstance(self.r, tuple):
            if len(self.r) != num:
                raise InvalidParamsError(
                    f"per-position r has {len(self.r)} entries for {num} detections"
                )
            return self.r[position]
        return self.r


@dataclass(frozen=True)
class SimulatedSample:
    truth: str
    preds: PredictionSet
    flips: tuple[bool, ...]  # per detection: did the true category win?


def _soft_distribution(
    ids: Sequence[str],
    truth_index: int,
    correct_prob: float,
    noise: NoiseModel,
    rng: np.random.Generator,
    keep: int,
) -> tuple[tuple[tuple[str, float], ...], bool]:
    """One noisy distribution; returns (sorted category list, truth_won)."""
    n = len(ids)
    # fixed three-draw layout: correctness, confuser, scores
    correct = bool(rng.random() < correct_prob)
    confuser = int(rng.integers(n - 1)) if n > 1 else 0
    scores = rng.standard_normal(n)
    if correct or n == 1:
        winner = truth_index
    else:
        winner = confuser if confuser < truth_index else confuser + 1
    scores[winner] = scores.max() + noise.boost
    z = scores / noise.temperature
    z -= z.max()
    p = np.exp(z)
    p /= p.sum()
    if keep < n:
        top = np.argpartition(-p, keep)[:keep]
        # the winner survives any truncation: it holds the global argmax
        order = top[np.lexsort((top, -p[top]))]
    else:
        idx = np.arange(n)
        order = idx[np.lexsort((idx, -p))]
    pairs = tuple((ids[i], float(p[i])) for i in order)
    return pairs, winner == truth_index


def simulate_predictions(
    entry: CharacterEntry,
    ckg: CharacterKnowledgeGraph,
    noise: NoiseModel,
    stream: Stream,
) -> SimulatedSample:
    """One simulated extractor output for a ground-truth character."""
    if entry.id not in ckg.characters:
        raise UnknownIdError(f"character {entry.id!r} is not in the graph")
    radical_ids = sorted(ckg.radicals)
    structure_ids = sorted(ckg.structures)
    radical_pos = {rid: i for i, rid in enumerate(radical_ids)}
    structure_pos = {sid: i for i, sid in enumerate(structure_ids)}
    num = len(entry.radicals)

    rng = stream.generator()
    keep = min(TOP_CATEGORIES, len(radical_ids))
    dists = []
    flips = []
    for e, rid in enumerate(entry.radicals):
        pairs, won = _soft_distribution(
            radical_ids, radical_pos[rid], noise.r_for(e, num), noise, rng, keep
        )
        dists.append(pairs)
        flips.append(won)
    struct_pairs, _ = _soft_distribution(
        structure_ids,
        structure_pos[entry.structure],
        noise.s,
        noise,
        rng,
        len(structure_ids),
    )
    rects = layout_with_fallback(entry.structure, num, jitter=DEFAULT_SIM_JITTER, rng=rng)

    detections = tuple(
        RadicalDetection(
            bbox=BoundingBox(*rects[e]),
            objectness=1.0,
            categories=dists[e],
        )
        for e in range(num)
    )
    return SimulatedSample(
        truth=entry.id,
        preds=PredictionSet(
            detections=detections, structure=StructurePrediction(entries=struct_pairs)
        ),
        flips=tuple(flips),
    )


def hard_match_candidates(
    sample: SimulatedSample, ckg: CharacterKnowledgeGraph, use_structure: bool
) -> list[str]:
    """All exact matches for the argmax sequence, id-sorted."""
    argmax = [det.categories[0][0] for det in sample.preds.detections]
    key = multiset_key(argmax)
    matches = ckg.index_by_radical_multiset.get(key, frozenset())
    if use_structure:
        top_structure = sample.preds.structure.entries[0][0]
        matches = {cid for cid in matches if ckg.characters[cid].structure == top_structure}
    return sorted(matches)


def hard_match_recognize(
    sample: SimulatedSample, ckg: CharacterKnowledgeGraph, use_structure: bool = False
) -> str | None:
    """Argmax sequence lookup; ambiguous matches resolve to the lowest id."""
    matches = hard_match_candidates(sample, ckg, use_structure)
    return matches[0] if matches else None


def expected_hard_match_accuracy(element_probs: Sequence[float]) -> float:
    """Closed form: product of per-element correctness probabilities."""
    for p in element_probs:
        if not 0.0 <= p <= 1.0:
            raise InvalidParamsError(f"probability out of range: {p}")
    return math.prod(element_probs)


def recognize(
    sample: SimulatedSample,
    ckg: CharacterKnowledgeGraph,
    strategy: str,
    params: ReasonerParams,
) -> list[str]:
    """Ranked character ids for a sample under one strategy."""
    if strategy == "hard-top1":
        hit = hard_match_recognize(sample, ckg, use_structure=False)
        return [hit] if hit else []
    if strategy == "hard-top1-sp":
        hit = hard_match_recognize(sample, ckg, use_structure=True)
        return [hit] if hit else []
    if strategy == "reason-rp-only":
        # structure-blind: the theta=1 boundary of the full algorithm
        rp = reason(ckg, sample.preds, _with_theta_one(params))
        return [c.id for c in rp.candidates]
    if strategy == "reason-full":
        rp = reason(ckg, sample.preds, params)
        return [c.id for c in rp.candidates]
    raise InvalidParamsError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")


def _with_theta_one(params: ReasonerParams) -> ReasonerParams:
    from dataclasses import replace

    return replace(params, theta=1.0, max_structures=None)


@dataclass(frozen=True)
class MonteCarloResult:
    strategy: str
    n_samples: int
    accuracy: float
    stderr: float
    ci95_low: float
    ci95_high: float
    n_ambiguous: int


def run_monte_carlo(
    ckg: CharacterKnowledgeGraph,
    noise: NoiseModel,
    n_samples: int,
    strategy: str,
    seed: int,
    params: ReasonerParams = ReasonerParams(),
    categories: Sequence[str] | None = None,
) -> MonteCarloResult:
    """Accuracy estimate with a 95% confidence interval.

    Samples characters uniformly from `categories` (default: the whole
    graph) and scores Top-1 correctness under the named strategy.
    """
    if n_samples < 1:
        raise InvalidParamsError("n_samples must be >= 1")
    if strategy not in STRATEGIES:
        raise InvalidParamsError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")
    cats = sorted(categories) if categories is not None else sorted(ckg.characters)
    if not cats:
        raise InvalidParamsError("no categories to sample from")
    for cid in cats:
        if cid not in ckg.characters:
            raise UnknownIdError(f"category {cid!r} is not in the graph")

    root = Stream(seed)
    hits = 0
    ambiguous = 0
    for i in range(n_samples):
        sample_stream = root.child(i)
        # stream layout: path (i, 0) picks the category, (i, 1) simulates
        pick = sample_stream.child(0).generator()
        entry = ckg.characters[cats[int(pick.integers(len(cats)))]]
        sample = simulate_predictions(entry, ckg, noise, sample_stream.child(1))
        ranked = recognize(sample, ckg, strategy, params)
        if ranked and ranked[0] == sample.truth:
            hits += 1
        if strategy.startswith("hard"):
            if len(hard_match_candidates(sample, ckg, strategy == "hard-top1-sp")) > 1:
                ambiguous += 1

    acc = hits / n_samples
    se = math.sqrt(acc * (1.0 - acc) / n_samples)
    return MonteCarloResult(
        strategy=strategy,
        n_samples=n_samples,
        accuracy=acc,
        stderr=se,
        ci95_low=acc - 1.96 * se,
        ci95_high=acc + 1.96 * se,
        n_ambiguous=ambiguous,
    )
