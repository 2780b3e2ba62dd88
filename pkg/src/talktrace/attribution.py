"""Evidence attribution over a log-likelihood scorer.

The hierarchical method first ranks dialogue turns by the likelihood gain the
turn contributes toward the target response, then scores the selected turn's
teacher sentences by two complementary ablation signals:

* drop (necessity): how much the target's likelihood falls when the sentence
  is removed from the teacher context;
* hold (sufficiency): how the sentence alone supports the target relative to
  the full context.

Their sum ranks the sentences; the top one is the evidence. Flat baselines
pool every teacher sentence in the dialogue into one pseudo-context and score
it the same way (drop+hold) or by drop alone (leave-one-out). The similarity
baseline ranks by TF-IDF cosine against the target and needs no scorer.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from enum import Enum

from .dialogue import (
    Dialogue,
    Sentence,
    TargetResponse,
    segment_sentences,
    serialize_prefix,
    serialize_teacher_context,
)
from .errors import NoEvidenceError
from .scoring import Scorer, tokenize


class Method(str, Enum):
    HIERARCHICAL = "hierarchical"
    FLAT_DROP_HOLD = "flat_drop_hold"
    FLAT_LOO = "flat_loo"
    SIMILARITY = "similarity"

    @property
    def display(self) -> str:
        return _DISPLAY_NAMES[self]


_DISPLAY_NAMES = {
    Method.HIERARCHICAL: "Hierarchical",
    Method.FLAT_DROP_HOLD: "Drop+Hold",
    Method.FLAT_LOO: "Leave-one-out",
    Method.SIMILARITY: "Similarity",
}


@dataclass(frozen=True, slots=True)
class TurnGain:
    turn_index: int
    gain: float  # nats

    def to_dict(self) -> dict:
        return {"turn_index": self.turn_index, "gain": self.gain}


@dataclass(frozen=True, slots=True)
class SentenceScore:
    sentence: Sentence
    drop: float
    hold: float
    phi: float

    def to_dict(self) -> dict:
        payload = self.sentence.to_dict()
        payload.update({"drop": self.drop, "hold": self.hold, "phi": self.phi})
        return payload


@dataclass(frozen=True, slots=True)
class AttributionResult:
    method: Method
    selected_turn: int | None
    ranked: tuple[SentenceScore, ...]
    evidence: Sentence
    turn_gains: tuple[TurnGain, ...] | None = None

    def __post_init__(self) -> None:
        if not self.ranked:
            raise ValueError("attribution result must rank at least one sentence")
        if self.method is Method.HIERARCHICAL:
            if any(s.sentence.turn_index != self.selected_turn for s in self.ranked):
                raise ValueError("hierarchical ranking must stay within the selected turn")

    def to_dict(self) -> dict:
        return {
            "method": self.method.value,
            "selected_turn": self.selected_turn,
            "evidence": self.evidence.to_dict(),
            "ranked": [s.to_dict() for s in self.ranked],
            "turn_gains": (
                [g.to_dict() for g in self.turn_gains] if self.turn_gains is not None else None
            ),
        }


def turn_gains(dialogue: Dialogue, target: TargetResponse, scorer: Scorer) -> list[TurnGain]:
    """Per-turn likelihood gain of the target: L(prefix_i) - L(prefix_{i-1}).

    Issues exactly n+1 scorer calls (prefixes 0..n); adjacent gains share the
    intermediate prefix scores, and the gains telescope to L(C_n) - L(C_0).
    """
    prefix_scores = [
        scorer.logprob(serialize_prefix(dialogue, i), target.text)
        for i in range(len(dialogue) + 1)
    ]
    return [
        TurnGain(turn_index=i, gain=prefix_scores[i] - prefix_scores[i - 1])
        for i in range(1, len(dialogue) + 1)
    ]


def select_turn(gains: list[TurnGain]) -> int:
    """Index of the maximal gain; ties break toward the earliest turn."""
    if not gains:
        raise ValueError("cannot select a turn from empty gains")
    best = gains[0]
    for candidate in gains[1:]:
        if candidate.gain > best.gain:
            best = candidate
    return best.turn_index


def phi_scores(
    sentences: list[Sentence], target: TargetResponse, scorer: Scorer
) -> list[SentenceScore]:
    """Drop, hold, and combined phi for every sentence of one (pseudo-)turn.

    Exactly 2n+1 scorer calls: the full context once, each leave-one-out
    ablation, and each sentence alone. A single-sentence list ablates to the
    bare continuation cue rather than erroring.
    """
    if not sentences:
        raise ValueError("phi_scores requires at least one sentence")
    full = scorer.logprob(serialize_teacher_context(sentences), target.text)
    scores: list[SentenceScore] = []
    for position, sentence in enumerate(sentences, start=1):
        without = scorer.logprob(serialize_teacher_context(sentences, omit=position), target.text)
        alone = scorer.logprob(serialize_teacher_context([sentence]), target.text)
        drop = full - without
        hold = alone - full
        scores.append(SentenceScore(sentence=sentence, drop=drop, hold=hold, phi=drop + hold))
    return scores


def _rank(scores: list[SentenceScore], key) -> tuple[SentenceScore, ...]:
    """Sort descending by ``key``; ties keep list order (earliest sentence first)."""
    return tuple(sorted(scores, key=lambda s: -key(s)))


def attribute_hierarchical(
    dialogue: Dialogue, target: TargetResponse, scorer: Scorer
) -> AttributionResult:
    """Turn selection by likelihood gain, then phi-ranking within that turn.

    A selected turn whose teacher text yields no sentences falls back to the
    next-highest-gain turn that does; if none exists the dialogue carries no
    attributable evidence.
    """
    gains = turn_gains(dialogue, target, scorer)
    by_gain = sorted(gains, key=lambda g: (-g.gain, g.turn_index))
    for candidate in by_gain:
        sentences = segment_sentences(
            dialogue.turns[candidate.turn_index - 1].teacher_text, candidate.turn_index
        )
        if not sentences:
            continue
        ranked = _rank(phi_scores(sentences, target, scorer), key=lambda s: s.phi)
        return AttributionResult(
            method=Method.HIERARCHICAL,
            selected_turn=candidate.turn_index,
            ranked=ranked,
            evidence=ranked[0].sentence,
            turn_gains=tuple(gains),
        )
    raise NoEvidenceError(f"dialogue {dialogue.id!r} has no segmentable teacher sentence")


def pooled_teacher_sentences(dialogue: Dialogue) -> list[Sentence]:
    """All teacher sentences of the dialogue in (turn, sentence) order."""
    pooled: list[Sentence] = []
    for turn in dialogue.turns:
        pooled.extend(segment_sentences(turn.teacher_text, turn.index))
    return pooled


def attribute_flat(
    dialogue: Dialogue,
    target: TargetResponse,
    scorer: Scorer,
    variant: Method = Method.FLAT_DROP_HOLD,
) -> AttributionResult:
    """Score all teacher sentences pooled into one pseudo-context.

    ``FLAT_DROP_HOLD`` ranks by phi; ``FLAT_LOO`` ranks by drop alone.
    """
    if variant not in (Method.FLAT_DROP_HOLD, Method.FLAT_LOO):
        raise ValueError(f"flat attribution variant must be drop+hold or LOO, got {variant}")
    pooled = pooled_teacher_sentences(dialogue)
    if not pooled:
        raise NoEvidenceError(f"dialogue {dialogue.id!r} has no segmentable teacher sentence")
    scores = phi_scores(pooled, target, scorer)
    key = (lambda s: s.phi) if variant is Method.FLAT_DROP_HOLD else (lambda s: s.drop)
    ranked = _rank(scores, key=key)
    return AttributionResult(
        method=variant, selected_turn=None, ranked=ranked, evidence=ranked[0].sentence
    )


def _tfidf_cosines(texts: list[str], target_text: str) -> list[float]:
    """Cosine similarity of each text against the target under smoothed TF-IDF.

    The corpus is the given texts plus the target; term frequency is the raw
    count and idf = ln((1 + N) / (1 + df)) + 1. Token rules match the lexical
    scorer. A document with an empty or fully disjoint vocabulary scores 0.
    """
    docs = [tokenize(t) for t in texts] + [tokenize(target_text)]
    df = Counter()
    for doc in docs:
        df.update(set(doc))
    n_docs = len(docs)
    idf = {term: math.log((1 + n_docs) / (1 + count)) + 1.0 for term, count in df.items()}

    def weights(doc: list[str]) -> dict[str, float]:
        return {term: count * idf[term] for term, count in Counter(doc).items()}

    target_vec = weights(docs[-1])
    target_norm = math.sqrt(sum(w * w for w in target_vec.values()))
    cosines = []
    for doc in docs[:-1]:
        vec = weights(doc)
        norm = math.sqrt(sum(w * w for w in vec.values()))
        if norm == 0.0 or target_norm == 0.0:
            cosines.append(0.0)
            continue
        dot = sum(w * target_vec.get(term, 0.0) for term, w in vec.items())
        cosines.append(dot / (norm * target_norm))
    return cosines


def attribute_similarity(dialogue: Dialogue, target: TargetResponse) -> AttributionResult:
    """Rank all teacher sentences by TF-IDF cosine against the target; no scorer calls."""
    pooled = pooled_teacher_sentences(dialogue)
    if not pooled:
        raise NoEvidenceError(f"dialogue {dialogue.id!r} has no segmentable teacher sentence")
    cosines = _tfidf_cosines([s.text for s in pooled], target.text)
    scores = [
        SentenceScore(sentence=s, drop=0.0, hold=0.0, phi=sim)
        for s, sim in zip(pooled, cosines)
    ]
    ranked = _rank(scores, key=lambda s: s.phi)
    return AttributionResult(
        method=Method.SIMILARITY, selected_turn=None, ranked=ranked, evidence=ranked[0].sentence
    )


def attribute(
    dialogue: Dialogue,
    target: TargetResponse,
    scorer: Scorer | None,
    method: Method = Method.HIERARCHICAL,
) -> AttributionResult:
    """Run the requested attribution method over the dialogue."""
    if method is Method.SIMILARITY:
        return attribute_similarity(dialogue, target)
    if scorer is None:
        raise ValueError(f"method {method.value} requires a scorer")
    if method is Method.HIERARCHICAL:
        return attribute_hierarchical(dialogue, target, scorer)
    return attribute_flat(dialogue, target, scorer, variant=method)
