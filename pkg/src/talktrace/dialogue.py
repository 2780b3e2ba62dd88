"""Dialogue domain types, sentence segmentation, and canonical text serialization.

Every scoring context used by the attribution pipeline (dialogue prefixes,
full teacher contexts, ablated teacher contexts) is produced here, so that
ablated variants differ from the originals only by the removed content.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path


class Role(str, Enum):
    TEACHER = "teacher"
    ASSISTANT = "assistant"

    @property
    def label(self) -> str:
        """Canonical English transcript label, regardless of dialogue language."""
        return "Teacher" if self is Role.TEACHER else "Assistant"


# Continuation cue appended to every serialized context; also the entire
# context when nothing remains (remote scorers reject empty prompts).
CONTINUATION_CUE = f"{Role.ASSISTANT.label}:"


@dataclass(frozen=True, slots=True)
class Turn:
    """One teacher message plus the following assistant reply.

    ``assistant_text`` may be empty for the final, not-yet-answered turn.
    """

    index: int  # 1-based
    teacher_text: str
    assistant_text: str = ""

    def __post_init__(self) -> None:
        if self.index < 1:
            raise ValueError(f"turn index must be >= 1, got {self.index}")


@dataclass(frozen=True, slots=True)
class Dialogue:
    id: str
    turns: tuple[Turn, ...]

    def __post_init__(self) -> None:
        if not self.turns:
            raise ValueError("dialogue must contain at least one turn")
        for position, turn in enumerate(self.turns, start=1):
            if turn.index != position:
                raise ValueError(
                    f"turn indices must be contiguous 1..n; "
                    f"position {position} holds index {turn.index}"
                )

    def __len__(self) -> int:
        return len(self.turns)

    @classmethod
    def from_dict(cls, payload: dict, default_id: str = "") -> "Dialogue":
        turns = tuple(
            Turn(index=i, teacher_text=t.get("teacher", ""), assistant_text=t.get("assistant", ""))
            for i, t in enumerate(payload.get("turns", []), start=1)
        )
        return cls(id=payload.get("id", default_id), turns=turns)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "turns": [
                {"teacher": t.teacher_text, "assistant": t.assistant_text} for t in self.turns
            ],
        }


@dataclass(frozen=True, slots=True)
class Sentence:
    """A teacher sentence with exact character offsets into its turn's teacher text.

    ``start``/``end`` are half-open offsets; ``text`` equals the substring at
    the span (surrounding whitespace excluded by construction).
    """

    turn_index: int
    sentence_index: int  # 1-based within the turn
    text: str
    start: int
    end: int

    @property
    def span(self) -> tuple[int, int]:
        return (self.start, self.end)

    def key(self) -> tuple[int, int]:
        return (self.turn_index, self.sentence_index)

    def to_dict(self) -> dict:
        return {
            "turn_index": self.turn_index,
            "sentence_index": self.sentence_index,
            "text": self.text,
            "start_char": self.start,
            "end_char": self.end,
        }


@dataclass(frozen=True, slots=True)
class TargetResponse:
    """The recommended intervention strategy whose evidence is sought."""

    text: str

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValueError("target response must be non-empty")


# Terminal punctuation ending a sentence, including CJK full-width marks.
_TERMINALS = frozenset(".!?。！？")


def segment_sentences(teacher_text: str, turn_index: int = 1) -> list[Sentence]:
    """Split a teacher utterance on terminal punctuation, keeping exact spans.

    A run of terminal marks ("?!", "...") closes one sentence. Text with no
    terminal punctuation yields a single sentence covering the trimmed string.
    Empty or whitespace-only input yields an empty list.
    """
    sentences: list[Sentence] = []
    cursor = 0
    n = len(teacher_text)
    while cursor < n:
        while cursor < n and teacher_text[cursor].isspace():
            cursor += 1
        if cursor >= n:
            break
        start = cursor
        while cursor < n and teacher_text[cursor] not in _TERMINALS:
            cursor += 1
        while cursor < n and teacher_text[cursor] in _TERMINALS:
            cursor += 1
        end = cursor
        while end > start and teacher_text[end - 1].isspace():
            end -= 1
        if end > start:
            sentences.append(
                Sentence(
                    turn_index=turn_index,
                    sentence_index=len(sentences) + 1,
                    text=teacher_text[start:end],
                    start=start,
                    end=end,
                )
            )
    return sentences


def serialize_prefix(dialogue: Dialogue, upto_turn: int) -> str:
    """Serialize the dialogue prefix through ``upto_turn``, ending in the cue line.

    ``upto_turn = 0`` yields the bare continuation cue (the empty-prefix context).
    """
    if not 0 <= upto_turn <= len(dialogue):
        raise IndexError(
            f"upto_turn must be in [0, {len(dialogue)}], got {upto_turn}"
        )
    lines: list[str] = []
    for turn in dialogue.turns[:upto_turn]:
        lines.append(f"{Role.TEACHER.label}: {turn.teacher_text}")
        if turn.assistant_text:
            lines.append(f"{Role.ASSISTANT.label}: {turn.assistant_text}")
    lines.append(CONTINUATION_CUE)
    return "\n".join(lines)


def serialize_teacher_context(sentences: list[Sentence], omit: int | None = None) -> str:
    """Serialize a teacher context from sentences, optionally splicing one out.

    ``omit`` is the 1-based position within ``sentences`` (for a single turn
    this coincides with ``sentence_index``; for a pooled pseudo-turn it is the
    pooled position). With everything omitted, or an empty list, the result is
    the bare continuation cue.
    """
    if omit is not None and not 1 <= omit <= len(sentences):
        raise LookupError(
            f"omit position {omit} not present in a list of {len(sentences)} sentences"
        )
    kept = [s.text for i, s in enumerate(sentences, start=1) if i != omit]
    if not kept:
        return CONTINUATION_CUE
    return f"{Role.TEACHER.label}: {' '.join(kept)}\n{CONTINUATION_CUE}"


def load_dialogue(path: str | Path) -> Dialogue:
    """Load a dialogue from a JSON file: {"id": ..., "turns": [{"teacher", "assistant"}]}."""
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        payload = json.load(fh)
    return Dialogue.from_dict(payload, default_id=path.stem)
