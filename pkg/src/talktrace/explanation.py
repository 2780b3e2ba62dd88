"""Evidence-grounded explanations for recommended strategies.

Free-form faithfulness cannot be asserted, so the one enforceable validity
check is groundedness: every narrative must quote the evidence sentence
verbatim. A chat-generated narrative that fails the check, or a backend that
fails outright, falls back to the deterministic template.
"""

from __future__ import annotations

from dataclasses import dataclass

from .chat import ChatBackend
from .dialogue import Sentence, TargetResponse
from .errors import ChatBackendError

GENERATOR_TEMPLATE = "template"
GENERATOR_CHAT = "chat"

CHAT_PROMPT_TEMPLATE = (
    'A teacher described a student. The key evidence is: "{evidence}". '
    'The recommended strategy is: "{strategy}". In 2-3 sentences, explain to '
    "the teacher why this evidence supports this strategy. Quote the evidence "
    "verbatim."
)

_TEMPLATE_NARRATIVE = 'This strategy is recommended because you mentioned: "{evidence}". {strategy}'


@dataclass(frozen=True, slots=True)
class Explanation:
    strategy_text: str
    evidence: Sentence
    narrative: str
    generator: str  # GENERATOR_TEMPLATE | GENERATOR_CHAT

    def __post_init__(self) -> None:
        if self.evidence.text not in self.narrative:
            raise ValueError("narrative must quote the evidence sentence verbatim")

    def to_dict(self) -> dict:
        return {
            "strategy_text": self.strategy_text,
            "evidence": self.evidence.to_dict(),
            "narrative": self.narrative,
            "generator": self.generator,
        }


def _template_explanation(strategy: TargetResponse, evidence: Sentence) -> Explanation:
    narrative = _TEMPLATE_NARRATIVE.format(evidence=evidence.text, strategy=strategy.text)
    return Explanation(
        strategy_text=strategy.text,
        evidence=evidence,
        narrative=narrative,
        generator=GENERATOR_TEMPLATE,
    )


def explain(
    strategy: TargetResponse, evidence: Sentence, backend: ChatBackend | None = None
) -> Explanation:
    """Produce a grounded narrative for the strategy given its evidence sentence.

    With a chat backend, the fixed prompt asks for an explanation quoting the
    evidence; the reply is accepted only if it actually does.
    """
    if backend is None:
        return _template_explanation(strategy, evidence)
    prompt = CHAT_PROMPT_TEMPLATE.format(evidence=evidence.text, strategy=strategy.text)
    try:
        narrative = backend.reply([{"role": "user", "content": prompt}])
    except ChatBackendError:
        return _template_explanation(strategy, evidence)
    if evidence.text not in narrative:
        return _template_explanation(strategy, evidence)
    return Explanation(
        strategy_text=strategy.text,
        evidence=evidence,
        narrative=narrative,
        generator=GENERATOR_CHAT,
    )
