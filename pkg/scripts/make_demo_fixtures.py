"""Record scripted demo sessions for the web UI tests.

Drives the real service (scripted chat backend, lexical scorer) through ten
message -> attribute -> explain flows and freezes the HTTP responses into
frontend/fixtures/demo_cases.json. The UI tests replay these to check that
span highlighting reproduces the evidence text character-for-character.
"""

import json
from pathlib import Path

from fastapi.testclient import TestClient

from talktrace import CachingScorer, LexicalScorer
from talktrace.chat import ScriptedChatBackend
from talktrace.service import ServiceConfig, create_app

ROOT = Path(__file__).resolve().parent.parent

SCRIPT = [
    "Since when have you noticed this behavior?",
    "How does the student respond to support?",
    "Try praise-based reinforcement with a steady routine.",
]

DEMO_FLOWS = [
    [
        "My student hits classmates during recess.",
        "It began after a seating change two weeks ago.",
        "He responds well to praise. He calms down with routine tasks.",
    ],
    [
        "She refuses to join group work.",
        "She says the groups are too loud for her.",
        "She thrives on praise and a predictable routine. She likes reading alone.",
    ],
    [
        "He interrupts the class constantly.",
        "Mostly during unstructured time.",
        "Praise settles him quickly. A morning routine helps him focus.",
    ],
    [
        "A student skips homework most days.",
        "His parents say evenings are chaotic at home.",
        "He reacts well to praise from adults. He needs a homework routine.",
    ],
    [
        "She cries when corrected in front of others.",
        "It happens mostly in math lessons.",
        "Quiet praise works with her. A routine check-in helps her prepare.",
    ],
    [
        "He shoves peers in the hallway queue.",
        "Only when the queue is crowded.",
        "He likes earning praise stickers. A boarding routine reduced incidents.",
    ],
    [
        "My student naps during afternoon lessons.",
        "He stays up late playing games.",
        "Praise for morning effort helps. A sleep routine chart worked before.",
    ],
    [
        "She scribbles on desks and walls.",
        "Usually when finishing work early.",
        "She beams at praise for her drawings. A routine of extra art tasks helps.",
    ],
    [
        "He lies about finishing assignments.",
        "Teachers noticed mismatched answers.",
        "Honest effort earns him praise he values. A checking routine kept him honest.",
    ],
    [
        "A student mocks classmates' accents.",
        "New students are the usual targets.",
        "He responds to praise for kindness. A buddy routine changed his tone. 他喜欢表扬。",
    ],
]


def main() -> None:
    fixtures = []
    for number, flow in enumerate(DEMO_FLOWS, start=1):
        store = ROOT / "frontend" / "fixtures" / f".tmp-store-{number}.jsonl"
        store.parent.mkdir(parents=True, exist_ok=True)
        if store.exists():
            store.unlink()
        config = ServiceConfig(store_path=str(store))
        client = TestClient(
            create_app(
                config,
                scorer=CachingScorer(LexicalScorer()),
                chat=ScriptedChatBackend(SCRIPT),
            )
        )
        session_id = client.post("/sessions").json()["id"]
        for text in flow:
            response = client.post(f"/sessions/{session_id}/messages", json={"text": text})
            response.raise_for_status()
        attribution = client.post(f"/sessions/{session_id}/attribute", json={})
        attribution.raise_for_status()
        explanation = client.post(f"/sessions/{session_id}/explain")
        explanation.raise_for_status()
        session = client.get(f"/sessions/{session_id}")
        session.raise_for_status()
        fixtures.append(
            {
                "name": f"demo-{number:02d}",
                "session": session.json(),
                "attribution": attribution.json(),
                "explanation": explanation.json(),
            }
        )
        store.unlink()

    out = ROOT / "frontend" / "fixtures" / "demo_cases.json"
    out.write_text(json.dumps(fixtures, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    print(f"wrote {len(fixtures)} demo fixtures to {out}")


if __name__ == "__main__":
    main()
