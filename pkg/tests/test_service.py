import json
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from talktrace import CachingScorer, ChatBackendError, LexicalScorer, ScorerBackendError
from talktrace.chat import ChatBackendConfig, ScriptedChatBackend
from talktrace.scoring import ScorerBackendConfig
from talktrace.service import ServiceConfig, SessionStore, create_app

SCRIPT = [
    "Since when have you noticed this behavior?",
    "How does he respond to positive feedback?",
    "Try praise-based reinforcement with immediate rewards.",
]


@pytest.fixture()
def client_env(tmp_path):
    config = ServiceConfig(store_path=str(tmp_path / "sessions.jsonl"))
    scorer = CachingScorer(LexicalScorer())
    chat = ScriptedChatBackend(SCRIPT)
    app = create_app(config, scorer=scorer, chat=chat)
    return TestClient(app), scorer, config


def _drive_session(client) -> str:
    session_id = client.post("/sessions").json()["id"]
    for text in (
        "My student hits classmates during recess.",
        "It started two weeks ago after a seating change.",
        "He responds well to praise. He calms down quickly.",
    ):
        response = client.post(f"/sessions/{session_id}/messages", json={"text": text})
        assert response.status_code == 200
    return session_id


class TestSessions:
    def test_create_then_get_empty_session(self, client_env):
        client, _, _ = client_env
        created = client.post("/sessions")
        assert created.status_code == 201
        session_id = created.json()["id"]
        fetched = client.get(f"/sessions/{session_id}").json()
        assert fetched["dialogue"]["turns"] == []
        assert fetched["last_attribution"] is None
        assert fetched["created_at"] == fetched["updated_at"]

    def test_unknown_session_is_404(self, client_env):
        client, _, _ = client_env
        assert client.get("/sessions/nope").status_code == 404
        assert client.post("/sessions/nope/messages", json={"text": "hi"}).status_code == 404
        assert client.post("/sessions/nope/attribute", json={}).status_code == 404
        assert client.post("/sessions/nope/explain").status_code == 404

    def test_scripted_replies_follow_turn_number(self, client_env):
        client, _, _ = client_env
        session_id = client.post("/sessions").json()["id"]
        first = client.post(f"/sessions/{session_id}/messages", json={"text": "He hits peers."})
        assert first.json()["reply"] == SCRIPT[0]
        second = client.post(f"/sessions/{session_id}/messages", json={"text": "Daily."})
        assert second.json()["reply"] == SCRIPT[1]
        # conversations longer than the script replay its last line
        for _ in range(3):
            last = client.post(f"/sessions/{session_id}/messages", json={"text": "More."})
        assert last.json()["reply"] == SCRIPT[-1]

    def test_empty_message_rejected(self, client_env):
        client, _, _ = client_env
        session_id = client.post("/sessions").json()["id"]
        assert (
            client.post(f"/sessions/{session_id}/messages", json={"text": "   "}).status_code
            == 422
        )


class TestAttributeEndpoint:
    def test_attribution_with_default_target(self, client_env):
        client, _, _ = client_env
        session_id = _drive_session(client)
        response = client.post(f"/sessions/{session_id}/attribute", json={})
        assert response.status_code == 200
        payload = response.json()
        assert payload["target"] == SCRIPT[-1]
        assert payload["method"] == "hierarchical"
        evidence = payload["evidence"]
        session = client.get(f"/sessions/{session_id}").json()
        teacher_text = session["dialogue"]["turns"][evidence["turn_index"] - 1]["teacher"]
        assert (
            teacher_text[evidence["start_char"] : evidence["end_char"]] == evidence["text"]
        )

    def test_attribution_finds_planted_evidence(self, client_env):
        client, _, _ = client_env
        session_id = _drive_session(client)
        payload = client.post(
            f"/sessions/{session_id}/attribute",
            json={"target": "praise-based reinforcement with rewards"},
        ).json()
        assert payload["evidence"]["text"] == "He responds well to praise."
        assert payload["evidence"]["turn_index"] == 3

    def test_similarity_method_makes_no_scorer_calls(self, client_env):
        client, scorer, _ = client_env
        session_id = _drive_session(client)
        response = client.post(
            f"/sessions/{session_id}/attribute", json={"method": "similarity"}
        )
        assert response.status_code == 200
        assert scorer.stats.calls == 0

    def test_attribute_empty_dialogue_is_409(self, client_env):
        client, _, _ = client_env
        session_id = client.post("/sessions").json()["id"]
        assert client.post(f"/sessions/{session_id}/attribute", json={}).status_code == 409

    def test_missing_target_with_no_assistant_reply_is_409(self, tmp_path):
        config = ServiceConfig(store_path=str(tmp_path / "s.jsonl"))
        app = create_app(
            config, scorer=LexicalScorer(), chat=ScriptedChatBackend([""])
        )
        client = TestClient(app)
        session_id = client.post("/sessions").json()["id"]
        client.post(f"/sessions/{session_id}/messages", json={"text": "He naps."})
        response = client.post(f"/sessions/{session_id}/attribute", json={})
        assert response.status_code == 409

    def test_unknown_method_rejected(self, client_env):
        client, _, _ = client_env
        session_id = _drive_session(client)
        response = client.post(
            f"/sessions/{session_id}/attribute", json={"method": "gradnorm"}
        )
        assert response.status_code == 422

    def test_scorer_failure_is_502(self, tmp_path):
        class _BrokenScorer:
            def logprob(self, context, continuation):
                raise ScorerBackendError("endpoint down", status=503)

        config = ServiceConfig(store_path=str(tmp_path / "s.jsonl"))
        app = create_app(config, scorer=_BrokenScorer(), chat=ScriptedChatBackend(SCRIPT))
        client = TestClient(app)
        session_id = client.post("/sessions").json()["id"]
        client.post(f"/sessions/{session_id}/messages", json={"text": "He naps."})
        assert client.post(f"/sessions/{session_id}/attribute", json={}).status_code == 502


class TestChatFailures:
    def test_backend_failure_is_502_and_turn_not_appended(self, tmp_path):
        class _DownBackend:
            def reply(self, messages):
                raise ChatBackendError("upstream 500")

        config = ServiceConfig(store_path=str(tmp_path / "s.jsonl"))
        app = create_app(config, scorer=LexicalScorer(), chat=_DownBackend())
        client = TestClient(app)
        session_id = client.post("/sessions").json()["id"]
        response = client.post(f"/sessions/{session_id}/messages", json={"text": "He naps."})
        assert response.status_code == 502
        assert client.get(f"/sessions/{session_id}").json()["dialogue"]["turns"] == []


class TestExplainEndpoint:
    def test_explain_before_attribute_is_409(self, client_env):
        client, _, _ = client_env
        session_id = _drive_session(client)
        assert client.post(f"/sessions/{session_id}/explain").status_code == 409

    def test_explain_quotes_evidence(self, client_env):
        client, _, _ = client_env
        session_id = _drive_session(client)
        attribution = client.post(
            f"/sessions/{session_id}/attribute",
            json={"target": "praise-based reinforcement"},
        ).json()
        explanation = client.post(f"/sessions/{session_id}/explain").json()
        assert attribution["evidence"]["text"] in explanation["narrative"]
        # scripted replies do not quote evidence, so the template takes over
        assert explanation["generator"] == "template"
        session = client.get(f"/sessions/{session_id}").json()
        assert session["last_explanation"] == explanation


class TestPersistence:
    def test_restart_rehydrates_byte_exactly(self, client_env, tmp_path):
        client, scorer, config = client_env
        session_id = _drive_session(client)
        client.post(f"/sessions/{session_id}/attribute", json={})
        client.post(f"/sessions/{session_id}/explain")
        before = client.get(f"/sessions/{session_id}").content

        restarted = TestClient(
            create_app(config, scorer=scorer, chat=ScriptedChatBackend(SCRIPT))
        )
        after = restarted.get(f"/sessions/{session_id}").content
        assert after == before

    def test_snapshot_compacts_replay(self, tmp_path, monkeypatch):
        import talktrace.service as service_module

        monkeypatch.setattr(service_module, "SNAPSHOT_EVERY", 3)
        config = ServiceConfig(store_path=str(tmp_path / "snap.jsonl"))
        client = TestClient(
            create_app(config, scorer=LexicalScorer(), chat=ScriptedChatBackend(SCRIPT))
        )
        session_id = _drive_session(client)
        before = client.get(f"/sessions/{session_id}").content

        lines = [
            json.loads(line)
            for line in (tmp_path / "snap.jsonl").read_text().splitlines()
        ]
        assert any(record["op"] == "snapshot" for record in lines)

        restarted = TestClient(
            create_app(config, scorer=LexicalScorer(), chat=ScriptedChatBackend(SCRIPT))
        )
        assert restarted.get(f"/sessions/{session_id}").content == before

    def test_two_sessions_are_independent(self, client_env):
        client, _, _ = client_env
        first = _drive_session(client)
        second = client.post("/sessions").json()["id"]
        client.post(f"/sessions/{second}/messages", json={"text": "She daydreams."})
        assert len(client.get(f"/sessions/{first}").json()["dialogue"]["turns"]) == 3
        assert len(client.get(f"/sessions/{second}").json()["dialogue"]["turns"]) == 1

    def test_concurrent_messages_all_land(self, client_env):
        from concurrent.futures import ThreadPoolExecutor

        client, _, _ = client_env
        ids = [client.post("/sessions").json()["id"] for _ in range(4)]

        def post(session_id):
            return client.post(
                f"/sessions/{session_id}/messages", json={"text": "He naps in class."}
            ).status_code

        with ThreadPoolExecutor(max_workers=8) as pool:
            codes = list(pool.map(post, ids * 3))
        assert codes == [200] * 12
        for session_id in ids:
            turns = client.get(f"/sessions/{session_id}").json()["dialogue"]["turns"]
            assert len(turns) == 3


class TestConfig:
    def test_config_file_round_trip(self, tmp_path):
        payload = {
            "scorer": {"kind": "lexical"},
            "chat": {"kind": "scripted", "script_path": "script.json"},
            "store_path": "store.jsonl",
            "host": "0.0.0.0",
            "port": 9100,
        }
        path = tmp_path / "config.json"
        path.write_text(json.dumps(payload))
        config = ServiceConfig.from_file(path)
        assert config.scorer == ScorerBackendConfig(kind="lexical")
        assert config.chat == ChatBackendConfig(kind="scripted", script_path="script.json")
        assert config.port == 9100

    def test_chat_config_validation(self):
        with pytest.raises(ValueError):
            ChatBackendConfig(kind="scripted")
        with pytest.raises(ValueError):
            ChatBackendConfig(kind="remote", script_path="x")
        with pytest.raises(ValueError):
            ChatBackendConfig(kind="other")

    def test_scripted_backend_from_file(self, tmp_path):
        path = tmp_path / "script.json"
        path.write_text(json.dumps(SCRIPT))
        backend = ScriptedChatBackend.from_file(path)
        assert backend.reply([{"role": "user", "content": "hi"}]) == SCRIPT[0]


class TestStaticUi:
    def test_built_frontend_is_served_under_ui(self, tmp_path):
        frontend = Path(__file__).parent.parent / "frontend"
        if not (frontend / "dist" / "app.js").exists():
            pytest.skip("frontend not built (run npm run build in frontend/)")
        config = ServiceConfig(
            store_path=str(tmp_path / "s.jsonl"), ui_dir=str(frontend)
        )
        client = TestClient(create_app(config, scorer=LexicalScorer(), chat=None))
        page = client.get("/ui/")
        assert page.status_code == 200
        assert "talktrace" in page.text
        bundle = client.get("/ui/dist/app.js")
        assert bundle.status_code == 200
