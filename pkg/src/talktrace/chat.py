"""Chat backends: the external dialogue model and its scripted stand-in."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

import httpx

from .errors import ChatBackendError


class ChatBackend(Protocol):
    def reply(self, messages: list[dict[str, str]]) -> str:
        """Complete a conversation given OpenAI-style {"role", "content"} messages."""
        ...


@dataclass(frozen=True, slots=True)
class ChatBackendConfig:
    kind: str = "scripted"  # "scripted" | "remote"
    script_path: str = ""
    endpoint_url: str = ""
    model_name: str = ""
    timeout_ms: int = 30000

    def __post_init__(self) -> None:
        if self.kind == "scripted":
            if not self.script_path or self.endpoint_url or self.model_name:
                raise ValueError("scripted chat backend takes script_path and nothing else")
        elif self.kind == "remote":
            if self.script_path or not (self.endpoint_url and self.model_name):
                raise ValueError("remote chat backend takes endpoint_url and model_name only")
        else:
            raise ValueError(f"unknown chat backend kind: {self.kind!r}")

    @classmethod
    def from_dict(cls, payload: dict) -> "ChatBackendConfig":
        return cls(**payload)


class ScriptedChatBackend:
    """Fixture-driven backend: the k-th user message gets the k-th script line.

    Conversations longer than the script keep replaying its final line, so
    demo sessions never dead-end.
    """

    def __init__(self, lines: list[str]):
        if not lines:
            raise ValueError("script must contain at least one reply")
        self.lines = list(lines)

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedChatBackend":
        with Path(path).open(encoding="utf-8") as fh:
            lines = json.load(fh)
        if not isinstance(lines, list) or not all(isinstance(l, str) for l in lines):
            raise ChatBackendError(f"script {path} must be a JSON list of strings")
        return cls(lines)

    def reply(self, messages: list[dict[str, str]]) -> str:
        turn_number = sum(1 for m in messages if m.get("role") == "user")
        if turn_number == 0:
            raise ChatBackendError("scripted backend needs at least one user message")
        return self.lines[min(turn_number, len(self.lines)) - 1]


class RemoteChatBackend:
    """Client for an OpenAI-compatible /v1/chat/completions endpoint."""

    def __init__(self, config: ChatBackendConfig, transport: httpx.BaseTransport | None = None):
        if config.kind != "remote":
            raise ValueError("RemoteChatBackend requires a remote ChatBackendConfig")
        self.config = config
        self._client = httpx.Client(transport=transport, timeout=config.timeout_ms / 1000.0)

    def close(self) -> None:
        self._client.close()

    def reply(self, messages: list[dict[str, str]]) -> str:
        url = self.config.endpoint_url.rstrip("/") + "/v1/chat/completions"
        body = {"model": self.config.model_name, "messages": messages}
        try:
            response = self._client.post(url, json=body)
        except httpx.TransportError as exc:
            raise ChatBackendError(f"chat request failed: {exc}") from exc
        if response.status_code // 100 != 2:
            raise ChatBackendError(f"chat request failed: status {response.status_code}")
        try:
            return response.json()["choices"][0]["message"]["content"]
        except (json.JSONDecodeError, KeyError, IndexError, TypeError) as exc:
            raise ChatBackendError(f"malformed chat response: {exc}") from exc


def build_chat_backend(
    config: ChatBackendConfig, transport: httpx.BaseTransport | None = None
) -> ChatBackend:
    if config.kind == "scripted":
        return ScriptedChatBackend.from_file(config.script_path)
    return RemoteChatBackend(config, transport=transport)
