"""Conversation backends: a live chat-completions client, session replay, and
a scripted oracle that answers with the shipped programs."""
from __future__ import annotations

import base64
import io
import logging
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, Sequence

import httpx
import numpy as np
from PIL import Image

from ..imaging import Frame
from ..rewardlang import Kind
from ..rewardlang.oracle import source

log = logging.getLogger(__name__)

TOKEN_ENV = "CODEREWARD_API_TOKEN"


class BackendError(RuntimeError):
    pass


class ReplayMismatch(BackendError):
    pass


@dataclass(frozen=True)
class ChatMessage:
    role: str
    text: str
    images: tuple[Frame, ...] = ()

    def __post_init__(self):
        if self.role not in ("system", "user", "assistant"):
            raise ValueError(f"unknown role {self.role!r}")
        if self.role == "assistant" and self.images:
            raise ValueError("assistant messages carry no images")


@dataclass(frozen=True)
class Slot:
    """What the pipeline is asking for; only the oracle looks at it."""
    name: str
    kind: Kind | None = None  # None for prose answers
    task: int | None = None
    n: int | None = None


class Backend(Protocol):
    def complete(self, messages: Sequence[ChatMessage], slot: Slot) -> str: ...


# -- live ----------------------------------------------------------------------

def png_data_url(frame: Frame) -> str:
    buf = io.BytesIO()
    Image.fromarray(np.ascontiguousarray(frame.pixels), "RGB").save(buf, format="PNG")
    return "data:image/png;base64," + base64.b64encode(buf.getvalue()).decode("ascii")


def wire_message(m: ChatMessage) -> dict:
    if not m.images:
        return {"role": m.role, "content": m.text}
    parts: list[dict] = [{"type": "text", "text": m.text}]
    parts += [{"type": "image_url", "image_url": {"url": png_data_url(f)}} for f in m.images]
    return {"role": m.role, "content": parts}


class LiveBackend:
    """Chat-completions JSON over HTTPS; safe to share between threads."""

    def __init__(self, endpoint: str, model: str, timeout: float = 120.0, token_env: str = TOKEN_ENV,
                 retries: int = 3, transport: httpx.BaseTransport | None = None, backoff: float = 1.0):
        if not endpoint:
            raise BackendError("no endpoint configured")
        self.endpoint = endpoint
        self.model = model
        self.timeout = timeout
        self.token_env = token_env
        self.retries = retries
        self.backoff = backoff
        self._transport = transport
        self._client: httpx.Client | None = None
        self._lock = threading.Lock()
        self.requests_sent = 0

    def _token(self) -> str:
        token = os.environ.get(self.token_env, "").strip()
        if not token:
            raise BackendError(f"missing API token: set {self.token_env}")
        return token

    def _http(self) -> httpx.Client:
        with self._lock:
            if self._client is None:
                self._client = httpx.Client(timeout=self.timeout, transport=self._transport)
            return self._client

    def complete(self, messages: Sequence[ChatMessage], slot: Slot) -> str:
        token = self._token()  # fail before anything goes on the wire
        body = {"model": self.model, "messages": [wire_message(m) for m in messages], "temperature": 0}
        headers = {"Authorization": f"Bearer {token}"}
        last: Exception | None = None
        for attempt in range(self.retries + 1):
            if attempt:
                time.sleep(self.backoff * attempt)
            try:
                self.requests_sent += 1
                resp = self._http().post(self.endpoint, json=body, headers=headers)
            except httpx.HTTPError as e:  # timeouts and transport failures: resend the same prompt
                last = e
                log.warning("request failed (%s), attempt %d", e, attempt + 1)
                continue
            if resp.status_code == 429 or resp.status_code >= 500:
                last = BackendError(f"server returned {resp.status_code}")
                continue
            if resp.status_code != 200:
                raise BackendError(f"server returned {resp.status_code}: {resp.text[:200]}")
            try:
                return resp.json()["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError) as e:
                raise BackendError(f"malformed response: {e}") from e
        raise BackendError(f"giving up after {self.retries + 1} attempts: {last}")

    def close(self) -> None:
        if self._client is not None:
            self._client.close()


# -- replay ----------------------------------------------------------------------

class ReplayBackend:
    """Serves assistant turns from a recorded session, checking the prompts match."""

    def __init__(self, records: Sequence[dict] | str | Path):
        if isinstance(records, (str, Path)):
            from ..datastore import load_session
            records = load_session(records)
        self.records = list(records)
        self.pos = 0

    def complete(self, messages: Sequence[ChatMessage], slot: Slot) -> str:
        last_user = None
        while self.pos < len(self.records) and self.records[self.pos]["role"] != "assistant":
            if self.records[self.pos]["role"] == "user":
                last_user = self.records[self.pos]
            self.pos += 1
        if self.pos >= len(self.records):
            raise BackendError("replay exhausted: the session has no more assistant turns")
        sent = messages[-1]
        if last_user is not None and last_user["text"] != sent.text:
            raise ReplayMismatch(f"prompt diverged from the recording at record {self.pos}")
        if last_user is not None and last_user["image_hashes"] != [f.digest for f in sent.images]:
            raise ReplayMismatch(f"images diverged from the recording at record {self.pos}")
        text = self.records[self.pos]["text"]
        self.pos += 1
        return text


# -- oracle -----------------------------------------------------------------------

@dataclass(frozen=True)
class OracleTask:
    description: str
    object_name: str
    identify: str
    check: str


@dataclass(frozen=True)
class Scenario:
    description: str
    agent_part: str
    objects: tuple[str, ...]
    final_goal: str
    agent_identify: str
    tasks: tuple[OracleTask, ...] = ()
    goal: str = ""
    reward: str | None = None
    essential: tuple[tuple[str, str], ...] = ()  # (object, identify program), robotic pipeline


_KEY = OracleTask("Pick up the yellow key.", "The yellow key", "key_identify", "key_check")
_DOOR = OracleTask("Open the yellow door with the key.", "The yellow door", "door_identify", "door_check")
_GOAL = OracleTask("Move onto the green goal square.", "The green goal square", "goal_identify", "goal_check")

SCENARIOS = {
    "doorkey": Scenario(
        "A gridworld with a red triangular agent, a yellow key, a locked yellow door in a grey wall "
        "and a green goal square.",
        "The tip of the red triangle.",
        ("Key: small yellow key", "Door: yellow door in the wall", "Goal: green square"),
        "The agent reaches the green goal square.", "agent_identify", (_KEY, _DOOR, _GOAL), "goal_check"),
    "unlock": Scenario(
        "A gridworld with a red triangular agent, a yellow key and a locked yellow door.",
        "The tip of the red triangle.",
        ("Key: small yellow key", "Door: yellow door in the wall"),
        "The agent opens the door.", "agent_identify", (_KEY, _DOOR), "door_check"),
    "empty": Scenario(
        "A gridworld with a red triangular agent and a green goal square.",
        "The tip of the red triangle.",
        ("Goal: green square",),
        "The agent reaches the green goal square.", "agent_identify", (_GOAL,), "goal_check"),
    "blockpush": Scenario(
        "A table seen from above with a blue pusher, a green block and a yellow target region.",
        "The blue pusher disc.",
        ("Pusher: blue disc", "Block: green square", "Target: yellow square region"),
        "Push the green block into the yellow target region.", "pusher_identify",
        goal="push_goal_check", reward="push_reward",
        essential=(("Block: green square", "block_identify"), ("Target: yellow square region", "target_identify"))),
}


def scenario_for(env_id: str) -> Scenario:
    family = env_id.split("-")[0].lower()
    if family not in SCENARIOS:
        raise BackendError(f"the oracle has no script for {env_id!r}")
    return SCENARIOS[family]


def fenced(code: str) -> str:
    return "```\n" + code.strip() + "\n```"


@dataclass
class OracleBackend:
    """Answers every slot from a fixed script built on the shipped programs.

    ``fail_first`` makes named program slots answer without code for their
    first few attempts, which exercises the retry protocol.
    """
    env_id: str
    fail_first: dict[str, int] = field(default_factory=dict)
    calls: dict[str, int] = field(default_factory=dict)

    def complete(self, messages: Sequence[ChatMessage], slot: Slot) -> str:
        sc = scenario_for(self.env_id)
        self.calls[slot.name] = self.calls.get(slot.name, 0) + 1
        if slot.kind is not None and self.calls[slot.name] <= self.fail_first.get(slot.name, 0):
            return "I am not sure how to write this script yet."
        name = slot.name
        if name == "describe":
            return sc.description
        if name == "part":
            return sc.agent_part
        if name in ("objects", "essential"):
            items = sc.objects if name == "objects" else tuple(o for o, _ in sc.essential)
            return "\n".join(f"{i}. {o}" for i, o in enumerate(items, start=1))
        if name == "goal_image":
            return "I see the frame where the goal has been completed."
        if name == "final_goal":
            return sc.final_goal
        if name == "tasks":
            if slot.n != len(sc.tasks):
                raise BackendError(f"the oracle script for {self.env_id} has {len(sc.tasks)} tasks, not {slot.n}")
            return "\n".join(f"{i}. {t.description}" for i, t in enumerate(sc.tasks, start=1))
        if name.endswith("_object"):
            return sc.tasks[slot.task - 1].object_name
        if name.endswith("_extra"):
            return "None."
        if name.endswith("_desc"):
            return "Compare the relevant objects in the current frame with their positions in the initial frame."
        if name == "ack":
            return "Understood."
        if name == "agent":
            return fenced(source(sc.agent_identify))
        if name.startswith("goal_o"):
            j = int(name[len("goal_o"):])
            return fenced(source(sc.essential[j - 1][1]))
        if name.startswith("task_") and "_o" in name:
            return fenced(source(sc.tasks[slot.task - 1].identify))
        if name.startswith("task_"):
            return fenced(source(sc.tasks[slot.task - 1].check))
        if name == "goal":
            return fenced(source(sc.goal))
        if name == "reward":
            if sc.reward is None:
                return "An incremental reward does not fit this task."
            return fenced(source(sc.reward))
        raise BackendError(f"oracle has no answer for slot {name!r}")


def make_backend(kind: str, env_id: str = "", session: str | Path | None = None, endpoint: str = "",
                 model: str = "", timeout: float = 120.0) -> Backend:
    if kind == "oracle":
        return OracleBackend(env_id)
    if kind == "replay":
        if session is None:
            raise BackendError("the replay backend needs a session log")
        return ReplayBackend(session)
    if kind == "live":
        return LiveBackend(endpoint, model, timeout)
    raise BackendError(f"unknown backend {kind!r}")
