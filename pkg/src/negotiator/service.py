"""Live human-vs-agent negotiation sessions and the HTTP service around them.

The session core is framework-free so the terminal chat loop and the HTTP
endpoints drive the same state machine.  The human always plays side A and
speaks first; the agent's valuation is hidden until the session is Done.
"""

from __future__ import annotations

import time
import uuid
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .agents import ModelSession
from .corpus import CHOOSE, READ, WRITE, Vocabulary
from .env import (
    DealOutcome,
    GeneratorConfig,
    Scenario,
    Selection,
    Allocation,
    resolve,
    sample_scenario,
)
from .model import NegotiationModel


class SessionState(str, Enum):
    HUMAN_TURN = "human_turn"
    AWAITING_SELECTIONS = "awaiting_selections"
    DONE = "done"


class ServiceError(Exception):
    def __init__(self, message: str, status: int = 400, detail: Optional[dict] = None):
        super().__init__(message)
        self.status = status
        self.detail = detail or {}


MAX_MESSAGE_TOKENS = 100
IDLE_TIMEOUT_SECONDS = 30 * 60


def normalize_text(text: str) -> list[str]:
    return text.lower().split()


@dataclass
class LiveSession:
    id: str
    scenario: Scenario
    agent: ModelSession  # plays side B
    created: float
    last_active: float
    state: SessionState = SessionState.HUMAN_TURN
    turn_count: int = 0
    messages: list[tuple[str, str]] = field(default_factory=list)  # (speaker, text)
    outcome: Optional[DealOutcome] = None
    human_selection: Optional[Selection] = None
    agent_selection: Optional[Selection] = None


class NegotiationService:
    """All live sessions over one read-only model."""

    def __init__(
        self,
        model: NegotiationModel,
        vocab: Vocabulary,
        base_seed: int = 0,
        max_turns: int = 20,
        max_sessions: int = 64,
        scenario_cfg: GeneratorConfig = GeneratorConfig(),
        clock=time.monotonic,
    ):
        self.model = model
        self.vocab = vocab
        self.base_seed = base_seed
        self.max_turns = max_turns
        self.max_sessions = max_sessions
        self.scenario_cfg = scenario_cfg
        self.clock = clock
        self.sessions: dict[str, LiveSession] = {}
        self._counter = 0

    # -- lifecycle -----------------------------------------------------------

    def create_session(self, seed: Optional[int] = None) -> dict:
        self._expire_idle()
        if len(self.sessions) >= self.max_sessions:
            raise ServiceError("session capacity reached", status=400)
        if seed is None:
            seed = self.base_seed + self._counter
        self._counter += 1
        rng = np.random.default_rng(seed)
        scenario = sample_scenario(rng, self.scenario_cfg)
        goal_b = []
        for c, v in zip(scenario.pool.counts, scenario.valuation_b.values):
            goal_b.extend((c, v))
        agent = ModelSession(self.model, self.vocab, tuple(goal_b), rng)
        now = self.clock()
        session = LiveSession(
            id=uuid.uuid4().hex, scenario=scenario, agent=agent,
            created=now, last_active=now,
        )
        self.sessions[session.id] = session
        return self.session_view(session.id)

    def _get(self, session_id: str) -> LiveSession:
        self._expire_idle()
        session = self.sessions.get(session_id)
        if session is None:
            raise ServiceError(f"unknown session {session_id}", status=404)
        return session

    def _expire_idle(self) -> None:
        now = self.clock()
        for session in self.sessions.values():
            if (session.state is not SessionState.DONE
                    and now - session.last_active > IDLE_TIMEOUT_SECONDS):
                self._force_no_agreement(session)

    def _force_no_agreement(self, session: LiveSession) -> None:
        session.human_selection = Selection.no_agreement()
        session.agent_selection = Selection.no_agreement()
        session.outcome = resolve(
            session.scenario.pool, session.human_selection, session.agent_selection,
            session.scenario.valuation_a, session.scenario.valuation_b,
        )
        session.state = SessionState.DONE

    # -- views ---------------------------------------------------------------

    def session_view(self, session_id: str) -> dict:
        session = self._get(session_id)
        s = session.scenario
        view = {
            "id": session.id,
            "pool": list(s.pool.counts),
            "values": list(s.valuation_a.values),  # the human's own values only
            "state": session.state.value,
            "messages": [{"speaker": sp, "text": tx} for sp, tx in session.messages],
            "turns_used": session.turn_count,
            "max_turns": self.max_turns,
        }
        if session.state is SessionState.DONE:
            view["outcome"] = self._outcome_view(session)
        return view

    def _outcome_view(self, session: LiveSession) -> dict:
        o = session.outcome
        view = {
            "agreed": o.agreed,
            "reward_human": o.reward_a,
            "reward_agent": o.reward_b,
            "agent_values": list(session.scenario.valuation_b.values),
            "pareto": o.pareto_optimal,
        }
        if session.agent_selection is not None and session.agent_selection.is_claim:
            view["agent_take"] = list(session.agent_selection.allocation.take)
        return view

    # -- dialogue ------------------------------------------------------------

    def post_message(self, session_id: str, text: str) -> dict:
        session = self._get(session_id)
        if session.state is SessionState.AWAITING_SELECTIONS:
            raise ServiceError("selection required", status=400)
        if session.state is SessionState.DONE:
            raise ServiceError("session is finished", status=400)
        tokens = normalize_text(text)
        if not tokens:
            raise ServiceError("empty message", status=400)
        if len(tokens) > MAX_MESSAGE_TOKENS:
            raise ServiceError(f"message longer than {MAX_MESSAGE_TOKENS} tokens",
                               status=400)
        session.last_active = self.clock()
        events = []

        if session.turn_count >= self.max_turns:
            self._force_no_agreement(session)
            return {"events": [], "state": session.state.value,
                    "outcome": self._outcome_view(session)}

        human_ends = tokens[-1] == CHOOSE
        words = tokens[:-1] if human_ends else tokens
        session.messages.append(("human", " ".join(words)))
        session.turn_count += 1
        # In the agent's perspective the human turn is read:-marked and either
        # yields the floor (write:) or ends the dialogue (<choose>).
        terminator = CHOOSE if human_ends else WRITE
        session.agent.observe([READ] + words + [terminator])
        if human_ends:
            session.state = SessionState.AWAITING_SELECTIONS
            events.append({"speaker": "human", "text": CHOOSE})
            return {"events": events, "state": session.state.value}

        if session.turn_count >= self.max_turns:
            self._force_no_agreement(session)
            return {"events": events, "state": session.state.value,
                    "outcome": self._outcome_view(session)}

        turn = session.agent.write_turn()
        agent_words = [w for w, _ in turn if w not in (WRITE, READ, CHOOSE)]
        session.turn_count += 1
        if agent_words:
            session.messages.append(("agent", " ".join(agent_words)))
            events.append({"speaker": "agent", "text": " ".join(agent_words)})
        if turn[-1][0] == CHOOSE:
            events.append({"speaker": "agent", "text": CHOOSE})
            session.state = SessionState.AWAITING_SELECTIONS
        elif session.turn_count >= self.max_turns:
            self._force_no_agreement(session)
            return {"events": events, "state": session.state.value,
                    "outcome": self._outcome_view(session)}
        return {"events": events, "state": session.state.value}

    # -- resolution ----------------------------------------------------------

    def post_selection(self, session_id: str, take) -> dict:
        session = self._get(session_id)
        if session.state is not SessionState.AWAITING_SELECTIONS:
            raise ServiceError("no selection expected in state "
                               f"{session.state.value}", status=400)
        session.last_active = self.clock()
        if take == "no_agreement":
            human_sel = Selection.no_agreement()
        else:
            human_sel = self._validate_take(session.scenario, take)
        agent_sel = session.agent.choose()
        session.human_selection = human_sel
        session.agent_selection = agent_sel
        session.outcome = resolve(
            session.scenario.pool, human_sel, agent_sel,
            session.scenario.valuation_a, session.scenario.valuation_b,
        )
        session.state = SessionState.DONE
        return self._outcome_view(session)

    @staticmethod
    def _validate_take(scenario: Scenario, take) -> Selection:
        if not isinstance(take, (list, tuple)) or len(take) != 3:
            raise ServiceError("take must be three integers", status=400)
        detail = {}
        counts = scenario.pool.counts
        values = []
        for i, v in enumerate(take):
            if not isinstance(v, int) or isinstance(v, bool):
                detail[f"take[{i}]"] = "not an integer"
            elif not 0 <= v <= counts[i]:
                detail[f"take[{i}]"] = f"must be in 0..{counts[i]}, got {v}"
            else:
                values.append(v)
        if detail:
            raise ServiceError("infeasible claim", status=400, detail=detail)
        return Selection(Allocation(tuple(take)))


def create_app(service: NegotiationService, static_dir=None):
    """FastAPI application over a session service."""
    from fastapi import FastAPI, Request
    from fastapi.responses import JSONResponse

    app = FastAPI(title="negotiator")

    @app.exception_handler(ServiceError)
    async def handle_service_error(request: Request, exc: ServiceError):
        return JSONResponse(status_code=exc.status,
                            content={"error": str(exc), "detail": exc.detail})

    @app.post("/sessions")
    async def create_session(body: Optional[dict] = None):
        seed = (body or {}).get("seed")
        return service.create_session(seed)

    @app.get("/sessions/{session_id}")
    async def get_session(session_id: str):
        return service.session_view(session_id)

    @app.post("/sessions/{session_id}/message")
    async def post_message(session_id: str, body: dict):
        if "text" not in body:
            raise ServiceError("missing field 'text'")
        return service.post_message(session_id, body["text"])

    @app.post("/sessions/{session_id}/selection")
    async def post_selection(session_id: str, body: dict):
        if "take" not in body:
            raise ServiceError("missing field 'take'")
        return service.post_selection(session_id, body["take"])

    if static_dir is not None:
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app
