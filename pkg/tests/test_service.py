import numpy as np
import pytest

from negotiator.corpus import CHOOSE
from negotiator.service import (
    IDLE_TIMEOUT_SECONDS,
    NegotiationService,
    ServiceError,
    SessionState,
    create_app,
    normalize_text,
)
from tests.test_agents import small_model, small_vocab


def make_service(**kw):
    vocab = small_vocab()
    model = small_model(vocab_size=len(vocab))
    return NegotiationService(model, vocab, **kw)


class TestNormalizeText:
    def test_lowercase_and_split(self):
        assert normalize_text("I Want  The\tBooks") == ["i", "want", "the", "books"]

    def test_empty(self):
        assert normalize_text("   ") == []


class TestSessionLifecycle:
    def test_create_returns_valid_scenario_view(self):
        svc = make_service()
        view = svc.create_session(seed=5)
        assert view["state"] == "human_turn"
        assert len(view["pool"]) == 3
        assert len(view["values"]) == 3
        total = sum(c * v for c, v in zip(view["pool"], view["values"]))
        assert total == 10
        assert "outcome" not in view
        assert "agent_values" not in str(view)

    def test_fixed_seed_reproducible(self):
        v1 = make_service().create_session(seed=9)
        v2 = make_service().create_session(seed=9)
        assert v1["pool"] == v2["pool"]
        assert v1["values"] == v2["values"]

    def test_unknown_session_404(self):
        svc = make_service()
        with pytest.raises(ServiceError) as e:
            svc.session_view("nope")
        assert e.value.status == 404

    def test_capacity_limit(self):
        svc = make_service(max_sessions=2)
        svc.create_session()
        svc.create_session()
        with pytest.raises(ServiceError):
            svc.create_session()

    def test_agent_valuation_hidden_before_done(self):
        svc = make_service()
        sid = svc.create_session(seed=1)["id"]
        session = svc.sessions[sid]
        agent_values = list(session.scenario.valuation_b.values)
        r = svc.post_message(sid, "i want everything")
        for payload in (r, svc.session_view(sid)):
            assert "agent_values" not in str(payload)
        # the human's own values may coincide by chance; the hard rule is that
        # no pre-Done payload carries the agent_values field
        assert session.scenario.valuation_a.values == tuple(
            svc.session_view(sid)["values"]
        )
        del agent_values


class TestMessages:
    def test_message_gets_agent_reply_or_choose(self):
        svc = make_service()
        sid = svc.create_session(seed=2)["id"]
        r = svc.post_message(sid, "i want the books")
        assert r["state"] in ("human_turn", "awaiting_selections", "done")
        assert isinstance(r["events"], list)

    def test_empty_message_rejected(self):
        svc = make_service()
        sid = svc.create_session()["id"]
        with pytest.raises(ServiceError):
            svc.post_message(sid, "   ")

    def test_oversized_message_rejected(self):
        svc = make_service()
        sid = svc.create_session()["id"]
        with pytest.raises(ServiceError):
            svc.post_message(sid, "word " * 101)

    def test_human_choose_suspends_dialogue(self):
        svc = make_service()
        sid = svc.create_session(seed=3)["id"]
        r = svc.post_message(sid, f"deal {CHOOSE}")
        assert r["state"] == "awaiting_selections"
        with pytest.raises(ServiceError) as e:
            svc.post_message(sid, "hello again")
        assert "selection required" in str(e.value)

    def test_turn_cap_forces_no_agreement(self):
        svc = make_service(max_turns=2)
        sid = svc.create_session(seed=4)["id"]
        r = svc.post_message(sid, "offer one")
        if r["state"] != "done":
            r = svc.post_message(sid, "offer two")
        assert r["state"] == "done"
        out = svc.session_view(sid)["outcome"]
        assert out["agreed"] is False
        assert out["reward_human"] == 0 and out["reward_agent"] == 0


class TestSelection:
    def to_selection_state(self, svc):
        sid = svc.create_session(seed=6)["id"]
        svc.post_message(sid, f"you take nothing {CHOOSE}")
        assert svc.sessions[sid].state is SessionState.AWAITING_SELECTIONS
        return sid

    def test_selection_reveals_full_outcome(self):
        svc = make_service()
        sid = self.to_selection_state(svc)
        pool = svc.sessions[sid].scenario.pool.counts
        out = svc.post_selection(sid, list(pool))  # claim everything
        assert set(out) >= {"agreed", "reward_human", "reward_agent",
                            "agent_values", "pareto"}
        assert svc.sessions[sid].state is SessionState.DONE
        if out["agreed"]:
            values = svc.sessions[sid].scenario.valuation_a.values
            assert out["reward_human"] == sum(c * v for c, v in zip(pool, values))
        else:
            assert out["reward_human"] == 0

    def test_no_agreement_selection(self):
        svc = make_service()
        sid = self.to_selection_state(svc)
        out = svc.post_selection(sid, "no_agreement")
        assert out["agreed"] is False
        assert out["reward_human"] == 0

    def test_infeasible_claim_rejected_with_detail(self):
        svc = make_service()
        sid = self.to_selection_state(svc)
        with pytest.raises(ServiceError) as e:
            svc.post_selection(sid, [9, 9, 9])
        assert e.value.status == 400
        assert any(k.startswith("take[") for k in e.value.detail)
        # state unchanged: a valid selection still completes the session
        assert svc.sessions[sid].state is SessionState.AWAITING_SELECTIONS
        svc.post_selection(sid, "no_agreement")

    def test_selection_in_wrong_state_rejected(self):
        svc = make_service()
        sid = svc.create_session(seed=7)["id"]
        with pytest.raises(ServiceError):
            svc.post_selection(sid, [0, 0, 0])


class TestIdleTimeout:
    def test_idle_session_forced_to_no_agreement(self):
        now = [0.0]
        svc = make_service(clock=lambda: now[0])
        sid = svc.create_session(seed=8)["id"]
        now[0] = IDLE_TIMEOUT_SECONDS + 1.0
        view = svc.session_view(sid)
        assert view["state"] == "done"
        assert view["outcome"]["agreed"] is False


class TestStateMachineProperty:
    def test_random_walk_stays_in_declared_graph(self):
        legal = {
            "human_turn": {"human_turn", "awaiting_selections", "done"},
            "awaiting_selections": {"awaiting_selections", "done"},
            "done": {"done"},
        }
        for seed in range(8):
            rng = np.random.default_rng(seed)
            svc = make_service(max_turns=6)
            sid = svc.create_session(seed=seed)["id"]
            state = svc.session_view(sid)["state"]
            for _ in range(15):
                action = rng.integers(0, 3)
                try:
                    if action == 0:
                        svc.post_message(sid, "give me things")
                    elif action == 1:
                        svc.post_message(sid, f"done {CHOOSE}")
                    else:
                        svc.post_selection(sid, "no_agreement")
                except ServiceError:
                    pass  # rejected transitions must leave state legal too
                new_state = svc.session_view(sid)["state"]
                assert new_state in legal[state]
                state = new_state


class TestHttpApi:
    @pytest.fixture()
    def client(self):
        from fastapi.testclient import TestClient
        return TestClient(create_app(make_service()))

    def test_full_exchange(self, client):
        r = client.post("/sessions", json={"seed": 11})
        assert r.status_code == 200
        sid = r.json()["id"]
        assert "agent_values" not in r.text

        r = client.post(f"/sessions/{sid}/message", json={"text": "i want the hats"})
        assert r.status_code == 200
        assert "agent_values" not in r.text

        r = client.post(f"/sessions/{sid}/message", json={"text": CHOOSE})
        assert r.status_code in (200, 400)  # 400 only if already awaiting/done
        view = client.get(f"/sessions/{sid}").json()
        if view["state"] == "awaiting_selections":
            r = client.post(f"/sessions/{sid}/selection", json={"take": "no_agreement"})
            assert r.status_code == 200
            body = r.json()
            assert body["agreed"] is False
            assert len(body["agent_values"]) == 3

    def test_errors_are_structured(self, client):
        r = client.get("/sessions/missing")
        assert r.status_code == 404
        assert "error" in r.json()
        sid = client.post("/sessions", json={}).json()["id"]
        r = client.post(f"/sessions/{sid}/message", json={"text": ""})
        assert r.status_code == 400
        assert "error" in r.json()
        r = client.post(f"/sessions/{sid}/message", json={})
        assert r.status_code == 400
