"""Interactive operator session server.

A single authoritative session advances the fleet on a fixed tick; a
WebSocket client supplies keyboard input, robot selection, and mode changes,
and receives full-state frames. Simulation is tick-counted (never
wall-clock-dependent), so replaying a session's message log offline
reproduces its trace exactly.

Protocol (JSON text frames)
  inbound:  {"type":"input","action":"forward|backward|left|right"}
            {"type":"select","robot":int}          (manual mode only)
            {"type":"mode","value":"manual|assisted"}
            {"type":"end"}
  outbound: {"type":"state","tick":int,"controlled":int,
             "robots":[{x,y,heading,health,justReset}...],
             "scores":[...]|null,"map":{...first frame only}}
            {"type":"error","code":str}
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from . import fleet as fleet_mod
from .gridnav import Action, EnvConfig, Episode, config_to_toml
from .imitation import DemoDataset, TAG_PHASE3_MANUAL, nearest_neighbor_action, save_demos
from .rng import make_rng
from .scorers import ChoiceDataset, ChoiceRecord, save_choices, score_batch

PHASE_DEMO1 = "demo1"
PHASE_CHOICE2 = "choice2"
PHASE_FLEET3 = "fleet3"

MODE_MANUAL = "manual"
MODE_ASSISTED = "assisted"

# applied when no operator input arrived during a tick: turns in place, so the
# controlled robot holds position; logged in the trace but never as a
# demonstration (only explicit inputs become demonstrations)
HOLD_ACTION = Action.TURN_LEFT

DEFAULT_TICK_SECONDS = 0.1


@dataclass
class SessionState:
    env: EnvConfig
    autonomy: DemoDataset | None
    n: int = 12
    dwell_period: int = 15
    phase: str = PHASE_FLEET3
    mode: str = MODE_MANUAL
    scorer: object = None
    seed: int = 0
    tick_count: int = 0
    controlled: int = 0
    pending_action: Action | None = None
    ended: bool = False
    episodes: list = field(default_factory=list)
    robot_rngs: list = field(default_factory=list)
    trace_steps: list = field(default_factory=list)
    demo_pairs: list = field(default_factory=list)
    choice_records: list = field(default_factory=list)
    message_log: list = field(default_factory=list)  # (tick, msg) pairs
    _just_reset: list = field(default_factory=list)

    def __post_init__(self):
        if self.mode == MODE_ASSISTED and self.scorer is None:
            raise ValueError("assisted mode requires a scorer")
        if self.phase == PHASE_DEMO1 and self.n != 1:
            raise ValueError("demo phase runs a single robot")
        if self.n > 1 and self.autonomy is None:
            raise ValueError("multi-robot sessions need an autonomy demo dataset")
        if not self.episodes:
            self.robot_rngs = [make_rng(self.seed, 1 + i) for i in range(self.n)]
            self.episodes = [Episode(self.env, self.robot_rngs[i]) for i in range(self.n)]
            self._just_reset = [False] * self.n


def map_geometry(env: EnvConfig) -> dict:
    return {
        "arena": list(env.arena),
        "walls": [list(w) for w in env.walls],
        "hazards": [list(h) for h in env.hazard_regions],
        "packs": [[p.x, p.y, p.heal] for p in env.health_packs],
        "packRadius": env.pack_radius,
        "goal": [env.goal.x, env.goal.y, env.goal.radius],
    }


def handle_message(session: SessionState, msg: dict) -> dict | None:
    """Apply one inbound message; returns an error frame or None.

    Messages are logged with the tick they will take effect on, which makes
    the session replayable from (config, message log).
    """
    if session.ended:
        return {"type": "error", "code": "session_ended"}
    session.message_log.append((session.tick_count, dict(msg)))
    mtype = msg.get("type")
    if mtype == "input":
        try:
            session.pending_action = Action(msg.get("action"))
        except ValueError:
            return {"type": "error", "code": "unknown_action"}
    elif mtype == "select":
        if session.mode == MODE_ASSISTED:
            return {"type": "error", "code": "manual_select_forbidden"}
        robot = msg.get("robot")
        if not isinstance(robot, int) or not (0 <= robot < session.n):
            return {"type": "error", "code": "bad_robot_index"}
        if session.phase == PHASE_CHOICE2:
            session.choice_records.append(
                ChoiceRecord(
                    tuple(ep.state for ep in session.episodes), robot, session.tick_count
                )
            )
        session.controlled = robot
    elif mtype == "mode":
        value = msg.get("value")
        if value not in (MODE_MANUAL, MODE_ASSISTED):
            return {"type": "error", "code": "unknown_mode"}
        if value == MODE_ASSISTED and session.scorer is None:
            return {"type": "error", "code": "no_scorer"}
        session.mode = value
    elif mtype == "end":
        session.ended = True
    else:
        return {"type": "error", "code": "unknown_message_type"}
    return None


def tick(session: SessionState) -> dict:
    """Advance every robot one step and emit the state frame.

    The controlled robot uses the pending operator action (or the hold
    default); the rest follow the imitation policy. In assisted mode the
    controlled index is re-chosen by score argmax every dwell_period ticks.
    """
    if session.ended:
        raise ValueError("session has ended")
    states = tuple(ep.state for ep in session.episodes)
    scores = None
    if session.mode == MODE_ASSISTED and session.tick_count % session.dwell_period == 0:
        scores = tuple(float(v) for v in score_batch(session.scorer, states))
        session.controlled = fleet_mod.argmax_choose(scores)

    explicit = session.pending_action is not None
    operator_action = session.pending_action if explicit else HOLD_ACTION
    session.pending_action = None

    actions, sources, rewards, ends = [], [], [], []
    for i, ep in enumerate(session.episodes):
        if i == session.controlled:
            action = operator_action
            sources.append(fleet_mod.SOURCE_OPERATOR)
            if explicit:
                session.demo_pairs.append((ep.state, action))
        else:
            action = nearest_neighbor_action(ep.state, session.autonomy)
            sources.append(fleet_mod.SOURCE_AUTONOMY)
        result = ep.step(action)
        actions.append(action)
        rewards.append(result.reward)
        ends.append(result.terminal)
        if result.terminal:
            session.episodes[i] = Episode(session.env, session.robot_rngs[i])
    session._just_reset = list(ends)

    session.trace_steps.append(
        fleet_mod.TraceStep(
            session.tick_count, states, session.controlled,
            tuple(actions), tuple(sources), tuple(rewards), tuple(ends), scores,
        )
    )
    frame = {
        "type": "state",
        "tick": session.tick_count,
        "controlled": session.controlled,
        "robots": [
            {
                "x": ep.state.x,
                "y": ep.state.y,
                "heading": ep.state.heading,
                "health": ep.state.health,
                "justReset": session._just_reset[i],
            }
            for i, ep in enumerate(session.episodes)
        ],
        "scores": list(scores) if scores is not None else None,
    }
    if session.tick_count == 0:
        frame["map"] = map_geometry(session.env)
    session.tick_count += 1
    return frame


def session_trace(session: SessionState) -> fleet_mod.FleetTrace:
    cfg = fleet_mod.FleetConfig(
        n=session.n,
        dwell_period=session.dwell_period,
        choice_mode=fleet_mod.MODE_MANUAL,
        horizon=max(1, session.tick_count),
        seed=session.seed,
    )
    return fleet_mod.FleetTrace(
        cfg, config_to_toml(session.env), getattr(session.scorer, "kind", "manual"),
        tuple(session.trace_steps),
    )


def replay_session(
    env: EnvConfig,
    autonomy: DemoDataset | None,
    messages,
    *,
    n: int = 12,
    dwell_period: int = 15,
    phase: str = PHASE_FLEET3,
    mode: str = MODE_MANUAL,
    scorer=None,
    seed: int = 0,
    ticks: int | None = None,
) -> fleet_mod.FleetTrace:
    """Rebuild a session offline from its message log.

    messages is the recorded (tick, msg) list; each message is applied before
    the tick it was logged against, exactly as it took effect live.
    """
    session = SessionState(
        env, autonomy, n=n, dwell_period=dwell_period, phase=phase, mode=mode,
        scorer=scorer, seed=seed,
    )
    total = ticks if ticks is not None else (max(t for t, _ in messages) + 1 if messages else 0)
    queue = list(messages)
    while session.tick_count < total and not session.ended:
        while queue and queue[0][0] <= session.tick_count:
            handle_message(session, queue.pop(0)[1])
        if not session.ended:
            tick(session)
    return session_trace(session)


def write_logs(session: SessionState, log_dir) -> dict:
    out = Path(log_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"trace": out / "session.trace.gz", "messages": out / "messages.jsonl"}
    fleet_mod.save_trace(session_trace(session), paths["trace"])
    with open(paths["messages"], "w") as f:
        for t, msg in session.message_log:
            f.write(json.dumps({"tick": t, "msg": msg}) + "\n")
    if session.demo_pairs:
        paths["demos"] = out / "demos.jsonl"
        save_demos(DemoDataset.from_pairs(session.demo_pairs, TAG_PHASE3_MANUAL), paths["demos"])
    if session.choice_records:
        paths["choices"] = out / "choices.jsonl"
        save_choices(
            ChoiceDataset(tuple(session.choice_records), session.n), paths["choices"]
        )
    return paths


# ---------------------------------------------------------------------------
# FastAPI wiring


def build_app(session: SessionState, tick_seconds: float = DEFAULT_TICK_SECONDS, log_dir=None):
    import asyncio

    app = FastAPI()
    app.state.session = session

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "tick": session.tick_count}

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await ws.accept()
        stop = asyncio.Event()

        async def ticker():
            while not stop.is_set() and not session.ended:
                frame = tick(session)
                try:
                    await ws.send_text(json.dumps(frame))
                except Exception:
                    break
                await asyncio.sleep(tick_seconds)

        task = asyncio.create_task(ticker())
        try:
            while not session.ended:
                raw = await ws.receive_text()
                try:
                    msg = json.loads(raw)
                except json.JSONDecodeError:
                    await ws.send_text(json.dumps({"type": "error", "code": "bad_json"}))
                    continue
                reply = handle_message(session, msg)
                if reply is not None:
                    await ws.send_text(json.dumps(reply))
        except WebSocketDisconnect:
            pass
        finally:
            stop.set()
            task.cancel()
            if log_dir is not None:
                write_logs(session, log_dir)

    return app


def serve(args) -> int:
    """CLI entry: build the session from flags and run uvicorn."""
    import uvicorn

    from .imitation import load_demos
    from .scorers import load_scorer

    env = EnvConfig()
    env.validate()
    scorer = load_scorer(args.scorer) if args.scorer else None
    autonomy = None
    demos_path = Path(args.out_dir) / "demos.jsonl"
    if demos_path.exists():
        autonomy = load_demos(demos_path)
    session = SessionState(
        env,
        autonomy,
        n=args.n,
        dwell_period=args.dwell,
        phase=args.phase,
        mode=MODE_ASSISTED if scorer is not None else MODE_MANUAL,
        scorer=scorer,
        seed=args.seed if args.seed is not None else 0,
    )
    app = build_app(session, log_dir=args.log_dir)
    uvicorn.run(app, host="127.0.0.1", port=args.port)
    return 0
