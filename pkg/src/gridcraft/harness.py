"""Episode runner, milestone metrics, reward scoring, and replayable records.

A record stores the full per-tick history (actions, outcomes, events,
messages, per-agent stats, and a state hash), so any record can be re-simulated
action-by-action and verified hash-by-hash. Import always replays; a tampered
byte anywhere in the action stream surfaces as the first divergent tick.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Sequence

import numpy as np

from .comms import Inbox, Message, deliver
from .errors import BackendError, ContractError, IntegrityError, VersionMismatchError
from .memory import KnowledgeGraph, consolidate
from .policy import ACTION_LOG_LENGTH, BaselineKind, run_tick
from .techtree import SCORED_TASKS, TEAM_PREREQS, TechTree, default_tree
from .world import (
    Action,
    ActionOutcome,
    EpisodeConfig,
    Event,
    Position,
    TerminalStatus,
    WorldState,
    generate_world,
    step,
    terminal_status,
)

RECORD_FORMAT = "gridcraft-episode"
RECORD_VERSION = 1


def _tick_hash(state: WorldState, actions: Dict[int, Action]) -> str:
    """Hash of post-step state plus the applied actions, so any tampered
    action byte is caught even when it happens to be semantically neutral."""
    payload = state.digest() + json.dumps(
        {str(k): actions[k].to_dict() for k in sorted(actions)},
        sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode()).hexdigest()


@dataclass
class TickRecord:
    tick: int
    actions: Dict[int, Action]
    outcomes: List[ActionOutcome]
    events: List[Event]
    messages: List[Message]
    agent_stats: Dict[int, dict]
    backend_failures: List[int]
    state_hash: str

    def to_dict(self) -> dict:
        return {
            "type": "tick",
            "tick": self.tick,
            "actions": {str(k): v.to_dict() for k, v in self.actions.items()},
            "outcomes": [o.to_dict() for o in self.outcomes],
            "events": [e.to_dict() for e in self.events],
            "messages": [m.to_dict() for m in self.messages],
            "agent_stats": {str(k): v for k, v in self.agent_stats.items()},
            "backend_failures": list(self.backend_failures),
            "hash": self.state_hash,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TickRecord":
        return cls(
            tick=d["tick"],
            actions={int(k): Action.from_dict(v) for k, v in d["actions"].items()},
            outcomes=[ActionOutcome.from_dict(o) for o in d["outcomes"]],
            events=[Event.from_dict(e) for e in d["events"]],
            messages=[Message.from_dict(m) for m in d["messages"]],
            agent_stats={int(k): v for k, v in d.get("agent_stats", {}).items()},
            backend_failures=list(d.get("backend_failures", [])),
            state_hash=d["hash"],
        )


@dataclass
class EpisodeRecord:
    config: EpisodeConfig
    baseline: str
    episode_number: int
    ticks: List[TickRecord]
    terminal: TerminalStatus
    achievements: Dict[int, Dict[str, int]]  # agent id -> task -> first tick
    backend_failures: int
    graphs: Optional[Dict[int, KnowledgeGraph]] = field(default=None, repr=False)

    @property
    def n_ticks(self) -> int:
        return len(self.ticks)


@dataclass
class MilestoneRow:
    task: str
    tick: Optional[int]  # None marks unreached


@dataclass
class MetricsTable:
    rows: List[dict]  # task, mean, sd, rate, n_reached, n_runs, single_sample
    n_runs: int

    def render_text(self) -> str:
        header = f"{'task':<20} {'mean':>9} {'sd':>9} {'rate':>6}  (n={self.n_runs} runs)"
        lines = [header, "-" * len(header)]
        for row in self.rows:
            if row["n_reached"]:
                mean = f"{row['mean']:.1f}"
                sd = f"{row['sd']:.2f}" + ("*" if row["single_sample"] else "")
            else:
                mean, sd = "-", "-"
            lines.append(f"{row['task']:<20} {mean:>9} {sd:>9} {row['rate']:>6.2f}")
        if any(r["single_sample"] for r in self.rows):
            lines.append("* single completed run; sd undefined, reported as 0")
        return "\n".join(lines)

    def to_csv(self) -> str:
        lines = ["task,mean,sd,success_rate,n_reached,n_runs"]
        for row in self.rows:
            mean = f"{row['mean']:.6g}" if row["n_reached"] else ""
            sd = f"{row['sd']:.6g}" if row["n_reached"] else ""
            lines.append(f"{row['task']},{mean},{sd},{row['rate']:.4f},"
                         f"{row['n_reached']},{row['n_runs']}")
        return "\n".join(lines) + "\n"


def run_episode(config: EpisodeConfig, backend, baseline: BaselineKind,
                episode_number: int = 1, tree: Optional[TechTree] = None) -> EpisodeRecord:
    """Run one full episode: deliver -> decide (all agents) -> step -> consolidate.

    The backend must be fresh for the episode (scripted minds are stateful).
    Backend failures downgrade that agent's action to noop and are counted.
    """
    tree = tree or default_tree()
    baseline = BaselineKind(baseline)
    state = generate_world(config)
    n = config.n_agents
    graphs: Dict[int, KnowledgeGraph] = (
        {a.id: KnowledgeGraph() for a in state.agents} if baseline != BaselineKind.BASIC else {})
    action_logs: Dict[int, List[str]] = {a.id: [] for a in state.agents}

    pending: List[Message] = []
    ticks: List[TickRecord] = []
    failures_total = 0

    status = terminal_status(state)
    while status.kind == "running":
        living = [a.id for a in state.agents if a.alive]
        living_set = set(living)
        if baseline == BaselineKind.MEM_COMM:
            valid = [m for m in pending if m.deliverable and m.sender in living_set]
            inboxes = deliver(valid, n)
        else:
            inboxes = {i: Inbox(i) for i in range(1, n + 1)}

        actions: Dict[int, Action] = {}
        messages: List[Message] = []
        experiences = {}
        tick_failures: List[int] = []
        for agent_id in living:
            try:
                action, message, experience = run_tick(
                    agent_id, state, graphs.get(agent_id), inboxes[agent_id], backend,
                    baseline, tree=tree, episode_number=episode_number,
                    action_log=action_logs[agent_id])
            except BackendError:
                action = Action.noop()
                message, experience = None, None
                tick_failures.append(agent_id)
                failures_total += 1
            actions[agent_id] = action
            if message is not None:
                messages.append(message)
            if experience is not None:
                experiences[agent_id] = experience

        inv_before = {i: dict(state.agent_by_id(i).inventory) for i in living}
        state, outcomes, events = step(state, actions, tree)
        outcome_by_agent = {o.agent: o for o in outcomes}

        agent_stats: Dict[int, dict] = {}
        for agent_id in living:
            agent = state.agent_by_id(agent_id)
            delta = {}
            after = agent.inventory
            for item in sorted(set(inv_before[agent_id]) | set(after)):
                diff = after.get(item, 0) - inv_before[agent_id].get(item, 0)
                if diff:
                    delta[item] = diff
            agent_stats[agent_id] = {"vitals": agent.vitals(), "inventory_delta": delta}

            outcome = outcome_by_agent.get(agent_id)
            if outcome is not None:
                if hasattr(backend, "note_outcome"):
                    backend.note_outcome(agent_id, outcome)
                log = action_logs[agent_id]
                log.append(actions[agent_id].kind)
                del log[:-ACTION_LOG_LENGTH]
                experience = experiences.get(agent_id)
                if experience is not None:
                    experience.outcome = outcome
                    if baseline != BaselineKind.BASIC:
                        consolidate(graphs[agent_id], experience)

        ticks.append(TickRecord(
            tick=state.tick, actions=actions, outcomes=outcomes, events=events,
            messages=messages, agent_stats=agent_stats, backend_failures=tick_failures,
            state_hash=_tick_hash(state, actions)))
        pending = messages
        status = terminal_status(state)

    achievements = {a.id: dict(a.achievements) for a in state.agents}
    return EpisodeRecord(config=config, baseline=baseline.value, episode_number=episode_number,
                         ticks=ticks, terminal=status, achievements=achievements,
                         backend_failures=failures_total, graphs=graphs or None)


def run_sweep(base_config: EpisodeConfig, seeds: Sequence[int],
              backend_factory: Callable[[], object], baseline: BaselineKind,
              tree: Optional[TechTree] = None) -> List[EpisodeRecord]:
    """One episode per seed with a fresh backend each; sequential and isolated."""
    records = []
    for idx, seed in enumerate(seeds, start=1):
        config = EpisodeConfig.from_dict({**base_config.to_dict(), "seed": seed})
        records.append(run_episode(config, backend_factory(), baseline,
                                   episode_number=idx, tree=tree))
    return records


# ---------------------------------------------------------------------------
# Metrics


def milestones(record: EpisodeRecord) -> List[MilestoneRow]:
    """First tick at which any agent completed each task, in report column order."""
    rows = []
    for task in SCORED_TASKS:
        ticks = [ach[task] for ach in record.achievements.values() if task in ach]
        rows.append(MilestoneRow(task=task, tick=min(ticks) if ticks else None))
    return rows


def check_milestone_order(record: EpisodeRecord) -> List[str]:
    """Violations of the tech-tree partial order over team milestones; empty when clean."""
    reached = {row.task: row.tick for row in milestones(record) if row.tick is not None}
    violations = []
    for task, tick in reached.items():
        for prereq in TEAM_PREREQS[task]:
            if prereq not in reached:
                violations.append(f"{task} reached without {prereq}")
            elif reached[prereq] > tick:
                violations.append(f"{task} at {tick} before {prereq} at {reached[prereq]}")
    return violations


def aggregate(records: Sequence[EpisodeRecord]) -> MetricsTable:
    """Per-task mean ± sample sd over runs that reached the task, plus success rate."""
    if not records:
        raise ContractError("aggregate requires at least one record")
    n_runs = len(records)
    per_task: Dict[str, List[int]] = {task: [] for task in SCORED_TASKS}
    for record in records:
        for row in milestones(record):
            if row.tick is not None:
                per_task[row.task].append(row.tick)
    rows = []
    for task in SCORED_TASKS:
        ticks = per_task[task]
        if ticks:
            mean = float(np.mean(ticks))
            sd = float(np.std(ticks, ddof=1)) if len(ticks) > 1 else 0.0
        else:
            mean, sd = math.nan, math.nan
        rows.append({
            "task": task,
            "mean": mean,
            "sd": sd,
            "rate": len(ticks) / n_runs,
            "n_reached": len(ticks),
            "n_runs": n_runs,
            "single_sample": len(ticks) == 1,
        })
    return MetricsTable(rows=rows, n_runs=n_runs)


def score_return(record: EpisodeRecord, tree: Optional[TechTree] = None) -> float:
    """Depth-weighted achievement sum minus the time penalty per living agent-tick."""
    tree = tree or default_tree()
    total = 0.0
    for ach in record.achievements.values():
        total += sum(tree.depth_of(task) for task in ach)
    agent_ticks = sum(len(t.actions) for t in record.ticks)
    return total - record.config.time_penalty * agent_ticks


# ---------------------------------------------------------------------------
# Persistence and replay


def export_record(record: EpisodeRecord, path) -> None:
    """Line-delimited JSON: header (config+version), tick records, footer."""
    lines = [json.dumps({
        "format": RECORD_FORMAT,
        "version": RECORD_VERSION,
        "config": record.config.to_dict(),
        "baseline": record.baseline,
        "episode": record.episode_number,
    }, sort_keys=True)]
    for tick in record.ticks:
        lines.append(json.dumps(tick.to_dict(), sort_keys=True))
    lines.append(json.dumps({
        "type": "end",
        "terminal": {"kind": record.terminal.kind, "tick": record.terminal.tick},
        "achievements": {str(k): v for k, v in record.achievements.items()},
        "backend_failures": record.backend_failures,
    }, sort_keys=True))
    Path(path).write_text("\n".join(lines) + "\n")


def _parse_record_text(text: str) -> EpisodeRecord:
    lines = [line for line in text.splitlines() if line.strip()]
    if len(lines) < 2:
        raise IntegrityError("record file truncated")
    try:
        header = json.loads(lines[0])
        footer = json.loads(lines[-1])
        tick_docs = [json.loads(line) for line in lines[1:-1]]
    except json.JSONDecodeError as exc:
        raise IntegrityError(f"record file corrupt: {exc}") from exc
    if header.get("format") != RECORD_FORMAT:
        raise IntegrityError(f"not an episode record: format={header.get('format')!r}")
    if header.get("version") != RECORD_VERSION:
        raise VersionMismatchError(
            f"record version {header.get('version')!r} != supported {RECORD_VERSION}")
    if footer.get("type") != "end":
        raise IntegrityError("record file missing end marker")
    return EpisodeRecord(
        config=EpisodeConfig.from_dict(header["config"]),
        baseline=header.get("baseline", "mem"),
        episode_number=header.get("episode", 1),
        ticks=[TickRecord.from_dict(d) for d in tick_docs],
        terminal=TerminalStatus(kind=footer["terminal"]["kind"],
                                tick=footer["terminal"]["tick"]),
        achievements={int(k): dict(v) for k, v in footer["achievements"].items()},
        backend_failures=footer.get("backend_failures", 0),
    )


def replay_record(record: EpisodeRecord, tree: Optional[TechTree] = None) -> None:
    """Re-simulate the recorded actions; raise IntegrityError at the first divergence."""
    tree = tree or default_tree()
    state = generate_world(record.config)
    previous_messages: List[Message] = []
    for tick_record in record.ticks:
        if record.baseline == BaselineKind.MEM_COMM.value and previous_messages:
            # Reproduce the sighting reveals receivers applied from last tick's
            # messages; the messages themselves are part of the record.
            living = {a.id for a in state.agents if a.alive}
            valid = [m for m in previous_messages if m.deliverable and m.sender in living]
            if valid:
                inboxes = deliver(valid, record.config.n_agents)
                for agent_id in sorted(living):
                    agent = state.agent_by_id(agent_id)
                    for message in inboxes[agent_id].messages:
                        for pos in message.status.get("sightings", {}).values():
                            agent.discovered.add(Position(pos[0], pos[1]))
        state, outcomes, events = step(state, tick_record.actions, tree)
        previous_messages = tick_record.messages
        if _tick_hash(state, tick_record.actions) != tick_record.state_hash:
            raise IntegrityError(f"replay diverged at tick {state.tick}: state hash mismatch")
        if [e.to_dict() for e in events] != [e.to_dict() for e in tick_record.events]:
            raise IntegrityError(f"replay diverged at tick {state.tick}: event mismatch")
    final = terminal_status(state)
    if final.kind != record.terminal.kind:
        raise IntegrityError(
            f"replay terminal {final.kind} != recorded {record.terminal.kind}")


def import_record(path, verify: bool = True, tree: Optional[TechTree] = None) -> EpisodeRecord:
    """Load a record file; by default re-simulates it to prove replay fidelity."""
    record = _parse_record_text(Path(path).read_text())
    if verify:
        replay_record(record, tree)
    return record


def export_trace(record: EpisodeRecord, path) -> None:
    """One JSONL line per tick per agent: action, outcome, vitals, inventory delta, events."""
    lines = []
    for tick_record in record.ticks:
        outcome_by_agent = {o.agent: o for o in tick_record.outcomes}
        events_by_agent: Dict[int, list] = {}
        for event in tick_record.events:
            events_by_agent.setdefault(event.agent, []).append(event.to_dict())
        for agent_id in sorted(tick_record.actions):
            stats = tick_record.agent_stats.get(agent_id, {})
            outcome = outcome_by_agent.get(agent_id)
            lines.append(json.dumps({
                "tick": tick_record.tick,
                "agent": agent_id,
                "action": tick_record.actions[agent_id].to_dict(),
                "outcome": {"result": outcome.result, "reason": outcome.reason}
                if outcome else None,
                "vitals": stats.get("vitals"),
                "inventory_delta": stats.get("inventory_delta"),
                "events": events_by_agent.get(agent_id, []),
            }, sort_keys=True))
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def export_messages(record: EpisodeRecord, path) -> None:
    """Per-tick JSONL of every composed message, for post-hoc analysis."""
    lines = []
    for tick_record in record.ticks:
        if tick_record.messages:
            lines.append(json.dumps({
                "tick": tick_record.tick,
                "messages": [m.to_dict() for m in tick_record.messages],
            }, sort_keys=True))
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))
