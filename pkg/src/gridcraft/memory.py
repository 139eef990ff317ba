"""Per-agent memory: working-memory assembly and the goal-oriented knowledge graph.

Long-term memory is a three-level graph: step nodes (one per consolidated
experience) hang off goal nodes, goal nodes form a single predecessor chain
recording the agent's journey, and each goal node belongs to one long-term
goal node. Consolidation appends nodes and rewrites only the newest goal
summary; retrospection renders a bounded, byte-stable text block from the
graph for the next prompt.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional

from .errors import ContractError, GraphFormatError
from .schema import ResponseEvent
from .techtree import TechTree
from .world import ActionOutcome, Observation

RETROSPECTION_WINDOW = 5
_GOAL_CHAIN_TAIL = 8


@dataclass
class PreStage:
    """Snapshot of what the agent knew before deciding."""

    tick: int
    position: tuple
    facing: str
    vitals: dict
    inventory: Dict[str, int]

    @classmethod
    def from_observation(cls, obs: Observation) -> "PreStage":
        return cls(tick=obs.tick, position=tuple(obs.position), facing=obs.facing,
                   vitals=dict(obs.vitals), inventory=dict(obs.inventory))


@dataclass
class Experience:
    """One tick of one agent: pre-stage snapshot plus post-stage thought and outcome."""

    agent: int
    tick: int
    pre_stage: PreStage
    response: Optional[ResponseEvent] = None
    outcome: Optional[ActionOutcome] = None

    @property
    def has_post_stage(self) -> bool:
        return self.response is not None and self.outcome is not None

    def digest(self) -> str:
        """One-line description used in step nodes and prompts; format is stable."""
        if not self.has_post_stage:
            return f"t={self.tick} (pre-stage only)"
        action = self.response.action.final_next_action.value
        if action == "Navigator":
            action += f"->{self.response.action.final_target_material_to_collect.value}"
        elif action == "share":
            action += (f"->agent{self.response.action.final_target_agent_id}"
                       f":{self.response.action.final_target_material_to_share.value}")
        return (f"t={self.tick} goal={self.response.goal.current_goal.value} "
                f"action={action} result={self.outcome.result}")


@dataclass
class StepNode:
    id: str
    tick: int
    digest: str
    goal_id: str


@dataclass
class GoalNode:
    id: str
    goal: str
    predecessor: Optional[str]
    ltg_id: str
    summary: str = ""
    step_ids: List[str] = field(default_factory=list)


@dataclass
class LongTermGoalNode:
    id: str
    long_term_goal: str
    goal_ids: List[str] = field(default_factory=list)


class KnowledgeGraph:
    """Adaptive hierarchical memory graph; single-writer, append-only."""

    def __init__(self):
        self.steps: Dict[str, StepNode] = {}
        self.goals: Dict[str, GoalNode] = {}
        self.ltgs: Dict[str, LongTermGoalNode] = {}
        self.current_goal_id: Optional[str] = None

    @property
    def current_goal(self) -> Optional[GoalNode]:
        return self.goals.get(self.current_goal_id) if self.current_goal_id else None

    def goal_chain(self) -> List[GoalNode]:
        """Goal nodes from root to current; creation order equals chain order."""
        return list(self.goals.values())

    def hash(self) -> str:
        return hashlib.sha256(export_graph(self, "json").encode()).hexdigest()


@dataclass
class WorkingMemory:
    """Per-tick short-term bundle; rebuilt fresh, never persisted."""

    sensory: Observation
    episodic: dict
    feedback: List[str]
    retrospection: str


def _find_ltg(graph: KnowledgeGraph, long_term_goal: str) -> Optional[LongTermGoalNode]:
    for node in graph.ltgs.values():
        if node.long_term_goal == long_term_goal:
            return node
    return None


def consolidate(graph: KnowledgeGraph, experience: Experience) -> KnowledgeGraph:
    """Fold a completed experience into the graph (in place).

    Adds one step node; opens a new goal node (chained to the previous one,
    attached to its long-term goal node) when the declared goal changed; then
    rewrites the newest goal node's summary.
    """
    if not experience.has_post_stage:
        raise ContractError("experience lacks post-stage response/outcome; not consolidated")
    goal = experience.response.goal.current_goal.value
    ltg = experience.response.goal.long_term_goal.value

    current = graph.current_goal
    if current is None or current.goal != goal:
        ltg_node = _find_ltg(graph, ltg)
        if ltg_node is None:
            ltg_node = LongTermGoalNode(id=f"LTG{len(graph.ltgs) + 1}", long_term_goal=ltg)
            graph.ltgs[ltg_node.id] = ltg_node
        node = GoalNode(id=f"G{len(graph.goals) + 1}", goal=goal,
                        predecessor=graph.current_goal_id, ltg_id=ltg_node.id)
        graph.goals[node.id] = node
        ltg_node.goal_ids.append(node.id)
        graph.current_goal_id = node.id
        current = node

    step = StepNode(id=f"E{len(graph.steps) + 1}", tick=experience.tick,
                    digest=experience.digest(), goal_id=current.id)
    graph.steps[step.id] = step
    current.step_ids.append(step.id)

    provided = (experience.response.summary or "").strip()
    if provided:
        current.summary = provided
    else:
        past = [g.goal for g in graph.goal_chain()[:-1]][-_GOAL_CHAIN_TAIL:]
        current.summary = (f"Pursued {goal} toward {ltg}; {len(current.step_ids)} steps so far; "
                           f"earlier goals: {', '.join(past) if past else 'none'}.")
    return graph


def retrospect(graph: Optional[KnowledgeGraph], k: int = RETROSPECTION_WINDOW,
               achievements: Optional[Mapping[str, int]] = None) -> str:
    """Bounded, deterministic context block: recent events, achievements, goals, progress."""
    lines: List[str] = []
    lines.append("Recent events:")
    if graph is None or not graph.steps:
        lines.append("  (no prior experience)")
    else:
        recent = list(graph.steps.values())[-k:]
        lines.extend(f"  {node.digest}" for node in recent)

    lines.append("Achievements:")
    if achievements:
        lines.extend(f"  {name} (tick {tick})"
                     for name, tick in sorted(achievements.items(), key=lambda kv: (kv[1], kv[0])))
    else:
        lines.append("  (none)")

    lines.append("Goals:")
    chain = graph.goal_chain() if graph is not None else []
    if not chain:
        lines.append("  (none yet)")
    else:
        shown = chain[-_GOAL_CHAIN_TAIL:]
        if len(chain) > len(shown):
            lines.append(f"  ... {len(chain) - len(shown)} earlier goals")
        for node in shown:
            marker = " (current)" if node.id == graph.current_goal_id else ""
            lines.append(f"  {node.goal}{marker}")

    lines.append("Progress:")
    if not chain:
        lines.append("  no goals recorded")
    else:
        lines.append(f"  {len(chain) - 1} goals completed, current = {chain[-1].goal}")
        if chain[-1].summary:
            lines.append(f"  summary: {chain[-1].summary}")
    return "\n".join(lines)


def assemble_stwm(observation: Observation, agent_state, tree: TechTree,
                  graph: Optional[KnowledgeGraph]) -> WorkingMemory:
    """Build the pre-stage working memory; pure read of the graph."""
    episodic = {
        "tick": observation.tick,
        "position": tuple(observation.position),
        "vitals": dict(observation.vitals),
        "inventory": dict(observation.inventory),
    }
    feedback = tree.feedback_lines(observation.inventory, observation.facing)
    retrospection = retrospect(graph, RETROSPECTION_WINDOW,
                               achievements=agent_state.achievements)
    return WorkingMemory(sensory=observation, episodic=episodic,
                         feedback=feedback, retrospection=retrospection)


# ---------------------------------------------------------------------------
# Persistence

_GRAPH_FORMAT_VERSION = 1


def export_graph(graph: KnowledgeGraph, fmt: str = "json") -> str:
    """Render the graph as 'json' (lossless round-trip) or 'dot' (colored diagram)."""
    if fmt == "json":
        doc = {
            "version": _GRAPH_FORMAT_VERSION,
            "steps": [{"id": s.id, "tick": s.tick, "digest": s.digest, "goal": s.goal_id}
                      for s in graph.steps.values()],
            "goals": [{"id": g.id, "goal": g.goal, "predecessor": g.predecessor,
                       "ltg": g.ltg_id, "summary": g.summary, "steps": list(g.step_ids)}
                      for g in graph.goals.values()],
            "ltgs": [{"id": l.id, "long_term_goal": l.long_term_goal, "goals": list(l.goal_ids)}
                     for l in graph.ltgs.values()],
            "current_goal": graph.current_goal_id,
        }
        return json.dumps(doc, indent=2)
    if fmt == "dot":
        out = ["digraph knowledge_graph {", "  rankdir=TB;",
               "  node [style=filled];"]
        for l in graph.ltgs.values():
            out.append(f'  "{l.id}" [label="{l.id}: {l.long_term_goal}" fillcolor=red];')
        for g in graph.goals.values():
            out.append(f'  "{g.id}" [label="{g.id}: {g.goal}" fillcolor=green];')
        for s in graph.steps.values():
            label = s.digest.replace('"', "'")
            out.append(f'  "{s.id}" [label="{label}" fillcolor=lightblue];')
        for g in graph.goals.values():
            out.append(f'  "{g.id}" -> "{g.ltg_id}";')
            if g.predecessor:
                out.append(f'  "{g.predecessor}" -> "{g.id}";')
        for s in graph.steps.values():
            out.append(f'  "{s.id}" -> "{s.goal_id}";')
        out.append("}")
        return "\n".join(out)
    raise ContractError(f"unsupported graph export format: {fmt!r}")


def import_graph(document: str) -> KnowledgeGraph:
    """Load a JSON graph document, enforcing every structural invariant."""
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise GraphFormatError(f"graph document is not valid JSON: {exc}") from exc
    if doc.get("version") != _GRAPH_FORMAT_VERSION:
        raise GraphFormatError(f"unsupported graph format version: {doc.get('version')!r}")

    graph = KnowledgeGraph()
    for l in doc.get("ltgs", []):
        graph.ltgs[l["id"]] = LongTermGoalNode(id=l["id"], long_term_goal=l["long_term_goal"],
                                               goal_ids=list(l["goals"]))
    for g in doc.get("goals", []):
        graph.goals[g["id"]] = GoalNode(id=g["id"], goal=g["goal"], predecessor=g["predecessor"],
                                        ltg_id=g["ltg"], summary=g["summary"],
                                        step_ids=list(g["steps"]))
    for s in doc.get("steps", []):
        graph.steps[s["id"]] = StepNode(id=s["id"], tick=s["tick"], digest=s["digest"],
                                        goal_id=s["goal"])
    graph.current_goal_id = doc.get("current_goal")

    # Invariant: every step node has exactly one existing goal parent.
    for s in graph.steps.values():
        if s.goal_id not in graph.goals:
            raise GraphFormatError(f"step node without goal parent: {s.id}")
    for g in graph.goals.values():
        for sid in g.step_ids:
            if sid not in graph.steps or graph.steps[sid].goal_id != g.id:
                raise GraphFormatError(f"goal {g.id} lists foreign step {sid}")
    listed = sum(len(g.step_ids) for g in graph.goals.values())
    if listed != len(graph.steps):
        raise GraphFormatError("step nodes not all attached to goal nodes")

    # Invariant: every goal node belongs to exactly one existing LTG.
    for g in graph.goals.values():
        if g.ltg_id not in graph.ltgs:
            raise GraphFormatError(f"goal node without long-term-goal parent: {g.id}")
        if g.id not in graph.ltgs[g.ltg_id].goal_ids:
            raise GraphFormatError(f"goal {g.id} missing from its long-term goal node")
    for l in graph.ltgs.values():
        for gid in l.goal_ids:
            if gid not in graph.goals or graph.goals[gid].ltg_id != l.id:
                raise GraphFormatError(f"long-term goal {l.id} lists foreign goal {gid}")

    # Invariant: goal nodes form exactly one predecessor chain ending at current_goal.
    if graph.goals:
        roots = [g for g in graph.goals.values() if g.predecessor is None]
        if len(roots) != 1:
            raise GraphFormatError("goal nodes do not form a single chain (multiple roots)")
        successors: Dict[str, str] = {}
        for g in graph.goals.values():
            if g.predecessor is not None:
                if g.predecessor not in graph.goals:
                    raise GraphFormatError(f"goal {g.id} chained to missing predecessor")
                if g.predecessor in successors:
                    raise GraphFormatError("goal nodes do not form a single chain (branch)")
                successors[g.predecessor] = g.id
        node = roots[0].id
        length = 1
        while node in successors:
            node = successors[node]
            length += 1
        if length != len(graph.goals):
            raise GraphFormatError("goal nodes do not form a single chain (disconnected)")
        if graph.current_goal_id != node:
            raise GraphFormatError("current_goal is not the chain tail")
    elif graph.current_goal_id is not None:
        raise GraphFormatError("current_goal points at a missing node")
    return graph
