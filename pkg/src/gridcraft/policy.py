"""Per-agent decision loop: prompt bundles, planner backends, and the tick pipeline.

Two backends implement the planner contract `decide(bundle, stwm, inbox) ->
ResponseEvent`: a deterministic scripted oracle (with a deliberately degraded
"basic" mode) and a remote chat-completions endpoint with schema-constrained
decoding. The scripted oracle emits fully schema-valid documents, so the whole
pipeline runs and tests without any network.
"""

from __future__ import annotations

import json
import os
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Deque, Dict, List, Optional, Set, Tuple

import httpx

from . import nav
from .comms import Inbox, Message, compose_message, help_targets, is_diamond_seeker, render_inbox
from .errors import BackendError, NotAliveError, SchemaParseError
from .memory import Experience, KnowledgeGraph, PreStage, WorkingMemory, assemble_stwm
from .schema import (
    ActionType,
    Collaboration,
    Goal,
    GoalType,
    InventoryItems,
    InventoryItemsCount,
    LongTermGoalType,
    MaterialType,
    NavigationDestinationItems,
    NextAction,
    Reflection,
    ResponseEvent,
    ResultType,
    ShareableItems,
    extract_action,
    parse_response,
    schema_document,
)
from .techtree import TechTree, default_tree
from .world import (
    Action,
    ActionOutcome,
    MAP_LEGEND,
    Observation,
    Position,
    SAFE_WALKABLE,
    WorldState,
    observe,
)


class BaselineKind(str, Enum):
    BASIC = "basic"        # rolling action log only, no graph, no messages
    MEM = "mem"            # knowledge-graph memory, no messages
    MEM_COMM = "mem_comm"  # memory plus structured communication


ACTION_LOG_LENGTH = 20

_MATERIAL_VALUES = {m.value for m in MaterialType}


@dataclass
class PromptBundle:
    """Everything a planner is shown for one tick."""

    environment_description: str
    working_memory_rendering: str
    inbox_rendering: str
    role_directive: str
    schema: str
    agent_id: int = 1
    n_agents: int = 1
    tick: int = 0
    episode_number: int = 1
    baseline: BaselineKind = BaselineKind.MEM

    def render(self) -> str:
        return "\n".join([
            "== Game manual ==", self.environment_description,
            "== Role ==", self.role_directive,
            "== Working memory ==", self.working_memory_rendering,
            "== Messages ==", self.inbox_rendering,
            "== Output schema ==", self.schema,
        ])


_ENV_DESCRIPTION_CACHE: Dict[int, str] = {}


def environment_description(tree: Optional[TechTree] = None) -> str:
    """Fixed game manual text, generated from the recipe table; byte-stable per tree."""
    tree = tree or default_tree()
    cached = _ENV_DESCRIPTION_CACHE.get(id(tree))
    if cached is not None:
        return cached
    lines = [
        "You control one agent in a shared grid survival world. The team objective",
        "is for any one agent to hold a diamond as quickly as possible; the episode",
        "ends at that moment. Tools unlock in a strict hierarchy, and health, food,",
        "drink, and energy must be kept above zero to stay alive.",
        "",
        "Task requirements (face the named cell; required items must be in inventory):",
    ]
    for recipe in tree.recipes:
        needs = [f"facing={recipe.facing}"]
        needs += [f"{item}:{count}" for item, count in recipe.required.items()]
        lines.append(f"  {recipe.task}: " + ", ".join(needs))
    lines += [
        "",
        "Ground rules:",
        "  Verify requirements against your inventory before acting; actions can fail.",
        "  Collect by facing the target and using 'do'. Mining converts rock to path;",
        "  trees regrow, so wood is renewable.",
        "  When food is low eat a cow, when drink is low collect water, when energy",
        "  is low sleep.",
        "  The Navigator action walks one step per tick toward a chosen known material.",
        "  Do not place duplicate stations; placing again wastes materials.",
        "  share hands one item to a nearby living agent.",
    ]
    text = "\n".join(lines)
    _ENV_DESCRIPTION_CACHE[id(tree)] = text
    return text


def render_window(obs: Observation) -> str:
    """Window as a legend-char grid: '@' self, digits other agents, 'C' cows, '%' out of bounds."""
    half_w = len(obs.window[0]) // 2
    half_h = len(obs.window) // 2
    rows = [[MAP_LEGEND.get(token, "%") for token in row] for row in obs.window]
    ox, oy = obs.window_origin
    for cx, cy in obs.visible_cows:
        rows[cy - oy][cx - ox] = "C"
    for aid, ax, ay in obs.visible_agents:
        rows[ay - oy][ax - ox] = str(aid % 10)
    rows[half_h][half_w] = "@"
    return "\n".join("".join(r) for r in rows)


def render_working_memory(stwm: WorkingMemory) -> str:
    ep = stwm.episodic
    v = ep["vitals"]
    inv = ", ".join(f"{k}:{n}" for k, n in sorted(ep["inventory"].items())) or "empty"
    lines = [
        f"tick {ep['tick']}, position ({ep['position'][0]},{ep['position'][1]})",
        (f"vitals: health={v['health']} food={v['food']} drink={v['drink']} "
         f"energy={v['energy']} sleeping={v['sleeping']}"),
        f"inventory: {inv}",
        f"facing: {stwm.sensory.facing}",
        "surroundings:",
        render_window(stwm.sensory),
        "feedback:",
    ]
    lines += [f"  {line}" for line in stwm.feedback]
    lines.append("retrospection:")
    lines.append(stwm.retrospection)
    return "\n".join(lines)


def role_directive(agent_id: int, n: int, baseline: BaselineKind) -> str:
    if baseline != BaselineKind.MEM_COMM or n == 1:
        return "Work independently; survive and progress the tool hierarchy yourself."
    targets = help_targets(agent_id, n)
    if not targets:
        text = "You are agent 1, the leader: craft essential tools and hand them out."
    else:
        text = "; ".join(
            f"assist {'leader ' if t == 1 and agent_id - 1 != 1 else ''}agent {t}" for t in targets)
        text = text[0].upper() + text[1:] + "."
    if is_diamond_seeker(agent_id, n) and n > 1:
        text += " Once the team owns a stone pickaxe, switch your focus to finding the diamond."
    return text


def build_prompt(agent_id: int, stwm: WorkingMemory, inbox: Inbox, baseline: BaselineKind,
                 n: int, action_log: Optional[List[str]] = None, episode_number: int = 1,
                 tree: Optional[TechTree] = None) -> PromptBundle:
    """Deterministic text assembly; inbox and memory sections honor the baseline."""
    tree = tree or default_tree()
    if baseline == BaselineKind.MEM_COMM:
        inbox_text = render_inbox(inbox)
    else:
        inbox_text = "communication disabled"

    memory_text = render_working_memory(stwm)
    if baseline == BaselineKind.BASIC:
        log = list(action_log or [])[-ACTION_LOG_LENGTH:]
        log_text = "\n".join(f"  {i + 1}. {a}" for i, a in enumerate(log)) or "  (none yet)"
        # Replace the graph retrospection block with the raw action log.
        memory_text = memory_text.split("retrospection:")[0]
        memory_text += f"recent actions (last {ACTION_LOG_LENGTH}):\n{log_text}"

    return PromptBundle(
        environment_description=environment_description(tree),
        working_memory_rendering=memory_text,
        inbox_rendering=inbox_text,
        role_directive=role_directive(agent_id, n, baseline),
        schema=schema_document(),
        agent_id=agent_id,
        n_agents=n,
        tick=stwm.sensory.tick,
        episode_number=episode_number,
        baseline=baseline,
    )


# ---------------------------------------------------------------------------
# Scripted oracle backend


_PHASE_LTG = {
    "wood_pickaxe": LongTermGoalType.MAKE_WOOD_PICKAXE,
    "stone_pickaxe": LongTermGoalType.MAKE_STONE_PICKAXE,
    "iron_pickaxe": LongTermGoalType.MAKE_IRON_PICKAXE,
    "diamond": LongTermGoalType.COLLECT_DIAMOND,
}

_GOAL_ACTION = {
    "collect_wood": ("tree", ActionType.do),
    "collect_stone": ("stone", ActionType.do),
    "collect_coal": ("coal", ActionType.do),
    "collect_iron": ("iron", ActionType.do),
    "collect_diamond": ("diamond", ActionType.do),
    "make_wood_pickaxe": ("table", ActionType.make_wood_pickaxe),
    "make_stone_pickaxe": ("table", ActionType.make_stone_pickaxe),
    "make_iron_pickaxe": ("furnace", ActionType.make_iron_pickaxe),
    "place_table": ("grass", ActionType.place_table),
    "place_furnace": ("grass", ActionType.place_furnace),
}


@dataclass
class _Mind:
    """Per-agent scripted-policy state; everything here derives from own observations."""

    seen: Set[str] = field(default_factory=set)
    reported: Set[str] = field(default_factory=set)  # landmark kinds peers told us about
    cow_sightings: Set[Tuple[int, int]] = field(default_factory=set)
    walkable_map: Dict[Tuple[int, int], bool] = field(default_factory=dict)
    hunting: bool = False
    team_stone_pickaxe: bool = False
    last_action: str = "noop"
    last_target: Optional[str] = None
    last_result: str = "success"
    repeats: int = 0
    action_log: Deque[str] = field(default_factory=lambda: deque(maxlen=ACTION_LOG_LENGTH))

    def absorb(self, obs: Observation) -> None:
        """Fold one window into remembered terrain and cow sightings."""
        ox, oy = obs.window_origin
        for wy, row in enumerate(obs.window):
            for wx, token in enumerate(row):
                self.seen.add(token)
                if token != "out_of_bounds":
                    self.walkable_map[(ox + wx, oy + wy)] = token in SAFE_WALKABLE
        visible = set(obs.visible_cows)
        if visible:
            self.seen.add("cow")
        w, h = len(obs.window[0]), len(obs.window)
        in_window = {(x, y) for (x, y) in self.cow_sightings
                     if ox <= x < ox + w and oy <= y < oy + h}
        self.cow_sightings -= in_window - visible
        self.cow_sightings |= visible


def _remembered_cow_step(obs: Observation, mind: _Mind,
                         max_distance: Optional[int] = None) -> Optional[ActionType]:
    """BFS over the mind's own remembered terrain toward the nearest cow sighting."""
    if obs.facing == "cow":
        return ActionType.do
    start = (obs.position.x, obs.position.y)
    sightings = set(mind.cow_sightings)
    if max_distance is not None:
        sightings = {p for p in sightings
                     if abs(p[0] - start[0]) + abs(p[1] - start[1]) <= max_distance}
    if not sightings:
        return None
    w, h = obs.world_width, obs.world_height
    others = {(ax, ay) for _, ax, ay in obs.visible_agents}

    def passable(pos):
        return mind.walkable_map.get(pos, False) and pos not in sightings and pos not in others

    step = nav.bfs_first_step(start, passable,
                              lambda p: nav.adjacent_to_any(p, sightings, w, h), w, h)
    if step is None:
        return None
    if step == start:
        for dx, dy in nav.NEIGHBOR_OFFSETS:
            if (start[0] + dx, start[1] + dy) in sightings:
                return ActionType(nav.OFFSET_TO_MOVE[(dx, dy)])
        return None
    return ActionType(nav.OFFSET_TO_MOVE[(step[0] - start[0], step[1] - start[1])])


def _latest_requests(inbox: Inbox) -> Dict[int, Message]:
    return {m.sender: m for m in inbox.messages}


def _requested_extras(backend, bundle, inbox: Inbox, obs: Observation) -> Set[str]:
    """Raw materials the primary help target asked for; gather one spare unit."""
    if bundle.baseline != BaselineKind.MEM_COMM or bundle.n_agents < 2:
        return set()
    by_sender = _latest_requests(inbox)
    for target in help_targets(bundle.agent_id, bundle.n_agents):
        message = by_sender.get(target)
        if message is not None and message.assistance_request is not None:
            item = message.assistance_request["item"]
            if item in ("stone", "coal", "iron"):
                return {item}
            return set()
    return set()


def _visible_cow_step(obs: Observation) -> Optional[ActionType]:
    """Window-only cow pursuit for the memoryless baseline."""
    if obs.facing == "cow":
        return ActionType.do
    if not obs.visible_cows:
        return None
    w, h = len(obs.window[0]), len(obs.window)
    ox, oy = obs.window_origin
    start = (obs.position.x - ox, obs.position.y - oy)
    cows = {(cx - ox, cy - oy) for cx, cy in obs.visible_cows}
    others = {(ax - ox, ay - oy) for _, ax, ay in obs.visible_agents}

    def passable(pos):
        return (obs.window[pos[1]][pos[0]] in SAFE_WALKABLE
                and pos not in cows and pos not in others)

    for dx, dy in nav.NEIGHBOR_OFFSETS:
        if (start[0] + dx, start[1] + dy) in cows:
            return ActionType(nav.OFFSET_TO_MOVE[(dx, dy)])
    step = nav.bfs_first_step(start, passable,
                              lambda p: nav.adjacent_to_any(p, cows, w, h), w, h)
    if step is None or step == start:
        return None
    return ActionType(nav.OFFSET_TO_MOVE[(step[0] - start[0], step[1] - start[1])])


def _step_toward_position(obs: Observation, mind: _Mind,
                          target: Tuple[int, int]) -> Optional[ActionType]:
    """One move toward a reported position over remembered terrain.

    Unknown cells count as provisionally walkable; the plan self-corrects as
    windows reveal them. Arrival means "close enough to see each other".
    """
    start = (obs.position.x, obs.position.y)
    if abs(target[0] - start[0]) + abs(target[1] - start[1]) <= 3:
        return None
    w, h = obs.world_width, obs.world_height
    blockers = set(mind.cow_sightings) | {(ax, ay) for _, ax, ay in obs.visible_agents}

    def passable(pos):
        if pos in blockers:
            return False
        return mind.walkable_map.get(pos, True)

    def close(pos):
        return abs(pos[0] - target[0]) + abs(pos[1] - target[1]) <= 3

    step = nav.bfs_first_step(start, passable, close, w, h)
    if step is None or step == start:
        return None
    return ActionType(nav.OFFSET_TO_MOVE[(step[0] - start[0], step[1] - start[1])])


def _survival_override(obs: Observation, mind: _Mind):
    """(final_action, nav_target, reason) when a vital needs attention, else None."""
    vitals = obs.vitals
    if vitals["drink"] <= 5 and obs.facing == "water":
        return ActionType.do, NavigationDestinationItems.NOT_APPLICABLE, "topping off drink"
    if vitals["drink"] <= 3 or (vitals["drink"] <= 6 and "water" not in mind.seen):
        # Below 3 is a crisis; searching starts early when no water was ever seen,
        # since finding an undiscovered shore can take a long sweep.
        if obs.facing == "water":
            return ActionType.do, NavigationDestinationItems.NOT_APPLICABLE, "drink is low; collecting water"
        return ActionType.Navigator, NavigationDestinationItems.WATER, "drink is low; collecting water"
    if vitals["food"] >= 8:
        mind.hunting = False
    elif not mind.hunting:
        # Start hunting on a cheap nearby meal, or unconditionally when hungry.
        reach = 6 if vitals["food"] > 4 else None
        mind.hunting = _remembered_cow_step(obs, mind, max_distance=reach) is not None
    if mind.hunting:
        # Sticky until fed, so the chase cannot oscillate at a range boundary.
        cow_step = _remembered_cow_step(obs, mind)
        if cow_step is not None:
            return cow_step, NavigationDestinationItems.NOT_APPLICABLE, "food is low; eating a cow"
        mind.hunting = False
    if vitals["energy"] <= 3 or (vitals["sleeping"] and vitals["energy"] < 9):
        return ActionType.sleep, NavigationDestinationItems.NOT_APPLICABLE, "energy is low; sleeping"
    return None


class ScriptedBackend:
    """Deterministic rule policy emitting schema-valid responses.

    The oracle plans via prerequisite lookups (it never attempts a do/place/
    make whose requirements are unmet); the "basic" baseline variant is
    deliberately prerequisite-blind and forgets beyond a 20-action log.
    """

    deterministic = True

    def __init__(self, tree: Optional[TechTree] = None):
        self.tree = tree or default_tree()
        self._minds: Dict[int, _Mind] = {}

    def mind(self, agent_id: int) -> _Mind:
        if agent_id not in self._minds:
            self._minds[agent_id] = _Mind()
        return self._minds[agent_id]

    def note_outcome(self, agent_id: int, outcome: ActionOutcome) -> None:
        mind = self.mind(agent_id)
        kind = outcome.action.kind
        if kind == mind.last_action:
            mind.repeats += 1
        else:
            mind.repeats = 0
        mind.last_action = kind
        mind.last_target = outcome.action.target
        mind.last_result = outcome.result
        mind.action_log.append(kind)

    def decide(self, bundle: PromptBundle, stwm: WorkingMemory, inbox: Inbox) -> ResponseEvent:
        obs = stwm.sensory
        mind = self.mind(bundle.agent_id)
        mind.absorb(obs)
        for message in inbox.messages:
            if message.resources.get("stone_pickaxe", 0) >= 1:
                mind.team_stone_pickaxe = True
            for kind in message.status.get("sightings", {}):
                mind.reported.add(kind)

        if bundle.baseline == BaselineKind.BASIC:
            return self._decide_basic(bundle, obs, mind)
        return self._decide_oracle(bundle, obs, inbox, mind)

    # -- oracle ------------------------------------------------------------

    def _phase_goal(self, obs: Observation, mind: _Mind) -> str:
        """The blocked tech-tree node this agent is working toward (declared goal)."""
        inv = obs.inventory
        know_table = "table" in mind.seen or "table" in mind.reported or obs.facing == "table"
        know_furnace = ("furnace" in mind.seen or "furnace" in mind.reported
                        or obs.facing == "furnace")
        if inv.get("wood_pickaxe", 0) < 1:
            return "make_wood_pickaxe" if know_table else "place_table"
        if inv.get("stone_pickaxe", 0) < 1:
            return "make_stone_pickaxe" if know_table else "place_table"
        if inv.get("iron_pickaxe", 0) < 1:
            return "make_iron_pickaxe" if know_furnace else "place_furnace"
        return "collect_diamond"

    def _tech_goal(self, obs: Observation, mind: _Mind,
                   extra: Optional[Set[str]] = None) -> str:
        """Lowest unmet tech-tree goal, with gathering goals named explicitly.

        Items in `extra` are gathered one unit beyond own needs: a teammate
        asked for them and the surplus gets handed over at the next meeting.
        """
        inv = obs.inventory
        extra = extra or set()

        def has(item, k=1):
            if item in extra:
                k += 1
            return inv.get(item, 0) >= k

        def first_missing(needs):
            for item, goal in needs:
                if not has(item):
                    return goal
            return None

        know_table = "table" in mind.seen or "table" in mind.reported or obs.facing == "table"
        know_furnace = ("furnace" in mind.seen or "furnace" in mind.reported
                        or obs.facing == "furnace")

        if not has("wood_pickaxe"):
            if know_table:
                return "make_wood_pickaxe" if has("wood") else "collect_wood"
            return "place_table" if has("wood", 2) else "collect_wood"
        if not has("stone_pickaxe"):
            if not know_table:
                return "place_table" if has("wood", 2) else "collect_wood"
            missing = first_missing([("stone", "collect_stone"), ("wood", "collect_wood")])
            return missing or "make_stone_pickaxe"
        if not has("iron_pickaxe"):
            if not know_furnace:
                return "place_furnace" if has("stone", 4) else "collect_stone"
            missing = first_missing([("coal", "collect_coal"), ("iron", "collect_iron"),
                                     ("wood", "collect_wood")])
            return missing or "make_iron_pickaxe"
        return "collect_diamond"

    def _goal_action(self, goal: str, obs: Observation) -> Tuple[ActionType, NavigationDestinationItems]:
        """Next concrete step toward the goal: gather a missing input, walk, or act."""
        inv = obs.inventory

        def collect(material: str) -> Tuple[ActionType, NavigationDestinationItems]:
            if obs.facing == material:
                return ActionType.do, NavigationDestinationItems.NOT_APPLICABLE
            return ActionType.Navigator, NavigationDestinationItems(material)

        def act_at(station: str, act: ActionType) -> Tuple[ActionType, NavigationDestinationItems]:
            if obs.facing == station:
                return act, NavigationDestinationItems.NOT_APPLICABLE
            return ActionType.Navigator, NavigationDestinationItems(station)

        if goal == "place_table":
            if inv.get("wood", 0) >= 2:
                return act_at("grass", ActionType.place_table)
            return collect("tree")
        if goal == "make_wood_pickaxe":
            if inv.get("wood", 0) >= 1:
                return act_at("table", ActionType.make_wood_pickaxe)
            return collect("tree")
        if goal == "make_stone_pickaxe":
            if inv.get("stone", 0) < 1:
                return collect("stone")
            if inv.get("wood", 0) < 1:
                return collect("tree")
            return act_at("table", ActionType.make_stone_pickaxe)
        if goal == "place_furnace":
            if inv.get("stone", 0) >= 4:
                return act_at("grass", ActionType.place_furnace)
            return collect("stone")
        if goal == "make_iron_pickaxe":
            if inv.get("coal", 0) < 1:
                return collect("coal")
            if inv.get("iron", 0) < 1:
                return collect("iron")
            if inv.get("wood", 0) < 1:
                return collect("tree")
            return act_at("furnace", ActionType.make_iron_pickaxe)
        if goal in ("collect_wood", "collect_stone", "collect_coal", "collect_iron",
                    "collect_diamond"):
            return collect(_GOAL_ACTION[goal][0])
        return ActionType.noop, NavigationDestinationItems.NOT_APPLICABLE

    def _decide_oracle(self, bundle: PromptBundle, obs: Observation, inbox: Inbox,
                       mind: _Mind) -> ResponseEvent:
        agent_id, n = bundle.agent_id, bundle.n_agents
        inv = obs.inventory
        vitals = obs.vitals
        # A pair cannot spare a full-time scout; the dedicated seeker role
        # only pays for itself in teams of three or more.
        seeker_focused = (bundle.baseline == BaselineKind.MEM_COMM and n > 2
                          and is_diamond_seeker(agent_id, n) and mind.team_stone_pickaxe)

        activity = self._tech_goal(obs, mind)
        declared = activity
        if (seeker_focused and "diamond" not in mind.seen
                and "diamond" not in mind.reported):
            # The designated seeker scouts for a diamond first; the tool chain
            # resumes once one is located by anyone.
            activity = declared = "collect_diamond"
        planned, planned_nav = self._goal_action(activity, obs)

        final = planned
        final_nav = planned_nav
        share_to = -1
        share_item = ShareableItems.NOT_APPLICABLE
        reason = f"pursuing {declared} via {activity}"

        # Cooperative sharing: serve the first visible, in-range help target
        # whose request this agent can satisfy without breaking its own phase.
        if (bundle.baseline == BaselineKind.MEM_COMM and not seeker_focused):
            by_sender = _latest_requests(inbox)
            visible = {aid: (ax, ay) for aid, ax, ay in obs.visible_agents}
            for target in help_targets(agent_id, n):
                message = by_sender.get(target)
                if message is None or message.assistance_request is None:
                    continue
                item = message.assistance_request["item"]
                keep = 2 if item.endswith("_pickaxe") else 1
                if inv.get(item, 0) < keep or target not in visible:
                    continue
                tx, ty = visible[target]
                if abs(tx - obs.position.x) + abs(ty - obs.position.y) > 6:
                    continue
                final = ActionType.share
                final_nav = NavigationDestinationItems.NOT_APPLICABLE
                share_to = target
                share_item = ShareableItems(item)
                declared = "share"
                reason = f"agent {target} requested {item}"
                break

        # Survival overrides, highest urgency first.
        survival = _survival_override(obs, mind)
        if survival is not None:
            final, final_nav, reason = survival
            share_to, share_item = -1, ShareableItems.NOT_APPLICABLE

        return self._build_event(bundle, obs, mind, inbox, declared, planned, final,
                                 final_nav, share_to, share_item, reason)

    # -- degraded "basic" surrogate -----------------------------------------

    def _decide_basic(self, bundle: PromptBundle, obs: Observation, mind: _Mind) -> ResponseEvent:
        inv = obs.inventory
        vitals = obs.vitals
        log = list(mind.action_log)

        def has(item, k=1):
            return inv.get(item, 0) >= k

        def dance(attempt: ActionType, station: str) -> Tuple[ActionType, NavigationDestinationItems]:
            # Prerequisite-blind retry: grind the same attempt three times
            # before conceding one navigation step toward the station.
            if log[-3:] == [attempt.value] * 3:
                return ActionType.Navigator, NavigationDestinationItems(station)
            return attempt, NavigationDestinationItems.NOT_APPLICABLE

        # Structure memory fades fast: only very recent placements are
        # remembered, so old stations get rebuilt (wasting time and material).
        remembers_table = "place_table" in log[-12:]
        remembers_furnace = "place_furnace" in log[-12:]

        goal = "collect_wood"
        final = ActionType.noop
        final_nav = NavigationDestinationItems.NOT_APPLICABLE

        if not has("wood_pickaxe"):
            if remembers_table and has("wood"):
                goal = "make_wood_pickaxe"
                final, final_nav = dance(ActionType.make_wood_pickaxe, "table")
            elif has("wood", 2):
                goal = "place_table"
                final, final_nav = dance(ActionType.place_table, "grass")
            else:
                goal = "collect_wood"
                final, final_nav = ((ActionType.do, final_nav) if obs.facing == "tree"
                                    else (ActionType.Navigator, NavigationDestinationItems.TREE))
        elif not has("stone_pickaxe"):
            if not has("stone"):
                goal = "collect_stone"
                final, final_nav = ((ActionType.do, final_nav) if obs.facing == "stone"
                                    else (ActionType.Navigator, NavigationDestinationItems.STONE))
            elif not has("wood"):
                goal = "collect_wood"
                final, final_nav = ((ActionType.do, final_nav) if obs.facing == "tree"
                                    else (ActionType.Navigator, NavigationDestinationItems.TREE))
            elif remembers_table:
                goal = "make_stone_pickaxe"
                final, final_nav = dance(ActionType.make_stone_pickaxe, "table")
            elif has("wood", 2):
                goal = "place_table"  # forgot the old table; wastes wood on a new one
                final, final_nav = dance(ActionType.place_table, "grass")
            else:
                goal = "collect_wood"
                final, final_nav = ((ActionType.do, final_nav) if obs.facing == "tree"
                                    else (ActionType.Navigator, NavigationDestinationItems.TREE))
        elif not has("iron_pickaxe"):
            if remembers_furnace:
                if not has("coal"):
                    goal = "collect_coal"
                    final, final_nav = ((ActionType.do, final_nav) if obs.facing == "coal"
                                        else (ActionType.Navigator, NavigationDestinationItems.COAL))
                elif not has("iron"):
                    goal = "collect_iron"
                    final, final_nav = ((ActionType.do, final_nav) if obs.facing == "iron"
                                        else (ActionType.Navigator, NavigationDestinationItems.IRON))
                elif not has("wood"):
                    goal = "collect_wood"
                    final, final_nav = ((ActionType.do, final_nav) if obs.facing == "tree"
                                        else (ActionType.Navigator, NavigationDestinationItems.TREE))
                else:
                    goal = "make_iron_pickaxe"
                    final, final_nav = dance(ActionType.make_iron_pickaxe, "furnace")
            elif has("stone", 4):
                goal = "place_furnace"
                final, final_nav = dance(ActionType.place_furnace, "grass")
            else:
                goal = "collect_stone"
                final, final_nav = ((ActionType.do, final_nav) if obs.facing == "stone"
                                    else (ActionType.Navigator, NavigationDestinationItems.STONE))
        else:
            goal = "collect_diamond"
            if obs.facing == "diamond":
                final, final_nav = ActionType.do, final_nav
            elif any(t == "diamond" for row in obs.window for t in row):
                final, final_nav = ActionType.Navigator, NavigationDestinationItems.DIAMOND
            else:
                # No memory system, no systematic excavation: wander in a
                # fixed rotation, drifting back to the rock faces now and
                # then, and hope a diamond becomes visible.
                slot = (obs.tick // 12) % 5
                if slot == 4:
                    final, final_nav = ActionType.Navigator, NavigationDestinationItems.STONE
                else:
                    direction = ("move_up", "move_right", "move_down", "move_left")[slot]
                    final, final_nav = ActionType(direction), NavigationDestinationItems.NOT_APPLICABLE

        planned = final
        reason = f"attempting {goal}"

        # Losing track: every third step the agent just repeats its previous
        # action, the repetition failure the full memory system prevents.
        if obs.tick % 2 == 1:
            if mind.last_action == "navigate" and mind.last_target:
                final = ActionType.Navigator
                final_nav = NavigationDestinationItems(mind.last_target)
                reason = "repeated the previous action"
            elif mind.last_action in ActionType._value2member_map_ and mind.last_action != "share":
                final = ActionType(mind.last_action)
                final_nav = NavigationDestinationItems.NOT_APPLICABLE
                reason = "repeated the previous action"

        # Window-only survival: without the memory system, the agent reacts to
        # thirst/hunger late and only to what it can currently see.
        vitals = obs.vitals
        if vitals["drink"] <= 2:
            final, final_nav = ((ActionType.do, NavigationDestinationItems.NOT_APPLICABLE)
                                if obs.facing == "water"
                                else (ActionType.Navigator, NavigationDestinationItems.WATER))
            reason = "drink is low; collecting water"
        elif vitals["food"] <= 3:
            cow_step = _visible_cow_step(obs)
            if cow_step is not None:
                final, final_nav = cow_step, NavigationDestinationItems.NOT_APPLICABLE
                reason = "food is low; eating a visible cow"
        elif vitals["energy"] <= 3 or (vitals["sleeping"] and vitals["energy"] < 9):
            final, final_nav = ActionType.sleep, NavigationDestinationItems.NOT_APPLICABLE
            reason = "energy is low; sleeping"

        return self._build_event(bundle, obs, mind, Inbox(bundle.agent_id), goal, planned,
                                 final, final_nav, -1, ShareableItems.NOT_APPLICABLE, reason)

    # -- response assembly ---------------------------------------------------

    def _build_event(self, bundle: PromptBundle, obs: Observation, mind: _Mind, inbox: Inbox,
                     goal: str, planned: ActionType, final: ActionType,
                     final_nav: NavigationDestinationItems, share_to: int,
                     share_item: ShareableItems, reason: str) -> ResponseEvent:
        agent_id, n = bundle.agent_id, bundle.n_agents
        inv = obs.inventory

        facing_material = (MaterialType(obs.facing) if obs.facing in _MATERIAL_VALUES
                           else MaterialType.GRASS)
        vision_values = sorted({t for row in obs.window for t in row if t in _MATERIAL_VALUES})
        vision = [MaterialType(v) for v in vision_values]

        inventory_counts = [InventoryItemsCount(item=InventoryItems(k), count=v)
                            for k, v in sorted(inv.items()) if v > 0]

        if goal == "share":
            ltg = LongTermGoalType.HELP_AGENT
        elif not inv.get("wood_pickaxe"):
            ltg = _PHASE_LTG["wood_pickaxe"]
        elif not inv.get("stone_pickaxe"):
            ltg = _PHASE_LTG["stone_pickaxe"]
        elif not inv.get("iron_pickaxe"):
            ltg = _PHASE_LTG["iron_pickaxe"]
        else:
            ltg = _PHASE_LTG["diamond"]

        if goal in _GOAL_ACTION:
            task = goal
            unmet = self.tree.unmet_requirements(inv, obs.facing, task)
        else:
            unmet = []
        prereq_status = ResultType.SUCCESS if not unmet else ResultType.FAILURE
        prereq_text = ", ".join(unmet) if unmet else "all requirements met"

        by_sender = _latest_requests(inbox)
        help_target = agent_id - 1 if (bundle.baseline == BaselineKind.MEM_COMM and agent_id > 1) else -1
        need = ShareableItems.NOT_APPLICABLE
        can_help = ResultType.FAILURE
        help_method = "no help target"
        if help_target != -1:
            message = by_sender.get(help_target)
            if message is not None and message.assistance_request is not None:
                need = ShareableItems(message.assistance_request["item"])
                have = inv.get(need.value, 0)
                keep = 2 if need.value.endswith("_pickaxe") else 1
                can_help = ResultType.SUCCESS if have >= keep else ResultType.FAILURE
                help_method = f"hand over {need.value} when adjacent"
            else:
                help_method = f"watch agent {help_target}'s requests"
                can_help = ResultType.IN_PROGRESS
        helper = -1
        for message in inbox.messages:
            if message.collaboration.target_agent_to_help == agent_id:
                helper = message.sender
                break
        helped_method = f"agent {helper} offered help" if helper != -1 else "no incoming help"
        change = ("sharing before resuming own goal" if final == ActionType.share
                  else "no change to own plan")

        collaboration = Collaboration(
            target_agent_to_help=help_target,
            target_agent_need=need,
            help_method=help_method,
            can_help_now=can_help,
            being_helped_by_agent=helper,
            help_method_by_agent=helped_method,
            change_in_plan=change,
        )

        reflection = Reflection(
            vision=vision,
            last_action=ActionType(mind.last_action) if mind.last_action in ActionType._value2member_map_
            else ActionType.noop,
            last_action_result=ResultType(mind.last_result),
            last_action_result_reflection=f"previous action ended with {mind.last_result}",
            last_action_repeated_reflection=(f"repeated {mind.repeats} times while working on {goal}"
                                             if mind.repeats else "not repeated"),
        )

        goal_model = Goal(
            ultimate_goal=LongTermGoalType.COLLECT_DIAMOND,
            long_term_goal=ltg,
            long_term_goal_subgoals=f"progress the tool chain toward {ltg.value}",
            long_term_goal_progress=GoalType(goal),
            long_term_goal_status=ResultType.IN_PROGRESS,
            current_goal=GoalType(goal),
            current_goal_reason=reason,
            current_goal_status=ResultType.SUCCESS if not unmet and goal in _GOAL_ACTION
            else ResultType.IN_PROGRESS,
        )

        action_model = NextAction(
            next_action=planned,
            next_action_reason=f"planned step for {goal}",
            next_action_prerequisites_status=prereq_status,
            next_action_prerequisites=prereq_text,
            final_next_action=final,
            final_next_action_reason=reason,
            final_target_material_to_collect=final_nav,
            final_target_material_to_share=share_item,
            final_target_agent_id=share_to,
        )

        summary = (f"At t={obs.tick} worked on {goal} toward {ltg.value}; chose "
                   f"{final.value} because {reason}. Planned to continue the hierarchy next.")

        return ResponseEvent(
            episode_number=bundle.episode_number,
            timestep=obs.tick,
            past_events=f"worked toward {ltg.value}; last action {mind.last_action} "
                        f"({mind.last_result})",
            current_facing_direction=facing_material,
            current_inventory=inventory_counts,
            collaboration=collaboration,
            reflection=reflection,
            goal=goal_model,
            action=action_model,
            summary=summary,
        )


# ---------------------------------------------------------------------------
# Remote backend


@dataclass(frozen=True)
class RemoteEndpointConfig:
    url: str                       # base URL of a chat-completions-compatible API
    model: str
    temperature: float = 0.0
    timeout: float = 60.0
    max_attempts: int = 3
    api_key_env: str = "GRIDCRAFT_API_KEY"  # key comes only from the environment


class RemoteBackend:
    """Planner backed by a chat-completions endpoint with schema-constrained decoding."""

    deterministic = False

    def __init__(self, config: RemoteEndpointConfig, transport: Optional[httpx.BaseTransport] = None):
        self.config = config
        headers = {}
        key = os.environ.get(config.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        self._client = httpx.Client(timeout=config.timeout, headers=headers, transport=transport)

    def note_outcome(self, agent_id: int, outcome: ActionOutcome) -> None:
        pass

    def decide(self, bundle: PromptBundle, stwm: WorkingMemory, inbox: Inbox) -> ResponseEvent:
        system = "\n".join([
            bundle.environment_description,
            "",
            bundle.role_directive,
            "Respond with exactly one JSON document matching the provided schema.",
        ])
        user = "\n".join([
            "== Working memory ==", bundle.working_memory_rendering,
            "== Messages ==", bundle.inbox_rendering,
        ])
        messages = [
            {"role": "system", "content": system},
            {"role": "user", "content": user},
        ]
        response_format = {
            "type": "json_schema",
            "json_schema": {
                "name": "response_event",
                "schema": json.loads(bundle.schema),
            },
        }
        last_error: Optional[Exception] = None
        for _ in range(self.config.max_attempts):
            try:
                reply = self._client.post(
                    self.config.url.rstrip("/") + "/chat/completions",
                    json={
                        "model": self.config.model,
                        "temperature": self.config.temperature,
                        "messages": messages,
                        "response_format": response_format,
                    },
                )
                reply.raise_for_status()
                content = reply.json()["choices"][0]["message"]["content"]
            except (httpx.HTTPError, KeyError, IndexError, ValueError) as exc:
                raise BackendError(f"endpoint request failed: {exc}") from exc
            try:
                return parse_response(content)
            except SchemaParseError as exc:
                last_error = exc
                messages = messages + [
                    {"role": "assistant", "content": content},
                    {"role": "user",
                     "content": f"The previous reply was invalid: {exc}. "
                                "Reply again with one valid JSON document."},
                ]
        raise BackendError(f"no valid response after {self.config.max_attempts} attempts: {last_error}")

    def close(self) -> None:
        self._client.close()


# ---------------------------------------------------------------------------
# The per-agent tick


def run_tick(agent_id: int, state: WorldState, graph: Optional[KnowledgeGraph], inbox: Inbox,
             backend, baseline: BaselineKind, tree: Optional[TechTree] = None,
             episode_number: int = 1, action_log: Optional[List[str]] = None,
             ) -> Tuple[Action, Message, Experience]:
    """observe -> assemble STWM -> prompt -> decide -> extract action + message.

    The returned Experience carries the pre-stage and the response; the caller
    attaches the resolved ActionOutcome before consolidation.
    """
    tree = tree or default_tree()
    agent = state.agent_by_id(agent_id)
    if not agent.alive:
        raise NotAliveError(f"agent {agent_id} is dead")
    if inbox:
        # Teammates' reported sightings become part of this agent's map
        # knowledge, so navigation can head for them directly.
        for message in inbox.messages:
            for pos in message.status.get("sightings", {}).values():
                agent.discovered.add(Position(pos[0], pos[1]))
    obs = observe(state, agent_id, inbox.messages if inbox else [])
    stwm = assemble_stwm(obs, agent, tree,
                         graph if baseline != BaselineKind.BASIC else None)
    bundle = build_prompt(agent_id, stwm, inbox, baseline, len(state.agents),
                          action_log=action_log, episode_number=episode_number, tree=tree)
    event = backend.decide(bundle, stwm, inbox)
    action = extract_action(event, len(state.agents))
    message = compose_message(agent_id, obs, event, tree)
    if baseline != BaselineKind.MEM_COMM:
        message.deliverable = False
    experience = Experience(agent=agent_id, tick=obs.tick,
                            pre_stage=PreStage.from_observation(obs), response=event)
    return action, message, experience
