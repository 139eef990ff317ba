"""Structured reasoning output: the response document codec.

Defines the wire schema every planner reply must follow (enums, nested
components, canonical field order), parsing with precise error naming,
canonical serialization, and the bridge from a validated response to an
environment action. The document shape is the contract between this package
and any LLM endpoint, so spellings and field order are pinned.
"""

from __future__ import annotations

import json
import logging
from enum import Enum
from typing import List

from pydantic import AliasChoices, BaseModel, ConfigDict, Field, ValidationError

from .errors import IntentError, SchemaParseError
from .world import Action

logger = logging.getLogger("gridcraft.schema")


class ResultType(str, Enum):
    SUCCESS = "success"
    FAILURE = "failure"
    IN_PROGRESS = "in_progress"


class ActionType(str, Enum):
    noop = "noop"
    move_left = "move_left"
    move_right = "move_right"
    move_up = "move_up"
    move_down = "move_down"
    do = "do"
    sleep = "sleep"
    place_stone = "place_stone"
    place_table = "place_table"
    place_furnace = "place_furnace"
    place_plant = "place_plant"
    make_wood_pickaxe = "make_wood_pickaxe"
    make_stone_pickaxe = "make_stone_pickaxe"
    make_iron_pickaxe = "make_iron_pickaxe"
    Navigator = "Navigator"
    share = "share"


class GoalType(str, Enum):
    COLLECT_WOOD = "collect_wood"
    MAKE_WOOD_PICKAXE = "make_wood_pickaxe"
    COLLECT_STONE = "collect_stone"
    MAKE_STONE_PICKAXE = "make_stone_pickaxe"
    COLLECT_IRON = "collect_iron"
    MAKE_IRON_PICKAXE = "make_iron_pickaxe"
    COLLECT_DIAMOND = "collect_diamond"
    PLACE_TABLE = "place_table"
    PLACE_FURNACE = "place_furnace"
    COLLECT_COAL = "collect_coal"
    SHARE = "share"


class LongTermGoalType(str, Enum):
    MAKE_WOOD_PICKAXE = "make_wood_pickaxe"
    MAKE_STONE_PICKAXE = "make_stone_pickaxe"
    MAKE_IRON_PICKAXE = "make_iron_pickaxe"
    PLACE_TABLE = "place_table"
    PLACE_FURNACE = "place_furnace"
    COLLECT_DIAMOND = "collect_diamond"
    HELP_AGENT = "help_agent"


class MaterialType(str, Enum):
    TABLE = "table"
    FURNACE = "furnace"
    GRASS = "grass"
    SAND = "sand"
    LAVA = "lava"
    TREE = "tree"
    WATER = "water"
    STONE = "stone"
    COAL = "coal"
    IRON = "iron"
    DIAMOND = "diamond"


class NavigationDestinationItems(str, Enum):
    TREE = "tree"
    WATER = "water"
    STONE = "stone"
    IRON = "iron"
    DIAMOND = "diamond"
    COAL = "coal"
    GRASS = "grass"
    TABLE = "table"
    FURNACE = "furnace"
    NOT_APPLICABLE = "not_applicable"


class ShareableItems(str, Enum):
    WOOD = "wood"
    STONE = "stone"
    COAL = "coal"
    IRON = "iron"
    DIAMOND = "diamond"
    WOOD_PICKAXE = "wood_pickaxe"
    STONE_PICKAXE = "stone_pickaxe"
    IRON_PICKAXE = "iron_pickaxe"
    NOT_APPLICABLE = "not_applicable"


class InventoryItems(str, Enum):
    WOOD = "wood"
    STONE = "stone"
    COAL = "coal"
    IRON = "iron"
    DIAMOND = "diamond"
    WOOD_PICKAXE = "wood_pickaxe"
    STONE_PICKAXE = "stone_pickaxe"
    IRON_PICKAXE = "iron_pickaxe"


_MODEL_CONFIG = ConfigDict(extra="ignore", populate_by_name=True)


class Reflection(BaseModel):
    model_config = _MODEL_CONFIG

    vision: List[MaterialType] = Field(description="Materials currently visible in the view window.")
    last_action: ActionType
    last_action_result: ResultType
    last_action_result_reflection: str
    last_action_repeated_reflection: str = Field(
        description="Whether the previous action was repeated, and why.")


class Goal(BaseModel):
    model_config = _MODEL_CONFIG

    ultimate_goal: LongTermGoalType = Field(description="The end objective of the episode.")
    long_term_goal: LongTermGoalType = Field(
        description="The milestone currently being worked toward.")
    long_term_goal_subgoals: str = Field(description="Sub-steps remaining for the milestone.")
    long_term_goal_progress: GoalType = Field(description="The sub-step reached so far.")
    long_term_goal_status: ResultType
    current_goal: GoalType = Field(description="The goal being pursued this step.")
    current_goal_reason: str
    current_goal_status: ResultType


class InventoryItemsCount(BaseModel):
    model_config = _MODEL_CONFIG

    item: InventoryItems
    count: int = Field(gt=0)


class NextAction(BaseModel):
    model_config = _MODEL_CONFIG

    next_action: ActionType = Field(description="The action planned before checking requirements.")
    next_action_reason: str
    next_action_prerequisites_status: ResultType = Field(
        description="Whether the planned action's requirements are met.")
    next_action_prerequisites: str = Field(description="Requirements still missing, if any.")
    final_next_action: ActionType = Field(description="The action actually chosen.")
    final_next_action_reason: str
    final_target_material_to_collect: NavigationDestinationItems = Field(
        description="Navigation destination when the chosen action is Navigator.")
    final_target_material_to_share: ShareableItems = Field(
        description="Item to hand over when the chosen action is share.")
    final_target_agent_id: int = Field(
        description="Receiving agent id for share, or -1 when not sharing.")


class Collaboration(BaseModel):
    model_config = _MODEL_CONFIG

    target_agent_to_help: int = Field(description="Agent id this agent intends to help, or -1.")
    target_agent_need: ShareableItems = Field(description="What that agent is missing.")
    help_method: str = Field(description="How this agent can help.")
    can_help_now: ResultType = Field(description="Whether the help is possible right now.")
    being_helped_by_agent: int = Field(description="Agent id currently helping this agent, or -1.")
    help_method_by_agent: str = Field(description="What the helper is doing.")
    change_in_plan: str = Field(description="How incoming help changes this agent's plan.")


class ResponseEvent(BaseModel):
    model_config = _MODEL_CONFIG

    episode_number: int = Field(
        validation_alias=AliasChoices("episode_number", "epsiode_number"),
        description="Index of the current episode.")
    timestep: int = Field(description="Current timestep within the episode.")
    past_events: str = Field(description="Brief recap of the episode so far.")
    current_facing_direction: MaterialType
    current_inventory: List[InventoryItemsCount] = Field(
        description="Held items with count greater than zero.")
    collaboration: Collaboration
    reflection: Reflection
    goal: Goal
    action: NextAction
    summary: str = Field(
        description="Past-tense note of this step's goal, events, and plan for future retrieval.")


_COMPONENT_MODELS = {
    "collaboration": Collaboration,
    "reflection": Reflection,
    "goal": Goal,
    "action": NextAction,
}


_SCHEMA_DOCUMENT: str = ""


def schema_document() -> str:
    """Machine-readable JSON Schema of the response document; byte-stable."""
    global _SCHEMA_DOCUMENT
    if not _SCHEMA_DOCUMENT:
        _SCHEMA_DOCUMENT = json.dumps(ResponseEvent.model_json_schema(),
                                      indent=2, sort_keys=True)
    return _SCHEMA_DOCUMENT


def serialize_response(event: ResponseEvent) -> str:
    """Canonical document: declaration-order fields, enum spellings, 2-space indent."""
    return json.dumps(event.model_dump(mode="json"), indent=2)


def _warn_extras(data: dict) -> None:
    known_top = set(ResponseEvent.model_fields) | {"epsiode_number"}
    for key in data:
        if key not in known_top:
            logger.warning("ignoring unknown response field: %s", key)
    for name, model in _COMPONENT_MODELS.items():
        sub = data.get(name)
        if isinstance(sub, dict):
            for key in sub:
                if key not in model.model_fields:
                    logger.warning("ignoring unknown response field: %s.%s", name, key)


def parse_response(document: str) -> ResponseEvent:
    """Parse and validate a response document.

    Unknown extra fields are dropped with a warning; missing fields, invalid
    enum values, and ill-typed ids raise SchemaParseError naming the field.
    """
    try:
        data = json.loads(document)
    except json.JSONDecodeError as exc:
        raise SchemaParseError(f"response is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise SchemaParseError("response document must be a JSON object")
    _warn_extras(data)
    try:
        return ResponseEvent.model_validate(data)
    except ValidationError as exc:
        first = exc.errors()[0]
        path = ".".join(str(p) for p in first["loc"])
        offending = first.get("input")
        raise SchemaParseError(
            f"invalid field {path!r}: {first['msg']} (got {offending!r})") from exc


def extract_action(event: ResponseEvent, n_agents: int) -> Action:
    """Bridge the validated response to an environment action."""
    final = event.action.final_next_action
    if final == ActionType.Navigator:
        target = event.action.final_target_material_to_collect
        if target == NavigationDestinationItems.NOT_APPLICABLE:
            raise IntentError("Navigator chosen but no destination given")
        return Action.navigate(target.value)
    if final == ActionType.share:
        target_id = event.action.final_target_agent_id
        item = event.action.final_target_material_to_share
        if target_id == -1 or item == ShareableItems.NOT_APPLICABLE:
            raise IntentError("share chosen but target agent or item missing")
        if not 1 <= target_id <= n_agents:
            raise IntentError(f"share target {target_id} outside 1..{n_agents}")
        return Action.share(target_id, item.value)
    return Action(final.value)


def validate_collaboration(event: ResponseEvent, agent: int, n_agents: int) -> List[str]:
    """Advisory warnings when collaboration intent strays from the help protocol."""
    warnings: List[str] = []
    target = event.collaboration.target_agent_to_help
    if target != -1 and not 1 <= target <= n_agents:
        warnings.append(f"target_agent_to_help {target} does not exist (n={n_agents})")
    elif target == agent:
        warnings.append("agent declares it is helping itself")
    if agent > 1 and target not in (agent - 1, 1):
        warnings.append(
            f"agent {agent} helping {target} deviates from the hierarchy (expected {agent - 1} or 1)")
    helper = event.collaboration.being_helped_by_agent
    if helper != -1 and not 1 <= helper <= n_agents:
        warnings.append(f"being_helped_by_agent {helper} does not exist (n={n_agents})")
    return warnings
