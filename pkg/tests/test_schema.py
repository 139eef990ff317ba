"""Wire-format codec: enums, parsing, round-trips, action extraction."""

import json
import logging
import random

import pytest

from gridcraft.errors import IntentError, SchemaParseError
from gridcraft.schema import (
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
    serialize_response,
    validate_collaboration,
)


def make_event(**overrides) -> ResponseEvent:
    base = dict(
        episode_number=1,
        timestep=4,
        past_events="chopped wood near spawn",
        current_facing_direction=MaterialType.TREE,
        current_inventory=[InventoryItemsCount(item=InventoryItems.WOOD, count=2)],
        collaboration=Collaboration(
            target_agent_to_help=-1,
            target_agent_need=ShareableItems.NOT_APPLICABLE,
            help_method="none",
            can_help_now=ResultType.FAILURE,
            being_helped_by_agent=-1,
            help_method_by_agent="none",
            change_in_plan="none",
        ),
        reflection=Reflection(
            vision=[MaterialType.GRASS, MaterialType.TREE],
            last_action=ActionType.do,
            last_action_result=ResultType.SUCCESS,
            last_action_result_reflection="collected wood",
            last_action_repeated_reflection="not repeated",
        ),
        goal=Goal(
            ultimate_goal=LongTermGoalType.COLLECT_DIAMOND,
            long_term_goal=LongTermGoalType.MAKE_WOOD_PICKAXE,
            long_term_goal_subgoals="chop wood, place table",
            long_term_goal_progress=GoalType.COLLECT_WOOD,
            long_term_goal_status=ResultType.IN_PROGRESS,
            current_goal=GoalType.COLLECT_WOOD,
            current_goal_reason="need wood for the table",
            current_goal_status=ResultType.IN_PROGRESS,
        ),
        action=NextAction(
            next_action=ActionType.do,
            next_action_reason="tree ahead",
            next_action_prerequisites_status=ResultType.SUCCESS,
            next_action_prerequisites="all requirements met",
            final_next_action=ActionType.do,
            final_next_action_reason="tree ahead",
            final_target_material_to_collect=NavigationDestinationItems.NOT_APPLICABLE,
            final_target_material_to_share=ShareableItems.NOT_APPLICABLE,
            final_target_agent_id=-1,
        ),
        summary="Chopped wood; planned to place a table next.",
    )
    base.update(overrides)
    return ResponseEvent(**base)


# ---------------------------------------------------------------------------
# Enums


def test_action_type_has_all_sixteen_values():
    values = [a.value for a in ActionType]
    assert len(values) == 16
    assert "Navigator" in values and "share" in values
    assert values[0] == "noop"


def test_result_type_values():
    assert {r.value for r in ResultType} == {"success", "failure", "in_progress"}


def test_material_and_item_enums():
    assert len(MaterialType) == 11
    assert {m.value for m in MaterialType} >= {"table", "furnace", "lava", "diamond"}
    assert NavigationDestinationItems.NOT_APPLICABLE.value == "not_applicable"
    assert len(NavigationDestinationItems) == 10
    assert len(ShareableItems) == 9
    assert len(InventoryItems) == 8
    assert len(GoalType) == 11
    assert len(LongTermGoalType) == 7
    assert LongTermGoalType.HELP_AGENT.value == "help_agent"


# ---------------------------------------------------------------------------
# Schema document


def test_schema_document_stable_and_complete():
    a = schema_document()
    b = schema_document()
    assert a == b
    doc = json.loads(a)
    action_enum = doc["$defs"]["ActionType"]["enum"]
    assert len(action_enum) == 16 and "Navigator" in action_enum
    assert doc["$defs"]["ResultType"]["enum"] == ["success", "failure", "in_progress"]


# ---------------------------------------------------------------------------
# Parse / serialize


def test_round_trip_identity():
    event = make_event()
    text = serialize_response(event)
    again = parse_response(text)
    assert again == event
    assert serialize_response(again) == text


def test_canonical_field_order():
    data = json.loads(serialize_response(make_event()))
    assert list(data)[:5] == ["episode_number", "timestep", "past_events",
                              "current_facing_direction", "current_inventory"]
    assert list(data)[5:] == ["collaboration", "reflection", "goal", "action", "summary"]


def test_misspelled_episode_number_accepted():
    data = json.loads(serialize_response(make_event()))
    data["epsiode_number"] = data.pop("episode_number")
    event = parse_response(json.dumps(data))
    assert event.episode_number == 1
    # canonical emission restores the corrected spelling
    assert '"episode_number"' in serialize_response(event)


def test_missing_field_error_names_field():
    data = json.loads(serialize_response(make_event()))
    del data["goal"]["current_goal"]
    with pytest.raises(SchemaParseError) as err:
        parse_response(json.dumps(data))
    assert "current_goal" in str(err.value)


def test_invalid_enum_error_names_value():
    data = json.loads(serialize_response(make_event()))
    data["action"]["final_next_action"] = "fly"
    with pytest.raises(SchemaParseError) as err:
        parse_response(json.dumps(data))
    assert "final_next_action" in str(err.value)
    assert "fly" in str(err.value)


def test_non_integer_id_rejected():
    data = json.loads(serialize_response(make_event()))
    data["action"]["final_target_agent_id"] = "two"
    with pytest.raises(SchemaParseError):
        parse_response(json.dumps(data))


def test_zero_count_inventory_rejected():
    data = json.loads(serialize_response(make_event()))
    data["current_inventory"] = [{"item": "wood", "count": 0}]
    with pytest.raises(SchemaParseError):
        parse_response(json.dumps(data))


def test_unknown_fields_ignored_with_warning(caplog):
    data = json.loads(serialize_response(make_event()))
    data["mood"] = "optimistic"
    data["goal"]["vibes"] = "good"
    with caplog.at_level(logging.WARNING, logger="gridcraft.schema"):
        event = parse_response(json.dumps(data))
    assert event == make_event()
    messages = [rec.getMessage() for rec in caplog.records]
    assert any("mood" in m for m in messages)
    assert any("goal.vibes" in m for m in messages)


def test_not_json_and_non_object_rejected():
    with pytest.raises(SchemaParseError):
        parse_response("not json at all")
    with pytest.raises(SchemaParseError):
        parse_response("[1, 2, 3]")


def test_randomized_round_trips():
    rng = random.Random(0)
    materials = list(MaterialType)
    goals = list(GoalType)
    ltgs = list(LongTermGoalType)
    actions = [a for a in ActionType if a not in (ActionType.Navigator, ActionType.share)]
    for _ in range(150):
        event = make_event(
            episode_number=rng.randint(0, 99),
            timestep=rng.randint(0, 400),
            current_facing_direction=rng.choice(materials),
            goal=Goal(
                ultimate_goal=rng.choice(ltgs),
                long_term_goal=rng.choice(ltgs),
                long_term_goal_subgoals="s",
                long_term_goal_progress=rng.choice(goals),
                long_term_goal_status=rng.choice(list(ResultType)),
                current_goal=rng.choice(goals),
                current_goal_reason="r",
                current_goal_status=rng.choice(list(ResultType)),
            ),
        )
        event.action.final_next_action = rng.choice(actions)
        assert parse_response(serialize_response(event)) == event


# ---------------------------------------------------------------------------
# extract_action


def test_extract_navigator():
    event = make_event()
    event.action.final_next_action = ActionType.Navigator
    event.action.final_target_material_to_collect = NavigationDestinationItems.DIAMOND
    action = extract_action(event, n_agents=2)
    assert action.kind == "navigate" and action.target == "diamond"


def test_extract_share():
    event = make_event()
    event.action.final_next_action = ActionType.share
    event.action.final_target_agent_id = 2
    event.action.final_target_material_to_share = ShareableItems.WOOD_PICKAXE
    action = extract_action(event, n_agents=6)
    assert action.kind == "share" and action.agent == 2 and action.item == "wood_pickaxe"


def test_extract_primitive_verbatim():
    event = make_event()
    event.action.final_next_action = ActionType.place_table
    assert extract_action(event, 1).kind == "place_table"


def test_extract_inconsistent_intents():
    nav_event = make_event()
    nav_event.action.final_next_action = ActionType.Navigator
    nav_event.action.final_target_material_to_collect = NavigationDestinationItems.NOT_APPLICABLE
    with pytest.raises(IntentError):
        extract_action(nav_event, 2)

    share_event = make_event()
    share_event.action.final_next_action = ActionType.share
    share_event.action.final_target_agent_id = -1
    share_event.action.final_target_material_to_share = ShareableItems.WOOD
    with pytest.raises(IntentError):
        extract_action(share_event, 2)

    share_event.action.final_target_agent_id = 9
    with pytest.raises(IntentError):
        extract_action(share_event, 6)


# ---------------------------------------------------------------------------
# validate_collaboration


def test_collaboration_warnings():
    event = make_event()
    event.collaboration.target_agent_to_help = 3
    assert validate_collaboration(event, agent=4, n_agents=6) == []

    event.collaboration.target_agent_to_help = 9
    warnings = validate_collaboration(event, agent=4, n_agents=6)
    assert any("9" in w and "exist" in w for w in warnings)

    event.collaboration.target_agent_to_help = -1
    assert validate_collaboration(event, agent=1, n_agents=6) == []
