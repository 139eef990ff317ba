"""World mechanics: generation, observation, stepping, vitals, transfer, terminal."""

import random

import numpy as np
import pytest

from gridcraft.errors import ContractError, GenerationError, NotAliveError
from gridcraft.world import (
    Action,
    AgentState,
    EpisodeConfig,
    OUT_OF_BOUNDS,
    Position,
    check_prerequisites,
    generate_world,
    observe,
    render_map,
    step,
    terminal_status,
    transfer_item,
    update_vitals,
)

from conftest import world_from_ascii


# ---------------------------------------------------------------------------
# Generation


def test_generation_is_deterministic():
    config = EpisodeConfig(seed=7, n_agents=2)
    a = generate_world(config)
    b = generate_world(config)
    assert np.array_equal(a.grid, b.grid)
    assert a.cows == b.cows
    assert a.digest() == b.digest()


def test_agents_spawn_near_center():
    state = generate_world(EpisodeConfig(seed=3, n_agents=6))
    cx, cy = state.width // 2, state.height // 2
    assert len(state.agents) == 6
    for agent in state.agents:
        assert abs(agent.position.x - cx) + abs(agent.position.y - cy) <= 3
        assert agent.alive
    assert len({a.position for a in state.agents}) == 6


def test_seed_sweep_always_contains_key_resources():
    required = {"tree", "water", "stone", "coal", "iron", "diamond"}
    for seed in range(1, 101):
        state = generate_world(EpisodeConfig(seed=seed))
        present = {state.material_at((x, y))
                   for y in range(state.height) for x in range(state.width)}
        assert required <= present, f"seed {seed} missing {required - present}"


def test_generation_rejects_tiny_maps():
    with pytest.raises(GenerationError):
        generate_world(EpisodeConfig(width=16, height=16))


def test_config_validation():
    with pytest.raises(ContractError):
        EpisodeConfig(n_agents=0)
    with pytest.raises(ContractError):
        EpisodeConfig(max_ticks=0)
    with pytest.raises(ContractError):
        EpisodeConfig(view_width=8)


# ---------------------------------------------------------------------------
# Observation


def test_window_pads_out_of_bounds():
    rows = ["." * 12 for _ in range(10)]
    state = world_from_ascii(rows, agents={1: (0, 0)})
    obs = observe(state, 1)
    assert len(obs.window) == 7 and len(obs.window[0]) == 9
    assert obs.window[0][0] == OUT_OF_BOUNDS
    assert obs.window[3][4] == "grass"  # own cell, centered


def test_facing_token_reports_tree():
    state = world_from_ascii([
        ".....",
        "..T..",
        ".....",
        ".....",
    ], agents={1: (2, 2, "up")})
    obs = observe(state, 1)
    assert obs.facing == "tree"


def test_partial_observability_hides_far_cells():
    rows = ["." * 40 for _ in range(9)]
    rows[4] = "." * 38 + "d."
    state = world_from_ascii(rows, agents={1: (5, 4)})
    obs = observe(state, 1)
    assert all("diamond" != token for row in obs.window for token in row)


def test_observe_updates_discovered_only():
    state = generate_world(EpisodeConfig(seed=5))
    agent = state.agents[0]
    agent.discovered = set()
    before = state.digest()
    obs = observe(state, 1, inbox=["msg"])
    assert obs.inbox == ["msg"]
    assert len(agent.discovered) > 0
    assert state.digest() == before  # digest ignores discovered by design


def test_observe_dead_agent_raises():
    state = generate_world(EpisodeConfig(seed=5))
    state.agents[0].alive = False
    with pytest.raises(NotAliveError):
        observe(state, 1)


def test_cows_and_agents_visible_in_window():
    state = world_from_ascii(["." * 9] * 7, agents={1: (4, 3), 2: (6, 3)},
                             cows=[(2, 3)])
    obs = observe(state, 1)
    assert (2, 6, 3) in obs.visible_agents
    assert (2, 3) in obs.visible_cows


# ---------------------------------------------------------------------------
# Stepping


def test_noop_changes_only_tick_and_vitals():
    state = world_from_ascii(["." * 9] * 7, agents={1: (4, 3)})
    before_grid = state.grid.copy()
    state, outcomes, events = step(state, {1: Action.noop()})
    assert outcomes[0].result == "success"
    assert state.tick == 1
    assert np.array_equal(state.grid, before_grid)
    assert events == []


def test_contested_mineral_goes_to_lowest_id():
    # Agents 2 and 5 both mine the same diamond cell; ids 1,3,4 idle.
    rows = [
        ".........",
        "....d....",
        ".........",
        ".........",
    ]
    agents = {1: (0, 0), 2: (4, 2, "up"), 3: (8, 0), 4: (0, 3), 5: (5, 1, "left")}
    state = world_from_ascii(rows, agents=agents)
    for a in state.agents:
        a.inventory = {"iron_pickaxe": 1}
    actions = {1: Action.noop(), 2: Action("do"), 3: Action.noop(),
               4: Action.noop(), 5: Action("do")}
    state, outcomes, _ = step(state, actions)
    by_agent = {o.agent: o for o in outcomes}
    assert by_agent[2].result == "success"
    assert by_agent[5].result == "failure"
    assert by_agent[5].reason == "target_gone"
    assert state.agents[1].inventory["diamond"] == 1
    assert state.material_at((4, 1)) == "path"


def test_missing_action_for_living_agent_raises():
    state = world_from_ascii(["." * 9] * 7, agents={1: (4, 3), 2: (5, 3)})
    with pytest.raises(ContractError):
        step(state, {1: Action.noop()})


def test_action_for_dead_agent_rejected_with_dead_outcome():
    state = world_from_ascii(["." * 9] * 7, agents={1: (4, 3), 2: (5, 3)})
    state.agents[1].alive = False
    state, outcomes, _ = step(state, {1: Action.noop(), 2: Action.noop()})
    by_agent = {o.agent: o for o in outcomes}
    assert by_agent[2].result == "failure"
    assert by_agent[2].reason == "dead"


def test_malformed_payload_raises():
    state = world_from_ascii(["." * 9] * 7, agents={1: (4, 3)})
    with pytest.raises(ContractError):
        step(state, {1: Action("navigate", target="cheese")})
    with pytest.raises(ContractError):
        step(state, {1: Action("share", agent=9, item="wood")})
    with pytest.raises(ContractError):
        step(state, {1: Action("warp")})


def test_move_turns_then_moves():
    state = world_from_ascii(["." * 9] * 7, agents={1: (4, 3, "up")})
    state, outcomes, _ = step(state, {1: Action("move_right")})
    agent = state.agents[0]
    assert agent.facing == "right"
    assert agent.position == Position(5, 3)

    # Blocked by water: repeated move only turns, then fails.
    state2 = world_from_ascii([
        ".....",
        "..~..",
        ".....",
        ".....",
    ], agents={1: (2, 2, "down")})
    state2, outcomes, _ = step(state2, {1: Action("move_up")})
    assert state2.agents[0].position == Position(2, 2)
    assert outcomes[0].result == "success"  # turned
    state2, outcomes, _ = step(state2, {1: Action("move_up")})
    assert outcomes[0].result == "failure"
    assert outcomes[0].reason == "blocked"


def test_do_on_tree_keeps_tree():
    state = world_from_ascii([
        ".....",
        "..T..",
        ".....",
        ".....",
    ], agents={1: (2, 2, "up")})
    state, outcomes, events = step(state, {1: Action("do")})
    assert outcomes[0].result == "success"
    assert state.agents[0].inventory["wood"] == 1
    assert state.material_at((2, 1)) == "tree"
    assert [e.name for e in events] == ["collect_wood"]
    assert events[0].tick == 1


def test_do_on_stone_requires_pickaxe_and_leaves_path():
    state = world_from_ascii([
        ".....",
        "..#..",
        ".....",
        ".....",
    ], agents={1: (2, 2, "up")})
    state, outcomes, _ = step(state, {1: Action("do")})
    assert outcomes[0].reason == "prereq_unmet"
    state.agents[0].inventory["wood_pickaxe"] = 1
    state, outcomes, events = step(state, {1: Action("do")})
    assert outcomes[0].result == "success"
    assert state.material_at((2, 1)) == "path"
    assert state.agents[0].inventory["stone"] == 1


def test_do_on_water_and_cow_restore_vitals():
    state = world_from_ascii([
        ".....",
        "..~..",
        ".....",
        ".....",
    ], agents={1: (2, 2, "up")}, cows=[(1, 2)])
    agent = state.agents[0]
    agent.drink = 2
    agent.food = 3
    state, outcomes, _ = step(state, {1: Action("do")})
    assert agent.drink == 9
    state, _, _ = step(state, {1: Action("move_left")})  # face the cow
    state, outcomes, _ = step(state, {1: Action("do")})
    assert outcomes[-1].result == "success"
    assert agent.food == 9
    assert (1, 2) not in state.cows


def test_crafting_consumes_exact_inputs():
    state = world_from_ascii([
        ".....",
        "..t..",
        ".....",
        ".....",
    ], agents={1: (2, 2, "up")})
    agent = state.agents[0]
    agent.inventory = {"wood": 3, "stone": 2}
    state, outcomes, events = step(state, {1: Action("make_stone_pickaxe")})
    assert outcomes[0].result == "success"
    assert agent.inventory["wood"] == 2
    assert agent.inventory["stone"] == 1
    assert agent.inventory["stone_pickaxe"] == 1
    assert [e.name for e in events] == ["make_stone_pickaxe"]


def test_place_table_and_furnace():
    state = world_from_ascii(["." * 7] * 5, agents={1: (3, 2, "up")})
    agent = state.agents[0]
    agent.inventory = {"wood": 2, "stone": 4}
    state, outcomes, _ = step(state, {1: Action("place_table")})
    assert state.material_at((3, 1)) == "table"
    assert agent.inventory["wood"] == 0
    state, _, _ = step(state, {1: Action("move_down")})   # face down now
    state, outcomes, _ = step(state, {1: Action("place_furnace")})
    assert outcomes[-1].result == "success"
    assert agent.inventory["stone"] == 0


def test_place_blocked_by_agent():
    state = world_from_ascii(["." * 7] * 5, agents={1: (3, 2, "right"), 2: (4, 2)})
    state.agents[0].inventory = {"wood": 2}
    state, outcomes, _ = step(state, {1: Action("place_table"), 2: Action.noop()})
    assert outcomes[0].result == "failure"
    assert outcomes[0].reason == "blocked"
    assert state.agents[0].inventory["wood"] == 2  # nothing consumed


def test_place_plant_is_free_and_unscored():
    state = world_from_ascii(["." * 7] * 5, agents={1: (3, 2, "up")})
    state, outcomes, events = step(state, {1: Action("place_plant")})
    assert outcomes[0].result == "success"
    assert state.material_at((3, 1)) == "plant"
    assert events == []
    assert state.agents[0].achievements == {}


def test_place_stone_consumes_and_blocks_path():
    state = world_from_ascii([
        ".....",
        "..~..",
        ".....",
        ".....",
    ], agents={1: (2, 2, "up")})
    state.agents[0].inventory = {"stone": 1}
    state, outcomes, _ = step(state, {1: Action("place_stone")})
    assert outcomes[0].result == "success"
    assert state.material_at((2, 1)) == "stone"
    assert state.agents[0].inventory["stone"] == 0


def test_lava_contact_is_lethal():
    state = world_from_ascii([
        ".....",
        "..L..",
        ".....",
        ".....",
    ], agents={1: (2, 2, "up")})
    state, outcomes, events = step(state, {1: Action("move_up")})
    # First move turns+steps onto lava (walkable but lethal).
    agent = state.agents[0]
    assert not agent.alive
    assert agent.health == 0
    assert any(e.kind == "death" and e.name == "lava" for e in events)


# ---------------------------------------------------------------------------
# check_prerequisites


def test_check_prerequisites_examples():
    agent = AgentState(id=1, position=Position(0, 0), inventory={"wood_pickaxe": 1})
    assert check_prerequisites(agent, "stone", Action("do")).satisfied

    agent2 = AgentState(id=1, position=Position(0, 0), inventory={"wood": 2})
    assert check_prerequisites(agent2, "grass", Action("place_table")).satisfied

    agent3 = AgentState(id=1, position=Position(0, 0))
    result = check_prerequisites(agent3, "diamond", Action("do"))
    assert not result.satisfied
    assert result.unmet == ["iron_pickaxe:1"]

    with pytest.raises(ContractError):
        check_prerequisites(agent, "grass", Action("move_up"))


# ---------------------------------------------------------------------------
# Vitals


def _fresh_agent(**kwargs):
    agent = AgentState(id=1, position=Position(0, 0))
    for key, value in kwargs.items():
        setattr(agent, key, value)
    return agent


def test_vitals_unchanged_off_decay_boundaries():
    config = EpisodeConfig(width=24, height=24)
    agent = _fresh_agent()
    update_vitals(agent, 7, config)
    assert (agent.health, agent.food, agent.drink, agent.energy) == (9, 9, 9, 9)


def test_starvation_kills_in_nine_ticks():
    config = EpisodeConfig(width=24, height=24)
    agent = _fresh_agent(food=0)
    for t in range(1, 10):
        update_vitals(agent, t, config)
    assert agent.health == 0
    assert not agent.alive


def test_sleep_restores_energy_one_per_tick():
    config = EpisodeConfig(width=24, height=24)
    agent = _fresh_agent(energy=3, sleeping=True)
    for t in range(1, 6):
        update_vitals(agent, t, config)
    assert agent.energy == 8
    assert agent.sleeping  # not yet full
    update_vitals(agent, 6, config)
    assert agent.energy == 9
    assert not agent.sleeping


def test_decay_and_regen_periods():
    config = EpisodeConfig(width=24, height=24)
    agent = _fresh_agent(health=5)
    update_vitals(agent, config.food_period, config)
    assert agent.food == 8 and agent.drink == 8
    agent2 = _fresh_agent(health=5)
    update_vitals(agent2, config.regen_period, config)
    assert agent2.health == 6
    agent3 = _fresh_agent(energy=5)
    update_vitals(agent3, config.energy_period, config)
    assert agent3.energy == 4


def test_vitals_stay_bounded_under_random_actions():
    state = generate_world(EpisodeConfig(seed=11, n_agents=2))
    rng = random.Random(0)
    kinds = ["noop", "move_left", "move_right", "move_up", "move_down", "do", "sleep"]
    for _ in range(120):
        living = [a.id for a in state.agents if a.alive]
        if not living:
            break
        actions = {i: Action(rng.choice(kinds)) for i in living}
        state, _, _ = step(state, actions)
        for agent in state.agents:
            for value in (agent.health, agent.food, agent.drink, agent.energy):
                assert 0 <= value <= 9
            assert all(v >= 0 for v in agent.inventory.values())


# ---------------------------------------------------------------------------
# Transfer


def test_transfer_moves_one_unit():
    state = world_from_ascii(["." * 9] * 7, agents={1: (2, 3), 2: (4, 3)})
    state.agents[0].inventory = {"wood": 3}
    outcome = transfer_item(state, 1, 2, "wood")
    assert outcome.result == "success"
    assert state.agents[0].inventory["wood"] == 2
    assert state.agents[1].inventory["wood"] == 1


def test_transfer_failures_change_nothing():
    state = world_from_ascii(["." * 20] * 7, agents={1: (2, 3), 2: (14, 3)})
    out = transfer_item(state, 1, 2, "stone")
    assert out.reason == "out_of_range"  # distance 12 > share_range 6
    state.agents[0].inventory = {}
    near = world_from_ascii(["." * 9] * 7, agents={1: (2, 3), 2: (4, 3)})
    out = transfer_item(near, 1, 2, "stone")
    assert out.reason == "prereq_unmet"
    near.agents[1].alive = False
    near.agents[0].inventory = {"stone": 1}
    out = transfer_item(near, 1, 2, "stone")
    assert out.reason == "target_gone"
    assert near.agents[0].inventory == {"stone": 1}


def test_transfer_contract_errors():
    state = world_from_ascii(["." * 9] * 7, agents={1: (2, 3), 2: (4, 3)})
    with pytest.raises(ContractError):
        transfer_item(state, 1, 1, "wood")
    with pytest.raises(ContractError):
        transfer_item(state, 1, 2, "lava")


def test_transfer_conserves_totals_randomized():
    rng = random.Random(7)
    state = world_from_ascii(["." * 11] * 9, agents={1: (3, 4), 2: (5, 4), 3: (7, 4)})
    items = ["wood", "stone", "coal", "iron", "wood_pickaxe"]
    for agent in state.agents:
        agent.inventory = {item: rng.randint(0, 3) for item in items}
    totals = {item: sum(a.inventory.get(item, 0) for a in state.agents) for item in items}
    for _ in range(200):
        giver, receiver = rng.sample([1, 2, 3], 2)
        transfer_item(state, giver, receiver, rng.choice(items))
        now = {item: sum(a.inventory.get(item, 0) for a in state.agents) for item in items}
        assert now == totals


# ---------------------------------------------------------------------------
# Terminal status


def test_terminal_transitions():
    state = world_from_ascii(["." * 9] * 7, agents={1: (4, 3)}, max_ticks=3)
    assert terminal_status(state).kind == "running"
    state.agents[0].inventory["diamond"] = 1
    state.tick = 85
    status = terminal_status(state)
    assert status.kind == "success"
    assert status.tick == 85
    state.agents[0].inventory["diamond"] = 0
    state.tick = 3
    assert terminal_status(state).kind == "timeout"
    state.agents[0].alive = False
    assert terminal_status(state).kind == "all_dead"


def test_render_map_legend_roundtrip(open_grass):
    text = render_map(open_grass)
    rows = text.splitlines()
    assert len(rows) == open_grass.height
    assert rows[5][7] == "1"  # agent drawn over the grass
