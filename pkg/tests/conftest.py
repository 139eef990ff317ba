"""Shared helpers: hand-built worlds from ASCII maps."""

import numpy as np
import pytest

from gridcraft.world import (
    MAP_LEGEND,
    MATERIALS,
    AgentState,
    EpisodeConfig,
    Position,
    WorldState,
)

_CHAR_TO_MATERIAL = {ch: name for name, ch in MAP_LEGEND.items()}
_MATERIAL_ID = {name: i for i, name in enumerate(MATERIALS)}


def world_from_ascii(rows, agents=None, cows=(), facing="up", **config_overrides):
    """Build a WorldState from MAP_LEGEND characters.

    `agents` maps agent id -> (x, y) or (x, y, facing). Cells under agents and
    cows must use terrain characters ('C' and digits are render-only).
    """
    height = len(rows)
    width = len(rows[0])
    grid = np.empty((height, width), dtype=np.uint8)
    for y, row in enumerate(rows):
        assert len(row) == width, "ragged ascii map"
        for x, ch in enumerate(row):
            grid[y, x] = _MATERIAL_ID[_CHAR_TO_MATERIAL[ch]]

    overrides = {"width": width, "height": height, "view_width": 9, "view_height": 7}
    overrides.update(config_overrides)
    agents = agents or {1: (width // 2, height // 2)}
    overrides.setdefault("n_agents", len(agents))
    config = EpisodeConfig(**overrides)

    agent_states = []
    for agent_id in sorted(agents):
        spec = agents[agent_id]
        x, y = spec[0], spec[1]
        agent_facing = spec[2] if len(spec) > 2 else facing
        agent_states.append(AgentState(id=agent_id, position=Position(x, y),
                                       facing=agent_facing))
    state = WorldState(grid=grid, cows={Position(*c) for c in cows},
                       agents=agent_states, tick=0, config=config)
    for agent in state.agents:
        agent.discovered.update(
            Position(x, y) for y in range(height) for x in range(width))
    return state


@pytest.fixture
def open_grass():
    """15x11 all-grass world with one centered agent."""
    rows = ["." * 15 for _ in range(11)]
    return world_from_ascii(rows, agents={1: (7, 5)})
