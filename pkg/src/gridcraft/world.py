"""Deterministic multi-agent survival gridworld.

The world is a fixed-size material grid plus sparse cow entities and a list
of agents with vitals, inventories, and per-agent discovered-cell maps. One
`step` applies one action per living agent in ascending agent id, then
hazards, then vitals, then advances the tick. Identical (config, action
sequence) pairs produce bit-identical state traces.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, Iterable, List, Mapping, NamedTuple, Optional, Set, Tuple

import numpy as np

from . import nav
from .errors import ContractError, GenerationError, NotAliveError
from .rng import SplitMix64, cell_hash, substream_seed
from .techtree import TechTree, default_tree


class Material(str, Enum):
    GRASS = "grass"
    SAND = "sand"
    WATER = "water"
    STONE = "stone"
    TREE = "tree"
    COAL = "coal"
    IRON = "iron"
    DIAMOND = "diamond"
    LAVA = "lava"
    PATH = "path"
    TABLE = "table"
    FURNACE = "furnace"
    PLANT = "plant"


MATERIALS: List[str] = [m.value for m in Material]
_MATERIAL_ID = {name: i for i, name in enumerate(MATERIALS)}

OUT_OF_BOUNDS = "out_of_bounds"
COW = "cow"

WALKABLE = {"grass", "sand", "path", "plant", "lava"}
SAFE_WALKABLE = WALKABLE - {"lava"}
_SAFE_WALKABLE_IDS = [_MATERIAL_ID[m] for m in sorted(SAFE_WALKABLE)]
MINEABLE = {"stone", "coal", "iron", "diamond"}
_ROCK_IDS = [_MATERIAL_ID[m] for m in sorted(MINEABLE)]
STONE_PLACEABLE = {"grass", "sand", "path", "water", "lava", "plant"}

# Materials the Navigator accepts as destinations; collecting ones end in "do".
NAV_DESTINATIONS = {"tree", "water", "stone", "iron", "diamond", "coal", "grass", "table", "furnace"}
NAV_COLLECTIBLE = {"tree", "water", "stone", "iron", "diamond", "coal"}

SHAREABLE_ITEMS = {"wood", "stone", "coal", "iron", "diamond",
                   "wood_pickaxe", "stone_pickaxe", "iron_pickaxe"}

MOVE_ACTIONS = ("move_left", "move_right", "move_up", "move_down")

DIRECTION_VECTORS = {
    "left": (-1, 0),
    "right": (1, 0),
    "up": (0, -1),
    "down": (0, 1),
}
_MOVE_DIRECTION = {f"move_{d}": d for d in DIRECTION_VECTORS}


class Position(NamedTuple):
    x: int
    y: int


@dataclass(frozen=True)
class Action:
    """One environment action; `target`/`agent`/`item` are payloads for navigate/share."""

    kind: str
    target: Optional[str] = None
    agent: Optional[int] = None
    item: Optional[str] = None

    @classmethod
    def noop(cls) -> "Action":
        return cls("noop")

    @classmethod
    def navigate(cls, target: str) -> "Action":
        return cls("navigate", target=target)

    @classmethod
    def share(cls, agent: int, item: str) -> "Action":
        return cls("share", agent=agent, item=item)

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.target is not None:
            d["target"] = self.target
        if self.agent is not None:
            d["agent"] = self.agent
        if self.item is not None:
            d["item"] = self.item
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "Action":
        return cls(kind=d["kind"], target=d.get("target"), agent=d.get("agent"),
                   item=d.get("item"))


PRIMITIVE_ACTIONS = ("noop", "move_left", "move_right", "move_up", "move_down", "do", "sleep",
                     "place_stone", "place_table", "place_furnace", "place_plant",
                     "make_wood_pickaxe", "make_stone_pickaxe", "make_iron_pickaxe")
ALL_ACTION_KINDS = PRIMITIVE_ACTIONS + ("navigate", "share")


@dataclass
class ActionOutcome:
    agent: int
    action: Action
    result: str  # success | failure | in_progress
    reason: str  # ok | prereq_unmet | target_gone | out_of_range | blocked | dead

    def to_dict(self) -> dict:
        return {"agent": self.agent, "action": self.action.to_dict(),
                "result": self.result, "reason": self.reason}

    @classmethod
    def from_dict(cls, d: Mapping) -> "ActionOutcome":
        return cls(agent=d["agent"], action=Action.from_dict(d["action"]),
                   result=d["result"], reason=d["reason"])


@dataclass
class Event:
    tick: int
    agent: int
    kind: str  # achievement | death
    name: str

    def to_dict(self) -> dict:
        return {"tick": self.tick, "agent": self.agent, "kind": self.kind, "name": self.name}

    @classmethod
    def from_dict(cls, d: Mapping) -> "Event":
        return cls(tick=d["tick"], agent=d["agent"], kind=d["kind"], name=d["name"])


@dataclass(frozen=True)
class EpisodeConfig:
    width: int = 64
    height: int = 64
    n_agents: int = 1
    seed: int = 0
    max_ticks: int = 400
    view_width: int = 9
    view_height: int = 7
    share_range: int = 6
    time_penalty: float = 0.01
    food_period: int = 25
    drink_period: int = 25
    energy_period: int = 30
    regen_period: int = 10
    cow_spacing: int = 96  # one cow per this many cells
    gen_retries: int = 32

    def __post_init__(self):
        if self.n_agents < 1:
            raise ContractError("n_agents must be >= 1")
        if self.max_ticks <= 0:
            raise ContractError("max_ticks must be > 0")
        if self.view_width % 2 == 0 or self.view_height % 2 == 0:
            raise ContractError("view dimensions must be odd")
        if self.width < 3 or self.height < 3:
            raise ContractError("map too small")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @classmethod
    def from_dict(cls, d: Mapping) -> "EpisodeConfig":
        known = {k: d[k] for k in cls.__dataclass_fields__ if k in d}
        return cls(**known)


@dataclass
class AgentState:
    id: int
    position: Position
    facing: str = "down"
    health: int = 9
    food: int = 9
    drink: int = 9
    energy: int = 9
    inventory: Dict[str, int] = field(default_factory=dict)
    alive: bool = True
    achievements: Dict[str, int] = field(default_factory=dict)
    sleeping: bool = False
    discovered: Set[Position] = field(default_factory=set)

    @property
    def facing_cell(self) -> Position:
        dx, dy = DIRECTION_VECTORS[self.facing]
        return Position(self.position.x + dx, self.position.y + dy)

    def vitals(self) -> dict:
        return {"health": self.health, "food": self.food, "drink": self.drink,
                "energy": self.energy, "sleeping": self.sleeping}

    def copy(self) -> "AgentState":
        return replace(self, inventory=dict(self.inventory),
                       achievements=dict(self.achievements),
                       discovered=set(self.discovered))


@dataclass
class Observation:
    agent: int
    tick: int
    position: Position
    window: List[List[str]]  # view_height rows of view_width material tokens
    window_origin: Position  # world position of window cell [0][0]
    visible_agents: List[Tuple[int, int, int]]  # (id, x, y), excluding self
    visible_cows: List[Tuple[int, int]]
    facing: str  # faced-cell token: material, "cow", or "out_of_bounds"
    facing_direction: str
    vitals: dict
    inventory: Dict[str, int]
    inbox: list
    world_width: int = 64   # static env constants, not cell content
    world_height: int = 64


@dataclass
class WorldState:
    grid: np.ndarray  # uint8 material ids, shape (height, width)
    cows: Set[Position]
    agents: List[AgentState]
    tick: int
    config: EpisodeConfig
    gen_attempt: int = 0

    @property
    def width(self) -> int:
        return self.grid.shape[1]

    @property
    def height(self) -> int:
        return self.grid.shape[0]

    def in_bounds(self, pos: Position) -> bool:
        return 0 <= pos[0] < self.width and 0 <= pos[1] < self.height

    def material_at(self, pos: Position) -> str:
        return MATERIALS[self.grid[pos[1], pos[0]]]

    def set_material(self, pos: Position, material: str) -> None:
        self.grid[pos[1], pos[0]] = _MATERIAL_ID[material]

    def agent_by_id(self, agent_id: int) -> AgentState:
        if not 1 <= agent_id <= len(self.agents):
            raise ContractError(f"unknown agent id {agent_id}")
        return self.agents[agent_id - 1]

    def living_agents(self) -> List[AgentState]:
        return [a for a in self.agents if a.alive]

    def agent_at(self, pos: Position) -> Optional[AgentState]:
        for a in self.agents:
            if a.alive and a.position == pos:
                return a
        return None

    def copy(self) -> "WorldState":
        return WorldState(grid=self.grid.copy(), cows=set(self.cows),
                          agents=[a.copy() for a in self.agents], tick=self.tick,
                          config=self.config, gen_attempt=self.gen_attempt)

    def digest(self) -> str:
        """Stable hash over everything an action sequence can influence."""
        payload = {
            "tick": self.tick,
            "grid": hashlib.sha256(self.grid.tobytes()).hexdigest(),
            "cows": sorted(self.cows),
            "agents": [
                {
                    "id": a.id, "pos": list(a.position), "facing": a.facing,
                    "health": a.health, "food": a.food, "drink": a.drink,
                    "energy": a.energy, "alive": a.alive, "sleeping": a.sleeping,
                    "inventory": sorted((k, v) for k, v in a.inventory.items() if v),
                    "achievements": sorted(a.achievements.items()),
                }
                for a in self.agents
            ],
        }
        text = json.dumps(payload, separators=(",", ":"), sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()


# ---------------------------------------------------------------------------
# World generation


def _value_noise(gseed: int, width: int, height: int, scale: int, salt: int) -> np.ndarray:
    """Bilinear interpolation of a hashed lattice; values in [0, 1)."""
    lat_w = width // scale + 2
    lat_h = height // scale + 2
    lattice = np.empty((lat_h, lat_w))
    for ly in range(lat_h):
        for lx in range(lat_w):
            lattice[ly, lx] = cell_hash(gseed, lx, ly, salt)
    xs = np.arange(width) / scale
    ys = np.arange(height) / scale
    x0 = xs.astype(int)
    y0 = ys.astype(int)
    fx = xs - x0
    fy = ys - y0
    # Smoothstep fade for gradient-noise style continuity.
    fx = fx * fx * (3 - 2 * fx)
    fy = fy * fy * (3 - 2 * fy)
    fx = fx[None, :]
    fy = fy[:, None]
    a = lattice[np.ix_(y0, x0)]
    b = lattice[np.ix_(y0, x0 + 1)]
    c = lattice[np.ix_(y0 + 1, x0)]
    d = lattice[np.ix_(y0 + 1, x0 + 1)]
    return a * (1 - fx) * (1 - fy) + b * fx * (1 - fy) + c * (1 - fx) * fy + d * fx * fy


def _layered_noise(gseed: int, width: int, height: int,
                   octaves: List[Tuple[int, float]], salt: int) -> np.ndarray:
    total = np.zeros((height, width))
    weight_sum = 0.0
    for i, (scale, weight) in enumerate(octaves):
        total += weight * _value_noise(gseed, width, height, scale, salt + 101 * i)
        weight_sum += weight
    total /= weight_sum
    lo, hi = total.min(), total.max()
    return (total - lo) / (hi - lo) if hi > lo else total


def _spawn_radius(n_agents: int) -> int:
    r = 2
    while 2 * r * r + 2 * r + 1 < n_agents:
        r += 1
    return r


def _build_terrain(config: EpisodeConfig, gseed: int) -> np.ndarray:
    w, h = config.width, config.height
    elevation = _layered_noise(gseed, w, h, [(21, 1.0), (10, 0.5), (5, 0.25)], salt=1)
    moisture = _layered_noise(gseed, w, h, [(16, 1.0), (8, 0.5)], salt=2)

    # Island shaping: elevation ramps down in a 6-cell border band, giving a
    # ring ocean, so water always exists along every map edge.
    margin = 6
    xs = np.arange(w)
    ys = np.arange(h)
    border_x = np.minimum(xs, w - 1 - xs)
    border_y = np.minimum(ys, h - 1 - ys)
    dist_border = np.minimum(border_y[:, None], border_x[None, :])
    ramp = np.minimum(1.0, 0.2 + 0.8 * dist_border / margin)
    elevation = elevation * ramp

    grid = np.empty((h, w), dtype=np.uint8)
    for y in range(h):
        for x in range(w):
            e = elevation[y, x]
            if e < 0.30:
                mat = "water"
            elif e < 0.36:
                mat = "sand"
            elif e < 0.62:
                mat = "tree" if moisture[y, x] > 0.68 and cell_hash(gseed, x, y, 4) < 0.55 else "grass"
            else:
                o = cell_hash(gseed, x, y, 3)
                if e > 0.85 and o < 0.05:
                    mat = "lava"
                elif e > 0.78 and 0.05 <= o < 0.16:
                    mat = "diamond"
                elif e > 0.68 and 0.16 <= o < 0.28:
                    mat = "iron"
                elif 0.28 <= o < 0.40:
                    mat = "coal"
                else:
                    mat = "stone"
            grid[y, x] = _MATERIAL_ID[mat]

    # Clear a grass pad at the center so all agents spawn adjacent to it.
    cx, cy = w // 2, h // 2
    radius = _spawn_radius(config.n_agents)
    for y in range(max(0, cy - radius), min(h, cy + radius + 1)):
        for x in range(max(0, cx - radius), min(w, cx + radius + 1)):
            if abs(x - cx) + abs(y - cy) <= radius:
                grid[y, x] = _MATERIAL_ID["grass"]
    return grid


def _terrain_valid(grid: np.ndarray, config: EpisodeConfig) -> bool:
    w, h = config.width, config.height
    present = set(np.unique(grid))
    required = ["tree", "water", "stone", "coal", "iron", "diamond"]
    if any(_MATERIAL_ID[m] not in present for m in required):
        return False

    # A survival start needs wood and water in range: demand a tree close to the
    # spawn pad and water inside comfortable walking distance.
    cx, cy = w // 2, h // 2

    def nearest(material: str) -> int:
        ys, xs = np.nonzero(grid == _MATERIAL_ID[material])
        return min(abs(x - cx) + abs(y - cy) for x, y in zip(xs.tolist(), ys.tolist()))

    if nearest("tree") > 8 or nearest("water") > 20:
        return False

    # Flood fill from center over cells an equipped agent could eventually
    # occupy (walkable terrain plus mineable rock).
    traversable_ids = {_MATERIAL_ID[m] for m in (SAFE_WALKABLE | MINEABLE)}
    start = (w // 2, h // 2)
    seen = {start}
    stack = [start]
    while stack:
        x, y = stack.pop()
        for nx, ny in nav.neighbors((x, y), w, h):
            if (nx, ny) not in seen and int(grid[ny, nx]) in traversable_ids:
                seen.add((nx, ny))
                stack.append((nx, ny))

    for mat in required:
        mid = _MATERIAL_ID[mat]
        ys, xs = np.nonzero(grid == mid)
        reachable = False
        for x, y in zip(xs.tolist(), ys.tolist()):
            if (x, y) in seen or nav.adjacent_to_any((x, y), seen, w, h):
                reachable = True
                break
        if not reachable:
            return False
    return True


def _place_cows(grid: np.ndarray, config: EpisodeConfig, attempt: int) -> Set[Position]:
    w, h = config.width, config.height
    cx, cy = w // 2, h // 2
    keep_out = _spawn_radius(config.n_agents) + 1
    grass_id = _MATERIAL_ID["grass"]
    cells = [Position(x, y) for y in range(h) for x in range(w)
             if grid[y, x] == grass_id and abs(x - cx) + abs(y - cy) > keep_out]
    rng = SplitMix64(substream_seed(config.seed, "cows", attempt))
    rng.shuffle(cells)
    n_cows = max(8, (w * h) // config.cow_spacing)
    return set(cells[:n_cows])


def _spawn_agents(grid: np.ndarray, cows: Set[Position], config: EpisodeConfig) -> List[AgentState]:
    w, h = config.width, config.height
    cx, cy = w // 2, h // 2
    grass_id = _MATERIAL_ID["grass"]
    candidates = sorted(
        (Position(x, y) for y in range(h) for x in range(w)
         if grid[y, x] == grass_id and Position(x, y) not in cows),
        key=lambda p: (abs(p.x - cx) + abs(p.y - cy), p.y, p.x),
    )
    if len(candidates) < config.n_agents:
        raise GenerationError("not enough free grass cells for agent spawns")
    facings = ["down", "up", "left", "right"]
    return [
        AgentState(id=i + 1, position=candidates[i], facing=facings[i % 4])
        for i in range(config.n_agents)
    ]


def generate_world(config: EpisodeConfig) -> WorldState:
    """Procedurally generate terrain, cows, and centered agent spawns.

    Retries with the next worldgen substream until every key resource exists
    and is reachable from the spawn area.
    """
    if config.width < 24 or config.height < 24:
        raise GenerationError("terrain bands need at least a 24x24 map; "
                              "construct small worlds by hand instead")
    for attempt in range(config.gen_retries):
        gseed = substream_seed(config.seed, "worldgen", attempt)
        grid = _build_terrain(config, gseed)
        if not _terrain_valid(grid, config):
            continue
        cows = _place_cows(grid, config, attempt)
        agents = _spawn_agents(grid, cows, config)
        state = WorldState(grid=grid, cows=cows, agents=agents, tick=0,
                           config=config, gen_attempt=attempt)
        for agent in state.agents:
            _discover_window(state, agent)
        return state
    raise GenerationError(
        f"no valid terrain for seed {config.seed} after {config.gen_retries} substreams")


# ---------------------------------------------------------------------------
# Observation


def facing_token(state: WorldState, agent: AgentState) -> str:
    cell = agent.facing_cell
    if not state.in_bounds(cell):
        return OUT_OF_BOUNDS
    if cell in state.cows:
        return COW
    return state.material_at(cell)


def _window_bounds(state: WorldState, agent: AgentState) -> Tuple[int, int]:
    half_w = state.config.view_width // 2
    half_h = state.config.view_height // 2
    return agent.position.x - half_w, agent.position.y - half_h


def _discover_window(state: WorldState, agent: AgentState) -> None:
    ox, oy = _window_bounds(state, agent)
    for dy in range(state.config.view_height):
        for dx in range(state.config.view_width):
            pos = Position(ox + dx, oy + dy)
            if state.in_bounds(pos):
                agent.discovered.add(pos)


def observe(state: WorldState, agent_id: int, inbox: Optional[list] = None) -> Observation:
    """Build the agent's partial view and fold the window into its discovered set."""
    agent = state.agent_by_id(agent_id)
    if not agent.alive:
        raise NotAliveError(f"agent {agent_id} is dead")
    ox, oy = _window_bounds(state, agent)
    window: List[List[str]] = []
    for dy in range(state.config.view_height):
        row = []
        for dx in range(state.config.view_width):
            pos = Position(ox + dx, oy + dy)
            if state.in_bounds(pos):
                row.append(state.material_at(pos))
                agent.discovered.add(pos)
            else:
                row.append(OUT_OF_BOUNDS)
        window.append(row)
    x_hi = ox + state.config.view_width
    y_hi = oy + state.config.view_height
    visible_agents = [(a.id, a.position.x, a.position.y) for a in state.agents
                      if a.alive and a.id != agent_id
                      and ox <= a.position.x < x_hi and oy <= a.position.y < y_hi]
    visible_cows = sorted((p.x, p.y) for p in state.cows
                          if ox <= p.x < x_hi and oy <= p.y < y_hi)
    return Observation(
        agent=agent_id,
        tick=state.tick,
        position=agent.position,
        window=window,
        window_origin=Position(ox, oy),
        visible_agents=visible_agents,
        visible_cows=visible_cows,
        facing=facing_token(state, agent),
        facing_direction=agent.facing,
        vitals=agent.vitals(),
        inventory={k: v for k, v in agent.inventory.items() if v > 0},
        inbox=list(inbox) if inbox else [],
        world_width=state.width,
        world_height=state.height,
    )


# ---------------------------------------------------------------------------
# Prerequisites


@dataclass
class PrereqResult:
    satisfied: bool
    unmet: List[str]


def check_prerequisites(agent: AgentState, facing: str, action: Action,
                        tree: Optional[TechTree] = None) -> PrereqResult:
    """Evaluate the crafting-table requirements of a do/place/make action.

    Pure function of (inventory, facing, action); movement and placement
    geometry (occupied cells etc.) is step()'s concern, not this table's.
    """
    tree = tree or default_tree()
    kind = action.kind
    if kind == "do":
        task = tree.task_for_do(facing)
        if task is None:
            return PrereqResult(False, ["facing:collectible"])
        unmet = tree.unmet_requirements(agent.inventory, facing, task)
        return PrereqResult(not unmet, unmet)
    if kind in ("place_table", "place_furnace", "make_wood_pickaxe",
                "make_stone_pickaxe", "make_iron_pickaxe"):
        unmet = tree.unmet_requirements(agent.inventory, facing, kind)
        return PrereqResult(not unmet, unmet)
    if kind == "place_stone":
        unmet = []
        if facing not in STONE_PLACEABLE:
            unmet.append("facing:open-cell")
        if agent.inventory.get("stone", 0) < 1:
            unmet.append("stone:1")
        return PrereqResult(not unmet, unmet)
    if kind == "place_plant":
        unmet = [] if facing == "grass" else ["facing:grass"]
        return PrereqResult(not unmet, unmet)
    raise ContractError(f"not a do/place/make action: {kind}")


# ---------------------------------------------------------------------------
# Navigation macro


def navigate_step(state: WorldState, agent_id: int, target: str) -> Optional[Action]:
    """One primitive action toward the target material; None when fully blocked.

    Prefers known target cells: turn/do when adjacent, else first move of the
    shortest path over discovered safe cells. Unknown targets trigger spiral
    frontier exploration. Pure function of the current state.
    """
    if target not in NAV_DESTINATIONS:
        raise ContractError(f"invalid navigation target: {target!r}")
    agent = state.agent_by_id(agent_id)
    w, h = state.width, state.height
    target_id = _MATERIAL_ID[target]

    ys, xs = np.nonzero(state.grid == target_id)
    known = {Position(x, y) for x, y in zip(xs.tolist(), ys.tolist())
             if Position(x, y) in agent.discovered}

    crowded = any(a.alive and a.id != agent_id
                  and abs(a.position.x - agent.position.x) <= 4
                  and abs(a.position.y - agent.position.y) <= 4
                  for a in state.agents)

    if (known and target in ("stone", "coal", "iron")
            and state.config.n_agents >= 4 and crowded):
        # Teammates right here will race for the same seams: prefer ore in
        # this agent's map quadrant when that detour is modest, so the crowd
        # spreads. A lone miner just takes the true nearest.
        qvec = ((0, -1), (1, 0), (0, 1), (-1, 0))[agent.id % 4]
        cx, cy = state.width // 2, state.height // 2

        def in_quadrant(p):
            dx, dy = p[0] - cx, p[1] - cy
            axis = dx * qvec[0] + dy * qvec[1]
            return axis > 0 and axis >= abs(dx * qvec[1]) + abs(dy * qvec[0])

        def dist(p):
            return abs(p[0] - agent.position.x) + abs(p[1] - agent.position.y)

        sector = {p for p in known if in_quadrant(p)}
        if sector and min(map(dist, sector)) <= min(map(dist, known)) + 6:
            known = sector

    # Static entity blockers: cows, plus other agents standing around.
    blockers = set(state.cows)
    blockers.update(a.position for a in state.agents if a.alive and a.id != agent_id)

    # Per-agent tie-breaking: rotated expansion order decorrelates teammates'
    # shortest paths without affecting path lengths.
    offsets = nav.rotated_offsets(agent_id - 1)

    # Rock the agent's current tools can tunnel through (digging grants the item).
    minable = set()
    if agent.inventory.get("wood_pickaxe", 0) >= 1:
        minable |= {"stone", "coal"}
    if agent.inventory.get("stone_pickaxe", 0) >= 1:
        minable.add("iron")
    if agent.inventory.get("iron_pickaxe", 0) >= 1:
        minable.add("diamond")

    walkable_mask = np.isin(state.grid, _SAFE_WALKABLE_IDS)

    if known:
        # Adjacent already: face it, then act on it.
        for dx, dy in nav.NEIGHBOR_OFFSETS:
            cell = Position(agent.position.x + dx, agent.position.y + dy)
            if cell in known:
                direction = _MOVE_DIRECTION[nav.OFFSET_TO_MOVE[(dx, dy)]]
                if agent.facing == direction:
                    return Action("do")
                return Action(nav.OFFSET_TO_MOVE[(dx, dy)])

        def passable(pos):
            if pos not in agent.discovered or pos in blockers:
                return False
            return bool(walkable_mask[pos[1], pos[0]]) or MATERIALS[state.grid[pos[1], pos[0]]] in minable

        step_cell = nav.bfs_first_step(tuple(agent.position), passable,
                                       lambda p: nav.adjacent_to_any(p, known, w, h), w, h,
                                       offsets=offsets)
        if step_cell is not None and step_cell != tuple(agent.position):
            if walkable_mask[step_cell[1], step_cell[0]]:
                return _move_toward(agent.position, Position(*step_cell))
            # A mineable wall on the path: face it, then dig through.
            direction = _MOVE_DIRECTION[nav.OFFSET_TO_MOVE[
                (step_cell[0] - agent.position.x, step_cell[1] - agent.position.y)]]
            if agent.facing == direction:
                return Action("do")
            return _move_toward(agent.position, Position(*step_cell))

    # Explore: head for the nearest unseen cell on an outward spiral. The scan
    # start is keyed to the agent id (stable per agent, varied across a team),
    # which yields straight boustrophedon sweeps instead of frontier thrash.
    start = tuple(agent.position)

    def undiscovered(p):
        return Position(*p) not in agent.discovered

    def explorable(pos):
        if pos in blockers:
            return False
        if Position(*pos) not in agent.discovered:
            return True
        return bool(walkable_mask[pos[1], pos[0]])

    def explorable_mining(pos):
        if pos in blockers:
            return False
        if Position(*pos) not in agent.discovered:
            return True
        return (bool(walkable_mask[pos[1], pos[0]])
                or MATERIALS[state.grid[pos[1], pos[0]]] in minable)

    step_cell = None
    if target in MINEABLE and minable:
        # Ores hide inside rock: dig toward unseen cells on the mountain frontier.
        rock_mask = np.isin(state.grid, _ROCK_IDS)

        def mountain_frontier(p):
            if not undiscovered(p):
                return False
            for q in nav.neighbors(p, w, h):
                if Position(*q) in agent.discovered and rock_mask[q[1], q[0]]:
                    return True
            return False

        goal = None
        if target == "diamond" and state.config.n_agents >= 4:
            # Teams that can cover all four quadrants fan their end-game digs
            # out: each agent prefers frontier in its own map quadrant (stable
            # center anchor) so different ends of the mountains get excavated.
            qvec = ((0, -1), (1, 0), (0, 1), (-1, 0))[agent.id % 4]
            cx, cy = w // 2, h // 2

            def in_quadrant(p):
                dx, dy = p[0] - cx, p[1] - cy
                axis = dx * qvec[0] + dy * qvec[1]
                cross = abs(dx * qvec[1]) + abs(dy * qvec[0])
                return axis > 0 and axis >= cross

            goal = nav.nearest_spiral_match(
                start, lambda p: mountain_frontier(p) and in_quadrant(p), w, h,
                start_quarter=agent.id % 4)
        if goal is None:
            goal = nav.nearest_spiral_match(start, mountain_frontier, w, h,
                                            start_quarter=agent.id % 4)
        if goal is not None:
            step_cell = nav.bfs_first_step(start, explorable_mining,
                                           lambda p: p == goal, w, h, offsets=offsets)
            if step_cell == start:
                step_cell = None

    if step_cell is None:
        goal = nav.nearest_spiral_match(start, undiscovered, w, h,
                                        start_quarter=agent.id % 4)
        if goal is None:
            return None
        step_cell = nav.bfs_first_step(start, explorable, lambda p: p == goal, w, h,
                                       offsets=offsets)
    if step_cell is None or step_cell == start:
        # Spiral goal walled off; settle for the nearest frontier cell.
        step_cell = nav.bfs_first_step(start, explorable, undiscovered, w, h,
                                       offsets=offsets)
    if step_cell is None or step_cell == start:
        # Still walled in: dig toward the frontier if the tools allow it.
        step_cell = nav.bfs_first_step(start, explorable_mining, undiscovered, w, h,
                                       offsets=offsets)
    if step_cell is None or step_cell == start:
        return None
    if not walkable_mask[step_cell[1], step_cell[0]] and Position(*step_cell) in agent.discovered:
        direction = _MOVE_DIRECTION[nav.OFFSET_TO_MOVE[
            (step_cell[0] - agent.position.x, step_cell[1] - agent.position.y)]]
        if agent.facing == direction:
            return Action("do")
        return _move_toward(agent.position, Position(*step_cell))
    return _move_toward(agent.position, Position(*step_cell))


def _move_toward(src: Position, dst: Position) -> Action:
    return Action(nav.OFFSET_TO_MOVE[(dst.x - src.x, dst.y - src.y)])


# ---------------------------------------------------------------------------
# Step


def transfer_item(state: WorldState, giver_id: int, receiver_id: int, item: str) -> ActionOutcome:
    """Move one unit between inventories when in range; atomic, conserving."""
    action = Action.share(receiver_id, item)
    if item not in SHAREABLE_ITEMS:
        raise ContractError(f"item not shareable: {item!r}")
    if receiver_id == giver_id:
        raise ContractError("cannot share with self")
    giver = state.agent_by_id(giver_id)
    if not giver.alive:
        return ActionOutcome(giver_id, action, "failure", "dead")
    receiver = state.agent_by_id(receiver_id)
    if not receiver.alive:
        return ActionOutcome(giver_id, action, "failure", "target_gone")
    dist = abs(giver.position.x - receiver.position.x) + abs(giver.position.y - receiver.position.y)
    if dist > state.config.share_range:
        return ActionOutcome(giver_id, action, "failure", "out_of_range")
    if giver.inventory.get(item, 0) < 1:
        return ActionOutcome(giver_id, action, "failure", "prereq_unmet")
    giver.inventory[item] -= 1
    receiver.inventory[item] = receiver.inventory.get(item, 0) + 1
    return ActionOutcome(giver_id, action, "success", "ok")


def update_vitals(agent: AgentState, tick: int, config: EpisodeConfig) -> AgentState:
    """Apply one tick of decay/sleep/starvation/regeneration in place."""
    if not agent.alive:
        return agent
    if agent.sleeping:
        agent.energy = min(9, agent.energy + 1)
        if agent.energy >= 9:
            agent.sleeping = False
    elif tick % config.energy_period == 0:
        agent.energy = max(0, agent.energy - 1)
    if tick % config.food_period == 0:
        agent.food = max(0, agent.food - 1)
    if tick % config.drink_period == 0:
        agent.drink = max(0, agent.drink - 1)
    if min(agent.food, agent.drink, agent.energy) == 0:
        agent.health = max(0, agent.health - 1)
    elif tick % config.regen_period == 0:
        agent.health = min(9, agent.health + 1)
    if agent.health == 0:
        agent.alive = False
    return agent


def _grant(agent: AgentState, task: str, tick: int, events: List[Event],
           tree: TechTree) -> None:
    if task in tree.depths and task not in agent.achievements:
        agent.achievements[task] = tick
        events.append(Event(tick=tick, agent=agent.id, kind="achievement", name=task))


def _apply_move(state: WorldState, agent: AgentState, kind: str) -> Tuple[str, str]:
    direction = _MOVE_DIRECTION[kind]
    turned = agent.facing != direction
    agent.facing = direction
    dx, dy = DIRECTION_VECTORS[direction]
    dest = Position(agent.position.x + dx, agent.position.y + dy)
    if (state.in_bounds(dest) and state.material_at(dest) in WALKABLE
            and state.agent_at(dest) is None and dest not in state.cows):
        agent.position = dest
        return "success", "ok"
    if turned:
        return "success", "ok"
    return "failure", "blocked"


def _apply_do(state: WorldState, agent: AgentState, tick: int, events: List[Event],
              exhausted: Set[Position], tree: TechTree) -> Tuple[str, str]:
    cell = agent.facing_cell
    if not state.in_bounds(cell):
        return "failure", "blocked"
    if cell in state.cows:
        state.cows.discard(cell)
        exhausted.add(cell)
        agent.food = 9
        return "success", "ok"
    token = state.material_at(cell)
    task = tree.task_for_do(token)
    if task is None:
        if cell in exhausted:
            return "failure", "target_gone"
        return "failure", "prereq_unmet"
    if tree.unmet_requirements(agent.inventory, token, task):
        return "failure", "prereq_unmet"
    if task == "collect_drink":
        agent.drink = 9
    elif task == "collect_wood":
        agent.inventory["wood"] = agent.inventory.get("wood", 0) + 1
        _grant(agent, task, tick, events, tree)
    else:  # stone, coal, iron, diamond
        item = tree.recipe_for(task).produced
        agent.inventory[item] = agent.inventory.get(item, 0) + 1
        state.set_material(cell, "path")
        exhausted.add(cell)
        _grant(agent, task, tick, events, tree)
    return "success", "ok"


def _apply_place_or_make(state: WorldState, agent: AgentState, kind: str, tick: int,
                         events: List[Event], tree: TechTree) -> Tuple[str, str]:
    cell = agent.facing_cell
    token = facing_token(state, agent)
    check = check_prerequisites(agent, token, Action(kind), tree)
    if not check.satisfied:
        return "failure", "prereq_unmet"
    if kind.startswith("place"):
        if not state.in_bounds(cell) or state.agent_at(cell) is not None or cell in state.cows:
            return "failure", "blocked"
        placed = {"place_stone": "stone", "place_table": "table",
                  "place_furnace": "furnace", "place_plant": "plant"}[kind]
        state.set_material(cell, placed)
    if kind in ("place_table", "place_furnace", "make_wood_pickaxe",
                "make_stone_pickaxe", "make_iron_pickaxe"):
        recipe = tree.recipe_for(kind)
        for item, count in recipe.consumed.items():
            agent.inventory[item] -= count
        if recipe.produced:
            agent.inventory[recipe.produced] = agent.inventory.get(recipe.produced, 0) + 1
        _grant(agent, kind, tick, events, tree)
    elif kind == "place_stone":
        agent.inventory["stone"] -= 1
    return "success", "ok"


def _validate_action(action: Action, state: WorldState) -> None:
    if action.kind not in ALL_ACTION_KINDS:
        raise ContractError(f"unknown action kind: {action.kind!r}")
    if action.kind == "navigate":
        if action.target not in NAV_DESTINATIONS:
            raise ContractError(f"malformed navigate payload: {action.target!r}")
    if action.kind == "share":
        if action.item not in SHAREABLE_ITEMS or not isinstance(action.agent, int):
            raise ContractError(f"malformed share payload: {action!r}")
        if not 1 <= action.agent <= len(state.agents):
            raise ContractError(f"share target out of range: {action.agent}")


def step(state: WorldState, actions: Mapping[int, Action],
         tree: Optional[TechTree] = None) -> Tuple[WorldState, List[ActionOutcome], List[Event]]:
    """Advance one tick: actions (ascending id), hazards, vitals, tick+1.

    Mutates and returns `state`. Contested cells resolve to the first-applied
    collector; later actors on an exhausted cell fail with target_gone.
    """
    tree = tree or default_tree()
    living_ids = {a.id for a in state.agents if a.alive}
    missing = living_ids - set(actions)
    if missing:
        raise ContractError(f"missing actions for living agents: {sorted(missing)}")
    for agent_id, action in actions.items():
        if agent_id in living_ids:
            _validate_action(action, state)

    new_tick = state.tick + 1
    outcomes: List[ActionOutcome] = []
    events: List[Event] = []
    exhausted: Set[Position] = set()

    # Agents see while they act: fold current windows into discovered maps so
    # navigation resolves identically whether or not observe() ran this tick
    # (replays feed recorded actions straight through step).
    for agent in state.agents:
        if agent.alive:
            _discover_window(state, agent)

    for agent_id in sorted(actions):
        action = actions[agent_id]
        if agent_id not in living_ids:
            outcomes.append(ActionOutcome(agent_id, action, "failure", "dead"))
            continue
        agent = state.agent_by_id(agent_id)
        kind = action.kind

        if kind != "sleep":
            agent.sleeping = False

        if kind == "navigate":
            primitive = navigate_step(state, agent_id, action.target)
            if primitive is None:
                outcomes.append(ActionOutcome(agent_id, action, "failure", "blocked"))
                continue
            if primitive.kind == "do":
                if (action.target not in NAV_COLLECTIBLE
                        and facing_token(state, agent) == action.target):
                    result, reason = "success", "ok"  # arrived and facing it
                else:
                    # Collecting the target, or digging through a wall en route.
                    result, reason = _apply_do(state, agent, new_tick, events, exhausted, tree)
                outcomes.append(ActionOutcome(agent_id, action, result, reason))
            else:
                result, reason = _apply_move(state, agent, primitive.kind)
                if result == "success":
                    outcomes.append(ActionOutcome(agent_id, action, "in_progress", "ok"))
                else:
                    outcomes.append(ActionOutcome(agent_id, action, "in_progress", "blocked"))
            continue

        if kind == "noop":
            outcomes.append(ActionOutcome(agent_id, action, "success", "ok"))
        elif kind in MOVE_ACTIONS:
            result, reason = _apply_move(state, agent, kind)
            outcomes.append(ActionOutcome(agent_id, action, result, reason))
        elif kind == "do":
            result, reason = _apply_do(state, agent, new_tick, events, exhausted, tree)
            outcomes.append(ActionOutcome(agent_id, action, result, reason))
        elif kind == "sleep":
            agent.sleeping = True
            outcomes.append(ActionOutcome(agent_id, action, "success", "ok"))
        elif kind == "share":
            outcomes.append(transfer_item(state, agent_id, action.agent, action.item))
        else:
            result, reason = _apply_place_or_make(state, agent, kind, new_tick, events, tree)
            outcomes.append(ActionOutcome(agent_id, action, result, reason))

    # Hazards: standing in lava is lethal.
    for agent in state.agents:
        if agent.alive and state.material_at(agent.position) == "lava":
            agent.health = 0
            agent.alive = False
            events.append(Event(tick=new_tick, agent=agent.id, kind="death", name="lava"))

    for agent in state.agents:
        if agent.alive:
            was_alive = agent.alive
            update_vitals(agent, new_tick, state.config)
            if was_alive and not agent.alive:
                events.append(Event(tick=new_tick, agent=agent.id, kind="death", name="vitals"))

    state.tick = new_tick
    return state, outcomes, events


# ---------------------------------------------------------------------------
# Terminal status and rendering


@dataclass(frozen=True)
class TerminalStatus:
    kind: str  # running | success | timeout | all_dead
    tick: Optional[int] = None


def terminal_status(state: WorldState) -> TerminalStatus:
    for agent in state.agents:
        if agent.inventory.get("diamond", 0) >= 1:
            return TerminalStatus("success", state.tick)
    if not any(a.alive for a in state.agents):
        return TerminalStatus("all_dead")
    if state.tick >= state.config.max_ticks:
        return TerminalStatus("timeout")
    return TerminalStatus("running")


MAP_LEGEND = {
    "grass": ".", "sand": ",", "water": "~", "stone": "#", "tree": "T",
    "coal": "c", "iron": "i", "diamond": "d", "lava": "L", "path": " ",
    "table": "t", "furnace": "f", "plant": "p",
}


def render_map(state: WorldState) -> str:
    """Plain-text snapshot; cows render as 'C', agents as their id mod 10."""
    rows = []
    for y in range(state.height):
        row = [MAP_LEGEND[MATERIALS[state.grid[y, x]]] for x in range(state.width)]
        rows.append(row)
    for pos in state.cows:
        rows[pos.y][pos.x] = "C"
    for agent in state.agents:
        if agent.alive:
            rows[agent.position.y][agent.position.x] = str(agent.id % 10)
    return "\n".join("".join(r) for r in rows)
