"""Crafting hierarchy: recipes, depth scores, prerequisite checks, feedback lines.

This is the agents' semantic memory (what each task needs) and procedural
memory (which actions exist). The table is explicit data so researchers can
serialize it, edit it, and load a customized tree.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional


class TechTreeError(KeyError):
    """Unknown task/achievement lookup."""


@dataclass(frozen=True)
class Recipe:
    """One row of the crafting table.

    `required` lists everything that must be in inventory; `consumed` is the
    subset actually spent. Collection tools are required but kept; placed or
    crafted inputs are consumed.
    """

    task: str
    facing: str
    required: Dict[str, int] = field(default_factory=dict)
    consumed: Dict[str, int] = field(default_factory=dict)
    produced: Optional[str] = None

    def __post_init__(self):
        for item, count in self.consumed.items():
            if self.required.get(item, 0) < count:
                raise ValueError(f"recipe {self.task}: consumed {item} not covered by required")


_DEFAULT_RECIPES = [
    Recipe("collect_cow", facing="cow"),
    Recipe("collect_drink", facing="water"),
    Recipe("collect_wood", facing="tree", produced="wood"),
    Recipe("collect_stone", facing="stone", required={"wood_pickaxe": 1}, produced="stone"),
    Recipe("collect_coal", facing="coal", required={"wood_pickaxe": 1}, produced="coal"),
    Recipe("collect_iron", facing="iron", required={"stone_pickaxe": 1}, produced="iron"),
    Recipe("collect_diamond", facing="diamond", required={"iron_pickaxe": 1}, produced="diamond"),
    Recipe("place_table", facing="grass", required={"wood": 2}, consumed={"wood": 2}),
    Recipe("place_furnace", facing="grass", required={"stone": 4}, consumed={"stone": 4}),
    Recipe("make_wood_pickaxe", facing="table", required={"wood": 1}, consumed={"wood": 1},
           produced="wood_pickaxe"),
    Recipe("make_stone_pickaxe", facing="table", required={"stone": 1, "wood": 1},
           consumed={"stone": 1, "wood": 1}, produced="stone_pickaxe"),
    Recipe("make_iron_pickaxe", facing="furnace", required={"iron": 1, "coal": 1, "wood": 1},
           consumed={"iron": 1, "coal": 1, "wood": 1}, produced="iron_pickaxe"),
]

# Depth of each scored achievement along the wood -> diamond chain.
_DEFAULT_DEPTHS = {
    "collect_wood": 1,
    "place_table": 2,
    "make_wood_pickaxe": 3,
    "collect_stone": 4,
    "collect_coal": 4,
    "make_stone_pickaxe": 5,
    "place_furnace": 5,
    "collect_iron": 5,
    "make_iron_pickaxe": 6,
    "collect_diamond": 7,
}

# Scored achievements in report-table column order.
SCORED_TASKS = [
    "collect_wood",
    "place_table",
    "make_wood_pickaxe",
    "collect_stone",
    "make_stone_pickaxe",
    "collect_iron",
    "collect_coal",
    "place_furnace",
    "make_iron_pickaxe",
    "collect_diamond",
]

# Team-level ordering constraints: a task cannot be completed by anyone before
# every listed prerequisite was completed by someone.
TEAM_PREREQS: Dict[str, List[str]] = {
    "collect_wood": [],
    "place_table": ["collect_wood"],
    "make_wood_pickaxe": ["place_table", "collect_wood"],
    "collect_stone": ["make_wood_pickaxe"],
    "collect_coal": ["make_wood_pickaxe"],
    "make_stone_pickaxe": ["collect_stone", "place_table"],
    "place_furnace": ["collect_stone"],
    "collect_iron": ["make_stone_pickaxe"],
    "make_iron_pickaxe": ["place_furnace", "collect_iron", "collect_coal"],
    "collect_diamond": ["make_iron_pickaxe"],
}

# Which collect task a "do" resolves to, by faced cell.
DO_TASKS = {
    "cow": "collect_cow",
    "water": "collect_drink",
    "tree": "collect_wood",
    "stone": "collect_stone",
    "coal": "collect_coal",
    "iron": "collect_iron",
    "diamond": "collect_diamond",
}

# All 16 action names in wire-enum order, used by the feedback block.
ACTION_NAMES = [
    "noop", "move_left", "move_right", "move_up", "move_down", "do", "sleep",
    "place_stone", "place_table", "place_furnace", "place_plant",
    "make_wood_pickaxe", "make_stone_pickaxe", "make_iron_pickaxe",
    "Navigator", "share",
]


class TechTree:
    """Immutable recipe table with depth levels."""

    def __init__(self, recipes: Optional[List[Recipe]] = None,
                 depths: Optional[Dict[str, int]] = None):
        self.recipes: List[Recipe] = list(recipes) if recipes is not None else list(_DEFAULT_RECIPES)
        self.depths: Dict[str, int] = dict(depths) if depths is not None else dict(_DEFAULT_DEPTHS)
        self._by_task = {r.task: r for r in self.recipes}

    def recipe_for(self, task: str) -> Recipe:
        try:
            return self._by_task[task]
        except KeyError:
            raise TechTreeError(f"unknown task: {task!r}") from None

    def depth_of(self, achievement: str) -> int:
        try:
            return self.depths[achievement]
        except KeyError:
            raise TechTreeError(f"unknown achievement: {achievement!r}") from None

    def unmet_requirements(self, inventory: Mapping[str, int], facing: str, task: str) -> List[str]:
        """Missing requirements for `task`, as "facing:<material>" / "<item>:<shortfall>" entries.

        Empty list means the task can be performed right now.
        """
        recipe = self.recipe_for(task)
        unmet: List[str] = []
        if facing != recipe.facing:
            unmet.append(f"facing:{recipe.facing}")
        for item, count in recipe.required.items():
            have = inventory.get(item, 0)
            if have < count:
                unmet.append(f"{item}:{count - have}")
        return unmet

    def task_for_do(self, facing: str) -> Optional[str]:
        return DO_TASKS.get(facing)

    def feedback_lines(self, inventory: Mapping[str, int], facing: str) -> List[str]:
        """One status line per action, fixed order, byte-stable for equal inputs."""

        def recipe_line(name: str, task: str) -> str:
            recipe = self.recipe_for(task)
            needs = [f"facing={recipe.facing}"]
            needs += [f"{item}:{count}" for item, count in recipe.required.items()]
            unmet = self.unmet_requirements(inventory, facing, task)
            status = "ready" if not unmet else "not ready, missing " + ", ".join(unmet)
            return f"{name}: needs {', '.join(needs)} [{status}]"

        lines: List[str] = []
        for name in ACTION_NAMES:
            if name in ("noop", "move_left", "move_right", "move_up", "move_down", "sleep"):
                lines.append(f"{name}: always available [ready]")
            elif name == "do":
                task = self.task_for_do(facing)
                if task is None:
                    lines.append(f"do: acts on the faced cell; facing={facing} is not collectible [not ready]")
                else:
                    lines.append(recipe_line(f"do -> {task}", task))
            elif name == "place_stone":
                have = inventory.get("stone", 0)
                status = "ready" if have >= 1 else "not ready, missing stone:1"
                lines.append(f"place_stone: needs stone:1 and an open faced cell [{status}]")
            elif name == "place_plant":
                status = "ready" if facing == "grass" else "not ready, missing facing:grass"
                lines.append(f"place_plant: needs facing=grass [{status}]")
            elif name == "Navigator":
                lines.append("Navigator: moves one step per tick toward a chosen known material [ready]")
            elif name == "share":
                lines.append("share: gives 1 item to a living agent within range [ready if you hold the item]")
            else:
                lines.append(recipe_line(name, name))
        return lines

    def to_json(self) -> str:
        doc = {
            "recipes": [
                {
                    "task": r.task,
                    "facing": r.facing,
                    "required": dict(r.required),
                    "consumed": dict(r.consumed),
                    "produced": r.produced,
                }
                for r in self.recipes
            ],
            "depths": dict(self.depths),
        }
        return json.dumps(doc, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "TechTree":
        doc = json.loads(text)
        recipes = [
            Recipe(task=r["task"], facing=r["facing"], required=dict(r["required"]),
                   consumed=dict(r["consumed"]), produced=r.get("produced"))
            for r in doc["recipes"]
        ]
        return cls(recipes=recipes, depths={k: int(v) for k, v in doc["depths"].items()})


_DEFAULT_TREE = TechTree()


def default_tree() -> TechTree:
    return _DEFAULT_TREE
