"""Crafting-table fidelity: the recipe rows, depths, and feedback lines."""

import itertools

import pytest

from gridcraft.techtree import (
    ACTION_NAMES,
    SCORED_TASKS,
    TEAM_PREREQS,
    Recipe,
    TechTree,
    TechTreeError,
    default_tree,
)

# Independent statement of the crafting table, kept separate from the
# implementation on purpose: the brute-force oracle below evaluates this
# literally.
LITERAL_TABLE = {
    "collect_cow": ("cow", {}),
    "collect_drink": ("water", {}),
    "collect_wood": ("tree", {}),
    "collect_stone": ("stone", {"wood_pickaxe": 1}),
    "collect_coal": ("coal", {"wood_pickaxe": 1}),
    "collect_iron": ("iron", {"stone_pickaxe": 1}),
    "collect_diamond": ("diamond", {"iron_pickaxe": 1}),
    "place_table": ("grass", {"wood": 2}),
    "place_furnace": ("grass", {"stone": 4}),
    "make_wood_pickaxe": ("table", {"wood": 1}),
    "make_stone_pickaxe": ("table", {"stone": 1, "wood": 1}),
    "make_iron_pickaxe": ("furnace", {"iron": 1, "coal": 1, "wood": 1}),
}

FACINGS = ["grass", "sand", "water", "stone", "tree", "coal", "iron", "diamond",
           "lava", "path", "table", "furnace", "plant", "cow", "out_of_bounds"]


def test_exactly_twelve_recipes():
    tree = default_tree()
    assert len(tree.recipes) == 12
    assert {r.task for r in tree.recipes} == set(LITERAL_TABLE)


def test_recipe_rows_match_table():
    tree = default_tree()
    for task, (facing, required) in LITERAL_TABLE.items():
        recipe = tree.recipe_for(task)
        assert recipe.facing == facing
        assert recipe.required == required


def test_recipe_for_examples():
    tree = default_tree()
    iron = tree.recipe_for("make_iron_pickaxe")
    assert iron.facing == "furnace"
    assert iron.required == {"iron": 1, "coal": 1, "wood": 1}
    drink = tree.recipe_for("collect_drink")
    assert drink.facing == "water" and drink.required == {}
    furnace = tree.recipe_for("place_furnace")
    assert furnace.facing == "grass" and furnace.required == {"stone": 4}
    with pytest.raises(TechTreeError):
        tree.recipe_for("make_laser")


def test_collect_tools_are_not_consumed():
    tree = default_tree()
    for task in ("collect_stone", "collect_coal", "collect_iron", "collect_diamond"):
        assert tree.recipe_for(task).consumed == {}


def test_depths_pinned():
    tree = default_tree()
    expected = {
        "collect_wood": 1, "place_table": 2, "make_wood_pickaxe": 3,
        "collect_stone": 4, "collect_coal": 4, "make_stone_pickaxe": 5,
        "place_furnace": 5, "collect_iron": 5, "make_iron_pickaxe": 6,
        "collect_diamond": 7,
    }
    for task, depth in expected.items():
        assert tree.depth_of(task) == depth
    assert sum(expected.values()) == 42
    with pytest.raises(TechTreeError):
        tree.depth_of("collect_cow")


def test_depth_consistency_over_required_tools():
    # Each required tool's producing achievement sits no deeper than the task
    # itself; strictly shallower except the pinned collect_iron tie.
    tree = default_tree()
    producer = {"wood_pickaxe": "make_wood_pickaxe",
                "stone_pickaxe": "make_stone_pickaxe",
                "iron_pickaxe": "make_iron_pickaxe"}
    for recipe in tree.recipes:
        if recipe.task not in tree.depths:
            continue
        for item in recipe.required:
            if item in producer:
                tool_depth = tree.depth_of(producer[item])
                if recipe.task == "collect_iron":
                    assert tool_depth <= tree.depth_of(recipe.task)
                else:
                    assert tool_depth < tree.depth_of(recipe.task)


def test_unmet_requirements_examples():
    tree = default_tree()
    assert tree.unmet_requirements({"wood": 1}, "table", "make_stone_pickaxe") == ["stone:1"]
    assert tree.unmet_requirements({}, "grass", "collect_wood") == ["facing:tree"]
    assert tree.unmet_requirements({"iron": 1, "coal": 1, "wood": 1}, "furnace",
                                   "make_iron_pickaxe") == []
    assert tree.unmet_requirements({}, "diamond", "collect_diamond") == ["iron_pickaxe:1"]


def test_unmet_requirements_brute_force_oracle():
    """Exhaustive agreement with a literal evaluation of the table."""
    tree = default_tree()
    counts = (0, 1, 2, 4)
    for task, (need_facing, required) in LITERAL_TABLE.items():
        items = sorted(required) or ["wood"]  # vary one irrelevant item too
        for combo in itertools.product(counts, repeat=len(items)):
            inventory = dict(zip(items, combo))
            for facing in FACINGS:
                expected = []
                if facing != need_facing:
                    expected.append(f"facing:{need_facing}")
                for item, count in required.items():
                    if inventory.get(item, 0) < count:
                        expected.append(f"{item}:{count - inventory.get(item, 0)}")
                got = tree.unmet_requirements(inventory, facing, task)
                assert got == expected, (task, inventory, facing)


def test_feedback_lines_enumerate_all_actions():
    tree = default_tree()
    lines = tree.feedback_lines({}, "grass")
    assert len(lines) == 16
    assert [line.split(":")[0].split(" ->")[0] for line in lines] == ACTION_NAMES


def test_feedback_marks_do_by_facing():
    tree = default_tree()
    fresh = tree.feedback_lines({}, "grass")
    do_line = next(line for line in fresh if line.startswith("do"))
    assert "not ready" in do_line

    facing_tree = tree.feedback_lines({}, "tree")
    do_line = next(line for line in facing_tree if line.startswith("do"))
    assert "collect_wood" in do_line and "[ready]" in do_line

    with_pickaxe = tree.feedback_lines({"wood_pickaxe": 1}, "stone")
    do_line = next(line for line in with_pickaxe if line.startswith("do"))
    assert "collect_stone" in do_line and "[ready]" in do_line


def test_feedback_is_byte_stable():
    tree = default_tree()
    a = "\n".join(tree.feedback_lines({"wood": 2}, "grass"))
    b = "\n".join(tree.feedback_lines({"wood": 2}, "grass"))
    assert a == b


def test_serialization_round_trip():
    tree = default_tree()
    text = tree.to_json()
    clone = TechTree.from_json(text)
    assert clone.to_json() == text
    assert clone.depths == tree.depths
    assert [r.task for r in clone.recipes] == [r.task for r in tree.recipes]


def test_customized_tree_loads():
    tree = TechTree(recipes=[Recipe("collect_wood", facing="tree", produced="wood")],
                    depths={"collect_wood": 1})
    clone = TechTree.from_json(tree.to_json())
    assert clone.recipe_for("collect_wood").facing == "tree"


def test_recipe_rejects_unbacked_consumption():
    with pytest.raises(ValueError):
        Recipe("bad", facing="grass", required={}, consumed={"wood": 1})


def test_team_prereqs_cover_scored_tasks():
    assert set(TEAM_PREREQS) == set(SCORED_TASKS)
