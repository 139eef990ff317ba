"""Grid pathfinding primitives: BFS shortest paths and spiral frontier search.

Neighbor expansion order is pinned to up, down, left, right everywhere so that
shortest-path tie-breaking is identical across runs and implementations.
"""

from __future__ import annotations

from collections import deque
from typing import Callable, Iterable, Iterator, Optional, Set, Tuple

Pos = Tuple[int, int]

# (dx, dy) in the pinned order: up, down, left, right.
NEIGHBOR_OFFSETS = ((0, -1), (0, 1), (-1, 0), (1, 0))

OFFSET_TO_MOVE = {
    (0, -1): "move_up",
    (0, 1): "move_down",
    (-1, 0): "move_left",
    (1, 0): "move_right",
}


def neighbors(pos: Pos, width: int, height: int,
              offsets: Tuple[Pos, ...] = NEIGHBOR_OFFSETS) -> Iterator[Pos]:
    x, y = pos
    for dx, dy in offsets:
        nx, ny = x + dx, y + dy
        if 0 <= nx < width and 0 <= ny < height:
            yield (nx, ny)


def rotated_offsets(turns: int) -> Tuple[Pos, ...]:
    """Neighbor order rotated by `turns` places; varies shortest-path tie-breaks."""
    turns %= len(NEIGHBOR_OFFSETS)
    return NEIGHBOR_OFFSETS[turns:] + NEIGHBOR_OFFSETS[:turns]


def bfs_first_step(
    start: Pos,
    passable: Callable[[Pos], bool],
    is_goal: Callable[[Pos], bool],
    width: int,
    height: int,
    offsets: Tuple[Pos, ...] = NEIGHBOR_OFFSETS,
) -> Optional[Pos]:
    """First cell of a shortest path from `start` to the nearest passable goal cell.

    Returns None when no goal is reachable, and `start` itself when it is
    already a goal. `start` is always allowed regardless of `passable`; goal
    cells must themselves be passable to count. `offsets` only affects which
    of several shortest paths wins.
    """
    if is_goal(start):
        return start
    parent = {start: None}
    queue = deque([start])
    while queue:
        pos = queue.popleft()
        if pos != start and is_goal(pos):
            step = pos
            while parent[step] != start:
                step = parent[step]
            return step
        for nxt in neighbors(pos, width, height, offsets):
            if nxt not in parent and passable(nxt):
                parent[nxt] = pos
                queue.append(nxt)
    return None


def spiral_offsets(max_radius: int, start_quarter: int = 0) -> Iterator[Pos]:
    """Offsets on outward square rings, clockwise from the ring's top cell.

    `start_quarter` rotates the scan start by quarter turns (0=up, 1=right,
    2=down, 3=left) so callers can bias the spiral toward a facing direction.
    """
    for r in range(1, max_radius + 1):
        ring = []
        # Top edge left-to-right, right edge top-to-bottom, bottom edge
        # right-to-left, left edge bottom-to-top: a clockwise walk.
        ring += [(dx, -r) for dx in range(-r, r + 1)]
        ring += [(r, dy) for dy in range(-r + 1, r + 1)]
        ring += [(dx, r) for dx in range(r - 1, -r - 1, -1)]
        ring += [(-r, dy) for dy in range(r - 1, -r, -1)]
        shift = (start_quarter * len(ring)) // 4
        yield from ring[shift:] + ring[:shift]


def nearest_spiral_match(
    center: Pos,
    predicate: Callable[[Pos], bool],
    width: int,
    height: int,
    start_quarter: int = 0,
) -> Optional[Pos]:
    """First in-bounds cell satisfying `predicate` along the outward spiral."""
    cx, cy = center
    max_radius = max(width, height)
    for dx, dy in spiral_offsets(max_radius, start_quarter):
        x, y = cx + dx, cy + dy
        if 0 <= x < width and 0 <= y < height and predicate((x, y)):
            return (x, y)
    return None


def adjacent_to_any(pos: Pos, targets: Set[Pos], width: int, height: int) -> bool:
    return any(n in targets for n in neighbors(pos, width, height))
