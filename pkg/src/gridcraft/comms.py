"""Structured inter-agent communication: messages, delivery, and help ordering.

Every message is a deterministic projection of the sender's own observation
and latest structured response; nothing global leaks in. Delivery is a
broadcast, but each inbox is ordered so the recipient's designated help
targets come first.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional

from .errors import ContractError
from .schema import Collaboration, ResponseEvent
from .techtree import TechTree, default_tree
from .world import Observation, SHAREABLE_ITEMS


@dataclass
class Message:
    """One agent's outgoing report for one tick."""

    sender: int
    tick: int
    status: dict  # vitals snapshot + self-reported position
    resources: Dict[str, int]  # nonzero inventory only
    short_term_goal: str
    assistance_request: Optional[dict]  # {"item": ..., "quantity": ...} or None
    collaboration: Collaboration
    deliverable: bool = True  # False under communication-less baselines

    def to_dict(self) -> dict:
        return {
            "sender": self.sender,
            "tick": self.tick,
            "status": dict(self.status),
            "resources": dict(self.resources),
            "short_term_goal": self.short_term_goal,
            "assistance_request": dict(self.assistance_request) if self.assistance_request else None,
            "collaboration": self.collaboration.model_dump(mode="json"),
            "deliverable": self.deliverable,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Message":
        return cls(
            sender=d["sender"],
            tick=d["tick"],
            status=dict(d["status"]),
            resources=dict(d["resources"]),
            short_term_goal=d["short_term_goal"],
            assistance_request=dict(d["assistance_request"]) if d.get("assistance_request") else None,
            collaboration=Collaboration.model_validate(d["collaboration"]),
            deliverable=d.get("deliverable", True),
        )


@dataclass
class Inbox:
    recipient: int
    messages: List[Message] = field(default_factory=list)


def help_targets(agent: int, n: int) -> List[int]:
    """Who this agent should assist, in priority order: predecessor, then leader."""
    if not 1 <= agent <= n:
        raise ContractError(f"agent {agent} out of range 1..{n}")
    if agent == 1:
        return []
    targets = [agent - 1]
    if 1 not in targets:
        targets.append(1)
    return targets


def is_diamond_seeker(agent: int, n: int) -> bool:
    """The highest-indexed agent eventually pivots from helping to diamond hunting."""
    if not 1 <= agent <= n:
        raise ContractError(f"agent {agent} out of range 1..{n}")
    return agent == n


# Landmarks worth reporting to teammates, nearest visible instance each.
# Only non-contended kinds: structures and water are shareable by nature, and
# the diamond ends the episode for everyone. Broadcasting ordinary ore seams
# just sends the whole team to the same cells.
SIGHTING_KINDS = ("table", "furnace", "water", "diamond")


def _visible_sightings(observation: Observation) -> Dict[str, list]:
    ox, oy = observation.window_origin
    px, py = observation.position
    best: Dict[str, tuple] = {}
    for wy, row in enumerate(observation.window):
        for wx, token in enumerate(row):
            if token in SIGHTING_KINDS:
                x, y = ox + wx, oy + wy
                dist = abs(x - px) + abs(y - py)
                if token not in best or dist < best[token][0]:
                    best[token] = (dist, [x, y])
    return {kind: pos for kind, (_, pos) in sorted(best.items())}


def compose_message(agent: int, observation: Observation, response: ResponseEvent,
                    tree: Optional[TechTree] = None) -> Message:
    """Project the sender's observation + response into a bounded structured message."""
    tree = tree or default_tree()
    status = dict(observation.vitals)
    status["position"] = [observation.position.x, observation.position.y]
    status["sightings"] = _visible_sightings(observation)
    resources = {k: v for k, v in sorted(observation.inventory.items()) if v > 0}

    goal = response.goal.current_goal.value
    request = None
    if goal != "share":
        for entry in tree.unmet_requirements(observation.inventory, observation.facing, goal):
            name, _, amount = entry.partition(":")
            if name in SHAREABLE_ITEMS:
                request = {"item": name, "quantity": int(amount)}
                break

    return Message(
        sender=agent,
        tick=observation.tick,
        status=status,
        resources=resources,
        short_term_goal=goal,
        assistance_request=request,
        collaboration=response.collaboration,
    )


def deliver(messages: List[Message], n: int) -> Dict[int, Inbox]:
    """Broadcast: each agent receives every other sender's message, help targets first."""
    seen = set()
    for m in messages:
        if not 1 <= m.sender <= n:
            raise ContractError(f"message from unknown sender {m.sender}")
        if m.sender in seen:
            raise ContractError(f"duplicate message from sender {m.sender}")
        seen.add(m.sender)

    inboxes: Dict[int, Inbox] = {}
    for recipient in range(1, n + 1):
        targets = help_targets(recipient, n)
        rank = {t: i for i, t in enumerate(targets)}

        def priority(msg: Message) -> tuple:
            if msg.sender in rank:
                return (0, rank[msg.sender])
            return (1, msg.sender)

        ordered = sorted((m for m in messages if m.sender != recipient), key=priority)
        inboxes[recipient] = Inbox(recipient=recipient, messages=ordered)
    return inboxes


_LINES_PER_MESSAGE = 6


def _render_message(m: Message) -> List[str]:
    s = m.status
    resources = ", ".join(f"{k}:{v}" for k, v in m.resources.items()) or "none"
    request = (f"{m.assistance_request['item']}:{m.assistance_request['quantity']}"
               if m.assistance_request else "none")
    c = m.collaboration
    return [
        f"from agent {m.sender} at tick {m.tick}:",
        (f"  status: health={s['health']} food={s['food']} drink={s['drink']} "
         f"energy={s['energy']} position=({s['position'][0]},{s['position'][1]})"),
        f"  resources: {resources}",
        f"  goal: {m.short_term_goal}",
        f"  requests: {request}",
        (f"  collab: helping={c.target_agent_to_help} need={c.target_agent_need.value} "
         f"can_help={c.can_help_now.value} helped_by={c.being_helped_by_agent}"),
    ]


def render_inbox(inbox: Inbox, budget: int = 60) -> str:
    """Fixed key:value rendering; lowest-priority messages beyond `budget` lines are elided."""
    if not inbox.messages:
        return "(no messages)"
    blocks: List[List[str]] = []
    used = 0
    omitted = 0
    for idx, message in enumerate(inbox.messages):
        block = _render_message(message)
        if used + len(block) <= budget:
            blocks.append(block)
            used += len(block)
        else:
            omitted = len(inbox.messages) - idx
            break
    if omitted:
        while blocks and used + 1 > budget:
            dropped = blocks.pop()
            used -= len(dropped)
            omitted += 1
    lines = [line for block in blocks for line in block]
    if omitted:
        lines.append(f"({omitted} messages omitted)")
    return "\n".join(lines)
