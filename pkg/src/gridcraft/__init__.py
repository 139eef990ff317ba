"""gridcraft: a deterministic multi-agent survival gridworld plus a full agent
stack: knowledge-graph memory, schema-constrained structured reasoning output,
structured inter-agent communication, scripted and remote planner backends,
and an episode evaluation harness."""

__version__ = "0.1.0"

from .comms import Inbox, Message, compose_message, deliver, help_targets, is_diamond_seeker, render_inbox
from .errors import (
    BackendError,
    ContractError,
    GenerationError,
    GraphFormatError,
    GridcraftError,
    IntegrityError,
    IntentError,
    NotAliveError,
    SchemaParseError,
    VersionMismatchError,
)
from .harness import (
    EpisodeRecord,
    MetricsTable,
    MilestoneRow,
    aggregate,
    check_milestone_order,
    export_messages,
    export_record,
    export_trace,
    import_record,
    milestones,
    replay_record,
    run_episode,
    run_sweep,
    score_return,
)
from .memory import (
    Experience,
    KnowledgeGraph,
    WorkingMemory,
    assemble_stwm,
    consolidate,
    export_graph,
    import_graph,
    retrospect,
)
from .policy import (
    BaselineKind,
    PromptBundle,
    RemoteBackend,
    RemoteEndpointConfig,
    ScriptedBackend,
    build_prompt,
    environment_description,
    run_tick,
)
from .schema import (
    ActionType,
    Collaboration,
    GoalType,
    InventoryItems,
    LongTermGoalType,
    MaterialType,
    NavigationDestinationItems,
    ResponseEvent,
    ResultType,
    ShareableItems,
    extract_action,
    parse_response,
    schema_document,
    serialize_response,
    validate_collaboration,
)
from .techtree import Recipe, TechTree, default_tree
from .world import (
    Action,
    ActionOutcome,
    AgentState,
    EpisodeConfig,
    Event,
    Material,
    Observation,
    Position,
    TerminalStatus,
    WorldState,
    check_prerequisites,
    generate_world,
    navigate_step,
    observe,
    render_map,
    step,
    terminal_status,
    transfer_item,
    update_vitals,
)
