"""Extended pi-calculus workbench.

Public surface: term constructors and syntactic operations, the transition
semantics and LTS builder, the authority model, the composition generator,
verification analyses, and the concrete syntax tools.
"""

from .analysis import (
    AgentActive,
    CanFire,
    IsNilLike,
    LabelPattern,
    MatchFired,
    StatePredicate,
    Trace,
    bisimilar,
    count_active_agents,
    evaluate_predicate,
    find_deadlocks,
    reachable,
    simulate,
    strong_bisimilar,
    weak_bisimilar,
)
from .authority import (
    AuthorityModel,
    ServiceView,
    authorize,
    goals_of,
    ops_of,
    roles_of,
    service_view,
)
from .congruence import (
    CanonicalProcess,
    alpha_equivalent,
    alpha_normal,
    canonical_state,
    canonicalize,
    is_nil_like,
    normal_form,
    state_digest,
    structurally_congruent,
)
from .errors import (
    DanglingChannel,
    DanglingReference,
    EndpointMismatch,
    OpenModeLts,
    ParseError,
    PicompError,
    SchemaViolation,
    StateSpaceExceeded,
    SubstitutionIntoAgent,
    UnauthorizedService,
    UndeclaredChannel,
    UndeclaredSignal,
    UnguardedRecursion,
    UnknownUser,
    UnresolvedAgent,
)
from .generator import (
    ChannelSpec,
    CompositionConfig,
    ServiceSpec,
    compose_model,
    compose_model_text,
    derive_sets,
    model_receiver,
    model_sender,
)
from .interchange import (
    WsdbData,
    export_lts,
    export_trace,
    import_lts,
    label_from_json,
    label_to_json,
    load_aidb,
    load_wsdb,
)
from .semantics import (
    BoundOutLabel,
    EmitLabel,
    ExplorationLimits,
    ExplorationMode,
    HandleLabel,
    InLabel,
    Label,
    Lts,
    OutLabel,
    TauLabel,
    Transition,
    build_lts,
    label_sort_key,
    sorted_transitions,
    transitions,
)
from .surface import (
    ModelFile,
    load_model,
    parse_model,
    parse_process,
    render_model,
    render_process,
    validate_model,
)
from .terms import (
    NIL,
    AgentCall,
    DefinitionTable,
    Handler,
    Input,
    Match,
    Nil,
    Output,
    Par,
    Process,
    Restrict,
    Seq,
    SignalEmit,
    Sum,
    Tau,
    all_names,
    bound_names,
    free_names,
    fresh_name,
    name_analysis,
    rename_binders,
    substitute,
)

__all__ = [name for name in dir() if not name.startswith("_")]
