"""evoplan: a finite-domain planning toolkit with evolvable heuristics."""

__version__ = "0.1.0"

from .sas import Task, State, PartialAssignment, Operator, Variable, parse_sas, serialize_sas  # noqa: F401
from .search import SearchLimits, SearchOutcome, SearchResult, gbfs, validate_plan  # noqa: F401
from .heuristics import DEAD_END, Heuristic, build_heuristic  # noqa: F401
