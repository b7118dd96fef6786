from .model import (Domain, GroundOperator, Literal, Operator, PddlError,
                    PreconditionError, QuantifiedDelete, SymbolicState, apply,
                    ground_operator, ground_operators, lit, satisfies,
                    state_of)
from .parser import ParseError, parse_domain, parse_domain_file
from .planner import Plan, PlanCache, Planner, PlanningError
from .domains import (DOORS, ROOMS, block_domain, door_rooms,
                      generate_ant_domain, room_doors, tool_domain)

__all__ = [
    "Domain", "GroundOperator", "Literal", "Operator", "PddlError",
    "PreconditionError", "QuantifiedDelete", "SymbolicState", "apply",
    "ground_operator", "ground_operators", "lit", "satisfies", "state_of",
    "ParseError", "parse_domain", "parse_domain_file",
    "Plan", "PlanCache", "Planner", "PlanningError",
    "DOORS", "ROOMS", "block_domain", "door_rooms", "generate_ant_domain",
    "room_doors", "tool_domain",
]
