"""Built-in planning domains for the three tasks.

The block-stacking and tool-use domains are fixed templates (the block one
parameterized by its object count).  The four-room navigation domain is
generated: rooms are labeled by (column, row) bits, doors by the two rooms
they connect, and only actions whose door/room connectivity is valid are
emitted.
"""
from __future__ import annotations

ROOMS = ("00", "01", "10", "11")
DOORS = ("0001", "0010", "0111", "1011")


def door_rooms(door: str) -> tuple[str, str]:
    return door[:2], door[2:]


def room_doors(room: str) -> tuple[str, ...]:
    return tuple(d for d in DOORS if room in door_rooms(d))


def block_domain(n_objects: int) -> str:
    """Domain text for stacking ``n_objects`` blocks."""
    if not 1 <= n_objects <= 9:
        raise ValueError("n_objects must be in 1..9")
    objects = " ".join("o%d" % (i + 1) for i in range(n_objects))
    return """\
(define (domain block)
    (:objects %s)
    (:predicates
        (gripper_at ?o)
        (gripper_at_target)
        (at_target ?o)
        (on ?o1 ?o2)
    )
    (:action move_gripper_to_o
        :parameters (?o)
        :precondition ()
        :effect (and (gripper_at ?o) (forall ?o1 != ?o: (not (gripper_at ?o1)) (not (on ?o1 ?o)) (not (gripper_at_target))))
    )
    (:action move_o_to_target
        :parameters (?o)
        :precondition (gripper_at ?o)
        :effect (at_target ?o)
    )
    (:action move_o_on_o
        :parameters (?o1 ?o2)
        :precondition (and (gripper_at ?o1) )
        :effect (and (on ?o1 ?o2) (not (on ?o2 ?o1)))
    )
    (:action move_gripper_to_target
        :parameters ()
        :precondition ()
        :effect
        (and
            (gripper_at_target)
            (forall ?o: (not (gripper_at ?o))
            )
        )
    )
)
""" % objects


def tool_domain() -> str:
    """Domain text for the rake/block tool-use task."""
    return """\
(define (domain tool)
    (:requirements :strips)
    (:objects obj rake)
    (:predicates
        (gripper_at ?o)
        (gripper_at_target)
        (at_target ?o)
        (at ?o1 ?o2)
    )
    (:action move_gripper_to_o
        :parameters (?o)
        :precondition ()
        :effect
            (and (gripper_at ?o)
                (forall ?o1 != ?o:
                    (not (gripper_at ?o1))
                    (not (at ?o0 ?o1))
                    (not (gripper_at_target))
                )
            )
    )
    (:action move_o_at_o
        :parameters (?o0 ?o1)
        :precondition (gripper_at ?o0)
        :effect (at ?o0 ?o1)
    )
    (:action move_o_to_target_by_o
        :parameters (?o1 ?o0)
        :precondition (and (at ?o0 ?o1) (gripper_at ?o0) )
        :effect (and (at_target ?o1) (at ?o0 ?o1) )
    )
    (:action move_o_to_target
        :parameters (?o)
        :precondition (gripper_at ?o)
        :effect (and (at_target ?o) (gripper_at ?o) )
    )
    (:action move_gripper_to_target
        :parameters (?o)
        :precondition ()
        :effect
        (and
            (gripper_at_target)
            (forall ?o:
                (not (gripper_at ?o))
            )
        )
    )
)
"""


def generate_ant_domain() -> str:
    """Generate the four-room navigation domain.

    Emitted per room <R> and door <D>, with connectivity enforced:

    * ``move_to_room_center_<R>_from_door_<D>`` only when D touches R; the
      effect clears the *other* door of R.
    * ``move_to_door_<D>_from_<R>`` only when D touches R.
    * ``move_to_room_center_<R>`` guarded by not standing at either door
      of R (closed-world negative preconditions).
    * ``move_to_target_in_room_<R>`` requires the target to be in R.
    """
    lines = ["(define (domain ant)", "    (:requirements :strips)"]
    preds = ["    (:predicates"]
    for d in DOORS:
        preds.append("        (at_door_%s)" % d)
    for r in ROOMS:
        preds.append("        (at_room_center_%s)" % r)
    preds.append("        (at_target)")
    for r in ROOMS:
        preds.append("        (in_room_%s)" % r)
    for r in ROOMS:
        preds.append("        (target_in_room_%s)" % r)
    preds.append("    )")
    lines.extend(preds)

    for room in ROOMS:
        d1, d2 = room_doors(room)
        for door, other in ((d1, d2), (d2, d1)):
            lines.append("""\
    (:action move_to_room_center_%(room)s_from_door_%(door)s
        :parameters ()
        :precondition (at_door_%(door)s)
        :effect (and (at_room_center_%(room)s) (not (at_door_%(other)s)))
    )""" % {"room": room, "door": door, "other": other})
        for door in (d1, d2):
            lines.append("""\
    (:action move_to_door_%(door)s_from_%(room)s
        :parameters ()
        :precondition (at_room_center_%(room)s)
        :effect (and (at_door_%(door)s) (not (at_room_center_%(room)s)))
    )""" % {"room": room, "door": door})
        lines.append("""\
    (:action move_to_room_center_%(room)s
        :parameters ()
        :precondition (and (in_room_%(room)s) (not (at_door_%(d1)s)) (not (at_door_%(d2)s)))
        :effect (at_room_center_%(room)s)
    )""" % {"room": room, "d1": d1, "d2": d2})
        lines.append("""\
    (:action move_to_target_in_room_%(room)s
        :parameters ()
        :precondition (and (at_room_center_%(room)s) (target_in_room_%(room)s))
        :effect (and (at_target) (in_room_%(room)s) (not (at_room_center_%(room)s)))
    )""" % {"room": room})
    lines.append(")")
    return "\n".join(lines) + "\n"
