"""Teacher weights as an exponential moving average of the student's."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ContractViolationError
from .net import ParamSet, lincomb


@dataclass
class TeacherState:
    weights: ParamSet
    updates_applied: int = 0


def init_teacher(student: ParamSet) -> TeacherState:
    """Start the teacher as a copy of its student.

    The schedule gives alpha=0 on the first update, so the copy is overwritten
    immediately; it only keeps evaluation well-defined before step one.
    """
    return TeacherState(weights=student.copy(), updates_applied=0)


def ema_update(teacher: TeacherState, student: ParamSet, alpha: float) -> TeacherState:
    """teacher <- alpha*teacher + (1-alpha)*student, coordinatewise."""
    if not 0.0 <= alpha < 1.0:
        raise ContractViolationError("alpha must be in [0, 1)")
    if not teacher.weights.same_shape(student):
        raise ContractViolationError("teacher and student shapes differ")
    return TeacherState(
        weights=lincomb(alpha, teacher.weights, 1.0 - alpha, student),
        updates_applied=teacher.updates_applied + 1,
    )
