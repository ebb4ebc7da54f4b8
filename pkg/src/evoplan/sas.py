"""Finite-domain (SAS+) planning tasks and their on-disk file format.

A task is a set of multi-valued variables, an initial total assignment, a
goal partial assignment and a list of operators with preconditions, effects
and nonnegative integer costs.  The file format is the version-3 output of
the standard PDDL-to-finite-domain translator: sections for version, metric,
variables, mutex groups, initial state, goal and operators, followed by an
axiom count.  Derived variables (axioms) and conditional effects are
rejected; mutex groups are read and discarded because nothing downstream
consumes them.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

INFINITY = float("inf")


class SasParseError(Exception):
    """Malformed input; carries the 1-based line number where parsing failed."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line
        self.message = message


class UnsupportedVersionError(SasParseError):
    """The file declares a format version other than 3."""


class UnsupportedFeatureError(SasParseError):
    """Axioms, derived variables or conditional effects are present."""


@dataclass(frozen=True)
class Variable:
    """A state variable with a finite domain of named values."""

    id: int
    name: str
    domain_size: int
    value_names: tuple[str, ...]

    def __post_init__(self):
        if self.domain_size < 1:
            raise ValueError(f"variable {self.id}: domain size must be >= 1")
        if self.domain_size != len(self.value_names):
            raise ValueError(
                f"variable {self.id}: domain size {self.domain_size} does not "
                f"match {len(self.value_names)} value names"
            )


@dataclass(frozen=True, slots=True)
class State:
    """A total assignment: one value index per variable, in variable order."""

    values: tuple[int, ...]

    def __getitem__(self, var: int) -> int:
        return self.values[var]

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class PartialAssignment:
    """A sorted, duplicate-free set of (variable, value) pairs."""

    pairs: tuple[tuple[int, int], ...]

    def __post_init__(self):
        for (va, _), (vb, _) in zip(self.pairs, self.pairs[1:]):
            if va >= vb:
                raise ValueError("pairs must be strictly sorted by variable id")

    @classmethod
    def from_pairs(cls, pairs) -> "PartialAssignment":
        ordered = sorted(pairs)
        for (va, a), (vb, b) in zip(ordered, ordered[1:]):
            if va == vb:
                raise ValueError(f"variable {va} assigned more than once ({a} and {b})")
        return cls(tuple(ordered))

    def value_of(self, var: int) -> int | None:
        for v, val in self.pairs:
            if v == var:
                return val
        return None

    def satisfied_by(self, state: State) -> bool:
        return all(state.values[var] == val for var, val in self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    def __len__(self) -> int:
        return len(self.pairs)

    def __bool__(self) -> bool:
        return bool(self.pairs)


EMPTY_ASSIGNMENT = PartialAssignment(())


@dataclass(frozen=True)
class Operator:
    """A ground action: merged precondition, effect and nonnegative cost.

    The precondition merges prevail conditions and the pre-values of effect
    pairs; a variable occurring in both precondition and effect is preserved
    exactly as the input encoded it, even when the two values coincide.
    """

    name: str
    precondition: PartialAssignment
    effect: PartialAssignment
    cost: int

    def __post_init__(self):
        if not self.effect:
            raise ValueError(f"operator '{self.name}' has an empty effect")
        if self.cost < 0:
            raise ValueError(f"operator '{self.name}' has negative cost")

    def applicable_in(self, state: State) -> bool:
        return self.precondition.satisfied_by(state)


@dataclass(frozen=True)
class Task:
    """An immutable planning task, safe to share across concurrent searches."""

    variables: tuple[Variable, ...]
    operators: tuple[Operator, ...]
    initial_state: State
    goal: PartialAssignment
    metric_uses_costs: bool

    @cached_property
    def min_positive_cost(self) -> int:
        """Smallest positive operator cost, falling back to 1 when none exists.

        The fallback keeps cost divisions well-defined on all-zero-cost tasks.
        """
        positive = [op.cost for op in self.operators if op.cost > 0]
        return min(positive) if positive else 1

    @cached_property
    def goal_variables(self) -> frozenset[int]:
        return frozenset(var for var, _ in self.goal)

    def validate(self):
        n = len(self.variables)
        for i, var in enumerate(self.variables):
            if var.id != i:
                raise ValueError(f"variable at index {i} has id {var.id}")
        if len(self.initial_state) != n:
            raise ValueError("initial state length does not match variable count")
        for var, val in enumerate(self.initial_state.values):
            if not 0 <= val < self.variables[var].domain_size:
                raise ValueError(f"initial value {val} out of range for variable {var}")
        for var, val in self.goal:
            if not 0 <= var < n or not 0 <= val < self.variables[var].domain_size:
                raise ValueError(f"goal pair ({var}, {val}) out of range")
        for op in self.operators:
            for assignment in (op.precondition, op.effect):
                for var, val in assignment:
                    if not 0 <= var < n or not 0 <= val < self.variables[var].domain_size:
                        raise ValueError(f"operator '{op.name}': pair ({var}, {val}) out of range")


def is_goal(state: State, task: Task) -> bool:
    """True iff every goal pair agrees with the state (vacuously on empty goals)."""
    return task.goal.satisfied_by(state)


def applicable_operators(state: State, task: Task) -> list[int]:
    """Ids of the operators whose precondition holds in `state`, in id order."""
    values = state.values
    result = []
    for i, op in enumerate(task.operators):
        for var, val in op.precondition.pairs:
            if values[var] != val:
                break
        else:
            result.append(i)
    return result


def apply_operator(state: State, op_id: int, task: Task) -> State:
    """Successor of `state` under an applicable operator; the input is unchanged."""
    op = task.operators[op_id]
    if not op.applicable_in(state):
        raise ValueError(f"operator '{op.name}' is not applicable in {state.values}")
    values = list(state.values)
    for var, val in op.effect:
        values[var] = val
    return State(tuple(values))


class _Reader:
    def __init__(self, text: str):
        self._lines = text.splitlines()
        self._pos = 0

    @property
    def line_no(self) -> int:
        return self._pos

    def read_line(self, what: str = "line") -> str:
        while self._pos < len(self._lines):
            line = self._lines[self._pos]
            self._pos += 1
            return line
        raise SasParseError(self._pos, f"unexpected end of input, expected {what}")

    def read_int(self, what: str) -> int:
        line = self.read_line(what).strip()
        try:
            return int(line)
        except ValueError:
            raise SasParseError(self._pos, f"expected integer {what}, got '{line}'") from None

    def read_int_pair(self, what: str) -> tuple[int, int]:
        line = self.read_line(what).strip()
        parts = line.split()
        if len(parts) != 2:
            raise SasParseError(self._pos, f"expected '{what}' pair, got '{line}'")
        try:
            return int(parts[0]), int(parts[1])
        except ValueError:
            raise SasParseError(self._pos, f"expected integer pair for {what}, got '{line}'") from None

    def expect(self, marker: str):
        line = self.read_line(f"'{marker}'").strip()
        if line != marker:
            raise SasParseError(self._pos, f"expected '{marker}', got '{line}'")

    def expect_eof(self):
        while self._pos < len(self._lines):
            if self._lines[self._pos].strip():
                raise SasParseError(self._pos + 1, "trailing content after task definition")
            self._pos += 1


def parse_sas(data: bytes | str) -> Task:
    """Parse a complete version-3 translator output file into a Task.

    Prevail conditions are merged into the precondition; an effect pair with
    pre-value -1 contributes no precondition on its variable.  When the metric
    flag is 0 every operator cost is set to 1.  Mutex groups are skipped.
    """
    text = data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else data
    r = _Reader(text)

    r.expect("begin_version")
    version = r.read_int("format version")
    if version != 3:
        raise UnsupportedVersionError(r.line_no, f"unsupported format version {version}, expected 3")
    r.expect("end_version")

    r.expect("begin_metric")
    metric = r.read_int("metric flag")
    if metric not in (0, 1):
        raise SasParseError(r.line_no, f"metric flag must be 0 or 1, got {metric}")
    r.expect("end_metric")

    num_vars = r.read_int("variable count")
    variables = []
    for i in range(num_vars):
        r.expect("begin_variable")
        name = r.read_line("variable name")
        axiom_layer = r.read_int("axiom layer")
        if axiom_layer != -1:
            raise UnsupportedFeatureError(r.line_no, "derived variables (axioms) are not supported")
        size = r.read_int("domain size")
        if size < 1:
            raise SasParseError(r.line_no, f"variable {i} has domain size {size}")
        value_names = tuple(r.read_line("value name") for _ in range(size))
        r.expect("end_variable")
        variables.append(Variable(i, name, size, value_names))

    def check_pair(var: int, val: int, what: str):
        if not 0 <= var < num_vars:
            raise SasParseError(r.line_no, f"{what}: variable {var} out of range")
        if not 0 <= val < variables[var].domain_size:
            raise SasParseError(r.line_no, f"{what}: value {val} out of range for variable {var}")

    num_mutexes = r.read_int("mutex group count")
    for _ in range(num_mutexes):
        r.expect("begin_mutex_group")
        k = r.read_int("mutex group size")
        for _ in range(k):
            var, val = r.read_int_pair("mutex fact")
            check_pair(var, val, "mutex fact")
        r.expect("end_mutex_group")

    r.expect("begin_state")
    init_values = []
    for var in range(num_vars):
        val = r.read_int(f"initial value of variable {var}")
        check_pair(var, val, "initial state")
        init_values.append(val)
    r.expect("end_state")

    r.expect("begin_goal")
    num_goals = r.read_int("goal pair count")
    goal_pairs = []
    for _ in range(num_goals):
        var, val = r.read_int_pair("goal pair")
        check_pair(var, val, "goal")
        goal_pairs.append((var, val))
    try:
        goal = PartialAssignment.from_pairs(goal_pairs)
    except ValueError as exc:
        raise SasParseError(r.line_no, f"invalid goal: {exc}") from None
    r.expect("end_goal")

    num_ops = r.read_int("operator count")
    operators = []
    for _ in range(num_ops):
        r.expect("begin_operator")
        name = r.read_line("operator name")
        num_prevail = r.read_int("prevail condition count")
        pre_pairs = []
        for _ in range(num_prevail):
            var, val = r.read_int_pair("prevail condition")
            check_pair(var, val, "prevail condition")
            pre_pairs.append((var, val))
        num_effects = r.read_int("effect count")
        eff_pairs = []
        for _ in range(num_effects):
            line = r.read_line("effect").strip()
            parts = line.split()
            try:
                fields = [int(p) for p in parts]
            except ValueError:
                raise SasParseError(r.line_no, f"expected integer effect fields, got '{line}'") from None
            if not fields:
                raise SasParseError(r.line_no, "expected effect 'conds var pre post'")
            if fields[0] != 0:
                raise UnsupportedFeatureError(r.line_no, "conditional effects are not supported")
            if len(fields) != 4:
                raise SasParseError(r.line_no, f"expected effect 'conds var pre post', got '{line}'")
            _, var, pre, post = fields
            check_pair(var, post, "effect")
            if pre != -1:
                check_pair(var, pre, "effect precondition")
                pre_pairs.append((var, pre))
            eff_pairs.append((var, post))
        cost = r.read_int("operator cost")
        if cost < 0:
            raise SasParseError(r.line_no, f"operator '{name}' has negative cost {cost}")
        if metric == 0:
            cost = 1
        r.expect("end_operator")
        try:
            precondition = PartialAssignment.from_pairs(pre_pairs)
            effect = PartialAssignment.from_pairs(eff_pairs)
            operators.append(Operator(name, precondition, effect, cost))
        except ValueError as exc:
            raise SasParseError(r.line_no, f"invalid operator '{name}': {exc}") from None

    num_axioms = r.read_int("axiom count")
    if num_axioms != 0:
        raise UnsupportedFeatureError(r.line_no, "axioms are not supported")
    r.expect_eof()

    task = Task(
        variables=tuple(variables),
        operators=tuple(operators),
        initial_state=State(tuple(init_values)),
        goal=goal,
        metric_uses_costs=bool(metric),
    )
    task.validate()
    return task


def serialize_sas(task: Task) -> bytes:
    """Render a Task back to the file format; the output re-parses to an equal Task."""
    lines = ["begin_version", "3", "end_version"]
    lines += ["begin_metric", str(int(task.metric_uses_costs)), "end_metric"]
    lines.append(str(len(task.variables)))
    for var in task.variables:
        lines += ["begin_variable", var.name, "-1", str(var.domain_size)]
        lines += list(var.value_names)
        lines.append("end_variable")
    lines.append("0")  # mutex groups were discarded at parse time
    lines.append("begin_state")
    lines += [str(v) for v in task.initial_state.values]
    lines.append("end_state")
    lines.append("begin_goal")
    lines.append(str(len(task.goal)))
    lines += [f"{var} {val}" for var, val in task.goal]
    lines.append("end_goal")
    lines.append(str(len(task.operators)))
    for op in task.operators:
        effect_vars = {var for var, _ in op.effect}
        prevail = [(var, val) for var, val in op.precondition if var not in effect_vars]
        lines += ["begin_operator", op.name, str(len(prevail))]
        lines += [f"{var} {val}" for var, val in prevail]
        lines.append(str(len(op.effect)))
        for var, post in op.effect:
            pre = op.precondition.value_of(var)
            lines.append(f"0 {var} {-1 if pre is None else pre} {post}")
        lines.append(str(op.cost))
        lines.append("end_operator")
    lines.append("0")  # axioms
    return ("\n".join(lines) + "\n").encode("utf-8")


def load_task(path: str | Path) -> Task:
    return parse_sas(Path(path).read_bytes())
