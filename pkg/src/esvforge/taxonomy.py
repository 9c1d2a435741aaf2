"""Phase/task/action label universe and the dot-separated label grammar.

The registry is loaded from a versioned JSON declaration file (the default one
ships with the package) so the label universe can evolve without code changes.
All lookups are case-insensitive on slugs; canonical display names are kept
verbatim from the declaration file.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .errors import HierarchyViolationError, MalformedLabelError, UnknownNameError

LEVELS = ("phase", "task", "action")

_SLUG_DROP = re.compile(r"[^a-z0-9_ ]")
_SLUG_WS = re.compile(r"[ ]+")


def slug(name: str) -> str:
    """Canonical file-safe form: lowercase, spaces to underscores, other
    non-alphanumerics dropped. Idempotent."""
    s = _SLUG_DROP.sub("", name.lower().replace("_", " "))
    return _SLUG_WS.sub("_", s.strip())


@dataclass(frozen=True, order=True)
class PhaseId:
    ordinal: int
    name: str


@dataclass(frozen=True, order=True)
class TaskId:
    ordinal: int
    name: str


@dataclass(frozen=True, order=True)
class ActionId:
    ordinal: int
    name: str


@dataclass(frozen=True)
class Triplet:
    """A validated (phase, task, action) label.

    Hierarchy validity (task registered under phase) is enforced by the
    registry constructors, not here; build triplets through the registry.
    """
    phase: PhaseId
    task: TaskId
    action: ActionId


class TaxonomyRegistry:
    """Immutable label universe with hierarchy table and slug lookups.

    Safe for concurrent reads once constructed.
    """

    def __init__(self, phases: list[str], tasks: list[tuple[str, str]], actions: list[str]):
        self.phases = tuple(PhaseId(i, n) for i, n in enumerate(phases))
        self.tasks = tuple(TaskId(i, n) for i, (n, _) in enumerate(tasks))
        self.actions = tuple(ActionId(i, n) for i, n in enumerate(actions))

        self._phase_by_slug = {slug(p.name): p for p in self.phases}
        self._task_by_slug = {slug(t.name): t for t in self.tasks}
        self._action_by_slug = {slug(a.name): a for a in self.actions}
        for level, ids, table in (
            ("phase", self.phases, self._phase_by_slug),
            ("task", self.tasks, self._task_by_slug),
            ("action", self.actions, self._action_by_slug),
        ):
            if len(table) != len(ids):
                raise ValueError(f"duplicate {level} slugs in declaration")
            if not ids:
                raise ValueError(f"no {level} entries in declaration")

        self.phase_of_task: dict[TaskId, PhaseId] = {}
        for task, (_, phase_name) in zip(self.tasks, tasks):
            parent = self._phase_by_slug.get(slug(phase_name))
            if parent is None:
                raise ValueError(f"task {task.name!r} references unknown phase {phase_name!r}")
            self.phase_of_task[task] = parent

        self.tasks_of_phase: dict[PhaseId, tuple[TaskId, ...]] = {
            p: tuple(t for t in self.tasks if self.phase_of_task[t] == p) for p in self.phases
        }
        orphans = [p.name for p, ts in self.tasks_of_phase.items() if not ts]
        if orphans:
            raise ValueError(f"phases without tasks: {orphans}")

    # -- enumeration --------------------------------------------------------

    def names(self, level: str) -> list[str]:
        """Canonical ordered display-name list for one taxonomy level."""
        return [entry.name for entry in self.entries(level)]

    def entries(self, level: str):
        if level == "phase":
            return self.phases
        if level == "task":
            return self.tasks
        if level == "action":
            return self.actions
        raise ValueError(f"unknown level: {level!r}")

    @property
    def output_width(self) -> int:
        return len(self.phases) + len(self.tasks) + len(self.actions)

    @property
    def widths(self) -> tuple[int, int, int]:
        return (len(self.phases), len(self.tasks), len(self.actions))

    # -- lookups ------------------------------------------------------------

    def resolve(self, level: str, text: str):
        """Resolve a display name or slug (case-insensitive) to its id."""
        table = {"phase": self._phase_by_slug, "task": self._task_by_slug,
                 "action": self._action_by_slug}[level]
        entry = table.get(slug(text))
        if entry is None:
            raise UnknownNameError(level, text)
        return entry

    def triplet(self, phase: PhaseId | str, task: TaskId | str, action: ActionId | str) -> Triplet:
        """Build a hierarchy-checked Triplet from ids or names."""
        p = phase if isinstance(phase, PhaseId) else self.resolve("phase", phase)
        t = task if isinstance(task, TaskId) else self.resolve("task", task)
        a = action if isinstance(action, ActionId) else self.resolve("action", action)
        if self.phase_of_task[t] != p:
            raise HierarchyViolationError(
                f"task {t.name!r} belongs to phase {self.phase_of_task[t].name!r}, not {p.name!r}"
            )
        return Triplet(p, t, a)

    def triplet_by_ordinals(self, phase: int, task: int, action: int) -> Triplet:
        return self.triplet(self.phases[phase], self.tasks[task], self.actions[action])

    # -- label grammar -------------------------------------------------------

    def parse_triplet(self, label: str) -> Triplet:
        parts = label.split(".")
        if len(parts) != 3:
            raise MalformedLabelError(
                f"expected phase.task.action, got {len(parts)} component(s): {label!r}"
            )
        return self.triplet(*parts)

    def format_triplet(self, t: Triplet) -> str:
        return f"{slug(t.phase.name)}.{slug(t.task.name)}.{slug(t.action.name)}"


def parse_triplet(label: str, registry: TaxonomyRegistry | None = None) -> Triplet:
    return (registry or default_registry()).parse_triplet(label)


def format_triplet(t: Triplet) -> str:
    return f"{slug(t.phase.name)}.{slug(t.task.name)}.{slug(t.action.name)}"


def load_registry(path: str | Path) -> TaxonomyRegistry:
    """Load a registry from a JSON declaration file."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return _registry_from_doc(doc)


def _registry_from_doc(doc: dict) -> TaxonomyRegistry:
    if doc.get("version") != 1:
        raise ValueError(f"unsupported taxonomy declaration version: {doc.get('version')!r}")
    return TaxonomyRegistry(
        phases=list(doc["phases"]),
        tasks=[(t["name"], t["phase"]) for t in doc["tasks"]],
        actions=list(doc["actions"]),
    )


_DEFAULT: TaxonomyRegistry | None = None


def default_registry() -> TaxonomyRegistry:
    """The shipped declaration: 5 phases, 12 tasks, 21 actions."""
    global _DEFAULT
    if _DEFAULT is None:
        text = resources.files("esvforge").joinpath("data/taxonomy.json").read_text("utf-8")
        _DEFAULT = _registry_from_doc(json.loads(text))
    return _DEFAULT
