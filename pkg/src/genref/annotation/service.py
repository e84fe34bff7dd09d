"""Two-player annotation/validation game: state machine and project store.

An annotator selects target instances on an image and writes an
expression (an empty selection is a no-target annotation). A validator
is shown only the image and the expression, selects independently, and
the sample becomes VALID on set-equal selections. The first mismatch
sends the task to a second validator; a second mismatch discards it.
Validators may also reject low-quality tasks outright. Validators never
see the annotator's hidden selection, never validate their own
annotation, and never see the same task twice.

State transitions:

    PENDING_ANNOTATION -> PENDING_VALIDATION -> VALID
                                | mismatch        ^ match
                                v                 |
                           SECOND_CHECK ----------+
                                | mismatch
                                v
                            DISCARDED
    (REJECTED reachable from both validation states)

Every mutation is appended to a JSONL event log; reopening a project
replays the log. ``snapshot`` folds the log into a state file and
starts a fresh segment.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from ..data import (
    GrexSample,
    InstanceRecord,
    SchemaError,
    load_instances,
    save_dataset,
    sample_to_ref_json,
)
from ..geometry import rle_decode

__all__ = [
    "TaskState",
    "AnnotationTask",
    "NoTargetSuggestion",
    "WrongStateError",
    "AnnotationProject",
]


class TaskState(Enum):
    PENDING_ANNOTATION = "PENDING_ANNOTATION"
    PENDING_VALIDATION = "PENDING_VALIDATION"
    SECOND_CHECK = "SECOND_CHECK"
    VALID = "VALID"
    DISCARDED = "DISCARDED"
    REJECTED = "REJECTED"


VALIDATION_STATES = (TaskState.PENDING_VALIDATION, TaskState.SECOND_CHECK)
TERMINAL_STATES = (TaskState.VALID, TaskState.DISCARDED, TaskState.REJECTED)


class WrongStateError(RuntimeError):
    """Operation not allowed in the task's current state."""


@dataclass
class AnnotationTask:
    task_id: int
    image_id: int
    candidate_instances: list[InstanceRecord]
    state: TaskState = TaskState.PENDING_ANNOTATION
    annotator_id: str | None = None
    annotator_selection: frozenset[int] | None = None  # hidden from validators
    expression: str = ""
    validation_attempts: list[dict] = field(default_factory=list)
    reject_reason: str | None = None

    def blind_view(self) -> dict:
        """Payload safe to serve to a validator: no annotator selection."""
        return {
            "task_id": self.task_id,
            "image_id": self.image_id,
            "expression": self.expression,
            "candidate_instances": [_instance_json(i) for i in self.candidate_instances],
        }

    def annotator_view(self) -> dict:
        return {
            "task_id": self.task_id,
            "image_id": self.image_id,
            "state": self.state.value,
            "candidate_instances": [_instance_json(i) for i in self.candidate_instances],
        }


@dataclass(frozen=True)
class NoTargetSuggestion:
    expression: str
    source_image_id: int


def _instance_json(inst: InstanceRecord) -> dict:
    return {
        "ann_id": inst.ann_id,
        "image_id": inst.image_id,
        "category": inst.category,
        "bbox": [inst.box.x1, inst.box.y1, inst.box.x2 - inst.box.x1, inst.box.y2 - inst.box.y1],
        "segmentation": {"counts": list(inst.mask.counts), "size": [inst.mask.height, inst.mask.width]},
    }


class AnnotationProject:
    """Task store bound to a project directory with an instance source."""

    def __init__(self, root: str | Path, seed: int = 0):
        self.root = Path(root)
        self.image_sizes, self.instances = load_instances(self.root)
        self._by_image: dict[int, list[InstanceRecord]] = {}
        for inst in self.instances.values():
            self._by_image.setdefault(inst.image_id, []).append(inst)
        self.tasks: dict[int, AnnotationTask] = {}
        self.expression_pool: list[tuple[str, int]] = []  # (expression, image_id)
        self.split = "train"
        self._rng = np.random.default_rng(seed)
        self._next_task_id = 1
        meta = self.root / "project.json"
        if meta.exists():
            self.split = json.loads(meta.read_text()).get("split", "train")
        self._log_path = self.root / "events.jsonl"
        self._replay()

    # ------------------------------------------------------------------
    # persistence
    # ------------------------------------------------------------------

    def _append(self, event: dict) -> None:
        with self._log_path.open("a") as fh:
            fh.write(json.dumps(event, sort_keys=True) + "\n")

    def _replay(self) -> None:
        snapshot = self.root / "snapshot.json"
        if snapshot.exists():
            self._restore(json.loads(snapshot.read_text()))
        if not self._log_path.exists():
            return
        for line in self._log_path.read_text().splitlines():
            if line.strip():
                self._apply(json.loads(line))

    def snapshot(self) -> None:
        """Fold the event log into a snapshot and truncate the log."""
        state = {
            "next_task_id": self._next_task_id,
            "expression_pool": self.expression_pool,
            "tasks": [
                {
                    "task_id": t.task_id,
                    "image_id": t.image_id,
                    "state": t.state.value,
                    "annotator_id": t.annotator_id,
                    "annotator_selection": sorted(t.annotator_selection)
                    if t.annotator_selection is not None
                    else None,
                    "expression": t.expression,
                    "validation_attempts": t.validation_attempts,
                    "reject_reason": t.reject_reason,
                }
                for t in self.tasks.values()
            ],
        }
        (self.root / "snapshot.json").write_text(json.dumps(state, indent=1))
        self._log_path.write_text("")

    def _restore(self, state: dict) -> None:
        self._next_task_id = state["next_task_id"]
        self.expression_pool = [tuple(e) for e in state["expression_pool"]]
        for raw in state["tasks"]:
            task = AnnotationTask(
                task_id=raw["task_id"],
                image_id=raw["image_id"],
                candidate_instances=self._by_image.get(raw["image_id"], []),
                state=TaskState(raw["state"]),
                annotator_id=raw["annotator_id"],
                annotator_selection=frozenset(raw["annotator_selection"])
                if raw["annotator_selection"] is not None
                else None,
                expression=raw["expression"],
                validation_attempts=raw["validation_attempts"],
                reject_reason=raw["reject_reason"],
            )
            self.tasks[task.task_id] = task

    # ------------------------------------------------------------------
    # event application (shared by live calls and replay)
    # ------------------------------------------------------------------

    def _apply(self, event: dict):
        kind = event["kind"]
        if kind == "create":
            task = AnnotationTask(
                task_id=event["task_id"],
                image_id=event["image_id"],
                candidate_instances=self._by_image.get(event["image_id"], []),
            )
            self.tasks[task.task_id] = task
            self._next_task_id = max(self._next_task_id, task.task_id + 1)
            return task
        task = self.tasks[event["task_id"]]
        if kind == "annotate":
            task.annotator_id = event["annotator_id"]
            task.annotator_selection = frozenset(event["selection"])
            task.expression = event["expression"]
            task.state = TaskState.PENDING_VALIDATION
            self.expression_pool.append((event["expression"], task.image_id))
        elif kind == "validate":
            matched = event["matched"]
            task.validation_attempts.append(
                {"validator_id": event["validator_id"], "selection": event["selection"], "matched": matched}
            )
            if matched:
                task.state = TaskState.VALID
            elif len(task.validation_attempts) == 1:
                task.state = TaskState.SECOND_CHECK
            else:
                task.state = TaskState.DISCARDED
        elif kind == "reject":
            task.state = TaskState.REJECTED
            task.reject_reason = event["reason"]
            task.validation_attempts.append(
                {"validator_id": event["validator_id"], "rejected": True}
            )
        else:
            raise ValueError(f"unknown event kind {kind!r}")
        return task

    # ------------------------------------------------------------------
    # operations
    # ------------------------------------------------------------------

    def create_tasks(self, image_ids: list[int]) -> list[AnnotationTask]:
        created = []
        for image_id in image_ids:
            if image_id not in self.image_sizes:
                raise KeyError(f"unknown image {image_id}")
            event = {"kind": "create", "task_id": self._next_task_id, "image_id": image_id}
            self._next_task_id += 1
            created.append(self._apply(event))
            self._append(event)
        return created

    def next_annotation(self, annotator_id: str) -> AnnotationTask | None:
        for task in sorted(self.tasks.values(), key=lambda t: t.task_id):
            if task.state == TaskState.PENDING_ANNOTATION:
                return task
        return None

    def submit_annotation(self, task_id: int, annotator_id: str,
                          selection, expression: str) -> TaskState:
        task = self._get(task_id)
        if task.state != TaskState.PENDING_ANNOTATION:
            raise WrongStateError(f"task {task_id} is {task.state.value}, not awaiting annotation")
        chosen = frozenset(int(s) for s in selection)
        known = {i.ann_id for i in task.candidate_instances}
        unknown = chosen - known
        if unknown:
            raise KeyError(f"instances {sorted(unknown)} not on image {task.image_id}")
        if not expression.strip():
            raise ValueError("expression must be non-empty")
        event = {
            "kind": "annotate", "task_id": task_id, "annotator_id": annotator_id,
            "selection": sorted(chosen), "expression": expression,
        }
        self._apply(event)
        self._append(event)
        return task.state

    def suggest_no_target(self, task_id: int, k: int) -> list[NoTargetSuggestion]:
        task = self._get(task_id)
        pool = [(e, img) for e, img in self.expression_pool if img != task.image_id]
        if not pool:
            raise LookupError("no expressions from other images available")
        picks = self._rng.choice(len(pool), size=min(k, len(pool)), replace=False)
        return [NoTargetSuggestion(pool[int(i)][0], pool[int(i)][1]) for i in picks]

    def next_validation(self, validator_id: str) -> AnnotationTask | None:
        """The next blind-viewable task this validator may act on."""
        for task in sorted(self.tasks.values(), key=lambda t: t.task_id):
            if task.state not in VALIDATION_STATES:
                continue
            if task.annotator_id == validator_id:
                continue
            if any(a.get("validator_id") == validator_id for a in task.validation_attempts):
                continue
            return task
        return None

    def submit_validation(self, task_id: int, validator_id: str, selection) -> TaskState:
        task = self._get(task_id)
        if task.state not in VALIDATION_STATES:
            raise WrongStateError(f"task {task_id} is {task.state.value}, not awaiting validation")
        if task.annotator_id == validator_id:
            raise WrongStateError("annotators cannot validate their own task")
        if any(a.get("validator_id") == validator_id for a in task.validation_attempts):
            raise WrongStateError("validator already acted on this task")
        chosen = frozenset(int(s) for s in selection)
        event = {
            "kind": "validate", "task_id": task_id, "validator_id": validator_id,
            "selection": sorted(chosen), "matched": chosen == task.annotator_selection,
        }
        self._apply(event)
        self._append(event)
        return task.state

    def reject(self, task_id: int, validator_id: str, reason: str) -> TaskState:
        task = self._get(task_id)
        if task.state not in VALIDATION_STATES:
            raise WrongStateError(f"task {task_id} is {task.state.value}, not rejectable")
        event = {"kind": "reject", "task_id": task_id, "validator_id": validator_id, "reason": reason}
        self._apply(event)
        self._append(event)
        return task.state

    def _get(self, task_id: int) -> AnnotationTask:
        if task_id not in self.tasks:
            raise KeyError(f"unknown task {task_id}")
        return self.tasks[task_id]

    # ------------------------------------------------------------------
    # export
    # ------------------------------------------------------------------

    def export_dataset(self, out_dir: str | Path) -> Path:
        """Write VALID tasks as a loadable dataset; returns the directory."""
        out_dir = Path(out_dir)
        refs = []
        used_images = set()
        for task in sorted(self.tasks.values(), key=lambda t: t.task_id):
            if task.state != TaskState.VALID:
                continue
            targets = tuple(sorted(task.annotator_selection))
            size = self.image_sizes[task.image_id]
            gt_mask = np.zeros(size, dtype=np.uint8)
            for ann_id in targets:
                gt_mask |= rle_decode(self.instances[ann_id].mask)
            sample = GrexSample(
                ref_id=task.task_id,
                image_id=task.image_id,
                image_size=size,
                expression=task.expression,
                target_ids=targets,
                gt_mask=gt_mask,
                gt_boxes=tuple(self.instances[a].box for a in targets),
                no_target=len(targets) == 0,
                split=self.split,
            )
            refs.append(sample_to_ref_json(sample))
            used_images.add(task.image_id)
        save_dataset(
            out_dir,
            {self.split: refs},
            self.image_sizes,
            self.instances,
        )
        src_images = self.root / "images"
        if src_images.is_dir():
            dst = out_dir / "images"
            dst.mkdir(parents=True, exist_ok=True)
            for png in src_images.glob("*.png"):
                (dst / png.name).write_bytes(png.read_bytes())
        return out_dir

    @classmethod
    def initialize(cls, root: str | Path, dataset_root: str | Path,
                   split: str = "train", seed: int = 0) -> "AnnotationProject":
        """Create a project directory from a dataset's instances and images."""
        root = Path(root)
        root.mkdir(parents=True, exist_ok=True)
        src = Path(dataset_root)
        instances_file = src / "instances.json"
        if not instances_file.exists():
            raise SchemaError(str(instances_file), "instance file missing")
        (root / "instances.json").write_bytes(instances_file.read_bytes())
        if (src / "images").is_dir():
            dst = root / "images"
            dst.mkdir(exist_ok=True)
            for png in (src / "images").glob("*.png"):
                (dst / png.name).write_bytes(png.read_bytes())
        (root / "project.json").write_text(json.dumps({"split": split}))
        return cls(root, seed=seed)
