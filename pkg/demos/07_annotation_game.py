"""The two-player annotation game, driven headlessly.

An annotator selects targets and writes expressions (or takes a
deceptive no-target suggestion); a validator then has to find the same
targets blind. Matching selections validate the sample, a mismatch
triggers a second check, and two mismatches discard it. Valid samples
export as a dataset the loader accepts.

The same state machine runs behind the HTTP service
(`genref serve-annotation`) and the browser UI in frontend/.
"""

import tempfile
from pathlib import Path

from genref.annotation import AnnotationProject, TaskState
from genref.data import load_dataset
from genref.synth import SceneConfig, generate_synthetic

with tempfile.TemporaryDirectory() as tmp:
    tmp = Path(tmp)
    generate_synthetic(SceneConfig(n_single=4, n_multi=2, n_no_target=1), seed=13).save(tmp / "data")
    project = AnnotationProject.initialize(tmp / "game", tmp / "data", seed=0)
    images = sorted(project.image_sizes)[:4]
    tasks = project.create_tasks(images)
    print(f"created {len(tasks)} tasks, all {tasks[0].state.value}")

    # task 1: straightforward annotate -> validate -> VALID
    t1 = tasks[0]
    targets = sorted(i.ann_id for i in t1.candidate_instances)[:2]
    project.submit_annotation(t1.task_id, "alice", targets, "the two shapes on top")
    state = project.submit_validation(t1.task_id, "bob", targets)
    print(f"task {t1.task_id}: matching selections -> {state.value}")

    # task 2: first validator misses, second finds it
    t2 = tasks[1]
    target = sorted(i.ann_id for i in t2.candidate_instances)[:1]
    project.submit_annotation(t2.task_id, "alice", target, "the odd one out")
    state = project.submit_validation(t2.task_id, "bob", [])
    print(f"task {t2.task_id}: mismatch -> {state.value}")
    state = project.submit_validation(t2.task_id, "carol", target)
    print(f"task {t2.task_id}: second check match -> {state.value}")

    # task 3: a no-target annotation from the suggestion pool
    t3 = tasks[2]
    suggestions = project.suggest_no_target(t3.task_id, k=3)
    print(f"task {t3.task_id}: suggestions from other images: "
          f"{[s.expression for s in suggestions]}")
    project.submit_annotation(t3.task_id, "alice", [], suggestions[0].expression)
    state = project.submit_validation(t3.task_id, "bob", [])
    print(f"task {t3.task_id}: empty selection confirmed -> {state.value}")

    # task 4: two mismatches discard the sample
    t4 = tasks[3]
    target = sorted(i.ann_id for i in t4.candidate_instances)[:1]
    project.submit_annotation(t4.task_id, "alice", target, "something vague")
    project.submit_validation(t4.task_id, "bob", [])
    state = project.submit_validation(t4.task_id, "carol", [])
    print(f"task {t4.task_id}: two mismatches -> {state.value}")

    # only VALID tasks are exported
    out = project.export_dataset(tmp / "export")
    samples = load_dataset(out, "train")
    states = {t.task_id: t.state for t in project.tasks.values()}
    n_valid = sum(1 for s in states.values() if s == TaskState.VALID)
    print(f"\nexported {len(samples)} of {len(states)} tasks "
          f"({n_valid} VALID); loader accepts them all")
    for s in samples:
        kind = "no-target" if s.no_target else f"{len(s.target_ids)} target(s)"
        print(f"  ref {s.ref_id}: {s.expression!r} [{kind}]")
