import { AnnotationApi } from "./api.js";
import { drawSceneOnCanvas } from "./annotator.js";
import { buildOverlays, hitTest, type InstanceOverlay } from "./overlay.js";
import type { BlindTaskPayload } from "./types.js";

const SCALE = 6;

/**
 * Blind validator view: the image and the expression, nothing else.
 * The selection always starts empty and an empty submission is the
 * no-target verdict. The payload type has no field for the annotator's
 * choice, so there is nothing here that could render it.
 */
export class ValidatorView {
  readonly selection = new Set<number>();
  private overlays: InstanceOverlay[] = [];
  private task: BlindTaskPayload | null = null;

  private canvas!: HTMLCanvasElement;
  private toggles = new Map<number, HTMLButtonElement>();
  private rejectReason!: HTMLInputElement;

  constructor(
    private root: HTMLElement,
    private api: AnnotationApi,
    private validatorId: string,
    private onFinished: (state: string) => void,
  ) {}

  renderTask(task: BlindTaskPayload): void {
    this.task = task;
    this.selection.clear();
    this.toggles.clear();
    this.overlays = buildOverlays(task.candidate_instances);
    this.root.innerHTML = "";

    const header = document.createElement("h2");
    header.className = "expression";
    header.textContent = `Find: "${task.expression}"`;
    this.root.appendChild(header);

    this.canvas = document.createElement("canvas");
    this.canvas.className = "scene";
    this.canvas.addEventListener("click", (ev) => this.onCanvasClick(ev));
    this.root.appendChild(this.canvas);
    this.drawScene();

    const toggleBar = document.createElement("div");
    toggleBar.className = "instance-toggles";
    for (const overlay of this.overlays) {
      const button = document.createElement("button");
      button.dataset.annId = String(overlay.instance.ann_id);
      button.textContent = overlay.instance.category;
      button.addEventListener("click", () => this.toggleInstance(overlay.instance.ann_id));
      toggleBar.appendChild(button);
      this.toggles.set(overlay.instance.ann_id, button);
    }
    this.root.appendChild(toggleBar);

    const controls = document.createElement("div");
    controls.className = "input-panel";
    const submit = document.createElement("button");
    submit.textContent = "Submit selection (empty = no target)";
    submit.addEventListener("click", () => void this.submit());
    controls.appendChild(submit);

    this.rejectReason = document.createElement("input");
    this.rejectReason.placeholder = "reason for rejection";
    controls.appendChild(this.rejectReason);
    const reject = document.createElement("button");
    reject.textContent = "Reject";
    reject.addEventListener("click", () => void this.reject());
    controls.appendChild(reject);
    this.root.appendChild(controls);
  }

  toggleInstance(annId: number): void {
    if (this.selection.has(annId)) {
      this.selection.delete(annId);
    } else {
      this.selection.add(annId);
    }
    const button = this.toggles.get(annId);
    if (button) button.classList.toggle("selected", this.selection.has(annId));
    this.drawScene();
  }

  async submit(): Promise<void> {
    if (!this.task) return;
    const result = await this.api.submitValidation(
      this.task.task_id, this.validatorId, [...this.selection].sort((a, b) => a - b),
    );
    this.onFinished(result.state);
  }

  async reject(): Promise<void> {
    if (!this.task) return;
    const reason = this.rejectReason.value.trim() || "quality";
    const result = await this.api.reject(this.task.task_id, this.validatorId, reason);
    this.onFinished(result.state);
  }

  private onCanvasClick(ev: MouseEvent): void {
    const rect = this.canvas.getBoundingClientRect();
    const x = (ev.clientX - rect.left) / SCALE;
    const y = (ev.clientY - rect.top) / SCALE;
    const hit = hitTest(this.overlays, x, y);
    if (hit) this.toggleInstance(hit.instance.ann_id);
  }

  private drawScene(): void {
    if (!this.task) return;
    drawSceneOnCanvas(
      this.canvas, this.api.imageUrl(this.task.image_id),
      this.overlays, this.selection,
    );
  }
}
