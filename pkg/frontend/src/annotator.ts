import { AnnotationApi } from "./api.js";
import { buildOverlays, hitTest, paintOverlays, type InstanceOverlay } from "./overlay.js";
import type { AnnotationTaskPayload, NoTargetSuggestion } from "./types.js";

const SCALE = 6;

/**
 * Annotator view: image with toggleable instance overlays, an
 * expression input, and no-target suggestions. Submit stays disabled
 * until the expression is non-empty; an empty instance selection is a
 * legitimate no-target annotation.
 */
export class AnnotatorView {
  readonly selection = new Set<number>();
  private overlays: InstanceOverlay[] = [];
  private task: AnnotationTaskPayload | null = null;

  private canvas!: HTMLCanvasElement;
  private input!: HTMLInputElement;
  private submitButton!: HTMLButtonElement;
  private suggestionList!: HTMLUListElement;
  private toggles = new Map<number, HTMLButtonElement>();

  constructor(
    private root: HTMLElement,
    private api: AnnotationApi,
    private annotatorId: string,
    private onSubmitted: (state: string) => void,
  ) {}

  renderTask(task: AnnotationTaskPayload): void {
    this.task = task;
    this.selection.clear();
    this.toggles.clear();
    this.overlays = buildOverlays(task.candidate_instances);
    this.root.innerHTML = "";

    const title = document.createElement("h2");
    title.textContent = `Task ${task.task_id}: select targets and describe them`;
    this.root.appendChild(title);

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
      button.style.borderColor = `rgb(${overlay.color.join(",")})`;
      button.addEventListener("click", () => this.toggleInstance(overlay.instance.ann_id));
      toggleBar.appendChild(button);
      this.toggles.set(overlay.instance.ann_id, button);
    }
    this.root.appendChild(toggleBar);

    const panel = document.createElement("div");
    panel.className = "input-panel";
    this.input = document.createElement("input");
    this.input.placeholder = "referring expression (leave selection empty for no-target)";
    this.input.addEventListener("input", () => this.refreshSubmit());
    panel.appendChild(this.input);

    this.submitButton = document.createElement("button");
    this.submitButton.textContent = "Submit";
    this.submitButton.disabled = true;
    this.submitButton.addEventListener("click", () => void this.submit());
    panel.appendChild(this.submitButton);

    const suggestButton = document.createElement("button");
    suggestButton.textContent = "Suggest no-target expressions";
    suggestButton.addEventListener("click", () => void this.loadSuggestions());
    panel.appendChild(suggestButton);
    this.root.appendChild(panel);

    this.suggestionList = document.createElement("ul");
    this.suggestionList.className = "suggestions";
    this.root.appendChild(this.suggestionList);
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

  setExpression(text: string): void {
    this.input.value = text;
    this.refreshSubmit();
  }

  get expression(): string {
    return this.input.value.trim();
  }

  canSubmit(): boolean {
    return this.expression.length > 0;
  }

  async loadSuggestions(): Promise<NoTargetSuggestion[]> {
    if (!this.task) return [];
    const { suggestions } = await this.api.suggestNoTarget(this.task.task_id);
    this.suggestionList.innerHTML = "";
    for (const s of suggestions) {
      const item = document.createElement("li");
      const pick = document.createElement("button");
      pick.textContent = s.expression;
      // clicking a suggestion fills the input with that expression
      pick.addEventListener("click", () => this.setExpression(s.expression));
      item.appendChild(pick);
      this.suggestionList.appendChild(item);
    }
    return suggestions;
  }

  async submit(): Promise<void> {
    if (!this.task || !this.canSubmit()) return;
    const result = await this.api.submitAnnotation(
      this.task.task_id, this.annotatorId, [...this.selection].sort((a, b) => a - b),
      this.expression,
    );
    this.onSubmitted(result.state);
  }

  private refreshSubmit(): void {
    this.submitButton.disabled = !this.canSubmit();
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

/** Shared canvas painting: background image, then mask overlays. */
export function drawSceneOnCanvas(
  canvas: HTMLCanvasElement,
  imageUrl: string,
  overlays: InstanceOverlay[],
  selected: Set<number>,
): void {
  const size = overlays.length
    ? overlays[0].instance.segmentation.size
    : ([64, 64] as [number, number]);
  canvas.width = size[1] * SCALE;
  canvas.height = size[0] * SCALE;
  let ctx: CanvasRenderingContext2D | null = null;
  try {
    ctx = canvas.getContext("2d");
  } catch {
    return; // canvas unsupported (DOM test environments)
  }
  if (!ctx) return;
  ctx.imageSmoothingEnabled = false;
  const image = new Image();
  image.onload = () => {
    ctx.drawImage(image, 0, 0, canvas.width, canvas.height);
    paintOverlays(ctx, overlays, selected, SCALE);
  };
  image.src = imageUrl;
  // paint overlays immediately as well so selection feedback does not
  // wait for the image round trip
  paintOverlays(ctx, overlays, selected, SCALE);
}
