import { AnnotationApi, ApiError } from "./api.js";
import { AnnotatorView } from "./annotator.js";
import { ValidatorView } from "./validator.js";
import type { PlayerRole } from "./types.js";

const VERDICT_TEXT: Record<string, string> = {
  PENDING_VALIDATION: "submitted, sent for validation",
  VALID: "match: sample is valid",
  SECOND_CHECK: "mismatch: sent for second check",
  DISCARDED: "second mismatch: sample discarded",
  REJECTED: "sample rejected",
};

/**
 * Session driver: fetch task, render the role's view, submit, repeat.
 * Transport failures show a retry banner; a state conflict (another
 * player got there first) refreshes to the next task.
 */
export class SessionFlow {
  submissions = 0;
  private banner: HTMLElement;
  private verdict: HTMLElement;
  private stage: HTMLElement;

  constructor(
    private root: HTMLElement,
    private api: AnnotationApi,
    private role: PlayerRole,
    private playerId: string,
  ) {
    this.banner = document.createElement("div");
    this.banner.className = "banner";
    this.verdict = document.createElement("div");
    this.verdict.className = "verdict";
    this.stage = document.createElement("div");
    this.stage.className = "stage";
    root.innerHTML = "";
    root.appendChild(this.banner);
    root.appendChild(this.verdict);
    root.appendChild(this.stage);
    this.installShortcuts();
  }

  async step(): Promise<boolean> {
    try {
      if (this.role === "annotator") {
        return await this.annotatorStep();
      }
      return await this.validatorStep();
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        this.showBanner("task changed under you; fetching the next one");
        return true;
      }
      if (err instanceof ApiError) {
        this.showBanner(`server error: ${err.message}`);
        return false;
      }
      this.showBanner("offline, will retry");
      await new Promise((r) => setTimeout(r, 500));
      return true;
    }
  }

  async run(): Promise<void> {
    while (await this.step()) {
      /* keep stepping until the queue drains or a hard error shows */
    }
  }

  private async annotatorStep(): Promise<boolean> {
    const { task } = await this.api.nextAnnotationTask(this.playerId);
    if (!task) {
      this.showBanner("no tasks awaiting annotation");
      return false;
    }
    return new Promise((resolve) => {
      const view = new AnnotatorView(this.stage, this.api, this.playerId, (state) => {
        this.submissions += 1;
        this.showVerdict(VERDICT_TEXT[state] ?? state);
        resolve(true);
      });
      view.renderTask(task);
      this.activeView = view;
    });
  }

  private async validatorStep(): Promise<boolean> {
    const { task } = await this.api.nextValidation(this.playerId);
    if (!task) {
      this.showBanner("no tasks awaiting validation");
      return false;
    }
    return new Promise((resolve) => {
      const view = new ValidatorView(this.stage, this.api, this.playerId, (state) => {
        this.submissions += 1;
        this.showVerdict(VERDICT_TEXT[state] ?? state);
        resolve(true);
      });
      view.renderTask(task);
      this.activeView = view;
    });
  }

  private activeView: AnnotatorView | ValidatorView | null = null;

  private installShortcuts(): void {
    // digit keys toggle the nth instance, Enter submits
    this.root.ownerDocument.addEventListener("keydown", (ev) => {
      const view = this.activeView;
      if (!view) return;
      if (ev.key >= "1" && ev.key <= "9") {
        const buttons = this.stage.querySelectorAll<HTMLButtonElement>(
          ".instance-toggles button",
        );
        const idx = Number(ev.key) - 1;
        if (idx < buttons.length) buttons[idx].click();
      } else if (ev.key === "Enter") {
        void view.submit();
      }
    });
  }

  private showBanner(text: string): void {
    this.banner.textContent = text;
  }

  private showVerdict(text: string): void {
    this.verdict.textContent = text;
  }
}

export function mountApp(root: HTMLElement, api = new AnnotationApi()): void {
  root.innerHTML = `
    <h1>Annotation game</h1>
    <div class="role-pick">
      <label>player id <input id="player-id" value="player-1"></label>
      <button id="start-annotator">Annotate</button>
      <button id="start-validator">Validate</button>
    </div>
    <div id="session"></div>
  `;
  const session = root.querySelector<HTMLElement>("#session")!;
  const playerId = () =>
    root.querySelector<HTMLInputElement>("#player-id")!.value || "anonymous";
  root.querySelector("#start-annotator")!.addEventListener("click", () => {
    void new SessionFlow(session, api, "annotator", playerId()).run();
  });
  root.querySelector("#start-validator")!.addEventListener("click", () => {
    void new SessionFlow(session, api, "validator", playerId()).run();
  });
}
