// @vitest-environment jsdom
import { beforeEach, describe, expect, it, vi } from "vitest";

import { AnnotationApi } from "../src/api.js";
import { AnnotatorView } from "../src/annotator.js";
import { ValidatorView } from "../src/validator.js";
import type { AnnotationTaskPayload, BlindTaskPayload, InstancePayload } from "../src/types.js";

function instance(annId: number): InstancePayload {
  return {
    ann_id: annId,
    image_id: 5,
    category: `thing ${annId}`,
    bbox: [0, 0, 2, 2],
    segmentation: { counts: [0, 4], size: [2, 2] },
  };
}

function annotationTask(nInstances: number): AnnotationTaskPayload {
  return {
    task_id: 11,
    image_id: 5,
    state: "PENDING_ANNOTATION",
    candidate_instances: Array.from({ length: nInstances }, (_, i) => instance(100 + i)),
  };
}

function blindTask(nInstances: number): BlindTaskPayload {
  return {
    task_id: 11,
    image_id: 5,
    expression: "the two things",
    candidate_instances: Array.from({ length: nInstances }, (_, i) => instance(100 + i)),
  };
}

function mockApi(responses: Record<string, unknown>): AnnotationApi {
  const fetchImpl = vi.fn(async (url: RequestInfo | URL) => {
    const path = String(url);
    const key = Object.keys(responses).find((k) => path.includes(k));
    if (!key) throw new Error(`unexpected request ${path}`);
    return new Response(JSON.stringify(responses[key]), { status: 200 });
  });
  return new AnnotationApi("http://test", fetchImpl as unknown as typeof fetch);
}

beforeEach(() => {
  document.body.innerHTML = "<div id='root'></div>";
});

describe("AnnotatorView", () => {
  it("renders one toggle per candidate instance", () => {
    const view = new AnnotatorView(
      document.getElementById("root")!, mockApi({}), "alice", () => {},
    );
    view.renderTask(annotationTask(4));
    expect(document.querySelectorAll(".instance-toggles button")).toHaveLength(4);
  });

  it("blocks submit while the expression is empty", async () => {
    const api = mockApi({ "submit-annotation": { task_id: 11, state: "PENDING_VALIDATION" } });
    let submitted = 0;
    const view = new AnnotatorView(
      document.getElementById("root")!, api, "alice", () => { submitted += 1; },
    );
    view.renderTask(annotationTask(2));
    const button = document.querySelector<HTMLButtonElement>(".input-panel button")!;
    expect(button.disabled).toBe(true);
    await view.submit();
    expect(submitted).toBe(0);

    view.setExpression("the red thing");
    expect(button.disabled).toBe(false);
    await view.submit();
    expect(submitted).toBe(1);
  });

  it("toggles selection and highlights the toggle", () => {
    const view = new AnnotatorView(
      document.getElementById("root")!, mockApi({}), "alice", () => {},
    );
    view.renderTask(annotationTask(2));
    view.toggleInstance(100);
    expect([...view.selection]).toEqual([100]);
    const toggle = document.querySelector<HTMLButtonElement>("button[data-ann-id='100']")!;
    expect(toggle.classList.contains("selected")).toBe(true);
    view.toggleInstance(100);
    expect(view.selection.size).toBe(0);
  });

  it("fills the input when a suggestion is clicked", async () => {
    const api = mockApi({
      "suggest-no-target": {
        suggestions: [
          { expression: "the purple walrus", source_image_id: 9 },
          { expression: "a distant ship", source_image_id: 8 },
        ],
      },
    });
    const view = new AnnotatorView(
      document.getElementById("root")!, api, "alice", () => {},
    );
    view.renderTask(annotationTask(1));
    await view.loadSuggestions();
    const picks = document.querySelectorAll<HTMLButtonElement>("ul.suggestions button");
    expect(picks).toHaveLength(2);
    picks[0].click();
    expect(view.expression).toBe("the purple walrus");
  });

  it("submits an empty selection as a no-target annotation", async () => {
    const calls: string[] = [];
    const fetchImpl = vi.fn(async (url: RequestInfo | URL, init?: RequestInit) => {
      calls.push(String(init?.body ?? ""));
      return new Response(JSON.stringify({ task_id: 11, state: "PENDING_VALIDATION" }));
    });
    const api = new AnnotationApi("http://test", fetchImpl as unknown as typeof fetch);
    const view = new AnnotatorView(
      document.getElementById("root")!, api, "alice", () => {},
    );
    view.renderTask(annotationTask(2));
    view.setExpression("the missing square");
    await view.submit();
    expect(JSON.parse(calls[0]).selection).toEqual([]);
  });
});

describe("ValidatorView", () => {
  it("shows the expression and starts with nothing selected", () => {
    const view = new ValidatorView(
      document.getElementById("root")!, mockApi({}), "bob", () => {},
    );
    view.renderTask(blindTask(3));
    expect(document.querySelector("h2.expression")!.textContent).toContain("the two things");
    expect(view.selection.size).toBe(0);
    expect(document.querySelectorAll(".instance-toggles button.selected")).toHaveLength(0);
  });

  it("allows an empty submission (no-target verdict)", async () => {
    const bodies: string[] = [];
    const fetchImpl = vi.fn(async (_url: RequestInfo | URL, init?: RequestInit) => {
      bodies.push(String(init?.body ?? ""));
      return new Response(JSON.stringify({ task_id: 11, state: "VALID" }));
    });
    const api = new AnnotationApi("http://t", fetchImpl as unknown as typeof fetch);
    let finished = "";
    const view = new ValidatorView(
      document.getElementById("root")!, api, "bob", (state) => { finished = state; },
    );
    view.renderTask(blindTask(2));
    await view.submit();
    expect(JSON.parse(bodies[0]).selection).toEqual([]);
    expect(finished).toBe("VALID");
  });

  it("sends a reject with the entered reason", async () => {
    const bodies: string[] = [];
    const fetchImpl = vi.fn(async (_url: RequestInfo | URL, init?: RequestInit) => {
      bodies.push(String(init?.body ?? ""));
      return new Response(JSON.stringify({ task_id: 11, state: "REJECTED" }));
    });
    const api = new AnnotationApi("http://t", fetchImpl as unknown as typeof fetch);
    const view = new ValidatorView(
      document.getElementById("root")!, api, "bob", () => {},
    );
    view.renderTask(blindTask(1));
    document.querySelector<HTMLInputElement>(".input-panel input")!.value = "not relevant";
    await view.reject();
    expect(JSON.parse(bodies[0]).reason).toBe("not relevant");
  });

  it("renders nothing that could hold the annotator selection", () => {
    const view = new ValidatorView(
      document.getElementById("root")!, mockApi({}), "bob", () => {},
    );
    view.renderTask(blindTask(3));
    expect(document.body.innerHTML).not.toContain("annotator");
  });
});
