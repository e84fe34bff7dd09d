// @vitest-environment jsdom
import { beforeEach, describe, expect, it, vi } from "vitest";

import { AnnotationApi } from "../src/api.js";
import { SessionFlow } from "../src/app.js";
import type { InstancePayload } from "../src/types.js";

function instance(annId: number): InstancePayload {
  return {
    ann_id: annId,
    image_id: 1,
    category: `thing ${annId}`,
    bbox: [0, 0, 2, 2],
    segmentation: { counts: [0, 4], size: [2, 2] },
  };
}

beforeEach(() => {
  document.body.innerHTML = "<div id='root'></div>";
});

function scriptedFetch(script: (path: string, body: string) => unknown) {
  return vi.fn(async (url: RequestInfo | URL, init?: RequestInit) => {
    const result = script(String(url), String(init?.body ?? ""));
    if (result instanceof Error) throw result;
    return new Response(JSON.stringify(result), { status: 200 });
  }) as unknown as typeof fetch;
}

describe("SessionFlow (annotator)", () => {
  it("completes three tasks in sequence", async () => {
    let remaining = [1, 2, 3];
    const fetchImpl = scriptedFetch((path) => {
      if (path.includes("annotation-task")) {
        const next = remaining.shift();
        return { task: next === undefined ? null : {
          task_id: next, image_id: 1, state: "PENDING_ANNOTATION",
          candidate_instances: [instance(10)],
        } };
      }
      if (path.includes("submit-annotation")) {
        return { task_id: 0, state: "PENDING_VALIDATION" };
      }
      throw new Error(`unexpected ${path}`);
    });
    const api = new AnnotationApi("http://t", fetchImpl);
    const flow = new SessionFlow(
      document.getElementById("root")!, api, "annotator", "alice",
    );
    const running = flow.run();
    // drive the UI: each rendered task gets an expression and a submit
    for (let i = 0; i < 3; i++) {
      await vi.waitFor(() => {
        const input = document.querySelector<HTMLInputElement>(".input-panel input");
        if (!input) throw new Error("not rendered yet");
      });
      const input = document.querySelector<HTMLInputElement>(".input-panel input")!;
      input.value = `expression ${i}`;
      input.dispatchEvent(new Event("input"));
      document.querySelector<HTMLButtonElement>(".input-panel button")!.click();
      await new Promise((r) => setTimeout(r, 0));
    }
    await running;
    expect(flow.submissions).toBe(3);
    expect(document.querySelector(".banner")!.textContent).toContain("no tasks");
  });
});

describe("SessionFlow (validator)", () => {
  it("surfaces the second-check verdict", async () => {
    let served = false;
    const fetchImpl = scriptedFetch((path) => {
      if (path.includes("next-validation")) {
        if (served) return { task: null };
        served = true;
        return { task: {
          task_id: 4, image_id: 1, expression: "the thing",
          candidate_instances: [instance(10)],
        } };
      }
      if (path.includes("submit-validation")) {
        return { task_id: 4, state: "SECOND_CHECK" };
      }
      throw new Error(`unexpected ${path}`);
    });
    const api = new AnnotationApi("http://t", fetchImpl);
    const flow = new SessionFlow(
      document.getElementById("root")!, api, "validator", "bob",
    );
    const running = flow.run();
    await vi.waitFor(() => {
      if (!document.querySelector(".input-panel button")) throw new Error("pending");
    });
    document.querySelector<HTMLButtonElement>(".input-panel button")!.click();
    await running;
    expect(document.querySelector(".verdict")!.textContent).toContain("second check");
  });

  it("shows a retry banner when offline", async () => {
    let failures = 0;
    const fetchImpl = scriptedFetch(() => {
      failures += 1;
      if (failures <= 3) return new TypeError("network down");
      return { task: null };
    });
    const api = new AnnotationApi("http://t", fetchImpl);
    const flow = new SessionFlow(
      document.getElementById("root")!, api, "validator", "bob",
    );
    const first = await flow.step();
    expect(first).toBe(true);
    expect(document.querySelector(".banner")!.textContent).toContain("retry");
    const second = await flow.step();
    expect(second).toBe(false);
    expect(document.querySelector(".banner")!.textContent).toContain("no tasks");
  });
});

describe("keyboard shortcuts", () => {
  it("digit toggles an instance and Enter submits", async () => {
    const bodies: string[] = [];
    let served = false;
    const fetchImpl = scriptedFetch((path, body) => {
      if (path.includes("annotation-task")) {
        if (served) return { task: null };
        served = true;
        return { task: {
          task_id: 9, image_id: 1, state: "PENDING_ANNOTATION",
          candidate_instances: [instance(50), instance(51)],
        } };
      }
      if (path.includes("submit-annotation")) {
        bodies.push(body);
        return { task_id: 9, state: "PENDING_VALIDATION" };
      }
      throw new Error(`unexpected ${path}`);
    });
    const api = new AnnotationApi("http://t", fetchImpl);
    const flow = new SessionFlow(
      document.getElementById("root")!, api, "annotator", "alice",
    );
    const running = flow.run();
    await vi.waitFor(() => {
      if (!document.querySelector(".instance-toggles button")) throw new Error("pending");
    });
    document.dispatchEvent(new KeyboardEvent("keydown", { key: "1" }));
    const input = document.querySelector<HTMLInputElement>(".input-panel input")!;
    input.value = "the first thing";
    input.dispatchEvent(new Event("input"));
    document.dispatchEvent(new KeyboardEvent("keydown", { key: "Enter" }));
    await running;
    expect(JSON.parse(bodies[0]).selection).toEqual([50]);
  });
});
