import type {
  AnnotationTaskPayload,
  BlindTaskPayload,
  NoTargetSuggestion,
  SubmitResult,
} from "./types.js";

/** Thrown for non-2xx responses; carries the server's verdict. */
export class ApiError extends Error {
  constructor(public status: number, detail: string) {
    super(detail);
  }
}

async function request<T>(
  fetchImpl: typeof fetch,
  base: string,
  path: string,
  init?: RequestInit,
  retries = 2,
): Promise<T> {
  for (let attempt = 0; ; attempt++) {
    let response: Response;
    try {
      response = await fetchImpl(`${base}${path}`, init);
    } catch (err) {
      // transport failure: retry with backoff, then surface
      if (attempt < retries) {
        await new Promise((r) => setTimeout(r, 200 * 2 ** attempt));
        continue;
      }
      throw err;
    }
    if (!response.ok) {
      let detail = response.statusText;
      try {
        detail = (await response.json()).detail ?? detail;
      } catch {
        /* non-JSON error body */
      }
      throw new ApiError(response.status, detail);
    }
    return (await response.json()) as T;
  }
}

/** Typed client for the annotation service; every call is one endpoint. */
export class AnnotationApi {
  constructor(
    private base: string = "",
    private fetchImpl: typeof fetch = fetch.bind(globalThis),
  ) {}

  createTasks(imageIds: number[]): Promise<{ tasks: AnnotationTaskPayload[] }> {
    return request(this.fetchImpl, this.base, "/api/v1/create-tasks", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ image_ids: imageIds }),
    });
  }

  nextAnnotationTask(annotatorId: string): Promise<{ task: AnnotationTaskPayload | null }> {
    return request(
      this.fetchImpl, this.base,
      `/api/v1/annotation-task?annotator_id=${encodeURIComponent(annotatorId)}`,
    );
  }

  submitAnnotation(
    taskId: number, annotatorId: string, selection: number[], expression: string,
  ): Promise<SubmitResult> {
    return request(this.fetchImpl, this.base, "/api/v1/submit-annotation", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({
        task_id: taskId, annotator_id: annotatorId, selection, expression,
      }),
    });
  }

  suggestNoTarget(taskId: number, k = 5): Promise<{ suggestions: NoTargetSuggestion[] }> {
    return request(
      this.fetchImpl, this.base, `/api/v1/suggest-no-target?task_id=${taskId}&k=${k}`,
    );
  }

  nextValidation(validatorId: string): Promise<{ task: BlindTaskPayload | null }> {
    return request(
      this.fetchImpl, this.base,
      `/api/v1/next-validation?validator_id=${encodeURIComponent(validatorId)}`,
    );
  }

  submitValidation(
    taskId: number, validatorId: string, selection: number[],
  ): Promise<SubmitResult> {
    return request(this.fetchImpl, this.base, "/api/v1/submit-validation", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ task_id: taskId, validator_id: validatorId, selection }),
    });
  }

  reject(taskId: number, validatorId: string, reason: string): Promise<SubmitResult> {
    return request(this.fetchImpl, this.base, "/api/v1/reject", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ task_id: taskId, validator_id: validatorId, reason }),
    });
  }

  exportDataset(outDir?: string): Promise<{ export_dir: string }> {
    return request(this.fetchImpl, this.base, "/api/v1/export", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ out_dir: outDir ?? null }),
    });
  }

  imageUrl(imageId: number): string {
    return `${this.base}/images/${imageId}.png`;
  }
}
