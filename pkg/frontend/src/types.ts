/** Wire types for the /api/v1/ annotation endpoints. */

export interface Rle {
  counts: number[];
  size: [number, number]; // [height, width]
}

export interface InstancePayload {
  ann_id: number;
  image_id: number;
  category: string;
  bbox: [number, number, number, number]; // x, y, w, h
  segmentation: Rle;
}

/** Task as served to the annotator (state visible, no selections yet). */
export interface AnnotationTaskPayload {
  task_id: number;
  image_id: number;
  state: string;
  candidate_instances: InstancePayload[];
}

/**
 * Task as served to a validator. Deliberately has no field for the
 * annotator's selection; the server never sends one.
 */
export interface BlindTaskPayload {
  task_id: number;
  image_id: number;
  expression: string;
  candidate_instances: InstancePayload[];
}

export interface NoTargetSuggestion {
  expression: string;
  source_image_id: number;
}

export interface SubmitResult {
  task_id: number;
  state: string;
}

export type PlayerRole = "annotator" | "validator";
