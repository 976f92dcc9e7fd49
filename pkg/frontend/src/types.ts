export interface EllipseAnnotation {
  cx: number;
  cy: number;
  a: number;
  b: number;
  theta: number; // degrees counterclockwise from +x, normalized to [0, 180)
  rings: number;
}

export interface FrameRecord {
  frame_id: string;
  annotations: EllipseAnnotation[];
}

export interface BBox {
  x_min: number;
  y_min: number;
  x_max: number;
  y_max: number;
}

export interface QueueEntry {
  frame_id: string;
  loss: number;
}

export interface DetectionPayload {
  bbox: BBox;
  score: number;
  rings: number;
  ellipse: EllipseAnnotation;
}

export interface PredictionsPayload {
  detections: DetectionPayload[];
  map_url?: string;
}

export interface FieldError {
  field: string;
  message: string;
}
