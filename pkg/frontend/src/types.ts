import { z } from "zod";

export const CloudPayloadSchema = z.object({
  points: z.array(z.number()),
  colors: z.array(z.number()).nullish(),
  labels: z.array(z.number()).nullish(),
  part_names: z.array(z.string()).nullish(),
});
export type CloudPayload = z.infer<typeof CloudPayloadSchema>;

export const CandidatePayloadSchema = z.object({
  tag: z.string(),
  quat_wxyz: z.array(z.number()).length(4),
  diagnostics: z.record(z.string(), z.unknown()),
});
export type CandidatePayload = z.infer<typeof CandidatePayloadSchema>;

export const ObjectPayloadSchema = z.object({
  object_id: z.string(),
  candidates: z.array(CandidatePayloadSchema).length(5),
  flags: z.array(z.string()),
  candidate_set_hash: z.string(),
  object_cloud: CloudPayloadSchema,
  template_cloud: CloudPayloadSchema,
  template_category: z.string(),
  axis_convention: z.string(),
});
export type ObjectPayload = z.infer<typeof ObjectPayloadSchema>;

export const NextResponseSchema = z.object({
  status: z.enum(["ok", "none-remaining"]),
  object_id: z.string().nullish(),
  lease_seconds: z.number().nullish(),
  retry_after_seconds: z.number().nullish(),
});
export type NextResponse = z.infer<typeof NextResponseSchema>;

export const SubmitResponseSchema = z.object({
  status: z.string(),
  object_id: z.string(),
});
export type SubmitResponse = z.infer<typeof SubmitResponseSchema>;

export interface SubmitRequest {
  annotator_id: string;
  object_id: string;
  decision: string;
  discard_reason?: string;
  elapsed_ms: number;
}

export const DISCARD_REASONS = [
  "quality-thin-shell",
  "quality-meaningless",
  "quality-incomplete",
  "misclassified",
  "pose-error-none-correct",
  "other",
] as const;
export type DiscardReason = (typeof DISCARD_REASONS)[number];
