/**
 * The JSONL face-record format consumed by the facealbum engine.
 *
 * One JSON object per line. The validation rules here mirror the engine's
 * loader: unit-norm embeddings (up to 1e-3 deviation is treated as float
 * serialization loss), ISO dates, 100-bin age and 2-bin gender posteriors
 * summing to 1 within 1e-6, unique face ids, one embedding dimension per
 * file. Every record this module emits must load there unmodified.
 */

import { z } from 'zod';

export const NUM_AGE_CLASSES = 100;
export const NUM_GENDER_CLASSES = 2;
export const EMBEDDING_NORM_TOL = 1e-6;
export const EMBEDDING_RENORM_TOL = 1e-3;
export const POSTERIOR_SUM_TOL = 1e-6;

export interface FaceRecord {
  face_id: string;
  media_id: string;
  media_kind: 'photo' | 'video';
  frame_index: number;
  created_at: string;
  embedding: number[];
  age_probs?: number[];
  gender_probs?: number[];
  bbox?: [number, number, number, number];
}

// structural shape only; numeric and cross-record rules live in checkRecord
export const faceRecordSchema = z
  .object({
    face_id: z.string(),
    media_id: z.string(),
    media_kind: z.string(),
    frame_index: z.number(),
    created_at: z.string(),
    embedding: z.array(z.number()),
    age_probs: z.array(z.number()).nullish(),
    gender_probs: z.array(z.number()).nullish(),
    bbox: z.array(z.number()).nullish(),
  })
  .passthrough();

export function formatRecord(record: FaceRecord): string {
  const doc: Record<string, unknown> = {
    face_id: record.face_id,
    media_id: record.media_id,
    media_kind: record.media_kind,
    frame_index: record.frame_index,
    created_at: record.created_at,
    embedding: record.embedding,
  };
  if (record.age_probs !== undefined) doc.age_probs = record.age_probs;
  if (record.gender_probs !== undefined) doc.gender_probs = record.gender_probs;
  if (record.bbox !== undefined) doc.bbox = record.bbox;
  return JSON.stringify(doc);
}

export function norm(values: readonly number[]): number {
  let sum = 0;
  for (const v of values) sum += v * v;
  return Math.sqrt(sum);
}

/** Strict YYYY-MM-DD with a real calendar date behind it. */
export function isIsoDate(raw: string): boolean {
  const match = /^(\d{4})-(\d{2})-(\d{2})$/.exec(raw);
  if (!match) return false;
  const [year, month, day] = [Number(match[1]), Number(match[2]), Number(match[3])];
  const date = new Date(Date.UTC(year, month - 1, day));
  return (
    date.getUTCFullYear() === year &&
    date.getUTCMonth() === month - 1 &&
    date.getUTCDate() === day
  );
}

function describeSchemaIssue(issue: z.ZodIssue): string {
  const field = issue.path.length > 0 ? String(issue.path[0]) : 'record';
  if (issue.code === 'invalid_type' && issue.received === 'undefined') {
    return `missing field '${field}'`;
  }
  return `bad ${field}: ${issue.message}`;
}

function checkPosterior(
  values: number[],
  expectedLength: number,
  what: string,
): string | null {
  if (values.length !== expectedLength) {
    return `${what} must have length ${expectedLength}, got ${values.length}`;
  }
  if (values.some((v) => !Number.isFinite(v))) {
    return `${what} contains non-finite values`;
  }
  if (values.some((v) => v < 0)) {
    return `${what} has negative entries`;
  }
  const total = values.reduce((acc, v) => acc + v, 0);
  if (Math.abs(total - 1.0) > POSTERIOR_SUM_TOL) {
    return `${what} sums to ${total.toFixed(8)}, expected 1 within ${POSTERIOR_SUM_TOL}`;
  }
  return null;
}

export interface RecordCheckState {
  seenFaceIds: Set<string>;
  dim: number | null;
}

export function newCheckState(): RecordCheckState {
  return { seenFaceIds: new Set(), dim: null };
}

/**
 * All problems with one parsed record, in loader wording. Mutates `state`
 * with the face id and embedding dimension so later records can be checked
 * against them; a record with errors contributes neither.
 */
export function checkRecord(value: unknown, state: RecordCheckState): string[] {
  if (typeof value !== 'object' || value === null || Array.isArray(value)) {
    return ['expected a JSON object'];
  }
  const parsed = faceRecordSchema.safeParse(value);
  if (!parsed.success) {
    return parsed.error.issues.map(describeSchemaIssue);
  }
  const record = parsed.data;
  const problems: string[] = [];
  if (record.face_id.length === 0) {
    problems.push('face_id must be a non-empty string');
  }
  if (record.media_kind !== 'photo' && record.media_kind !== 'video') {
    problems.push(`media_kind must be 'photo' or 'video', got '${record.media_kind}'`);
  }
  if (!Number.isInteger(record.frame_index) || record.frame_index < 0) {
    problems.push(`frame_index must be a nonnegative integer, got ${record.frame_index}`);
  } else if (record.media_kind === 'photo' && record.frame_index !== 0) {
    problems.push(`photo face '${record.face_id}' must have frame_index 0`);
  }
  if (!isIsoDate(record.created_at)) {
    problems.push(`bad created_at '${record.created_at}'`);
  }
  if (record.embedding.length === 0) {
    problems.push('embedding must be a non-empty array');
  } else if (record.embedding.some((v) => !Number.isFinite(v))) {
    problems.push('embedding contains non-finite values');
  } else {
    const n = norm(record.embedding);
    if (Math.abs(n - 1.0) > EMBEDDING_RENORM_TOL) {
      problems.push(`embedding not normalized (norm ${n.toFixed(8)})`);
    }
    if (state.dim !== null && record.embedding.length !== state.dim) {
      problems.push(
        `inconsistent embedding dimensions: got ${record.embedding.length}, expected ${state.dim}`,
      );
    }
  }
  if (record.age_probs != null) {
    const problem = checkPosterior(record.age_probs, NUM_AGE_CLASSES, 'age posterior');
    if (problem) problems.push(problem);
  }
  if (record.gender_probs != null) {
    const problem = checkPosterior(
      record.gender_probs,
      NUM_GENDER_CLASSES,
      'gender posterior',
    );
    if (problem) problems.push(problem);
  }
  if (record.bbox != null && record.bbox.length !== 4) {
    problems.push(`bbox must have 4 entries, got ${record.bbox.length}`);
  }
  if (state.seenFaceIds.has(record.face_id)) {
    problems.push(`duplicate face_id '${record.face_id}'`);
  }
  if (problems.length === 0) {
    state.seenFaceIds.add(record.face_id);
    if (state.dim === null) state.dim = record.embedding.length;
  }
  return problems;
}
