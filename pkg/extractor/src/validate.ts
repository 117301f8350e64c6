/**
 * Re-checks a JSONL face file against the engine loader's rules.
 *
 * The engine stops at the first bad line; this validator keeps going and
 * reports every problem with its 1-based line number, which is the more
 * useful behavior for a standalone checking tool. A file with no issues
 * loads there unmodified.
 */

import { readFileSync } from 'node:fs';

import { checkRecord, newCheckState } from './records.js';

export interface ValidationIssue {
  line: number;
  message: string;
}

export interface ValidationReport {
  records: number;
  dim: number | null;
  issues: ValidationIssue[];
  ok: boolean;
}

export function validateDataset(text: string): ValidationReport {
  const state = newCheckState();
  const issues: ValidationIssue[] = [];
  let records = 0;
  const lines = text.split('\n');
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i].trim();
    if (line.length === 0) continue;
    const lineNo = i + 1;
    let value: unknown;
    try {
      value = JSON.parse(line);
    } catch (error) {
      issues.push({ line: lineNo, message: `malformed JSON: ${(error as Error).message}` });
      continue;
    }
    const problems = checkRecord(value, state);
    if (problems.length > 0) {
      issues.push(...problems.map((message) => ({ line: lineNo, message })));
    } else {
      records++;
    }
  }
  return { records, dim: state.dim, issues, ok: issues.length === 0 };
}

export function validateFile(path: string): ValidationReport {
  return validateDataset(readFileSync(path, 'utf-8'));
}
