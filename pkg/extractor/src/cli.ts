#!/usr/bin/env node
/**
 * Command line for the extractor.
 *
 *   facealbum-extract extract --input DIR --out FILE [--detector NAME]
 *       [--embed-model NAME] [--attr-model NAME] [--decode-stride N]
 *   facealbum-extract validate --input FILE
 *
 * Exit codes mirror the engine CLI: 0 success, 1 validation or model
 * failure, 2 usage or I/O error.
 */

import { pathToFileURL } from 'node:url';
import { parseArgs } from 'node:util';

import { extract } from './extract.js';
import { ModelLoadError } from './models.js';
import { validateFile } from './validate.js';

export interface CliIo {
  out(line: string): void;
  err(line: string): void;
}

const USAGE = [
  'usage: facealbum-extract <command> [options]',
  '',
  'commands:',
  '  extract   --input DIR --out FILE [--detector NAME] [--embed-model NAME]',
  '            [--attr-model NAME] [--decode-stride N]',
  '  validate  --input FILE',
].join('\n');

function isFsError(error: unknown): boolean {
  return (
    error instanceof Error && typeof (error as NodeJS.ErrnoException).code === 'string'
  );
}

function runExtract(argv: string[], io: CliIo): number {
  let values;
  try {
    values = parseArgs({
      args: argv,
      options: {
        input: { type: 'string' },
        out: { type: 'string' },
        detector: { type: 'string', default: 'precropped' },
        'embed-model': { type: 'string', default: 'pixel-signature' },
        'attr-model': { type: 'string', default: 'none' },
        'decode-stride': { type: 'string', default: '1' },
      },
      strict: true,
    }).values;
  } catch (error) {
    io.err((error as Error).message);
    io.err(USAGE);
    return 2;
  }
  if (!values.input || !values.out) {
    io.err('extract requires --input and --out');
    io.err(USAGE);
    return 2;
  }
  const stride = Number(values['decode-stride']);
  if (!Number.isInteger(stride) || stride < 1) {
    io.err(`--decode-stride must be a positive integer, got '${values['decode-stride']}'`);
    return 2;
  }
  try {
    const summary = extract({
      inputDir: values.input,
      outputPath: values.out,
      detector: values.detector,
      embedModel: values['embed-model'],
      attrModel: values['attr-model'],
      decodeStride: stride,
    });
    for (const warning of summary.warnings) {
      io.err(`warning: ${warning}`);
    }
    io.out(`wrote ${summary.written} records to ${values.out}`);
    return 0;
  } catch (error) {
    if (error instanceof ModelLoadError) {
      io.err((error as Error).message);
      return 1;
    }
    if (isFsError(error)) {
      io.err((error as Error).message);
      return 2;
    }
    throw error;
  }
}

function runValidate(argv: string[], io: CliIo): number {
  let values;
  try {
    values = parseArgs({
      args: argv,
      options: { input: { type: 'string' } },
      strict: true,
    }).values;
  } catch (error) {
    io.err((error as Error).message);
    io.err(USAGE);
    return 2;
  }
  if (!values.input) {
    io.err('validate requires --input');
    io.err(USAGE);
    return 2;
  }
  let report;
  try {
    report = validateFile(values.input);
  } catch (error) {
    if (isFsError(error)) {
      io.err((error as Error).message);
      return 2;
    }
    throw error;
  }
  if (report.ok) {
    io.out(`ok, ${report.records} records`);
    return 0;
  }
  for (const issue of report.issues) {
    io.err(`line ${issue.line}: ${issue.message}`);
  }
  io.err(`${report.issues.length} problems in ${values.input}`);
  return 1;
}

export function runCli(argv: string[], io?: CliIo): number {
  const sink = io ?? { out: console.log, err: console.error };
  const [command, ...rest] = argv;
  if (command === '--help' || command === '-h') {
    sink.out(USAGE);
    return 0;
  }
  if (command === 'extract') return runExtract(rest, sink);
  if (command === 'validate') return runValidate(rest, sink);
  sink.err(command ? `unknown command '${command}'` : 'missing command');
  sink.err(USAGE);
  return 2;
}

const invokedDirectly =
  process.argv[1] !== undefined && import.meta.url === pathToFileURL(process.argv[1]).href;

if (invokedDirectly) {
  process.exit(runCli(process.argv.slice(2)));
}
