/**
 * Album extraction: media files in, JSONL face records out.
 *
 * The album layout is a directory: image files at the top level are
 * photos; each immediate subdirectory is a video clip whose frames are its
 * image files in name order (decode order). Traversal, detection, and
 * embedding are all deterministic, so the same inputs produce the same
 * bytes; the only environmental input is the file mtime used for
 * created_at when the image carries no capture metadata.
 */

import { readdirSync, readFileSync, statSync, writeFileSync } from 'node:fs';
import { basename, extname, join } from 'node:path';

import { decodeImage, cropWithMargin, Image } from './image.js';
import {
  AttributeModel,
  Detector,
  Embedder,
  loadAttributeModel,
  loadDetector,
  loadEmbedder,
} from './models.js';
import { FaceRecord, formatRecord } from './records.js';

export const SUPPORTED_EXTENSIONS = new Set(['.png', '.pgm', '.ppm']);
export const DEFAULT_CROP_MARGIN = 0.4;

export interface ExtractionManifest {
  inputDir: string;
  outputPath: string;
  detector?: string;
  embedModel?: string;
  attrModel?: string;
  decodeStride?: number;
  cropMargin?: number;
}

export interface MediaItem {
  kind: 'photo' | 'clip';
  mediaId: string;
  /** Photo: exactly one path. Clip: frame paths in decode order. */
  paths: string[];
}

export interface ModelSet {
  detector: Detector;
  embedder: Embedder;
  attributes: AttributeModel | null;
}

export interface ExtractionResult {
  records: FaceRecord[];
  warnings: string[];
}

/** Photos then clips, each sorted by name, for a deterministic line order. */
export function scanAlbum(inputDir: string): MediaItem[] {
  const entries = readdirSync(inputDir, { withFileTypes: true });
  const photos: MediaItem[] = [];
  const clips: MediaItem[] = [];
  for (const entry of entries.sort((a, b) => (a.name < b.name ? -1 : 1))) {
    const full = join(inputDir, entry.name);
    if (entry.isFile() && SUPPORTED_EXTENSIONS.has(extname(entry.name).toLowerCase())) {
      photos.push({ kind: 'photo', mediaId: entry.name, paths: [full] });
    } else if (entry.isDirectory()) {
      const frames = readdirSync(full)
        .filter((name) => SUPPORTED_EXTENSIONS.has(extname(name).toLowerCase()))
        .sort()
        .map((name) => join(full, name));
      if (frames.length > 0) {
        clips.push({ kind: 'clip', mediaId: entry.name, paths: frames });
      }
    }
  }
  return [...photos, ...clips];
}

function createdAtOf(image: Image, path: string): string {
  const stamp = image.capturedAt ?? statSync(path).mtime;
  return stamp.toISOString().slice(0, 10);
}

function stem(path: string): string {
  const name = basename(path);
  const ext = extname(name);
  return ext ? name.slice(0, -ext.length) : name;
}

function facesOf(
  image: Image,
  path: string,
  models: ModelSet,
  margin: number,
  mediaId: string,
  mediaKind: 'photo' | 'video',
  frameIndex: number,
  faceIdPrefix: string,
): FaceRecord[] {
  const createdAt = createdAtOf(image, path);
  return models.detector.detect(image).map((face, k) => {
    const crop = cropWithMargin(image, face.box, margin);
    const record: FaceRecord = {
      face_id: `${faceIdPrefix}.f${k}`,
      media_id: mediaId,
      media_kind: mediaKind,
      frame_index: frameIndex,
      created_at: createdAt,
      embedding: Array.from(models.embedder.embed(crop)),
      bbox: [face.box.x, face.box.y, face.box.width, face.box.height],
    };
    if (models.attributes) {
      record.age_probs = Array.from(models.attributes.agePosterior(crop));
      record.gender_probs = Array.from(models.attributes.genderPosterior(crop));
    }
    return record;
  });
}

/**
 * Run detection and inference over scanned media. Unreadable or corrupt
 * files become warnings and are skipped; a clip keeps its other frames.
 * Clip frames keep their decode-order index as frame_index, so stride 5
 * over ten frames yields indices 0 and 5.
 */
export function extractRecords(
  items: MediaItem[],
  models: ModelSet,
  options: { decodeStride?: number; cropMargin?: number } = {},
): ExtractionResult {
  const stride = options.decodeStride ?? 1;
  if (!Number.isInteger(stride) || stride < 1) {
    throw new RangeError(`decode stride must be a positive integer, got ${stride}`);
  }
  const margin = options.cropMargin ?? DEFAULT_CROP_MARGIN;
  const records: FaceRecord[] = [];
  const warnings: string[] = [];
  for (const item of items) {
    if (item.kind === 'photo') {
      const path = item.paths[0];
      try {
        const image = decodeImage(readFileSync(path));
        records.push(
          ...facesOf(image, path, models, margin, item.mediaId, 'photo', 0, stem(path)),
        );
      } catch (error) {
        warnings.push(`${path}: ${(error as Error).message}`);
      }
      continue;
    }
    for (let frameIndex = 0; frameIndex < item.paths.length; frameIndex++) {
      if (frameIndex % stride !== 0) continue;
      const path = item.paths[frameIndex];
      try {
        const image = decodeImage(readFileSync(path));
        records.push(
          ...facesOf(
            image,
            path,
            models,
            margin,
            item.mediaId,
            'video',
            frameIndex,
            `${item.mediaId}.f${frameIndex}`,
          ),
        );
      } catch (error) {
        warnings.push(`${path}: ${(error as Error).message}`);
      }
    }
  }
  return { records, warnings };
}

export function loadModels(manifest: ExtractionManifest): ModelSet {
  // fail before touching any media: a bad model name aborts the run
  return {
    detector: loadDetector(manifest.detector ?? 'precropped'),
    embedder: loadEmbedder(manifest.embedModel ?? 'pixel-signature'),
    attributes: loadAttributeModel(manifest.attrModel ?? 'none'),
  };
}

export interface ExtractionSummary {
  written: number;
  warnings: string[];
}

/** Extract an album directory to a JSONL file, one line per detected face. */
export function extract(manifest: ExtractionManifest): ExtractionSummary {
  const models = loadModels(manifest);
  const items = scanAlbum(manifest.inputDir);
  const { records, warnings } = extractRecords(items, models, {
    ...(manifest.decodeStride !== undefined ? { decodeStride: manifest.decodeStride } : {}),
    ...(manifest.cropMargin !== undefined ? { cropMargin: manifest.cropMargin } : {}),
  });
  const lines = records.map((record) => formatRecord(record) + '\n').join('');
  writeFileSync(manifest.outputPath, lines);
  return { written: records.length, warnings };
}
