/**
 * Pluggable model interfaces and the built-in backends.
 *
 * The extraction pipeline needs three capabilities: find faces in an image,
 * turn a face crop into a unit-norm identity embedding, and optionally
 * score age/gender posteriors. Real deployments plug in pretrained models
 * behind these interfaces; the built-ins are deterministic stand-ins so
 * the pipeline runs end to end without model weights.
 */

import { Image, Box, averagePool, luminanceAt } from './image.js';
import { NUM_AGE_CLASSES } from './records.js';

export interface DetectedFace {
  box: Box;
}

export interface Detector {
  readonly name: string;
  detect(image: Image): DetectedFace[];
}

export interface Embedder {
  readonly name: string;
  readonly dim: number;
  embed(face: Image): Float64Array;
}

export interface AttributeModel {
  readonly name: string;
  agePosterior(face: Image): Float64Array;
  genderPosterior(face: Image): Float64Array;
}

export class ModelLoadError extends Error {}

/**
 * Treats the whole frame as one already-cropped face. The right choice for
 * albums that went through an external face cropper, and the default until
 * a real detector is plugged in.
 */
export function precroppedDetector(): Detector {
  return {
    name: 'precropped',
    detect(image) {
      return [{ box: { x: 0, y: 0, width: image.width, height: image.height } }];
    },
  };
}

/**
 * Deterministic identity embedding: mean luminance over a grid of cells,
 * L2-normalized. No learned weights, but it satisfies the embedding
 * contract (fixed dimension, unit norm, same input gives the same vector),
 * so the clustering engine runs on its output.
 */
export function pixelSignatureEmbedder(grid = 8): Embedder {
  const dim = grid * grid;
  return {
    name: 'pixel-signature',
    dim,
    embed(face) {
      const cells = averagePool(face, grid, grid);
      let sumSquares = 0;
      for (const v of cells) sumSquares += v * v;
      const n = Math.sqrt(sumSquares);
      if (n === 0) {
        // all-black crop: fall back to the uniform unit vector
        return new Float64Array(dim).fill(1 / Math.sqrt(dim));
      }
      for (let i = 0; i < dim; i++) cells[i] /= n;
      return cells;
    },
  };
}

function softmax(logits: Float64Array): Float64Array {
  let max = -Infinity;
  for (const v of logits) max = Math.max(max, v);
  const out = new Float64Array(logits.length);
  let sum = 0;
  for (let i = 0; i < logits.length; i++) {
    out[i] = Math.exp(logits[i] - max);
    sum += out[i];
  }
  for (let i = 0; i < out.length; i++) out[i] /= sum;
  return out;
}

/**
 * Demo attribute backend deriving posteriors from luminance statistics.
 * It exists to exercise the posterior plumbing (softmax-normalized, right
 * class counts) without shipping a trained model; its predictions carry no
 * signal about actual age or gender.
 */
export function demoLuminanceAttributes(): AttributeModel {
  const stats = (face: Image) => {
    let sum = 0;
    let sumSquares = 0;
    const count = face.width * face.height;
    for (let y = 0; y < face.height; y++) {
      for (let x = 0; x < face.width; x++) {
        const lum = luminanceAt(face, x, y);
        sum += lum;
        sumSquares += lum * lum;
      }
    }
    const mean = sum / count;
    const variance = Math.max(0, sumSquares / count - mean * mean);
    return { mean, std: Math.sqrt(variance) };
  };
  return {
    name: 'demo-luminance',
    agePosterior(face) {
      const { mean, std } = stats(face);
      const center = 15 + 70 * mean;
      const spread = 6 + 30 * std;
      const logits = new Float64Array(NUM_AGE_CLASSES);
      for (let age = 0; age < NUM_AGE_CLASSES; age++) {
        logits[age] = -((age - center) ** 2) / (2 * spread * spread);
      }
      return softmax(logits);
    },
    genderPosterior(face) {
      const { mean, std } = stats(face);
      const tilt = 6 * (mean - 0.5) + 4 * (std - 0.2);
      return softmax(new Float64Array([tilt, -tilt]));
    },
  };
}

const DETECTORS: Record<string, () => Detector> = {
  precropped: precroppedDetector,
};

const EMBEDDERS: Record<string, () => Embedder> = {
  'pixel-signature': () => pixelSignatureEmbedder(),
};

const ATTRIBUTE_MODELS: Record<string, () => AttributeModel> = {
  'demo-luminance': demoLuminanceAttributes,
};

function load<T>(table: Record<string, () => T>, name: string, what: string): T {
  const make = table[name];
  if (!make) {
    const known = Object.keys(table).sort().join(', ');
    throw new ModelLoadError(`unknown ${what} '${name}' (available: ${known})`);
  }
  return make();
}

export function loadDetector(name: string): Detector {
  return load(DETECTORS, name, 'detector');
}

export function loadEmbedder(name: string): Embedder {
  return load(EMBEDDERS, name, 'embedding model');
}

/** 'none' disables attribute scoring; records then omit the posteriors. */
export function loadAttributeModel(name: string): AttributeModel | null {
  if (name === 'none') return null;
  return load(ATTRIBUTE_MODELS, name, 'attribute model');
}
