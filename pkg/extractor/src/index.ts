export {
  averagePool,
  cropWithMargin,
  decodeImage,
  decodePng,
  decodePnm,
  luminanceAt,
  DecodeError,
} from './image.js';
export type { Box, Image } from './image.js';
export {
  checkRecord,
  faceRecordSchema,
  formatRecord,
  isIsoDate,
  newCheckState,
  norm,
  EMBEDDING_NORM_TOL,
  EMBEDDING_RENORM_TOL,
  NUM_AGE_CLASSES,
  NUM_GENDER_CLASSES,
  POSTERIOR_SUM_TOL,
} from './records.js';
export type { FaceRecord, RecordCheckState } from './records.js';
export {
  demoLuminanceAttributes,
  loadAttributeModel,
  loadDetector,
  loadEmbedder,
  pixelSignatureEmbedder,
  precroppedDetector,
  ModelLoadError,
} from './models.js';
export type { AttributeModel, DetectedFace, Detector, Embedder } from './models.js';
export {
  extract,
  extractRecords,
  loadModels,
  scanAlbum,
  DEFAULT_CROP_MARGIN,
  SUPPORTED_EXTENSIONS,
} from './extract.js';
export type {
  ExtractionManifest,
  ExtractionResult,
  ExtractionSummary,
  MediaItem,
  ModelSet,
} from './extract.js';
export { validateDataset, validateFile } from './validate.js';
export type { ValidationIssue, ValidationReport } from './validate.js';
export { runCli } from './cli.js';
export type { CliIo } from './cli.js';
