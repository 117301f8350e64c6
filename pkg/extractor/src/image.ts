/**
 * Minimal image decoding for album extraction.
 *
 * Supports binary PGM/PPM (P5/P6, 8-bit) and non-interlaced 8-bit PNG
 * (grayscale, RGB, palette, and their alpha variants; alpha is dropped).
 * Everything decodes to interleaved 8-bit rows with 1 or 3 channels, which
 * is all the downstream models need. PNG CRCs are not verified.
 */

import { inflateSync } from 'node:zlib';

export interface Image {
  width: number;
  height: number;
  channels: 1 | 3;
  /** Row-major, channel-interleaved. */
  pixels: Uint8Array;
  /** Capture time from embedded metadata (PNG tIME), when present. */
  capturedAt?: Date;
}

export interface Box {
  x: number;
  y: number;
  width: number;
  height: number;
}

export class DecodeError extends Error {}

const PNG_SIGNATURE = Buffer.from([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]);

export function decodeImage(data: Buffer): Image {
  if (data.length >= 2 && data[0] === 0x50 && (data[1] === 0x35 || data[1] === 0x36)) {
    return decodePnm(data);
  }
  if (data.length >= 8 && data.subarray(0, 8).equals(PNG_SIGNATURE)) {
    return decodePng(data);
  }
  throw new DecodeError('unrecognized image format (expected P5/P6 PNM or PNG)');
}

export function decodePnm(data: Buffer): Image {
  const header = readPnmHeader(data);
  const channels = header.magic === 'P6' ? 3 : 1;
  const expected = header.width * header.height * channels;
  const pixels = data.subarray(header.dataStart, header.dataStart + expected);
  if (pixels.length < expected) {
    throw new DecodeError(
      `truncated ${header.magic} data: need ${expected} bytes, have ${pixels.length}`,
    );
  }
  return {
    width: header.width,
    height: header.height,
    channels,
    pixels: new Uint8Array(pixels),
  };
}

function readPnmHeader(data: Buffer) {
  const magic = data.toString('latin1', 0, 2);
  if (magic !== 'P5' && magic !== 'P6') {
    throw new DecodeError(`unsupported PNM magic ${JSON.stringify(magic)}`);
  }
  const fields: number[] = [];
  let pos = 2;
  while (fields.length < 3) {
    if (pos >= data.length) throw new DecodeError('truncated PNM header');
    const byte = data[pos];
    if (byte === 0x23) {
      // comment runs to end of line
      while (pos < data.length && data[pos] !== 0x0a) pos++;
      pos++;
    } else if (isPnmSpace(byte)) {
      pos++;
    } else {
      let end = pos;
      while (end < data.length && !isPnmSpace(data[end]) && data[end] !== 0x23) end++;
      const token = data.toString('latin1', pos, end);
      const value = Number(token);
      if (!Number.isInteger(value) || value < 0) {
        throw new DecodeError(`bad PNM header token ${JSON.stringify(token)}`);
      }
      fields.push(value);
      pos = end;
    }
  }
  const [width, height, maxval] = fields;
  if (width < 1 || height < 1) {
    throw new DecodeError(`bad PNM size ${width}x${height}`);
  }
  if (maxval < 1 || maxval > 255) {
    throw new DecodeError(`unsupported PNM maxval ${maxval} (only 8-bit)`);
  }
  // exactly one whitespace byte separates the header from the raster
  if (pos >= data.length || !isPnmSpace(data[pos])) {
    throw new DecodeError('missing whitespace before PNM raster');
  }
  return { magic, width, height, dataStart: pos + 1 };
}

function isPnmSpace(byte: number): boolean {
  return byte === 0x20 || byte === 0x09 || byte === 0x0a || byte === 0x0d;
}

interface PngHeader {
  width: number;
  height: number;
  bitDepth: number;
  colorType: number;
  interlace: number;
}

// input channels per PNG color type
const PNG_CHANNELS: Record<number, number> = { 0: 1, 2: 3, 3: 1, 4: 2, 6: 4 };

export function decodePng(data: Buffer): Image {
  if (!data.subarray(0, 8).equals(PNG_SIGNATURE)) {
    throw new DecodeError('bad PNG signature');
  }
  let header: PngHeader | null = null;
  let palette: Buffer | null = null;
  let capturedAt: Date | undefined;
  const idat: Buffer[] = [];
  let pos = 8;
  while (pos + 8 <= data.length) {
    const length = data.readUInt32BE(pos);
    const type = data.toString('latin1', pos + 4, pos + 8);
    const body = data.subarray(pos + 8, pos + 8 + length);
    if (body.length < length) throw new DecodeError(`truncated PNG chunk ${type}`);
    pos += 12 + length; // length + type + body + CRC
    if (type === 'IHDR') {
      header = {
        width: body.readUInt32BE(0),
        height: body.readUInt32BE(4),
        bitDepth: body[8],
        colorType: body[9],
        interlace: body[12],
      };
    } else if (type === 'PLTE') {
      palette = Buffer.from(body);
    } else if (type === 'IDAT') {
      idat.push(Buffer.from(body));
    } else if (type === 'tIME' && length >= 7) {
      capturedAt = new Date(
        Date.UTC(body.readUInt16BE(0), body[2] - 1, body[3], body[4], body[5], body[6]),
      );
    } else if (type === 'IEND') {
      break;
    }
  }
  if (!header) throw new DecodeError('PNG has no IHDR chunk');
  if (header.bitDepth !== 8) {
    throw new DecodeError(`unsupported PNG bit depth ${header.bitDepth}`);
  }
  if (header.interlace !== 0) {
    throw new DecodeError('interlaced PNG not supported');
  }
  const channelsIn = PNG_CHANNELS[header.colorType];
  if (channelsIn === undefined) {
    throw new DecodeError(`unsupported PNG color type ${header.colorType}`);
  }
  if (header.colorType === 3 && !palette) {
    throw new DecodeError('palette PNG has no PLTE chunk');
  }
  if (idat.length === 0) throw new DecodeError('PNG has no IDAT data');
  const raw = inflateSync(Buffer.concat(idat));
  const stride = header.width * channelsIn;
  if (raw.length < (stride + 1) * header.height) {
    throw new DecodeError('truncated PNG pixel data');
  }
  const unfiltered = unfilter(raw, header.height, stride, channelsIn);
  return {
    ...toInterleaved(unfiltered, header, palette),
    ...(capturedAt !== undefined ? { capturedAt } : {}),
  };
}

function unfilter(raw: Buffer, height: number, stride: number, bpp: number): Uint8Array {
  const out = new Uint8Array(height * stride);
  for (let y = 0; y < height; y++) {
    const filterType = raw[y * (stride + 1)];
    const rowIn = raw.subarray(y * (stride + 1) + 1, (y + 1) * (stride + 1));
    const rowStart = y * stride;
    const prevStart = rowStart - stride;
    for (let i = 0; i < stride; i++) {
      const a = i >= bpp ? out[rowStart + i - bpp] : 0;
      const b = y > 0 ? out[prevStart + i] : 0;
      const c = y > 0 && i >= bpp ? out[prevStart + i - bpp] : 0;
      let value: number;
      switch (filterType) {
        case 0:
          value = rowIn[i];
          break;
        case 1:
          value = rowIn[i] + a;
          break;
        case 2:
          value = rowIn[i] + b;
          break;
        case 3:
          value = rowIn[i] + Math.floor((a + b) / 2);
          break;
        case 4:
          value = rowIn[i] + paeth(a, b, c);
          break;
        default:
          throw new DecodeError(`bad PNG filter type ${filterType} in row ${y}`);
      }
      out[rowStart + i] = value & 0xff;
    }
  }
  return out;
}

function paeth(a: number, b: number, c: number): number {
  const p = a + b - c;
  const pa = Math.abs(p - a);
  const pb = Math.abs(p - b);
  const pc = Math.abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  return pb <= pc ? b : c;
}

function toInterleaved(
  data: Uint8Array,
  header: PngHeader,
  palette: Buffer | null,
): Image {
  const { width, height, colorType } = header;
  const n = width * height;
  if (colorType === 0) {
    return { width, height, channels: 1, pixels: data };
  }
  if (colorType === 2) {
    return { width, height, channels: 3, pixels: data };
  }
  if (colorType === 3) {
    const pixels = new Uint8Array(n * 3);
    for (let i = 0; i < n; i++) {
      const idx = data[i] * 3;
      if (idx + 2 >= palette!.length) {
        throw new DecodeError(`palette index ${data[i]} out of range`);
      }
      pixels[i * 3] = palette![idx];
      pixels[i * 3 + 1] = palette![idx + 1];
      pixels[i * 3 + 2] = palette![idx + 2];
    }
    return { width, height, channels: 3, pixels };
  }
  // gray+alpha or RGBA: drop the alpha channel
  const channelsIn = PNG_CHANNELS[colorType];
  const channelsOut = (channelsIn - 1) as 1 | 3;
  const pixels = new Uint8Array(n * channelsOut);
  for (let i = 0; i < n; i++) {
    for (let ch = 0; ch < channelsOut; ch++) {
      pixels[i * channelsOut + ch] = data[i * channelsIn + ch];
    }
  }
  return { width, height, channels: channelsOut, pixels };
}

/** Luminance in [0, 1] for the pixel at (x, y). */
export function luminanceAt(image: Image, x: number, y: number): number {
  const base = (y * image.width + x) * image.channels;
  if (image.channels === 1) {
    return image.pixels[base] / 255;
  }
  const r = image.pixels[base];
  const g = image.pixels[base + 1];
  const b = image.pixels[base + 2];
  return (0.299 * r + 0.587 * g + 0.114 * b) / 255;
}

/**
 * Crop a detector box expanded by `margin` times its own size on every
 * side, clamped to the image bounds. A margin of 0.4 echoes common face
 * preprocessing; the full-frame box is returned unchanged.
 */
export function cropWithMargin(image: Image, box: Box, margin: number): Image {
  if (box.width < 1 || box.height < 1) {
    throw new RangeError(`empty detection box ${box.width}x${box.height}`);
  }
  const padX = Math.round(box.width * margin);
  const padY = Math.round(box.height * margin);
  const x0 = Math.max(0, box.x - padX);
  const y0 = Math.max(0, box.y - padY);
  const x1 = Math.min(image.width, box.x + box.width + padX);
  const y1 = Math.min(image.height, box.y + box.height + padY);
  const width = x1 - x0;
  const height = y1 - y0;
  if (width < 1 || height < 1) {
    throw new RangeError('detection box lies outside the image');
  }
  const pixels = new Uint8Array(width * height * image.channels);
  for (let y = 0; y < height; y++) {
    const src = ((y0 + y) * image.width + x0) * image.channels;
    pixels.set(
      image.pixels.subarray(src, src + width * image.channels),
      y * width * image.channels,
    );
  }
  return { width, height, channels: image.channels, pixels };
}

/**
 * Mean luminance over a grid of cells covering the image. Cell boundaries
 * are proportional, so any image size maps onto the same grid; every cell
 * covers at least one pixel.
 */
export function averagePool(image: Image, gridWidth: number, gridHeight: number): Float64Array {
  const out = new Float64Array(gridWidth * gridHeight);
  for (let gy = 0; gy < gridHeight; gy++) {
    const y0 = Math.floor((gy * image.height) / gridHeight);
    const y1 = Math.max(y0 + 1, Math.floor(((gy + 1) * image.height) / gridHeight));
    for (let gx = 0; gx < gridWidth; gx++) {
      const x0 = Math.floor((gx * image.width) / gridWidth);
      const x1 = Math.max(x0 + 1, Math.floor(((gx + 1) * image.width) / gridWidth));
      let sum = 0;
      for (let y = y0; y < Math.min(y1, image.height); y++) {
        for (let x = x0; x < Math.min(x1, image.width); x++) {
          sum += luminanceAt(image, x, y);
        }
      }
      const count =
        (Math.min(y1, image.height) - y0) * (Math.min(x1, image.width) - x0);
      out[gy * gridWidth + gx] = sum / Math.max(1, count);
    }
  }
  return out;
}
