/**
 * Fixture builders: tiny hand-rolled PNM and PNG encoders.
 *
 * The PNG encoder writes zeroed CRCs (the decoder under test does not
 * verify them) and supports explicit per-row filter types so every
 * unfiltering path gets exercised.
 */

import { deflateSync } from 'node:zlib';

export function pgm(
  width: number,
  height: number,
  pixels: ArrayLike<number>,
  comment?: string,
): Buffer {
  const header =
    comment === undefined
      ? `P5\n${width} ${height}\n255\n`
      : `P5\n# ${comment}\n${width} ${height}\n255\n`;
  return Buffer.concat([Buffer.from(header, 'latin1'), Buffer.from(Uint8Array.from(pixels))]);
}

export function ppm(width: number, height: number, pixels: ArrayLike<number>): Buffer {
  const header = `P6\n${width} ${height}\n255\n`;
  return Buffer.concat([Buffer.from(header, 'latin1'), Buffer.from(Uint8Array.from(pixels))]);
}

const PNG_CHANNELS: Record<number, number> = { 0: 1, 2: 3, 3: 1, 4: 2, 6: 4 };

function chunk(type: string, body: Buffer): Buffer {
  const length = Buffer.alloc(4);
  length.writeUInt32BE(body.length);
  return Buffer.concat([length, Buffer.from(type, 'latin1'), body, Buffer.alloc(4)]);
}

function paeth(a: number, b: number, c: number): number {
  const p = a + b - c;
  const pa = Math.abs(p - a);
  const pb = Math.abs(p - b);
  const pc = Math.abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  return pb <= pc ? b : c;
}

function applyFilter(
  type: number,
  cur: Uint8Array,
  prev: Uint8Array,
  bpp: number,
): Uint8Array {
  const out = new Uint8Array(cur.length);
  for (let i = 0; i < cur.length; i++) {
    const a = i >= bpp ? cur[i - bpp] : 0;
    const b = prev[i];
    const c = i >= bpp ? prev[i - bpp] : 0;
    let predictor: number;
    switch (type) {
      case 0:
        predictor = 0;
        break;
      case 1:
        predictor = a;
        break;
      case 2:
        predictor = b;
        break;
      case 3:
        predictor = Math.floor((a + b) / 2);
        break;
      case 4:
        predictor = paeth(a, b, c);
        break;
      default:
        throw new Error(`test encoder: bad filter type ${type}`);
    }
    out[i] = (cur[i] - predictor) & 0xff;
  }
  return out;
}

export interface PngSpec {
  width: number;
  height: number;
  colorType: 0 | 2 | 3 | 4 | 6;
  /** Raw unfiltered samples, row-major, channels per colorType. */
  data: ArrayLike<number>;
  palette?: ArrayLike<number>;
  /** UTC [year, month, day] written as a tIME chunk. */
  time?: [number, number, number];
  /** Per-row filter types; defaults to 0. */
  filters?: number[];
  bitDepth?: number;
  interlace?: number;
}

export function encodePng(spec: PngSpec): Buffer {
  const channels = PNG_CHANNELS[spec.colorType];
  const stride = spec.width * channels;
  const data = Uint8Array.from(spec.data);
  const filtered: Buffer[] = [];
  let prev = new Uint8Array(stride);
  for (let y = 0; y < spec.height; y++) {
    const cur = data.subarray(y * stride, (y + 1) * stride);
    const type = spec.filters?.[y] ?? 0;
    filtered.push(Buffer.from([type]), Buffer.from(applyFilter(type, cur, prev, channels)));
    prev = cur;
  }
  const ihdr = Buffer.alloc(13);
  ihdr.writeUInt32BE(spec.width, 0);
  ihdr.writeUInt32BE(spec.height, 4);
  ihdr[8] = spec.bitDepth ?? 8;
  ihdr[9] = spec.colorType;
  ihdr[12] = spec.interlace ?? 0;
  const chunks = [
    Buffer.from([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]),
    chunk('IHDR', ihdr),
  ];
  if (spec.palette) {
    chunks.push(chunk('PLTE', Buffer.from(Uint8Array.from(spec.palette))));
  }
  if (spec.time) {
    const body = Buffer.alloc(7);
    body.writeUInt16BE(spec.time[0], 0);
    body[2] = spec.time[1];
    body[3] = spec.time[2];
    chunks.push(chunk('tIME', body));
  }
  chunks.push(chunk('IDAT', deflateSync(Buffer.concat(filtered))));
  chunks.push(chunk('IEND', Buffer.alloc(0)));
  return Buffer.concat(chunks);
}
