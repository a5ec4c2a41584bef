/** Minimal binary PGM (P5) decoder; browsers cannot display PGM natively,
 * so stimuli render through a canvas. */

export interface GrayBitmap {
  width: number;
  height: number;
  gray: Uint8Array; // row-major
}

function isSpace(byte: number): boolean {
  return byte === 0x20 || byte === 0x09 || byte === 0x0a || byte === 0x0d;
}

export function decodePgm(data: Uint8Array): GrayBitmap {
  if (data.length < 2 || data[0] !== 0x50 || data[1] !== 0x35) {
    throw new Error("not a binary PGM (missing P5 magic)");
  }
  let pos = 2;
  const fields: number[] = [];
  while (fields.length < 3) {
    while (pos < data.length) {
      const c = data[pos]!;
      if (isSpace(c)) {
        pos += 1;
      } else if (c === 0x23 /* '#' */) {
        while (pos < data.length && data[pos] !== 0x0a) pos += 1;
      } else {
        break;
      }
    }
    let value = 0;
    let digits = 0;
    while (pos < data.length) {
      const c = data[pos]!;
      if (c < 0x30 || c > 0x39) break;
      value = value * 10 + (c - 0x30);
      digits += 1;
      pos += 1;
    }
    if (digits === 0) throw new Error("malformed PGM header");
    fields.push(value);
  }
  if (pos >= data.length || !isSpace(data[pos]!)) {
    throw new Error("malformed PGM header (missing separator)");
  }
  pos += 1;
  const [width, height, maxval] = fields as [number, number, number];
  if (maxval !== 255) throw new Error(`unsupported maxval ${maxval}`);
  const need = width * height;
  if (data.length - pos < need) throw new Error("truncated PGM payload");
  return { width, height, gray: data.slice(pos, pos + need) };
}

/** Paint a decoded bitmap onto a canvas at its native size. */
export function drawBitmap(canvas: HTMLCanvasElement, bitmap: GrayBitmap): void {
  canvas.width = bitmap.width;
  canvas.height = bitmap.height;
  const ctx = canvas.getContext("2d");
  if (!ctx) throw new Error("canvas 2d context unavailable");
  const rgba = new Uint8ClampedArray(bitmap.width * bitmap.height * 4);
  for (let i = 0; i < bitmap.gray.length; i += 1) {
    const v = bitmap.gray[i]!;
    rgba[4 * i] = v;
    rgba[4 * i + 1] = v;
    rgba[4 * i + 2] = v;
    rgba[4 * i + 3] = 255;
  }
  ctx.putImageData(new ImageData(rgba, bitmap.width, bitmap.height), 0, 0);
}
