/** Binary PGM (P5) reading/writing for the map rasters the mapper emits. */

import * as fs from "fs";
import * as path from "path";

export interface Raster {
  width: number;
  height: number;
  /** grayscale values scaled to [0, 1] (raw byte / 255) */
  values: Float32Array;
}

export function readPgm(file: string): Raster {
  const data = fs.readFileSync(file);
  const tokens: string[] = [];
  let i = 0;
  while (tokens.length < 4) {
    if (i >= data.length) throw new Error(`${file}: truncated PGM header`);
    const ch = data[i];
    if (ch === 0x23) { // '#' comment
      while (i < data.length && data[i] !== 0x0a) i++;
      i++;
    } else if (ch === 0x20 || ch === 0x09 || ch === 0x0a || ch === 0x0d) {
      i++;
    } else {
      let j = i;
      while (j < data.length && ![0x20, 0x09, 0x0a, 0x0d].includes(data[j])) j++;
      tokens.push(data.subarray(i, j).toString("ascii"));
      i = j;
    }
  }
  if (tokens[0] !== "P5") throw new Error(`${file}: expected P5, got ${tokens[0]}`);
  const width = parseInt(tokens[1], 10);
  const height = parseInt(tokens[2], 10);
  const maxval = parseInt(tokens[3], 10);
  i += 1; // single whitespace after maxval
  const body = data.subarray(i, i + width * height);
  if (body.length !== width * height) {
    throw new Error(`${file}: body has ${body.length} bytes, expected ${width * height}`);
  }
  const values = new Float32Array(width * height);
  for (let k = 0; k < values.length; k++) values[k] = body[k] / maxval;
  return { width, height, values };
}

export function writePgm(file: string, raster: Raster): void {
  const { width, height, values } = raster;
  const body = Buffer.alloc(width * height);
  for (let k = 0; k < values.length; k++) {
    body[k] = Math.max(0, Math.min(255, Math.round(values[k] * 255)));
  }
  const header = Buffer.from(`P5\n${width} ${height}\n255\n`, "ascii");
  fs.writeFileSync(file, Buffer.concat([header, body]));
}

export interface DatasetPaths {
  erroneous: string[];
  clean: string[];
}

/** Locate the *_err.pgm / *_clean.pgm rasters of a generated dataset.
 * Pairing is deliberately ignored downstream (unpaired training). */
export function listDataset(dir: string): DatasetPaths {
  const pairsDir = fs.existsSync(path.join(dir, "pairs")) ? path.join(dir, "pairs") : dir;
  const files = fs.readdirSync(pairsDir).filter(f => f.endsWith(".pgm")).sort();
  const erroneous = files.filter(f => f.endsWith("_err.pgm")).map(f => path.join(pairsDir, f));
  const clean = files.filter(f => f.endsWith("_clean.pgm")).map(f => path.join(pairsDir, f));
  return { erroneous, clean };
}

/** Load rasters as fixed-size tiles (center crop; error when too small). */
export function loadTiles(files: string[], tile: number): Float32Array[] {
  return files.map(file => {
    const r = readPgm(file);
    if (r.width < tile || r.height < tile) {
      throw new Error(`${file}: raster ${r.width}x${r.height} smaller than tile ${tile}`);
    }
    const r0 = Math.floor((r.height - tile) / 2);
    const c0 = Math.floor((r.width - tile) / 2);
    const out = new Float32Array(tile * tile);
    for (let i = 0; i < tile; i++) {
      for (let j = 0; j < tile; j++) {
        out[i * tile + j] = r.values[(r0 + i) * r.width + (c0 + j)];
      }
    }
    return out;
  });
}
