/** Portable model persistence: a JSON manifest (config + tensor shapes)
 * next to a little-endian float32 weight blob. The same files act as the
 * training checkpoint and the exported artifact the serving process loads. */

import * as fs from "fs";
import * as path from "path";
import * as tf from "@tensorflow/tfjs";
import { Generator, GeneratorConfig } from "./model";

interface Manifest {
  format: "ogm-cleaner-generator";
  version: 1;
  generator: GeneratorConfig;
  tensors: { name: string; shape: number[]; offset: number; length: number }[];
}

export function saveGenerator(gen: Generator, dir: string): void {
  fs.mkdirSync(dir, { recursive: true });
  const tensors: Manifest["tensors"] = [];
  const chunks: Buffer[] = [];
  let offset = 0;
  for (const [name, variable] of gen.vars) {
    const data = variable.dataSync() as Float32Array;
    tensors.push({ name, shape: variable.shape.slice(), offset, length: data.length });
    const buf = Buffer.from(data.buffer.slice(data.byteOffset, data.byteOffset + data.byteLength));
    chunks.push(buf);
    offset += data.length;
  }
  const manifest: Manifest = {
    format: "ogm-cleaner-generator",
    version: 1,
    generator: gen.cfg,
    tensors,
  };
  fs.writeFileSync(path.join(dir, "model.json"), JSON.stringify(manifest, null, 2));
  fs.writeFileSync(path.join(dir, "weights.bin"), Buffer.concat(chunks));
}

export function loadGenerator(dir: string): Generator {
  const manifest: Manifest = JSON.parse(
    fs.readFileSync(path.join(dir, "model.json"), "utf-8"));
  if (manifest.format !== "ogm-cleaner-generator") {
    throw new Error(`${dir}: not a generator model (format ${manifest.format})`);
  }
  const blob = fs.readFileSync(path.join(dir, "weights.bin"));
  const gen = new Generator(manifest.generator);
  for (const spec of manifest.tensors) {
    const variable = gen.vars.get(spec.name);
    if (!variable) throw new Error(`${dir}: unknown tensor ${spec.name}`);
    const values = new Float32Array(
      blob.buffer, blob.byteOffset + spec.offset * 4, spec.length);
    variable.assign(tf.tensor(Array.from(values), spec.shape));
  }
  return gen;
}

/** Load, run both models on random patches, and require near-identical
 * outputs; returns the maximum per-pixel deviation. */
export function verifyExport(gen: Generator, dir: string, tile: number,
                             nPatches = 10, seed = 7): number {
  const loaded = loadGenerator(dir);
  let worst = 0;
  for (let i = 0; i < nPatches; i++) {
    const x = tf.tidy(() =>
      tf.randomUniform([1, tile, tile, 1], -1, 1, "float32", seed + i) as tf.Tensor4D);
    const a = tf.tidy(() => gen.forward(x).out.dataSync() as Float32Array);
    const b = tf.tidy(() => loaded.forward(x).out.dataSync() as Float32Array);
    for (let k = 0; k < a.length; k++) {
      worst = Math.max(worst, Math.abs(a[k] - b[k]));
    }
    x.dispose();
  }
  loaded.trainable().forEach(v => v.dispose());
  return worst;
}
