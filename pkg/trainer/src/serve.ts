/** Serve an exported generator over the mapper's subprocess protocol.
 *
 * Frames on stdin/stdout: 'TTOG' magic, u32 tile size, u32 patch id, then
 * tile^2 little-endian float32 values in [0, 1]; the response mirrors the
 * request. One frame in flight at a time.
 *
 * Usage: node dist/serve.js <model dir>
 */

import * as tf from "@tensorflow/tfjs";
import { setupBackend } from "./backend";
import { loadGenerator } from "./store";

const MAGIC = 0x474f5454; // 'TTOG' little-endian

async function main(): Promise<void> {
  const modelDir = process.argv[2];
  if (!modelDir) {
    process.stderr.write("usage: node serve.js <model dir>\n");
    process.exit(2);
  }
  await setupBackend();
  const gen = loadGenerator(modelDir);
  process.stderr.write(`model loaded from ${modelDir}\n`);

  let pending: Buffer = Buffer.alloc(0);

  const tryProcess = (): void => {
    while (pending.length >= 12) {
      const magic = pending.readUInt32LE(0);
      if (magic !== MAGIC) {
        process.stderr.write(`bad magic 0x${magic.toString(16)}\n`);
        process.exit(3);
      }
      const tile = pending.readUInt32LE(4);
      const patchId = pending.readUInt32LE(8);
      const frameLen = 12 + tile * tile * 4;
      if (pending.length < frameLen) return;
      const payload = pending.subarray(12, frameLen);
      pending = Buffer.from(pending.subarray(frameLen));

      const values = new Float32Array(payload.buffer.slice(
        payload.byteOffset, payload.byteOffset + payload.byteLength));
      const out = tf.tidy(() => {
        const x = tf.add(tf.mul(tf.tensor4d(values, [1, tile, tile, 1]), 2), -1);
        const y = gen.forward(x as tf.Tensor4D).out;
        return tf.clipByValue(tf.div(tf.add(y, 1), 2), 0, 1).dataSync() as Float32Array;
      });
      const header = Buffer.alloc(12);
      header.writeUInt32LE(MAGIC, 0);
      header.writeUInt32LE(tile, 4);
      header.writeUInt32LE(patchId, 8);
      process.stdout.write(header);
      process.stdout.write(Buffer.from(out.buffer, out.byteOffset, out.byteLength));
    }
  };

  process.stdin.on("data", (chunk: Buffer) => {
    pending = pending.length ? Buffer.concat([pending, chunk]) : chunk;
    tryProcess();
  });
  process.stdin.on("end", () => process.exit(0));
}

main().catch(err => {
  process.stderr.write(`${err.stack ?? err}\n`);
  process.exit(1);
});
