/** Backend bootstrap: prefer the wasm kernels (much faster on CPU-only
 * machines), fall back to the pure-JS backend. Single-threaded for
 * reproducibility. */

import * as tf from "@tensorflow/tfjs";

export async function setupBackend(): Promise<string> {
  try {
    const wasm = await import("@tensorflow/tfjs-backend-wasm");
    wasm.setWasmPaths(
      require.resolve("@tensorflow/tfjs-backend-wasm/dist/tfjs-backend-wasm.wasm")
        .replace(/tfjs-backend-wasm\.wasm$/, ""));
    wasm.setThreadsCount(1);
    if (await tf.setBackend("wasm")) {
      await tf.ready();
      return "wasm";
    }
  } catch {
    // fall through to the JS backend
  }
  await tf.setBackend("cpu");
  await tf.ready();
  return "cpu";
}
