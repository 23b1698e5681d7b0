/** Query-selected attention: rank feature locations by the entropy of their
 * attention rows (global over all positions, or local over a window) and
 * keep the most concentrated ones for the contrastive loss. */

import * as tf from "@tensorflow/tfjs";
import { rowEntropy } from "./losses";

export type QsaMode = "global" | "local";

/** Row entropies of the global attention matrix softmax(F F^T), F: [HW, C]. */
export function globalAttentionEntropy(feat: tf.Tensor2D): Float64Array {
  const hw = feat.shape[0];
  const data = tf.tidy(() => {
    const logits = tf.matMul(feat, feat, false, true); // [HW, HW]
    return tf.softmax(logits, 1).dataSync() as Float32Array;
  });
  const out = new Float64Array(hw);
  for (let i = 0; i < hw; i++) {
    out[i] = rowEntropy(data.subarray(i * hw, (i + 1) * hw));
  }
  return out;
}

/** Row entropies of local attention: each position attends to its w x w
 * neighborhood (edges clamped). feat: [H, W, C]. */
export function localAttentionEntropy(feat: tf.Tensor3D, window = 7): Float64Array {
  const [h, w, c] = feat.shape;
  const data = feat.dataSync();
  const half = Math.floor(window / 2);
  const out = new Float64Array(h * w);
  const scores = new Float64Array(window * window);
  for (let i = 0; i < h; i++) {
    for (let j = 0; j < w; j++) {
      const qOff = (i * w + j) * c;
      let m = -Infinity;
      let idx = 0;
      for (let di = -half; di <= half; di++) {
        for (let dj = -half; dj <= half; dj++) {
          const ni = Math.min(Math.max(i + di, 0), h - 1);
          const nj = Math.min(Math.max(j + dj, 0), w - 1);
          const kOff = (ni * w + nj) * c;
          let dot = 0;
          for (let ch = 0; ch < c; ch++) dot += data[qOff + ch] * data[kOff + ch];
          scores[idx++] = dot;
          if (dot > m) m = dot;
        }
      }
      let z = 0;
      for (let s = 0; s < scores.length; s++) {
        scores[s] = Math.exp(scores[s] - m);
        z += scores[s];
      }
      let entropy = 0;
      for (let s = 0; s < scores.length; s++) {
        const p = scores[s] / z;
        if (p > 0) entropy -= p * Math.log(p);
      }
      out[i * w + j] = entropy;
    }
  }
  return out;
}

/** Indices of the N smallest-entropy rows (most concentrated attention). */
export function qsaSelect(entropies: ArrayLike<number>, n: number): number[] {
  const hw = entropies.length;
  if (n > hw) throw new Error(`cannot select ${n} features from ${hw} locations`);
  const order = Array.from({ length: hw }, (_, i) => i);
  order.sort((a, b) => entropies[a] - entropies[b] || a - b);
  return order.slice(0, n).sort((a, b) => a - b);
}

/** Entropy-rank feature locations of a [1, H, W, C] feature map. */
export function qsaEntropies(feat: tf.Tensor4D, mode: QsaMode, window = 7): Float64Array {
  const [, h, w, c] = feat.shape;
  if (mode === "global") {
    const flat = feat.reshape([h * w, c]) as tf.Tensor2D;
    const out = globalAttentionEntropy(flat);
    flat.dispose();
    return out;
  }
  const cube = feat.reshape([h, w, c]) as tf.Tensor3D;
  const out = localAttentionEntropy(cube, window);
  cube.dispose();
  return out;
}
