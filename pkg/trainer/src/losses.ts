/** Adversarial and patchwise contrastive losses. */

import * as tf from "@tensorflow/tfjs";

export type GanMode = "lsgan" | "log";

const FLOOR = 1e-12; // numerical floor for log arguments

/** The textbook adversarial value E[log D(y)] + E[log(1 - D(G(x)))] over
 * sigmoid scores in (0, 1). Used for logging and unit checks; training uses
 * the mode-specific forms below. */
export function adversarialValue(dReal: number[], dFake: number[]): number {
  const meanLog = (xs: number[]) =>
    xs.reduce((s, v) => s + Math.log(Math.max(v, FLOOR)), 0) / xs.length;
  return meanLog(dReal) + meanLog(dFake.map(v => 1 - v));
}

/** Discriminator loss on patch logits. */
export function dLoss(realLogits: tf.Tensor, fakeLogits: tf.Tensor,
                      mode: GanMode): tf.Scalar {
  if (mode === "lsgan") {
    const lr = tf.mean(tf.square(tf.sub(realLogits, 1)));
    const lf = tf.mean(tf.square(fakeLogits));
    return tf.mul(0.5, tf.add(lr, lf)) as tf.Scalar;
  }
  const pr = tf.sigmoid(realLogits);
  const pf = tf.sigmoid(fakeLogits);
  const lr = tf.mean(tf.log(tf.add(pr, FLOOR)));
  const lf = tf.mean(tf.log(tf.add(tf.sub(1, pf), FLOOR)));
  return tf.neg(tf.add(lr, lf)) as tf.Scalar;
}

/** Generator-side adversarial loss (least-squares, or non-saturating log). */
export function gAdvLoss(fakeLogits: tf.Tensor, mode: GanMode): tf.Scalar {
  if (mode === "lsgan") {
    return tf.mul(0.5, tf.mean(tf.square(tf.sub(fakeLogits, 1)))) as tf.Scalar;
  }
  const pf = tf.sigmoid(fakeLogits);
  return tf.neg(tf.mean(tf.log(tf.add(pf, FLOOR)))) as tf.Scalar;
}

/** Patchwise contrastive loss. q and k are [N, C], L2-normalized rows; the
 * positive for anchor i is k[i], the other N-1 keys act as negatives.
 * Equals -log( exp(q.k+/tau) / (exp(q.k+/tau) + sum_j exp(q.k-_j/tau)) )
 * averaged over anchors. */
export function patchNce(q: tf.Tensor2D, k: tf.Tensor2D, tau: number): tf.Scalar {
  const n = q.shape[0];
  const logits = tf.div(tf.matMul(q, k, false, true), tau);
  const labels = tf.oneHot(tf.range(0, n, 1, "int32"), n);
  return tf.mean(tf.losses.softmaxCrossEntropy(labels, logits)) as tf.Scalar;
}

/** Float64 reference of the same formula for one anchor, with its analytic
 * gradient wrt q. Used by the finite-difference check. */
export function patchNceRef(q: number[], kPos: number[], kNegs: number[][],
                            tau: number): { loss: number; gradQ: number[] } {
  const keys = [kPos, ...kNegs];
  const dot = (a: number[], b: number[]) =>
    a.reduce((s, v, i) => s + v * b[i], 0);
  const scores = keys.map(key => dot(q, key) / tau);
  const m = Math.max(...scores);
  const exps = scores.map(s => Math.exp(s - m));
  const z = exps.reduce((s, v) => s + v, 0);
  const p = exps.map(v => v / z);
  const loss = -Math.log(p[0]);
  // d/dq of -log softmax_0 = (sum_j p_j k_j - k_pos) / tau
  const gradQ = new Array<number>(q.length);
  for (let c = 0; c < q.length; c++) {
    let acc = 0;
    for (let j = 0; j < keys.length; j++) acc += p[j] * keys[j][c];
    gradQ[c] = (acc - kPos[c]) / tau;
  }
  return { loss, gradQ };
}

/** L2-normalize feature rows. */
export function normalizeRows(x: tf.Tensor2D): tf.Tensor2D {
  const norm = tf.sqrt(tf.sum(tf.square(x), 1, true));
  return tf.div(x, tf.add(norm, 1e-10)) as tf.Tensor2D;
}

/** Entropy of one normalized distribution row, 0*log(0) taken as 0. */
export function rowEntropy(row: ArrayLike<number>): number {
  let h = 0;
  for (let i = 0; i < row.length; i++) {
    const p = row[i];
    if (p > 0) h -= p * Math.log(p);
  }
  return h;
}
