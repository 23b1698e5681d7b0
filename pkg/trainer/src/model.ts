/** Generator (residual encoder-decoder) and PatchGAN discriminator built on
 * raw variables, so forward passes can expose encoder features and weights
 * serialize to a plain portable format. */

import * as tf from "@tensorflow/tfjs";
import { Rng } from "./rng";

export interface GeneratorConfig {
  tile: number;
  base: number;       // filters after the stem conv
  nResBlocks: number; // encoder residual blocks (features tap the last two)
}

export interface DiscriminatorConfig {
  base: number;
}

function convVar(rng: Rng, name: string, kh: number, kw: number,
                 cin: number, cout: number,
                 vars: Map<string, tf.Variable>): tf.Variable {
  const w = tf.variable(
    tf.tensor4d(rng.normalArray(kh * kw * cin * cout, 0.02), [kh, kw, cin, cout]),
    true, name);
  vars.set(name, w);
  return w;
}

function biasVar(name: string, cout: number,
                 vars: Map<string, tf.Variable>): tf.Variable {
  const b = tf.variable(tf.zeros([cout]), true, name);
  vars.set(name, b);
  return b;
}

function instanceNorm(x: tf.Tensor4D): tf.Tensor4D {
  // per-sample, per-channel statistics over H, W (no learned affine)
  const { mean, variance } = tf.moments(x, [1, 2], true);
  return tf.div(tf.sub(x, mean), tf.sqrt(tf.add(variance, 1e-5)));
}

export class Generator {
  readonly vars = new Map<string, tf.Variable>();
  private channels: number[];

  constructor(readonly cfg: GeneratorConfig, seed = 1) {
    const rng = new Rng(seed);
    const b = cfg.base;
    this.channels = [b, 2 * b, 4 * b];
    convVar(rng, "g/stem/w", 7, 7, 1, b, this.vars);
    biasVar("g/stem/b", b, this.vars);
    convVar(rng, "g/down1/w", 3, 3, b, 2 * b, this.vars);
    biasVar("g/down1/b", 2 * b, this.vars);
    convVar(rng, "g/down2/w", 3, 3, 2 * b, 4 * b, this.vars);
    biasVar("g/down2/b", 4 * b, this.vars);
    for (let i = 0; i < cfg.nResBlocks; i++) {
      convVar(rng, `g/res${i}/w1`, 3, 3, 4 * b, 4 * b, this.vars);
      biasVar(`g/res${i}/b1`, 4 * b, this.vars);
      convVar(rng, `g/res${i}/w2`, 3, 3, 4 * b, 4 * b, this.vars);
      biasVar(`g/res${i}/b2`, 4 * b, this.vars);
    }
    convVar(rng, "g/up1/w", 3, 3, 2 * b, 4 * b, this.vars);  // transpose conv
    biasVar("g/up1/b", 2 * b, this.vars);
    convVar(rng, "g/up2/w", 3, 3, b, 2 * b, this.vars);
    biasVar("g/up2/b", b, this.vars);
    convVar(rng, "g/head/w", 7, 7, b, 1, this.vars);
    biasVar("g/head/b", 1, this.vars);
  }

  trainable(): tf.Variable[] {
    return [...this.vars.values()];
  }

  private get(name: string): tf.Variable {
    const v = this.vars.get(name);
    if (!v) throw new Error(`missing variable ${name}`);
    return v;
  }

  /** Encoder only: returns the bottleneck plus the last two residual-block
   * feature maps (the contrastive loss taps those). */
  encode(x: tf.Tensor4D): { h: tf.Tensor4D; feats: tf.Tensor4D[] } {
    let h = tf.add(tf.conv2d(x, this.get("g/stem/w") as tf.Tensor4D, 1, "same"),
                   this.get("g/stem/b")) as tf.Tensor4D;
    h = tf.relu(instanceNorm(h));
    h = tf.add(tf.conv2d(h, this.get("g/down1/w") as tf.Tensor4D, 2, "same"),
               this.get("g/down1/b")) as tf.Tensor4D;
    h = tf.relu(instanceNorm(h));
    h = tf.add(tf.conv2d(h, this.get("g/down2/w") as tf.Tensor4D, 2, "same"),
               this.get("g/down2/b")) as tf.Tensor4D;
    h = tf.relu(instanceNorm(h));
    const feats: tf.Tensor4D[] = [];
    for (let i = 0; i < this.cfg.nResBlocks; i++) {
      let r = tf.add(tf.conv2d(h, this.get(`g/res${i}/w1`) as tf.Tensor4D, 1, "same"),
                     this.get(`g/res${i}/b1`)) as tf.Tensor4D;
      r = tf.relu(instanceNorm(r));
      r = tf.add(tf.conv2d(r, this.get(`g/res${i}/w2`) as tf.Tensor4D, 1, "same"),
                 this.get(`g/res${i}/b2`)) as tf.Tensor4D;
      h = tf.add(h, instanceNorm(r)) as tf.Tensor4D;
      if (i >= this.cfg.nResBlocks - 2) feats.push(h);
    }
    return { h, feats };
  }

  decode(h: tf.Tensor4D): tf.Tensor4D {
    const b = this.cfg.base;
    const n = h.shape[0];
    const s2 = (h.shape[1] as number) * 2;
    let u = tf.add(tf.conv2dTranspose(h, this.get("g/up1/w") as tf.Tensor4D,
                                      [n, s2, s2, 2 * b], 2, "same"),
                   this.get("g/up1/b")) as tf.Tensor4D;
    u = tf.relu(instanceNorm(u));
    u = tf.add(tf.conv2dTranspose(u, this.get("g/up2/w") as tf.Tensor4D,
                                  [n, s2 * 2, s2 * 2, b], 2, "same"),
               this.get("g/up2/b")) as tf.Tensor4D;
    u = tf.relu(instanceNorm(u));
    const out = tf.add(tf.conv2d(u, this.get("g/head/w") as tf.Tensor4D, 1, "same"),
                       this.get("g/head/b")) as tf.Tensor4D;
    return tf.tanh(out);
  }

  /** Full translation pass; input and output are [n, tile, tile, 1] in [-1, 1]. */
  forward(x: tf.Tensor4D): { out: tf.Tensor4D; feats: tf.Tensor4D[] } {
    const { h, feats } = this.encode(x);
    return { out: this.decode(h), feats };
  }
}

export class Discriminator {
  readonly vars = new Map<string, tf.Variable>();

  constructor(readonly cfg: DiscriminatorConfig, seed = 2) {
    const rng = new Rng(seed);
    const b = cfg.base;
    // three layers of down-sampling, then two convolutional layers
    convVar(rng, "d/down1/w", 4, 4, 1, b, this.vars);
    biasVar("d/down1/b", b, this.vars);
    convVar(rng, "d/down2/w", 4, 4, b, 2 * b, this.vars);
    biasVar("d/down2/b", 2 * b, this.vars);
    convVar(rng, "d/down3/w", 4, 4, 2 * b, 4 * b, this.vars);
    biasVar("d/down3/b", 4 * b, this.vars);
    convVar(rng, "d/conv1/w", 3, 3, 4 * b, 4 * b, this.vars);
    biasVar("d/conv1/b", 4 * b, this.vars);
    convVar(rng, "d/conv2/w", 3, 3, 4 * b, 1, this.vars);
    biasVar("d/conv2/b", 1, this.vars);
  }

  trainable(): tf.Variable[] {
    return [...this.vars.values()];
  }

  private get(name: string): tf.Variable {
    const v = this.vars.get(name);
    if (!v) throw new Error(`missing variable ${name}`);
    return v;
  }

  /** Patch scores (logits), shape [n, tile/8, tile/8, 1]. */
  forward(x: tf.Tensor4D): tf.Tensor4D {
    const lrelu = (t: tf.Tensor4D) => tf.leakyRelu(t, 0.2) as tf.Tensor4D;
    let h = lrelu(tf.add(tf.conv2d(x, this.get("d/down1/w") as tf.Tensor4D, 2, "same"),
                         this.get("d/down1/b")) as tf.Tensor4D);
    h = lrelu(instanceNorm(tf.add(
      tf.conv2d(h, this.get("d/down2/w") as tf.Tensor4D, 2, "same"),
      this.get("d/down2/b")) as tf.Tensor4D));
    h = lrelu(instanceNorm(tf.add(
      tf.conv2d(h, this.get("d/down3/w") as tf.Tensor4D, 2, "same"),
      this.get("d/down3/b")) as tf.Tensor4D));
    h = lrelu(instanceNorm(tf.add(
      tf.conv2d(h, this.get("d/conv1/w") as tf.Tensor4D, 1, "same"),
      this.get("d/conv1/b")) as tf.Tensor4D));
    return tf.add(tf.conv2d(h, this.get("d/conv2/w") as tf.Tensor4D, 1, "same"),
                  this.get("d/conv2/b")) as tf.Tensor4D;
  }
}
