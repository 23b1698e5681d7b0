/** Unpaired training loop for the map-cleaning GAN.
 *
 * Per sample: a discriminator step (adversarial), then a generator step on
 * the total objective L_G = L_adv + L_con^X + L_con^Y, where both
 * contrastive terms use features from the last two encoder blocks at
 * locations chosen by query-selected attention. The identity term anchors
 * on G(y) against y, discouraging edits to already-clean maps.
 */

import * as fs from "fs";
import * as path from "path";
import * as tf from "@tensorflow/tfjs";
import { listDataset, loadTiles } from "./pgm";
import { Discriminator, Generator } from "./model";
import { GanMode, dLoss, gAdvLoss, normalizeRows, patchNce } from "./losses";
import { QsaMode, qsaEntropies, qsaSelect } from "./qsa";
import { evaluateFid } from "./fid";
import { Rng } from "./rng";
import { saveGenerator, verifyExport } from "./store";

export interface TrainConfig {
  epochs: number;
  batchSize: number;     // kept at 1 for stability
  lr: number;            // linearly decayed to 0 over the last half
  beta1: number;
  beta2: number;
  tile: number;
  base: number;
  nResBlocks: number;
  dBase: number;
  numFeatures: number;   // patches per layer for the contrastive loss
  tau: number;
  ganMode: GanMode;      // least-squares default; 'log' is the textbook form
  qsa: QsaMode;
  qsaWindow: number;
  seed: number;
  fidSamples: number;    // per-epoch FID subset size (0 disables)
}

export const DEFAULT_CONFIG: TrainConfig = {
  epochs: 100, batchSize: 1, lr: 2e-4, beta1: 0.5, beta2: 0.999,
  tile: 256, base: 64, nResBlocks: 6, dBase: 64,
  numFeatures: 256, tau: 0.07, ganMode: "lsgan", qsa: "global", qsaWindow: 7,
  seed: 1, fidSamples: 64,
};

export const TOY_PRESET: TrainConfig = {
  ...DEFAULT_CONFIG,
  epochs: 5, tile: 64, base: 8, nResBlocks: 3, dBase: 16, numFeatures: 64,
  fidSamples: 48,
};

/** Manual Adam keeps the learning-rate schedule exact and the state ours. */
class Adam {
  private m = new Map<string, tf.Tensor>();
  private v = new Map<string, tf.Tensor>();
  private t = 0;

  constructor(private beta1: number, private beta2: number, private eps = 1e-8) {}

  step(vars: tf.Variable[], grads: { [name: string]: tf.Tensor }, lr: number): void {
    this.t += 1;
    const bc1 = 1 - Math.pow(this.beta1, this.t);
    const bc2 = 1 - Math.pow(this.beta2, this.t);
    for (const variable of vars) {
      const g = grads[variable.name];
      if (!g) continue;
      const key = variable.name;
      const m0 = this.m.get(key) ?? tf.zerosLike(g);
      const v0 = this.v.get(key) ?? tf.zerosLike(g);
      const m1 = tf.tidy(() => tf.add(tf.mul(m0, this.beta1), tf.mul(g, 1 - this.beta1)));
      const v1 = tf.tidy(() => tf.add(tf.mul(v0, this.beta2), tf.mul(tf.square(g), 1 - this.beta2)));
      m0.dispose();
      v0.dispose();
      this.m.set(key, m1);
      this.v.set(key, v1);
      tf.tidy(() => {
        const mHat = tf.div(m1, bc1);
        const vHat = tf.div(v1, bc2);
        variable.assign(tf.sub(variable, tf.mul(tf.div(mHat, tf.add(tf.sqrt(vHat), this.eps)), lr)));
      });
    }
  }

  dispose(): void {
    this.m.forEach(t => t.dispose());
    this.v.forEach(t => t.dispose());
  }
}

function toTensor(tile: Float32Array, size: number): tf.Tensor4D {
  // [0, 1] rasters -> [-1, 1] model space
  return tf.tidy(() =>
    tf.add(tf.mul(tf.tensor4d(tile, [1, size, size, 1]), 2), -1) as tf.Tensor4D);
}

function gatherFeatureRows(feat: tf.Tensor4D, indices: number[]): tf.Tensor2D {
  const [, h, w, c] = feat.shape;
  return tf.tidy(() => {
    const flat = feat.reshape([h * w, c]) as tf.Tensor2D;
    return normalizeRows(tf.gather(flat, indices) as tf.Tensor2D);
  });
}

export interface EpochLog {
  epoch: number;
  lAdv: number;
  lConX: number;
  lConY: number;
  lTotal: number;
  fid: number;
}

export interface TrainResult {
  log: EpochLog[];
  modelDir: string;
  exportDeviation: number;
}

export function lrAtEpoch(cfg: TrainConfig, epoch: number): number {
  // flat for the first half, then linear to exactly 0 at the final epoch
  const factor = Math.min(1, 2 * (1 - (epoch + 1) / cfg.epochs));
  return cfg.lr * Math.max(factor, 0);
}

export async function train(dataDir: string, outDir: string,
                            cfg: TrainConfig): Promise<TrainResult> {
  const dataset = listDataset(dataDir);
  if (dataset.erroneous.length < 2 || dataset.clean.length < 2) {
    throw new Error(`need >= 2 samples per domain, got ` +
      `${dataset.erroneous.length} erroneous / ${dataset.clean.length} clean`);
  }
  const domainX = loadTiles(dataset.erroneous, cfg.tile);
  const domainY = loadTiles(dataset.clean, cfg.tile);

  const gen = new Generator(
    { tile: cfg.tile, base: cfg.base, nResBlocks: cfg.nResBlocks }, cfg.seed);
  const disc = new Discriminator({ base: cfg.dBase }, cfg.seed + 1);
  const gAdam = new Adam(cfg.beta1, cfg.beta2);
  const dAdam = new Adam(cfg.beta1, cfg.beta2);
  const rng = new Rng(cfg.seed + 1000);

  fs.mkdirSync(outDir, { recursive: true });
  const log: EpochLog[] = [];

  const fidFor = (epochGen: Generator): number => {
    if (cfg.fidSamples < 2) return NaN;
    const n = Math.min(cfg.fidSamples, domainX.length, domainY.length);
    const generated: Float32Array[] = [];
    for (let i = 0; i < n; i++) {
      const x = toTensor(domainX[i], cfg.tile);
      const out = tf.tidy(() => {
        const y = epochGen.forward(x).out;
        return tf.div(tf.add(y, 1), 2).dataSync() as Float32Array;
      });
      x.dispose();
      generated.push(out);
    }
    return evaluateFid(generated, domainY.slice(0, n), cfg.tile);
  };

  const fidStart = fidFor(gen);

  for (let epoch = 0; epoch < cfg.epochs; epoch++) {
    const lr = lrAtEpoch(cfg, epoch);
    const orderX = rng.shuffle([...domainX.keys()]);
    const orderY = rng.shuffle([...domainY.keys()]);
    let sumAdv = 0, sumConX = 0, sumConY = 0, sumTotal = 0;

    for (let step = 0; step < orderX.length; step++) {
      const x = toTensor(domainX[orderX[step]], cfg.tile);
      const y = toTensor(domainY[orderY[step % orderY.length]], cfg.tile);

      // ---- discriminator step (generator frozen by variable selection)
      const fake = tf.tidy(() => gen.forward(x).out);
      const dVars = disc.trainable();
      const dGrads = tf.variableGrads(() => tf.tidy(() => {
        const realLogits = disc.forward(y);
        const fakeLogits = disc.forward(fake);
        return dLoss(realLogits, fakeLogits, cfg.ganMode);
      }), dVars);
      dAdam.step(dVars, dGrads.grads as any, lr);
      dGrads.value.dispose();
      Object.values(dGrads.grads).forEach(g => g.dispose());

      // ---- key features and QSA selection (kept out of the gradient tape:
      // the contrastive gradient lands on the anchors only)
      const keyX = tf.tidy(() => {
        const feats = gen.encode(x).feats;
        const entropies = qsaEntropies(feats[feats.length - 1], cfg.qsa, cfg.qsaWindow);
        const idx = qsaSelect(entropies, cfg.numFeatures);
        return { rows: feats.map(f => tf.keep(gatherFeatureRows(f, idx))), idx };
      });
      const keyY = tf.tidy(() => {
        const feats = gen.encode(y).feats;
        const entropies = qsaEntropies(feats[feats.length - 1], cfg.qsa, cfg.qsaWindow);
        const idx = qsaSelect(entropies, cfg.numFeatures);
        return { rows: feats.map(f => tf.keep(gatherFeatureRows(f, idx))), idx };
      });

      // ---- generator step on the total objective
      const gVars = gen.trainable();
      let parts = { adv: 0, conX: 0, conY: 0 };
      const gGrads = tf.variableGrads(() => tf.tidy(() => {
        const out = gen.forward(x).out;
        const adv = gAdvLoss(disc.forward(out), cfg.ganMode);
        const featsFake = gen.encode(out).feats;
        let conX = tf.scalar(0);
        featsFake.forEach((f, layer) => {
          const q = gatherFeatureRows(f, keyX.idx);
          conX = tf.add(conX, patchNce(q, keyX.rows[layer] as tf.Tensor2D, cfg.tau)) as tf.Scalar;
        });
        conX = tf.div(conX, featsFake.length) as tf.Scalar;
        const idOut = gen.forward(y).out;
        const featsId = gen.encode(idOut).feats;
        let conY = tf.scalar(0);
        featsId.forEach((f, layer) => {
          const q = gatherFeatureRows(f, keyY.idx);
          conY = tf.add(conY, patchNce(q, keyY.rows[layer] as tf.Tensor2D, cfg.tau)) as tf.Scalar;
        });
        conY = tf.div(conY, featsId.length) as tf.Scalar;
        parts = {
          adv: adv.dataSync()[0],
          conX: conX.dataSync()[0],
          conY: conY.dataSync()[0],
        };
        return tf.add(tf.add(adv, conX), conY) as tf.Scalar;
      }), gVars);
      const total = gGrads.value.dataSync()[0];
      if (!isFinite(total)) {
        throw new Error(`non-finite generator loss at epoch ${epoch} step ${step}`);
      }
      gAdam.step(gVars, gGrads.grads as any, lr);
      gGrads.value.dispose();
      Object.values(gGrads.grads).forEach(g => g.dispose());
      keyX.rows.forEach(r => r.dispose());
      keyY.rows.forEach(r => r.dispose());
      fake.dispose();
      x.dispose();
      y.dispose();

      sumAdv += parts.adv;
      sumConX += parts.conX;
      sumConY += parts.conY;
      sumTotal += total;
    }

    const n = orderX.length;
    const entry: EpochLog = {
      epoch: epoch + 1,
      lAdv: sumAdv / n,
      lConX: sumConX / n,
      lConY: sumConY / n,
      lTotal: sumTotal / n,
      fid: fidFor(gen),
    };
    log.push(entry);
    console.log(`epoch ${entry.epoch}/${cfg.epochs} lr ${lr.toExponential(2)} ` +
      `adv ${entry.lAdv.toFixed(4)} conX ${entry.lConX.toFixed(4)} ` +
      `conY ${entry.lConY.toFixed(4)} total ${entry.lTotal.toFixed(4)} ` +
      `fid ${entry.fid.toFixed(4)}`);
  }

  const csv = ["epoch,L_adv,L_conX,L_conY,L_total,FID"];
  csv.push(`0,,,,,${fidStart.toFixed(6)}`);
  for (const e of log) {
    csv.push(`${e.epoch},${e.lAdv.toFixed(6)},${e.lConX.toFixed(6)},` +
      `${e.lConY.toFixed(6)},${e.lTotal.toFixed(6)},${e.fid.toFixed(6)}`);
  }
  fs.writeFileSync(path.join(outDir, "training_log.csv"), csv.join("\n") + "\n");

  const modelDir = path.join(outDir, "model");
  saveGenerator(gen, modelDir);
  const deviation = verifyExport(gen, modelDir, cfg.tile);
  if (deviation > 1e-4) {
    throw new Error(`export verification failed: max deviation ${deviation}`);
  }
  gAdam.dispose();
  dAdam.dispose();
  return { log, modelDir, exportDeviation: deviation };
}
