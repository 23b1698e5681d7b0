/** Frechet distance between Gaussian fits of image features.
 *
 * The feature extractor is pluggable; the default is a fixed seeded
 * random-projection extractor (16x16 average pooling, then a linear map),
 * fully deterministic and offline. No pretrained network is bundled.
 */

import { Rng } from "./rng";

export type FeatureExtractor = (images: Float32Array[], tile: number) => number[][];

export function randomProjectionExtractor(dim = 64, seed = 1234): FeatureExtractor {
  let cache: { pooled: number; w: Float64Array } | null = null;
  return (images, tile) => {
    const pooledSide = 16;
    const pooled = pooledSide * pooledSide;
    if (!cache || cache.pooled !== pooled) {
      const rng = new Rng(seed);
      const w = new Float64Array(pooled * dim);
      for (let i = 0; i < w.length; i++) w[i] = rng.normal() / Math.sqrt(pooled);
      cache = { pooled, w };
    }
    const block = tile / pooledSide;
    return images.map(img => {
      const pooledVals = new Float64Array(pooled);
      for (let pi = 0; pi < pooledSide; pi++) {
        for (let pj = 0; pj < pooledSide; pj++) {
          let acc = 0;
          for (let i = 0; i < block; i++) {
            for (let j = 0; j < block; j++) {
              acc += img[(pi * block + i) * tile + (pj * block + j)];
            }
          }
          pooledVals[pi * pooledSide + pj] = acc / (block * block);
        }
      }
      const out = new Array<number>(dim).fill(0);
      for (let p = 0; p < pooled; p++) {
        const v = pooledVals[p];
        for (let d = 0; d < dim; d++) out[d] += v * cache!.w[p * dim + d];
      }
      return out;
    });
  };
}

export function gaussianFit(features: number[][]): { mu: number[]; cov: number[][] } {
  const n = features.length;
  const dim = features[0].length;
  const mu = new Array<number>(dim).fill(0);
  for (const f of features) for (let d = 0; d < dim; d++) mu[d] += f[d] / n;
  const cov: number[][] = Array.from({ length: dim }, () => new Array(dim).fill(0));
  for (const f of features) {
    for (let a = 0; a < dim; a++) {
      const da = f[a] - mu[a];
      for (let b = a; b < dim; b++) {
        cov[a][b] += da * (f[b] - mu[b]);
      }
    }
  }
  const denom = Math.max(n - 1, 1);
  for (let a = 0; a < dim; a++) {
    for (let b = a; b < dim; b++) {
      cov[a][b] /= denom;
      cov[b][a] = cov[a][b];
    }
    cov[a][a] += 1e-6; // jitter against singular fits
  }
  return { mu, cov };
}

/** Eigenvalues (and vectors) of a symmetric matrix by cyclic Jacobi. */
export function jacobiEigen(matrix: number[][]): { values: number[]; vectors: number[][] } {
  const n = matrix.length;
  const a = matrix.map(row => row.slice());
  const v: number[][] = Array.from({ length: n }, (_, i) =>
    Array.from({ length: n }, (_, j) => (i === j ? 1 : 0)));
  for (let sweep = 0; sweep < 64; sweep++) {
    let off = 0;
    for (let p = 0; p < n; p++) {
      for (let q = p + 1; q < n; q++) off += a[p][q] * a[p][q];
    }
    if (off < 1e-22) break;
    for (let p = 0; p < n; p++) {
      for (let q = p + 1; q < n; q++) {
        if (Math.abs(a[p][q]) < 1e-18) continue;
        const theta = (a[q][q] - a[p][p]) / (2 * a[p][q]);
        const t = Math.sign(theta || 1) / (Math.abs(theta) + Math.sqrt(theta * theta + 1));
        const c = 1 / Math.sqrt(t * t + 1);
        const s = t * c;
        for (let k = 0; k < n; k++) {
          const akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (let k = 0; k < n; k++) {
          const apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
        for (let k = 0; k < n; k++) {
          const vkp = v[k][p], vkq = v[k][q];
          v[k][p] = c * vkp - s * vkq;
          v[k][q] = s * vkp + c * vkq;
        }
      }
    }
  }
  return { values: a.map((row, i) => row[i]), vectors: v };
}

function matMul(a: number[][], b: number[][]): number[][] {
  const n = a.length, m = b[0].length, k = b.length;
  const out: number[][] = Array.from({ length: n }, () => new Array(m).fill(0));
  for (let i = 0; i < n; i++) {
    for (let l = 0; l < k; l++) {
      const ail = a[i][l];
      if (ail === 0) continue;
      for (let j = 0; j < m; j++) out[i][j] += ail * b[l][j];
    }
  }
  return out;
}

function sqrtmSym(matrix: number[][]): number[][] {
  // assemble V sqrt(D) V^T from the eigen-decomposition
  const { values, vectors } = jacobiEigen(matrix);
  const n = matrix.length;
  const out: number[][] = Array.from({ length: n }, () => new Array(n).fill(0));
  for (let e = 0; e < n; e++) {
    const s = Math.sqrt(Math.max(values[e], 0));
    for (let i = 0; i < n; i++) {
      const vi = vectors[i][e] * s;
      for (let j = 0; j < n; j++) out[i][j] += vi * vectors[j][e];
    }
  }
  return out;
}

/** d^2 = |mu1-mu2|^2 + tr(C1 + C2 - 2 (C1^1/2 C2 C1^1/2)^1/2). */
export function frechetDistance(mu1: number[], cov1: number[][],
                                mu2: number[], cov2: number[][]): number {
  const dim = mu1.length;
  let d2 = 0;
  for (let i = 0; i < dim; i++) d2 += (mu1[i] - mu2[i]) ** 2;
  let tr = 0;
  for (let i = 0; i < dim; i++) tr += cov1[i][i] + cov2[i][i];
  const c1h = sqrtmSym(cov1);
  const inner = matMul(matMul(c1h, cov2), c1h);
  // symmetrize against round-off before the eigen solve
  for (let i = 0; i < dim; i++) {
    for (let j = i + 1; j < dim; j++) {
      const m = 0.5 * (inner[i][j] + inner[j][i]);
      inner[i][j] = m;
      inner[j][i] = m;
    }
  }
  const { values } = jacobiEigen(inner);
  let trSqrt = 0;
  for (const lam of values) trSqrt += Math.sqrt(Math.max(lam, 0));
  return Math.max(d2 + tr - 2 * trSqrt, 0);
}

export function evaluateFid(setA: Float32Array[], setB: Float32Array[], tile: number,
                            extractor: FeatureExtractor = randomProjectionExtractor()): number {
  if (setA.length < 2 || setB.length < 2) {
    throw new Error("FID needs at least 2 samples per set");
  }
  const fa = extractor(setA, tile);
  const fb = extractor(setB, tile);
  const ga = gaussianFit(fa);
  const gb = gaussianFit(fb);
  return frechetDistance(ga.mu, ga.cov, gb.mu, gb.cov);
}
