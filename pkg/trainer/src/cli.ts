/** Trainer command line: train on a generated dataset, or score two raster
 * sets with the Frechet distance.
 *
 *   node dist/cli.js train --data <dataset dir> --out <run dir>
 *                          [--preset toy|full] [--epochs N] [--seed N]
 *                          [--tile N] [--gan-mode lsgan|log] [--qsa global|local]
 *   node dist/cli.js fid   --a <dir of .pgm> --b <dir of .pgm> [--tile N]
 */

import * as fs from "fs";
import * as path from "path";
import { setupBackend } from "./backend";
import { evaluateFid } from "./fid";
import { loadTiles } from "./pgm";
import { DEFAULT_CONFIG, TOY_PRESET, TrainConfig, train } from "./train";

function parseFlags(argv: string[]): Map<string, string> {
  const flags = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    if (!argv[i].startsWith("--") || i + 1 >= argv.length) {
      throw new Error(`bad arguments near ${argv[i]}`);
    }
    flags.set(argv[i].slice(2), argv[i + 1]);
  }
  return flags;
}

async function cmdTrain(argv: string[]): Promise<number> {
  const flags = parseFlags(argv);
  const dataDir = flags.get("data");
  const outDir = flags.get("out");
  if (!dataDir || !outDir) {
    process.stderr.write("train needs --data and --out\n");
    return 2;
  }
  const preset = flags.get("preset") ?? "toy";
  const cfg: TrainConfig = { ...(preset === "full" ? DEFAULT_CONFIG : TOY_PRESET) };
  if (flags.has("epochs")) cfg.epochs = parseInt(flags.get("epochs")!, 10);
  if (flags.has("seed")) cfg.seed = parseInt(flags.get("seed")!, 10);
  if (flags.has("tile")) cfg.tile = parseInt(flags.get("tile")!, 10);
  if (flags.has("features")) cfg.numFeatures = parseInt(flags.get("features")!, 10);
  if (flags.has("gan-mode")) cfg.ganMode = flags.get("gan-mode") as TrainConfig["ganMode"];
  if (flags.has("qsa")) cfg.qsa = flags.get("qsa") as TrainConfig["qsa"];
  const backend = await setupBackend();
  console.log(`backend ${backend}, preset ${preset}, config`, cfg);
  const result = await train(dataDir, outDir, cfg);
  console.log(`model exported to ${result.modelDir} ` +
    `(verification deviation ${result.exportDeviation.toExponential(2)})`);
  console.log(`log written to ${path.join(outDir, "training_log.csv")}`);
  return 0;
}

async function cmdFid(argv: string[]): Promise<number> {
  const flags = parseFlags(argv);
  const dirA = flags.get("a");
  const dirB = flags.get("b");
  if (!dirA || !dirB) {
    process.stderr.write("fid needs --a and --b\n");
    return 2;
  }
  const tile = parseInt(flags.get("tile") ?? "64", 10);
  const list = (d: string) =>
    fs.readdirSync(d).filter(f => f.endsWith(".pgm")).sort().map(f => path.join(d, f));
  const a = loadTiles(list(dirA), tile);
  const b = loadTiles(list(dirB), tile);
  console.log(`FID: ${evaluateFid(a, b, tile).toFixed(6)}`);
  return 0;
}

async function main(): Promise<number> {
  const [command, ...rest] = process.argv.slice(2);
  if (command === "train") return cmdTrain(rest);
  if (command === "fid") return cmdFid(rest);
  process.stderr.write("usage: cli.js train|fid ...\n");
  return 2;
}

main().then(code => process.exit(code)).catch(err => {
  process.stderr.write(`${err.stack ?? err}\n`);
  process.exit(1);
});
