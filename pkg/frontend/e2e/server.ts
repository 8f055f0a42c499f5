/**
 * Spawn and seed a real experiment service for the e2e suite.
 *
 * The server is the installed `avstats` CLI running against a throwaway
 * data directory; the seed data comes from a fixed-seed generator so
 * every run produces byte-identical statistics.
 */

import { ChildProcess, spawn } from "node:child_process";
import { mkdtempSync, rmSync, writeFileSync } from "node:fs";
import { createServer } from "node:net";
import { tmpdir } from "node:os";
import { join } from "node:path";

export interface TestServer {
  baseUrl: string;
  dataDir: string;
  /** SIGKILL and wait for the process to die. */
  kill(): Promise<void>;
  /** Start a fresh process on the same port and data directory. */
  restart(): Promise<void>;
  cleanup(): Promise<void>;
}

export async function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const probe = createServer();
    probe.once("error", reject);
    probe.listen(0, "127.0.0.1", () => {
      const address = probe.address();
      if (address === null || typeof address === "string") {
        probe.close();
        reject(new Error("no port assigned"));
        return;
      }
      probe.close(() => resolve(address.port));
    });
  });
}

function spawnServer(configPath: string): ChildProcess {
  const child = spawn("avstats", ["serve", "--config", configPath], {
    stdio: ["ignore", "ignore", "pipe"],
  });
  let stderr = "";
  child.stderr!.on("data", (chunk: Buffer) => {
    stderr += chunk.toString();
  });
  child.on("exit", (code) => {
    if (code !== null && code !== 0) {
      // surfaced by the readiness timeout; keep the reason visible
      console.error(`avstats serve exited with ${code}\n${stderr}`);
    }
  });
  return child;
}

async function waitReady(baseUrl: string, timeoutMs = 30_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  for (;;) {
    try {
      const response = await fetch(`${baseUrl}/experiments/__probe__/snapshot`);
      if (response.status === 404 || response.ok) return;
    } catch {
      // not listening yet
    }
    if (Date.now() > deadline) throw new Error(`server at ${baseUrl} never became ready`);
    await new Promise((resolve) => setTimeout(resolve, 100));
  }
}

async function waitExit(child: ChildProcess): Promise<void> {
  if (child.exitCode !== null || child.signalCode !== null) return;
  await new Promise<void>((resolve) => child.once("exit", () => resolve()));
}

export async function startServer(): Promise<TestServer> {
  const port = await freePort();
  const dataDir = mkdtempSync(join(tmpdir(), "avstats-e2e-"));
  const configPath = join(dataDir, "service.conf");
  writeFileSync(
    configPath,
    `host = 127.0.0.1\nport = ${port}\ndata_dir = ${join(dataDir, "store")}\n`,
  );
  const baseUrl = `http://127.0.0.1:${port}`;

  let child = spawnServer(configPath);
  await waitReady(baseUrl);

  return {
    baseUrl,
    dataDir,
    async kill() {
      child.kill("SIGKILL");
      await waitExit(child);
    },
    async restart() {
      child.kill("SIGKILL");
      await waitExit(child);
      child = spawnServer(configPath);
      await waitReady(baseUrl);
    },
    async cleanup() {
      child.kill("SIGKILL");
      await waitExit(child);
      rmSync(dataDir, { recursive: true, force: true });
    },
  };
}

/** Deterministic uniform generator so seeded data never drifts between runs. */
export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

async function post(url: string, payload: unknown): Promise<void> {
  const response = await fetch(url, {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify(payload),
  });
  if (!response.ok) {
    throw new Error(`POST ${url} failed: ${response.status} ${await response.text()}`);
  }
}

export interface SeedSpec {
  id: string;
  controlRate: number;
  treatmentRate: number;
  seed: number;
  batches: number;
  perArmPerBatch: number;
}

/** Create one experiment and stream Bernoulli batches into it. */
export async function seedExperiment(baseUrl: string, spec: SeedSpec): Promise<void> {
  await post(`${baseUrl}/experiments`, {
    id: spec.id,
    model: { kind: "bernoulli" },
    mixture: { tau_sq: 0.05 },
  });
  const uniform = mulberry32(spec.seed);
  for (let batch = 0; batch < spec.batches; batch++) {
    const observations: Array<{ variation: string; value: number }> = [];
    for (let i = 0; i < spec.perArmPerBatch; i++) {
      observations.push({
        variation: "control",
        value: uniform() < spec.controlRate ? 1 : 0,
      });
      observations.push({
        variation: "treatment",
        value: uniform() < spec.treatmentRate ? 1 : 0,
      });
    }
    await post(`${baseUrl}/experiments/${spec.id}/observations`, { observations });
  }
}
