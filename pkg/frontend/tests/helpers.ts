import { ChildProcess, spawn } from 'node:child_process';

import type { Configuration, StudyDocument } from '../src/client.js';

export interface ServerHandle {
  child: ChildProcess;
  host: string;
  port: number;
  address: string;
}

/** Spawn a bundled surrogate server on a free port and wait for its banner. */
export function startServer(benchmarkId = 'asum-cpu'): Promise<ServerHandle> {
  const child = spawn('python3', [
    '-m', 'tunebench', 'serve',
    '--benchmark', benchmarkId,
    '--backend', 'surrogate',
    '--surrogate-log', 'bundled',
    '--bind', '127.0.0.1:0',
  ], { stdio: ['ignore', 'pipe', 'pipe'] });

  return new Promise((resolve, reject) => {
    let stdout = '';
    let stderr = '';
    child.stdout!.on('data', (chunk: Buffer) => {
      stdout += chunk.toString('utf8');
      const match = stdout.match(/^serving \S+ on (\S+):(\d+)$/m);
      if (match) {
        const host = match[1];
        const port = Number(match[2]);
        resolve({ child, host, port, address: `${host}:${port}` });
      }
    });
    child.stderr!.on('data', (chunk: Buffer) => {
      stderr += chunk.toString('utf8');
    });
    child.on('exit', (code) => reject(new Error(`server exited with code ${code}: ${stderr}`)));
    child.on('error', reject);
  });
}

export function stopServer(handle: ServerHandle): Promise<void> {
  if (handle.child.exitCode !== null || handle.child.signalCode !== null) {
    return Promise.resolve();
  }
  return new Promise((resolve) => {
    handle.child.once('exit', () => resolve());
    handle.child.kill('SIGKILL');
  });
}

export function mulberry32(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state + 0x6d2b79f5) >>> 0;
    let t = state;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

/** Uniform per-parameter draw; the server decides whether it is valid. */
export function drawConfig(definition: StudyDocument, rand: () => number): Configuration {
  const config: Configuration = {};
  for (const p of definition.search_space.parameters) {
    if (p.kind === 'permutation') {
      const order = Array.from({ length: p.size as number }, (_, i) => i);
      for (let i = order.length - 1; i > 0; i--) {
        const j = Math.floor(rand() * (i + 1));
        [order[i], order[j]] = [order[j], order[i]];
      }
      config[p.name] = order;
    } else {
      const values = p.values as Array<number | string>;
      config[p.name] = values[Math.floor(rand() * values.length)];
    }
  }
  return config;
}
