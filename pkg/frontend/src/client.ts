/**
 * User surface of the package: benchmark() resolves a named study, either
 * against already-running servers or by spawning the bundled surrogate
 * server locally, and hands back a Study for blocking queries.
 */

import { ChildProcess, spawn } from 'node:child_process';

import { Connection, ServiceError, TransportError } from './connection.js';

/** The server rejected the configuration or fidelities before evaluating. */
export class InvalidConfigError extends Error {
  readonly violations: readonly string[];

  constructor(violations: string[]) {
    super(violations.join('; ') || 'invalid configuration');
    this.violations = Object.freeze([...violations]);
  }
}

export type ConfigValue = number | string | number[];
export type Configuration = Record<string, ConfigValue>;

/** One evaluation's answer, exactly as the server reported it. */
export interface QueryOutcome {
  objectives: Record<string, number>;
  feasible: boolean;
  infeasibility_reason: string | null;
  evaluation_id: string;
  raw_timings: number[];
}

/** The study document as served; field names match the study file. */
export interface StudyDocument {
  study_id: string;
  benchmark: string;
  objectives: Array<{ name: string; [key: string]: unknown }>;
  search_space: {
    parameters: Array<{ name: string; kind: string; [key: string]: unknown }>;
    known_constraints: string[];
  };
  fidelities: Array<{ name: string; [key: string]: unknown }>;
  [key: string]: unknown;
}

function deepFreeze<T>(value: T): T {
  if (value !== null && typeof value === 'object') {
    for (const child of Object.values(value as object)) deepFreeze(child);
    Object.freeze(value);
  }
  return value;
}

interface SpawnedServer {
  child: ChildProcess;
  host: string;
  port: number;
}

function spawnBundledServer(name: string, timeoutMs = 60_000): Promise<SpawnedServer> {
  const child = spawn('python3', [
    '-m', 'tunebench', 'serve',
    '--benchmark', name,
    '--backend', 'surrogate',
    '--surrogate-log', 'bundled',
    '--bind', '127.0.0.1:0',
  ], { stdio: ['ignore', 'pipe', 'pipe'] });

  return new Promise((resolve, reject) => {
    let stdout = '';
    let stderr = '';
    let settled = false;

    const finish = (err: Error | null, server?: SpawnedServer) => {
      if (settled) return;
      settled = true;
      clearTimeout(timer);
      if (err) {
        child.kill('SIGKILL');
        reject(err);
      } else {
        resolve(server!);
      }
    };

    const timer = setTimeout(
      () => finish(new TransportError(`benchmark server for ${JSON.stringify(name)} did not come up within ${timeoutMs} ms`)),
      timeoutMs,
    );

    child.stdout!.on('data', (chunk: Buffer) => {
      stdout += chunk.toString('utf8');
      const match = stdout.match(/^serving \S+ on (\S+):(\d+)$/m);
      if (match) finish(null, { child, host: match[1], port: Number(match[2]) });
    });
    child.stderr!.on('data', (chunk: Buffer) => {
      stderr += chunk.toString('utf8');
    });
    child.on('error', (err) => finish(new TransportError(`cannot spawn benchmark server: ${err.message}`)));
    child.on('exit', (code) => {
      const diagnostic = stderr.trim().split('\n').filter(Boolean).pop() ?? 'no diagnostic output';
      finish(new TransportError(`benchmark server for ${JSON.stringify(name)} exited with code ${code}: ${diagnostic}`));
    });
  });
}

function waitForExit(child: ChildProcess, timeoutMs: number): Promise<void> {
  if (child.exitCode !== null || child.signalCode !== null) return Promise.resolve();
  return new Promise((resolve) => {
    const timer = setTimeout(() => {
      child.kill('SIGKILL');
    }, timeoutMs);
    child.once('exit', () => {
      clearTimeout(timer);
      resolve();
    });
  });
}

/** A queryable handle on one served study. Not safe for concurrent use. */
export class Study {
  readonly definition: StudyDocument;

  private connection: Connection;
  private server: ChildProcess | null;
  private inFlight = false;
  private closed = false;

  /** Built by benchmark(); not meant to be constructed directly. */
  constructor(definition: StudyDocument, connection: Connection, server: ChildProcess | null) {
    this.definition = deepFreeze(definition);
    this.connection = connection;
    this.server = server;
  }

  /**
   * Evaluate one configuration, blocking until the server answers.
   * Rejected configurations and out-of-range fidelities raise
   * InvalidConfigError; an evaluation that ran into a hidden limit comes
   * back normally with feasible false.
   */
  async query(config: Configuration, fidelities?: Record<string, number>): Promise<QueryOutcome> {
    if (this.closed) throw new TransportError('this study handle is closed');
    if (this.inFlight) throw new Error('a query is already in flight on this study');
    this.inFlight = true;
    try {
      const body: Record<string, unknown> = { configuration: config };
      if (fidelities && Object.keys(fidelities).length > 0) body.fidelities = fidelities;
      const reply = await this.connection.request('query', body);
      if (reply.kind === 'invalid_config') {
        const violations = (reply.body as { violations?: unknown }).violations;
        throw new InvalidConfigError(Array.isArray(violations) ? violations.map(String) : []);
      }
      if (reply.kind !== 'result') {
        throw new ServiceError(`expected a result, got ${JSON.stringify(reply.kind)}`);
      }
      return reply.body as unknown as QueryOutcome;
    } finally {
      this.inFlight = false;
    }
  }

  /**
   * Drop the connection; a server this handle spawned is asked to shut
   * down and reaped. Idempotent.
   */
  async close(): Promise<void> {
    if (this.closed) return;
    this.closed = true;
    if (this.server) {
      try {
        await this.connection.request('shutdown', {}, 5_000);
      } catch {
        // the point is that the process goes away; the kill below insists
      }
    }
    this.connection.close();
    if (this.server) {
      await waitForExit(this.server, 5_000);
      this.server = null;
    }
  }
}

/**
 * Resolve a benchmark name to a queryable Study.
 *
 * With dataset "server" the study is fetched from the first reachable of
 * the given host:port addresses. Any other dataset spawns the bundled
 * surrogate server for the name locally and connects to that.
 */
export async function benchmark(
  name: string,
  dataset = 'surrogate',
  serverAddresses: string[] = [],
): Promise<Study> {
  let connection: Connection;
  let server: ChildProcess | null = null;

  if (dataset === 'server') {
    if (serverAddresses.length === 0) {
      throw new TransportError('dataset "server" needs at least one host:port address');
    }
    connection = await connectFirst(serverAddresses);
  } else {
    const spawned = await spawnBundledServer(name);
    server = spawned.child;
    try {
      connection = await Connection.connect(spawned.host, spawned.port);
    } catch (err) {
      server.kill('SIGKILL');
      throw err;
    }
  }

  try {
    const reply = await connection.request('hello', { client: 'tunebench-client' });
    if (reply.kind !== 'study_definition') {
      throw new ServiceError(`expected a study definition, got ${JSON.stringify(reply.kind)}`);
    }
    return new Study(reply.body as unknown as StudyDocument, connection, server);
  } catch (err) {
    connection.close();
    if (server) server.kill('SIGKILL');
    throw err;
  }
}

async function connectFirst(addresses: string[]): Promise<Connection> {
  let lastError: Error | null = null;
  for (const address of addresses) {
    const sep = address.lastIndexOf(':');
    const port = Number(address.slice(sep + 1));
    if (sep < 0 || !Number.isInteger(port) || port < 0) {
      throw new TransportError(`address must look like host:port, got ${JSON.stringify(address)}`);
    }
    const host = address.slice(0, sep) || '127.0.0.1';
    try {
      return await Connection.connect(host, port);
    } catch (err) {
      lastError = err as Error;
    }
  }
  throw lastError!;
}
