import * as net from 'node:net';

import { afterAll, beforeAll, describe, expect, it } from 'vitest';

import { Connection } from '../src/connection.js';
import type { Transcript } from '../src/connection.js';
import { startServer, stopServer } from './helpers.js';
import type { ServerHandle } from './helpers.js';

let server: ServerHandle;

beforeAll(async () => {
  server = await startServer('asum-cpu');
});

afterAll(async () => {
  await stopServer(server);
});

/** Write bytes to the server raw, collect exactly n reply bytes. */
function exchangeRaw(host: string, port: number, payload: Buffer, expectBytes: number): Promise<Buffer> {
  return new Promise((resolve, reject) => {
    const socket = net.createConnection({ host, port });
    const chunks: Buffer[] = [];
    let received = 0;
    socket.on('connect', () => socket.write(payload));
    socket.on('data', (chunk) => {
      chunks.push(chunk);
      received += chunk.length;
      if (received >= expectBytes) {
        socket.destroy();
        resolve(Buffer.concat(chunks));
      }
    });
    socket.on('error', reject);
    socket.on('close', () => reject(new Error(`connection closed after ${received} of ${expectBytes} bytes`)));
    setTimeout(() => {
      socket.destroy();
      reject(new Error(`timed out after ${received} of ${expectBytes} bytes`));
    }, 30_000).unref();
  });
}

describe('recorded transcript replay', () => {
  it('replays one hello-query session bit-exactly on a fresh connection', async () => {
    const transcript: Transcript = { sent: [], received: [] };

    const connection = await Connection.connect(server.host, server.port);
    connection.transcript = transcript;
    await connection.request('hello', { client: 'tunebench-client' });
    const reply = await connection.request('query', {
      configuration: { chunk: 16384, threads: 4, unroll: 'true' },
      fidelities: { iterations: 10 },
    });
    connection.close();

    expect(reply.kind).toBe('result');
    expect(transcript.sent).toHaveLength(2);
    expect(transcript.received).toHaveLength(2);

    // a fresh connection restarts the server's evaluation counter, so the
    // same request bytes must produce the same reply bytes
    const recordedRequests = Buffer.concat(transcript.sent);
    const recordedReplies = Buffer.concat(transcript.received);
    const replayed = await exchangeRaw(
      server.host,
      server.port,
      recordedRequests,
      recordedReplies.length,
    );

    expect(replayed.length).toBe(recordedReplies.length);
    expect(replayed.equals(recordedReplies)).toBe(true);
  });

  it('replays the query frame alone identically as the second exchange', async () => {
    // same session shape recorded through a second client connection
    const transcript: Transcript = { sent: [], received: [] };
    const connection = await Connection.connect(server.host, server.port);
    connection.transcript = transcript;
    await connection.request('hello', { client: 'tunebench-client' });
    await connection.request('query', {
      configuration: { chunk: 0, threads: 2, unroll: 'false' },
      fidelities: { iterations: 10 },
    });
    connection.close();

    const replayed = await exchangeRaw(
      server.host,
      server.port,
      Buffer.concat(transcript.sent),
      Buffer.concat(transcript.received).length,
    );
    expect(replayed.equals(Buffer.concat(transcript.received))).toBe(true);
  });
});
