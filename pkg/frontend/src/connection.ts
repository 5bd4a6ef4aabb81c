/**
 * One TCP connection to a benchmark server: strictly alternating
 * request/reply with client-assigned message ids m1, m2, ...
 */

import * as net from 'node:net';

import {
  Envelope,
  FrameDecoder,
  FrameError,
  MessageKind,
  encodeFrame,
  envelope,
} from './frames.js';

/** The connection failed mid-exchange. Nothing was retried. */
export class TransportError extends Error {}

/** The server answered with an error envelope or broke protocol. */
export class ServiceError extends Error {}

/** Raw frame bytes of a session, in send and receive order. */
export interface Transcript {
  sent: Buffer[];
  received: Buffer[];
}

interface Pending {
  resolve: (env: Envelope) => void;
  reject: (err: Error) => void;
  timer: NodeJS.Timeout;
}

export class Connection {
  readonly label: string;
  /** When set, every frame's exact bytes are appended as they pass. */
  transcript: Transcript | null = null;

  private socket: net.Socket;
  private decoder = new FrameDecoder();
  private counter = 0;
  private pending: Pending | null = null;
  private failure: Error | null = null;

  private constructor(socket: net.Socket, label: string) {
    this.socket = socket;
    this.label = label;
    socket.on('data', (chunk) => this.onData(chunk));
    socket.on('error', (err) => this.fail(new TransportError(`exchange with ${label} failed: ${err.message}`)));
    socket.on('close', () => this.fail(new TransportError(`${label} closed the connection`)));
  }

  static connect(host: string, port: number, timeoutMs = 10_000): Promise<Connection> {
    return new Promise((resolve, reject) => {
      const socket = net.createConnection({ host, port });
      const timer = setTimeout(() => {
        socket.destroy();
        reject(new TransportError(`cannot connect to ${host}:${port}: timed out`));
      }, timeoutMs);
      socket.once('error', (err) => {
        clearTimeout(timer);
        reject(new TransportError(`cannot connect to ${host}:${port}: ${err.message}`));
      });
      socket.once('connect', () => {
        clearTimeout(timer);
        socket.removeAllListeners('error');
        socket.setNoDelay(true);
        resolve(new Connection(socket, `${host}:${port}`));
      });
    });
  }

  get isOpen(): boolean {
    return this.failure === null;
  }

  /**
   * Send one envelope and wait for its reply. Rejects with ServiceError on
   * error envelopes and correlation mismatches, TransportError otherwise.
   */
  async request(
    kind: MessageKind,
    body: Record<string, unknown>,
    timeoutMs = 600_000,
  ): Promise<Envelope> {
    if (this.failure) throw this.failure;
    if (this.pending) throw new Error('a request is already in flight on this connection');
    this.counter += 1;
    const mid = `m${this.counter}`;
    const frame = encodeFrame(envelope(kind, mid, body));
    if (this.transcript) this.transcript.sent.push(frame);
    const reply = await new Promise<Envelope>((resolve, reject) => {
      const timer = setTimeout(() => {
        this.fail(new TransportError(`no reply from ${this.label} within ${timeoutMs} ms`));
        this.socket.destroy();
      }, timeoutMs);
      this.pending = { resolve, reject, timer };
      this.socket.write(frame);
    });
    if (reply.message_id !== mid) {
      throw new ServiceError(`reply correlation mismatch: sent ${mid}, got ${JSON.stringify(reply.message_id)}`);
    }
    if (reply.kind === 'error') {
      const reason = (reply.body as { reason?: unknown }).reason;
      throw new ServiceError(typeof reason === 'string' ? reason : 'unspecified server error');
    }
    return reply;
  }

  close(): void {
    this.fail(new TransportError(`connection to ${this.label} is closed`));
    this.socket.destroy();
  }

  private onData(chunk: Buffer): void {
    let frames;
    try {
      frames = this.decoder.push(chunk);
    } catch (err) {
      this.fail(new TransportError(`exchange with ${this.label} failed: ${(err as FrameError).message}`));
      this.socket.destroy();
      return;
    }
    for (const frame of frames) {
      if (this.transcript) this.transcript.received.push(frame.raw);
      if (this.pending) {
        const pending = this.pending;
        this.pending = null;
        clearTimeout(pending.timer);
        pending.resolve(frame.env);
      }
      // an unsolicited frame has no one to go to; drop it
    }
  }

  private fail(err: Error): void {
    if (this.failure) return;
    this.failure = err;
    if (this.pending) {
      const pending = this.pending;
      this.pending = null;
      clearTimeout(pending.timer);
      pending.reject(err);
    }
  }
}
