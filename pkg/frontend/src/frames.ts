/**
 * Length-prefixed JSON framing for the benchmark wire protocol.
 *
 * One frame is a 4-byte big-endian payload length followed by that many
 * bytes of UTF-8 JSON encoding a message envelope. An envelope carries
 * exactly protocol_version, message_id, kind, and body.
 */

export const PROTOCOL_VERSION = 1;
export const MAX_PAYLOAD = 16 * 2 ** 20;

export const KINDS = [
  'hello',
  'study_definition',
  'query',
  'result',
  'invalid_config',
  'error',
  'shutdown',
] as const;

export type MessageKind = (typeof KINDS)[number];

export interface Envelope {
  protocol_version: number;
  message_id: string;
  kind: MessageKind;
  body: Record<string, unknown>;
}

/** A frame or envelope violates the wire format. */
export class FrameError extends Error {}

const ENVELOPE_FIELDS = ['protocol_version', 'message_id', 'kind', 'body'];

export function envelope(
  kind: MessageKind,
  messageId: string,
  body: Record<string, unknown>,
): Envelope {
  return { protocol_version: PROTOCOL_VERSION, message_id: messageId, kind, body };
}

/**
 * JSON with object keys sorted lexicographically at every level and no
 * whitespace, so identical envelopes always produce identical bytes.
 */
export function canonicalJson(value: unknown): string {
  if (value === null || typeof value !== 'object') {
    return JSON.stringify(value);
  }
  if (Array.isArray(value)) {
    return '[' + value.map(canonicalJson).join(',') + ']';
  }
  const record = value as Record<string, unknown>;
  const parts: string[] = [];
  for (const key of Object.keys(record).sort()) {
    if (record[key] === undefined) continue;
    parts.push(JSON.stringify(key) + ':' + canonicalJson(record[key]));
  }
  return '{' + parts.join(',') + '}';
}

function isPlainObject(value: unknown): value is Record<string, unknown> {
  return typeof value === 'object' && value !== null && !Array.isArray(value);
}

export function checkEnvelope(value: unknown): Envelope {
  if (!isPlainObject(value)) {
    throw new FrameError('envelope must be an object');
  }
  const keys = Object.keys(value).sort();
  if (keys.length !== ENVELOPE_FIELDS.length || [...ENVELOPE_FIELDS].sort().some((f, i) => keys[i] !== f)) {
    throw new FrameError(`envelope fields must be exactly ${ENVELOPE_FIELDS.join(', ')}`);
  }
  if (!Number.isInteger(value.protocol_version)) {
    throw new FrameError('protocol_version must be an integer');
  }
  if (typeof value.message_id !== 'string') {
    throw new FrameError('message_id must be a string');
  }
  if (!(KINDS as readonly string[]).includes(value.kind as string)) {
    throw new FrameError(`unknown message kind ${JSON.stringify(value.kind)}`);
  }
  if (!isPlainObject(value.body)) {
    throw new FrameError('body must be an object');
  }
  return value as unknown as Envelope;
}

/** Envelope to length-prefixed bytes. Rejects oversized payloads. */
export function encodeFrame(env: Envelope): Buffer {
  checkEnvelope(env);
  const payload = Buffer.from(canonicalJson(env), 'utf8');
  if (payload.length > MAX_PAYLOAD) {
    throw new FrameError(`payload of ${payload.length} bytes exceeds ${MAX_PAYLOAD}`);
  }
  const header = Buffer.alloc(4);
  header.writeUInt32BE(payload.length);
  return Buffer.concat([header, payload]);
}

const utf8 = new TextDecoder('utf-8', { fatal: true });

export function decodePayload(payload: Buffer): Envelope {
  let parsed: unknown;
  try {
    parsed = JSON.parse(utf8.decode(payload));
  } catch (err) {
    throw new FrameError(`payload is not UTF-8 JSON: ${(err as Error).message}`);
  }
  return checkEnvelope(parsed);
}

export interface DecodedFrame {
  env: Envelope;
  /** The exact bytes of the frame, length prefix included. */
  raw: Buffer;
}

/** Incremental decoder over an arbitrarily chunked byte stream. */
export class FrameDecoder {
  private buffer: Buffer = Buffer.alloc(0);

  push(chunk: Buffer): DecodedFrame[] {
    this.buffer = this.buffer.length ? Buffer.concat([this.buffer, chunk]) : chunk;
    const frames: DecodedFrame[] = [];
    while (this.buffer.length >= 4) {
      const length = this.buffer.readUInt32BE(0);
      if (length > MAX_PAYLOAD) {
        throw new FrameError(`declared payload of ${length} bytes exceeds ${MAX_PAYLOAD}`);
      }
      if (this.buffer.length < 4 + length) break;
      const raw = Buffer.from(this.buffer.subarray(0, 4 + length));
      frames.push({ env: decodePayload(raw.subarray(4)), raw });
      this.buffer = this.buffer.subarray(4 + length);
    }
    return frames;
  }

  /** Call at EOF; leftover bytes mean the peer stopped mid-frame. */
  end(): void {
    if (this.buffer.length > 0) {
      throw new FrameError('connection ended mid-frame');
    }
  }
}
