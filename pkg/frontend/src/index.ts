/**
 * Client bindings for the tunebench benchmark service: benchmark() hands
 * back a Study whose query() evaluates configurations over the wire.
 */

export { benchmark, InvalidConfigError, Study } from './client.js';
export type { ConfigValue, Configuration, QueryOutcome, StudyDocument } from './client.js';
export { ServiceError, TransportError } from './connection.js';
export { FrameError } from './frames.js';
