/**
 * Wire protocol shared with the runtime: 4-byte big-endian length
 * prefix followed by a JSON object {type, correlationId, senderId,
 * payload}.
 */

export interface WireMessage {
  type: string;
  correlationId: string;
  senderId: string;
  payload: Record<string, unknown>;
}

export interface AckPayload {
  ok: boolean;
  [key: string]: unknown;
}

export interface LogEvent {
  tick: number;
  actor: string;
  event: string;
  detail: string;
}

export interface Snapshot {
  cycle: number;
  mode: string;
  treeStates: Record<string, string>;
  nodeStates: Record<string, Record<string, string>>;
  paramValues: Record<string, Record<string, unknown>>;
  utilityCache: Record<string, Record<string, unknown>>;
  slotStatus: Record<string, Record<string, unknown>>;
  sim: {
    clock: number;
    doors: Record<string, { cell: number[]; open: boolean }>;
    objects: Record<string, { cell: number[]; pickedUp: boolean }>;
    robots: Record<string, { pose: number[]; services: string[] }>;
  };
  events: LogEvent[];
  trees: Record<string, TreeDoc>;
  nodeTypes: NodeTypeSchema[];
}

export interface TreeDoc {
  version: number;
  name?: string;
  nodes: { id: string; kind: string; options: Record<string, unknown> }[];
  edges: { parent: string; child: string; order: number }[];
  wirings: {
    source: { node: string; name: string };
    target: { node: string; name: string };
  }[];
}

export interface NodeTypeSchema {
  kind: string;
  maxChildren: number | null;
  options: Record<string, unknown>;
  inputs: Record<string, unknown>;
  outputs: Record<string, unknown>;
}

export function encodeFrame(doc: unknown): Uint8Array {
  const body = new TextEncoder().encode(JSON.stringify(doc));
  const frame = new Uint8Array(4 + body.length);
  new DataView(frame.buffer).setUint32(0, body.length, false);
  frame.set(body, 4);
  return frame;
}

/** Incremental decoder for a length-delimited JSON byte stream. */
export class FrameDecoder {
  private buffer = new Uint8Array(0);

  feed(chunk: Uint8Array): WireMessage[] {
    const merged = new Uint8Array(this.buffer.length + chunk.length);
    merged.set(this.buffer);
    merged.set(chunk, this.buffer.length);
    this.buffer = merged;
    const out: WireMessage[] = [];
    for (;;) {
      if (this.buffer.length < 4) return out;
      const size = new DataView(
        this.buffer.buffer,
        this.buffer.byteOffset,
      ).getUint32(0, false);
      if (this.buffer.length < 4 + size) return out;
      const body = this.buffer.slice(4, 4 + size);
      this.buffer = this.buffer.slice(4 + size);
      out.push(JSON.parse(new TextDecoder().decode(body)) as WireMessage);
    }
  }
}
