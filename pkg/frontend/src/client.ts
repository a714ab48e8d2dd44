/**
 * Debugger client: one socket multiplexing the snapshot stream and the
 * command/ack channel. The transport is pluggable so the same client
 * runs under Node (TCP) and in a browser (WebSocket bridge).
 */

import {
  AckPayload,
  FrameDecoder,
  LogEvent,
  Snapshot,
  WireMessage,
  encodeFrame,
} from "./protocol.js";

export interface Transport {
  send(data: Uint8Array): void;
  onData(cb: (chunk: Uint8Array) => void): void;
  onClose(cb: () => void): void;
  close(): void;
}

export type SnapshotListener = (snapshot: Snapshot) => void;
export type StatusListener = (connected: boolean) => void;

interface Pending {
  resolve: (payload: AckPayload) => void;
  reject: (err: Error) => void;
  timer: NodeJS.Timeout | number;
}

export class DebuggerClient {
  private decoder = new FrameDecoder();
  private pending = new Map<string, Pending>();
  private snapshotListeners: SnapshotListener[] = [];
  private statusListeners: StatusListener[] = [];
  private corr = 0;
  /** Event timeline accumulated from snapshot deltas. */
  readonly timeline: LogEvent[] = [];
  latestSnapshot: Snapshot | null = null;
  connected = true;

  constructor(
    private transport: Transport,
    private ackTimeoutMs = 10_000,
  ) {
    transport.onData((chunk) => this.feed(chunk));
    transport.onClose(() => this.handleClose());
  }

  private feed(chunk: Uint8Array): void {
    for (const msg of this.decoder.feed(chunk)) {
      this.dispatch(msg);
    }
  }

  private dispatch(msg: WireMessage): void {
    if (msg.type === "SNAPSHOT") {
      const snapshot = msg.payload as unknown as Snapshot;
      this.timeline.push(...snapshot.events);
      this.latestSnapshot = snapshot;
      for (const cb of this.snapshotListeners) cb(snapshot);
    } else if (msg.type === "ACK") {
      const waiter = this.pending.get(msg.correlationId);
      if (waiter) {
        this.pending.delete(msg.correlationId);
        clearTimeout(waiter.timer as NodeJS.Timeout);
        waiter.resolve(msg.payload as AckPayload);
      }
    }
  }

  private handleClose(): void {
    this.connected = false;
    for (const [, waiter] of this.pending) {
      clearTimeout(waiter.timer as NodeJS.Timeout);
      waiter.reject(new Error("connection closed"));
    }
    this.pending.clear();
    for (const cb of this.statusListeners) cb(false);
  }

  onSnapshot(cb: SnapshotListener): void {
    this.snapshotListeners.push(cb);
  }

  onStatus(cb: StatusListener): void {
    this.statusListeners.push(cb);
  }

  /** Send one command; resolves with the server's ACK payload. */
  sendCommand(
    command: string,
    args: Record<string, unknown> = {},
  ): Promise<AckPayload> {
    if (!this.connected) {
      return Promise.reject(new Error("read-only: not connected"));
    }
    this.corr += 1;
    const correlationId = `ui-${this.corr}`;
    const doc = {
      type: "COMMAND",
      correlationId,
      senderId: "debugger-ui",
      payload: { command, args },
    };
    return new Promise<AckPayload>((resolve, reject) => {
      const timer = setTimeout(() => {
        this.pending.delete(correlationId);
        reject(new Error(`ack timeout for ${command}`));
      }, this.ackTimeoutMs);
      this.pending.set(correlationId, { resolve, reject, timer });
      this.transport.send(encodeFrame(doc));
    });
  }

  /** Wait until a snapshot satisfies the predicate. */
  waitForSnapshot(
    predicate: (s: Snapshot) => boolean,
    timeoutMs = 15_000,
  ): Promise<Snapshot> {
    if (this.latestSnapshot && predicate(this.latestSnapshot)) {
      return Promise.resolve(this.latestSnapshot);
    }
    return new Promise((resolve, reject) => {
      const timer = setTimeout(
        () => reject(new Error("snapshot wait timed out")),
        timeoutMs,
      );
      this.onSnapshot((snapshot) => {
        if (predicate(snapshot)) {
          clearTimeout(timer);
          resolve(snapshot);
        }
      });
    });
  }

  close(): void {
    this.transport.close();
  }
}

/** TCP transport for Node-based debugger sessions and tests. */
export async function connectTcp(
  host: string,
  port: number,
): Promise<Transport> {
  const net = await import("node:net");
  const socket = net.createConnection({ host, port });
  await new Promise<void>((resolve, reject) => {
    socket.once("connect", () => resolve());
    socket.once("error", (err: Error) => reject(err));
  });
  socket.on("error", () => socket.destroy());
  return {
    send: (data) => socket.write(data),
    onData: (cb) => socket.on("data", (chunk: Buffer) => cb(new Uint8Array(chunk))),
    onClose: (cb) => socket.on("close", cb),
    close: () => socket.destroy(),
  };
}

/**
 * WebSocket transport for browser builds; expects a byte-transparent
 * TCP bridge (e.g. websockify) in front of the serve endpoint.
 */
export function connectWebSocket(url: string): Transport {
  const ws = new WebSocket(url);
  ws.binaryType = "arraybuffer";
  const dataCbs: ((chunk: Uint8Array) => void)[] = [];
  const closeCbs: (() => void)[] = [];
  ws.onmessage = (ev: MessageEvent) => {
    const bytes = new Uint8Array(ev.data as ArrayBuffer);
    for (const cb of dataCbs) cb(bytes);
  };
  ws.onclose = () => {
    for (const cb of closeCbs) cb();
  };
  return {
    send: (data) => ws.send(data),
    onData: (cb) => dataCbs.push(cb),
    onClose: (cb) => closeCbs.push(cb),
    close: () => ws.close(),
  };
}
