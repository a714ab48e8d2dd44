export {
  DebuggerClient,
  connectTcp,
  connectWebSocket,
  type Transport,
} from "./client.js";
export {
  FrameDecoder,
  encodeFrame,
  type AckPayload,
  type LogEvent,
  type NodeTypeSchema,
  type Snapshot,
  type TreeDoc,
  type WireMessage,
} from "./protocol.js";
export { renderSnapshotHtml } from "./render.js";
export {
  STATE_COLORS,
  buildViewModel,
  filterPalette,
  optionEditor,
  setOptionCommand,
  stateColor,
  type ExecutorPanel,
  type NodeView,
  type TreeView,
  type TreeViewModel,
  type WiringView,
} from "./viewmodel.js";
