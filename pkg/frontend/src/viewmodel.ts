/**
 * Pure view-model construction: everything the debugger shows derives
 * from the latest snapshot (plus the accumulated event timeline); the
 * client performs no simulation of its own.
 */

import { LogEvent, NodeTypeSchema, Snapshot, TreeDoc } from "./protocol.js";

/** Node state colors from the debugger legend. */
export const STATE_COLORS: Record<string, string> = {
  succeeded: "green",
  running: "yellow",
  failed: "red",
  shutdown: "purple",
  idle: "blue",
  uninitialized: "grey",
};

/** Runtime-only states reuse the nearest legend color. */
const EXTRA_STATE_COLORS: Record<string, string> = {
  paused: "yellow",
  error: "red",
};

export function stateColor(state: string): string {
  return STATE_COLORS[state] ?? EXTRA_STATE_COLORS[state] ?? "grey";
}

export interface NodeView {
  id: string;
  kind: string;
  depth: number;
  state: string;
  color: string;
  options: Record<string, unknown>;
  children: string[];
}

export interface WiringView {
  source: string;
  target: string;
  value: unknown;
}

export interface TreeView {
  executorId: string;
  treeState: string;
  nodes: NodeView[]; // depth-first, child order preserved
  wirings: WiringView[];
}

export interface ExecutorPanel {
  id: string;
  treeState: string;
  slotStatus: Record<string, unknown>;
  utilityCache: Record<string, unknown>;
  pose?: number[];
  services?: string[];
}

export interface TreeViewModel {
  cycle: number;
  mode: string;
  editable: boolean;
  trees: TreeView[];
  executors: ExecutorPanel[];
  doors: { id: string; open: boolean; cell: number[] }[];
  objects: { id: string; pickedUp: boolean; cell: number[] }[];
  timeline: LogEvent[];
}

function layoutTree(doc: TreeDoc, states: Record<string, string>): NodeView[] {
  const childrenOf = new Map<string, { child: string; order: number }[]>();
  const hasParent = new Set<string>();
  for (const edge of doc.edges) {
    if (!childrenOf.has(edge.parent)) childrenOf.set(edge.parent, []);
    childrenOf.get(edge.parent)!.push({ child: edge.child, order: edge.order });
    hasParent.add(edge.child);
  }
  for (const entry of childrenOf.values()) {
    entry.sort((a, b) => a.order - b.order);
  }
  const byId = new Map(doc.nodes.map((n) => [n.id, n]));
  const roots = doc.nodes.filter((n) => !hasParent.has(n.id)).map((n) => n.id);
  const out: NodeView[] = [];
  const walk = (id: string, depth: number) => {
    const node = byId.get(id);
    if (!node) return;
    const kids = (childrenOf.get(id) ?? []).map((e) => e.child);
    const state = states[id] ?? "uninitialized";
    out.push({
      id,
      kind: node.kind,
      depth,
      state,
      color: stateColor(state),
      options: node.options,
      children: kids,
    });
    for (const kid of kids) walk(kid, depth + 1);
  };
  for (const root of roots.sort()) walk(root, 0);
  return out;
}

export function buildViewModel(
  snapshot: Snapshot,
  timeline: LogEvent[] = [],
): TreeViewModel {
  const trees: TreeView[] = [];
  for (const executorId of Object.keys(snapshot.trees).sort()) {
    const doc = snapshot.trees[executorId];
    const states = snapshot.nodeStates[executorId] ?? {};
    const values = snapshot.paramValues[executorId] ?? {};
    trees.push({
      executorId,
      treeState: snapshot.treeStates[executorId] ?? "uninitialized",
      nodes: layoutTree(doc, states),
      wirings: doc.wirings.map((w) => ({
        source: `${w.source.node}.${w.source.name}`,
        target: `${w.target.node}.${w.target.name}`,
        value: values[`${w.source.node}.output.${w.source.name}`],
      })),
    });
  }
  const executors: ExecutorPanel[] = Object.keys(snapshot.treeStates)
    .sort()
    .map((id) => ({
      id,
      treeState: snapshot.treeStates[id],
      slotStatus: snapshot.slotStatus[id] ?? {},
      utilityCache: snapshot.utilityCache[id] ?? {},
      pose: snapshot.sim.robots[id]?.pose,
      services: snapshot.sim.robots[id]?.services,
    }));
  return {
    cycle: snapshot.cycle,
    mode: snapshot.mode,
    editable: snapshot.mode === "idle",
    trees,
    executors,
    doors: Object.entries(snapshot.sim.doors).map(([id, d]) => ({
      id,
      open: d.open,
      cell: d.cell,
    })),
    objects: Object.entries(snapshot.sim.objects).map(([id, o]) => ({
      id,
      pickedUp: o.pickedUp,
      cell: o.cell,
    })),
    timeline,
  };
}

// -- option editor -------------------------------------------------------------

export interface OptionField {
  name: string;
  declaredType: unknown;
  value: unknown;
}

/** Fields shown when a node is selected. */
export function optionEditor(
  snapshot: Snapshot,
  executorId: string,
  nodeId: string,
): OptionField[] {
  const doc = snapshot.trees[executorId];
  const node = doc?.nodes.find((n) => n.id === nodeId);
  if (!node) return [];
  const schema = snapshot.nodeTypes.find((t) => t.kind === node.kind);
  return Object.entries(node.options).map(([name, value]) => ({
    name,
    declaredType: schema?.options?.[name] ?? "unknown",
    value,
  }));
}

/** Command payload applying one edited option value. */
export function setOptionCommand(
  executorId: string,
  nodeId: string,
  option: string,
  value: unknown,
): { command: string; args: Record<string, unknown> } {
  return {
    command: "setOption",
    args: { executor: executorId, node: nodeId, option, value },
  };
}

// -- node palette -----------------------------------------------------------------

export function filterPalette(
  types: NodeTypeSchema[],
  query: string,
): NodeTypeSchema[] {
  const needle = query.trim().toLowerCase();
  if (!needle) return [...types].sort((a, b) => a.kind.localeCompare(b.kind));
  return types
    .filter((t) => t.kind.toLowerCase().includes(needle))
    .sort((a, b) => a.kind.localeCompare(b.kind));
}
