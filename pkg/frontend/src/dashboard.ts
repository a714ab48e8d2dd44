/**
 * Minimal terminal dashboard: connect to a serve endpoint, mirror
 * snapshots, and steer with single-key commands.
 *
 *   node dist/dashboard.js --port 7777 [--host 127.0.0.1]
 *
 * keys: t tick, r tick-until-result, u untick, d toggle door d1, q quit
 */

import { DebuggerClient, connectTcp } from "./client.js";
import { buildViewModel, stateColor } from "./viewmodel.js";

function arg(name: string, fallback: string): string {
  const index = process.argv.indexOf(`--${name}`);
  return index >= 0 ? process.argv[index + 1] : fallback;
}

const ANSI: Record<string, string> = {
  green: "[32m",
  yellow: "[33m",
  red: "[31m",
  purple: "[35m",
  blue: "[34m",
  grey: "[90m",
};
const RESET = "[0m";

async function main(): Promise<void> {
  const host = arg("host", "127.0.0.1");
  const port = Number(arg("port", "7777"));
  const transport = await connectTcp(host, port);
  const client = new DebuggerClient(transport);
  client.onStatus((connected) => {
    if (!connected) {
      console.error("disconnected: read-only");
      process.exit(1);
    }
  });
  client.onSnapshot((snapshot) => {
    const vm = buildViewModel(snapshot, client.timeline);
    const lines: string[] = [`cycle ${vm.cycle} mode=${vm.mode}`];
    for (const tree of vm.trees) {
      lines.push(`== ${tree.executorId} (${tree.treeState})`);
      for (const node of tree.nodes) {
        const color = ANSI[stateColor(node.state)] ?? "";
        lines.push(
          `${"  ".repeat(node.depth)}${color}${node.kind} ${node.id} [${node.state}]${RESET}`,
        );
      }
    }
    for (const door of vm.doors) {
      lines.push(`door ${door.id}: ${door.open ? "open" : "closed"}`);
    }
    console.log(lines.join("\n") + "\n");
  });
  process.stdin.setRawMode?.(true);
  process.stdin.resume();
  process.stdin.on("data", (key: Buffer) => {
    const ch = key.toString();
    if (ch === "q" || ch === "") process.exit(0);
    if (ch === "t") void client.sendCommand("tick");
    if (ch === "r") void client.sendCommand("tickUntilResult");
    if (ch === "u") void client.sendCommand("untick");
    if (ch === "d") {
      const open = client.latestSnapshot?.sim.doors["d1"]?.open ?? false;
      void client.sendCommand("forceDoor", { door: "d1", open: !open });
    }
  });
}

main().catch((err) => {
  console.error(err);
  process.exit(1);
});
