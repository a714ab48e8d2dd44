/**
 * HTML rendering of the view model. The output is a plain string so it
 * works identically in tests, in a terminal preview, and as
 * `element.innerHTML` in a real page.
 */

import { TreeViewModel, NodeView, TreeView } from "./viewmodel.js";

function escapeHtml(value: unknown): string {
  return String(value)
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}

function renderNode(node: NodeView): string {
  const indent = node.depth * 18;
  const options = Object.entries(node.options)
    .map(([k, v]) => `${escapeHtml(k)}=${escapeHtml(JSON.stringify(v))}`)
    .join(" ");
  return (
    `<li class="bt-node" data-node-id="${escapeHtml(node.id)}" ` +
    `data-state="${escapeHtml(node.state)}" ` +
    `style="margin-left:${indent}px">` +
    `<span class="bt-state-dot" style="background:${node.color}"></span>` +
    `<span class="bt-kind">${escapeHtml(node.kind)}</span> ` +
    `<span class="bt-id">${escapeHtml(node.id)}</span>` +
    (options ? ` <span class="bt-options">${options}</span>` : "") +
    `</li>`
  );
}

function renderTree(tree: TreeView): string {
  const rows = tree.nodes.map(renderNode).join("\n");
  const wirings = tree.wirings
    .map(
      (w) =>
        `<li class="bt-wiring">${escapeHtml(w.source)} → ${escapeHtml(w.target)}` +
        (w.value !== undefined && w.value !== null
          ? ` <span class="bt-value">= ${escapeHtml(JSON.stringify(w.value))}</span>`
          : "") +
        `</li>`,
    )
    .join("\n");
  return (
    `<section class="bt-tree" data-executor="${escapeHtml(tree.executorId)}">` +
    `<h2>${escapeHtml(tree.executorId)} <em>${escapeHtml(tree.treeState)}</em></h2>` +
    `<ul class="bt-nodes">\n${rows}\n</ul>` +
    `<ul class="bt-wirings">\n${wirings}\n</ul>` +
    `</section>`
  );
}

export function renderSnapshotHtml(vm: TreeViewModel): string {
  const trees = vm.trees.map(renderTree).join("\n");
  const executors = vm.executors
    .map(
      (e) =>
        `<li class="bt-executor">${escapeHtml(e.id)}: ${escapeHtml(e.treeState)}` +
        (e.pose ? ` @ (${e.pose.join(",")})` : "") +
        (e.services?.length ? ` [${e.services.join(", ")}]` : "") +
        `</li>`,
    )
    .join("\n");
  const world = [
    ...vm.doors.map(
      (d) =>
        `<li class="bt-door" data-door="${escapeHtml(d.id)}" data-open="${d.open}">` +
        `door ${escapeHtml(d.id)}: ${d.open ? "open" : "closed"}</li>`,
    ),
    ...vm.objects.map(
      (o) =>
        `<li class="bt-object">object ${escapeHtml(o.id)}: ` +
        `${o.pickedUp ? "picked up" : "present"}</li>`,
    ),
  ].join("\n");
  const timeline = vm.timeline
    .slice(-50)
    .map(
      (e) =>
        `<tr><td>${e.tick}</td><td>${escapeHtml(e.actor)}</td>` +
        `<td>${escapeHtml(e.event)}</td><td>${escapeHtml(e.detail)}</td></tr>`,
    )
    .join("\n");
  return (
    `<div class="bt-debugger${vm.editable ? "" : " bt-running"}" data-cycle="${vm.cycle}">` +
    `<header>cycle ${vm.cycle} (${escapeHtml(vm.mode)})</header>` +
    trees +
    `<aside class="bt-executors"><ul>${executors}</ul><ul class="bt-world">${world}</ul></aside>` +
    `<table class="bt-timeline">${timeline}</table>` +
    `</div>`
  );
}
