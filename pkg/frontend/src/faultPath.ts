/** Fault-path rendering: a left-to-right chain per path.
 *
 * The gateway emits each path root-cause-first, so the leftmost node
 * is the root cause and arrows point toward the components it
 * ultimately affected.  Cyclic remainders are flagged with a badge
 * and a return arrow instead of pretending to have a root.
 */

import type { FaultPath } from "./types.js";

const SVG_NS = "http://www.w3.org/2000/svg";

const NODE_WIDTH = 132;
const NODE_HEIGHT = 36;
const GAP = 48;
const MARGIN = 12;

export interface PathLayout {
  nodes: { name: string; x: number; y: number }[];
  width: number;
  height: number;
}

/** Node positions for one path, root at x = MARGIN. */
export function layoutPath(components: string[]): PathLayout {
  const nodes = components.map((name, i) => ({
    name,
    x: MARGIN + i * (NODE_WIDTH + GAP),
    y: MARGIN,
  }));
  return {
    nodes,
    width: MARGIN * 2 + components.length * NODE_WIDTH +
      (components.length - 1) * GAP,
    height: NODE_HEIGHT + 2 * MARGIN,
  };
}

function arrow(x1: number, y: number, x2: number): SVGElement {
  const group = document.createElementNS(SVG_NS, "g");
  const line = document.createElementNS(SVG_NS, "line");
  line.setAttribute("x1", String(x1));
  line.setAttribute("y1", String(y));
  line.setAttribute("x2", String(x2 - 6));
  line.setAttribute("y2", String(y));
  line.setAttribute("stroke", "#5b6b7a");
  line.setAttribute("stroke-width", "1.5");
  const head = document.createElementNS(SVG_NS, "path");
  head.setAttribute(
    "d",
    `M ${x2 - 8} ${y - 4} L ${x2} ${y} L ${x2 - 8} ${y + 4} Z`,
  );
  head.setAttribute("fill", "#5b6b7a");
  group.append(line, head);
  return group;
}

export function renderFaultPath(path: FaultPath): HTMLElement {
  const container = document.createElement("figure");
  container.className = "fault-path";
  container.dataset.pathId = path.id;

  const layout = layoutPath(path.components);
  const extra = path.cycle ? 26 : 0;
  const svg = document.createElementNS(SVG_NS, "svg");
  svg.setAttribute("viewBox",
    `0 0 ${layout.width} ${layout.height + extra}`);
  svg.setAttribute("width", String(layout.width));

  layout.nodes.forEach((node, i) => {
    if (i > 0) {
      svg.appendChild(arrow(
        layout.nodes[i - 1].x + NODE_WIDTH,
        node.y + NODE_HEIGHT / 2,
        node.x,
      ));
    }
    const box = document.createElementNS(SVG_NS, "rect");
    box.setAttribute("x", String(node.x));
    box.setAttribute("y", String(node.y));
    box.setAttribute("width", String(NODE_WIDTH));
    box.setAttribute("height", String(NODE_HEIGHT));
    box.setAttribute("rx", "6");
    box.setAttribute("class",
      i === 0 ? "path-node path-root" : "path-node");
    const label = document.createElementNS(SVG_NS, "text");
    label.setAttribute("x", String(node.x + NODE_WIDTH / 2));
    label.setAttribute("y", String(node.y + NODE_HEIGHT / 2 + 4));
    label.setAttribute("text-anchor", "middle");
    label.textContent = node.name;
    svg.append(box, label);
  });

  if (path.cycle && layout.nodes.length > 1) {
    // return edge from the last node back under the chain to the first
    const last = layout.nodes[layout.nodes.length - 1];
    const y = MARGIN + NODE_HEIGHT + 14;
    const back = document.createElementNS(SVG_NS, "path");
    back.setAttribute(
      "d",
      `M ${last.x + NODE_WIDTH / 2} ${MARGIN + NODE_HEIGHT} ` +
        `L ${last.x + NODE_WIDTH / 2} ${y} ` +
        `L ${layout.nodes[0].x + NODE_WIDTH / 2} ${y} ` +
        `L ${layout.nodes[0].x + NODE_WIDTH / 2} ${MARGIN + NODE_HEIGHT}`,
    );
    back.setAttribute("fill", "none");
    back.setAttribute("stroke", "#a94442");
    back.setAttribute("stroke-dasharray", "4 3");
    svg.appendChild(back);
  }

  container.appendChild(svg);
  const caption = document.createElement("figcaption");
  caption.textContent = path.cycle
    ? "mutually dependent fault loop (no unique root cause)"
    : `root cause: ${path.components[0]}`;
  if (path.cycle) {
    const badge = document.createElement("span");
    badge.className = "cycle-badge";
    badge.textContent = "cycle";
    caption.prepend(badge);
  }
  container.appendChild(caption);
  return container;
}
