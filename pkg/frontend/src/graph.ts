import type { EdgePayload, EntityPayload, GraphPayload } from "./types.js";

const SVG_NS = "http://www.w3.org/2000/svg";

export interface LayoutNode {
  id: number;
  x: number;
  y: number;
  pinned: boolean;
}

/**
 * Small deterministic spring layout. The narrator is pinned at the
 * center; everyone else starts on a circle and relaxes for a fixed
 * number of steps. Purely cosmetic.
 */
export function layoutGraph(
  graph: GraphPayload,
  width: number,
  height: number,
  steps = 120,
): Map<number, LayoutNode> {
  const cx = width / 2;
  const cy = height / 2;
  const nodes = new Map<number, LayoutNode>();
  const others = graph.entities.filter((e) => !e.narrator);
  graph.entities.forEach((entity) => {
    if (entity.narrator) {
      nodes.set(entity.id, { id: entity.id, x: cx, y: cy, pinned: true });
    }
  });
  others.forEach((entity, i) => {
    const angle = (2 * Math.PI * i) / Math.max(others.length, 1);
    const radius = Math.min(width, height) / 3;
    nodes.set(entity.id, {
      id: entity.id,
      x: cx + radius * Math.cos(angle),
      y: cy + radius * Math.sin(angle),
      pinned: false,
    });
  });
  const ideal = Math.min(width, height) / 3;
  for (let step = 0; step < steps; step++) {
    const fx = new Map<number, number>();
    const fy = new Map<number, number>();
    for (const node of nodes.values()) {
      fx.set(node.id, 0);
      fy.set(node.id, 0);
    }
    const all = [...nodes.values()];
    for (let i = 0; i < all.length; i++) {
      for (let j = i + 1; j < all.length; j++) {
        const a = all[i];
        const b = all[j];
        const dx = a.x - b.x;
        const dy = a.y - b.y;
        const d2 = Math.max(dx * dx + dy * dy, 1);
        const push = (ideal * ideal) / d2 / 2;
        fx.set(a.id, fx.get(a.id)! + dx * push);
        fy.set(a.id, fy.get(a.id)! + dy * push);
        fx.set(b.id, fx.get(b.id)! - dx * push);
        fy.set(b.id, fy.get(b.id)! - dy * push);
      }
    }
    for (const edge of graph.edges) {
      const a = nodes.get(edge.a);
      const b = nodes.get(edge.b);
      if (!a || !b) continue;
      const dx = b.x - a.x;
      const dy = b.y - a.y;
      const dist = Math.max(Math.sqrt(dx * dx + dy * dy), 1);
      const pull = (dist - ideal) / dist / 8;
      fx.set(a.id, fx.get(a.id)! + dx * pull);
      fy.set(a.id, fy.get(a.id)! + dy * pull);
      fx.set(b.id, fx.get(b.id)! - dx * pull);
      fy.set(b.id, fy.get(b.id)! - dy * pull);
    }
    for (const node of nodes.values()) {
      if (node.pinned) continue;
      node.x = Math.min(Math.max(node.x + fx.get(node.id)!, 30), width - 30);
      node.y = Math.min(Math.max(node.y + fy.get(node.id)!, 30), height - 30);
    }
  }
  return nodes;
}

export function nodeLabel(entity: EntityPayload): string {
  if (entity.narrator) {
    return entity.names.length ? `${entity.names.join("/")} (you)` : "you";
  }
  return entity.names.length ? entity.names.join("/") : `#${entity.id}`;
}

export function edgeLabel(edge: EdgePayload): string {
  // displayed verbatim from the snapshot; the UI never recomputes atoms
  return edge.atoms.join(", ");
}

export function genderBadge(gender: string): string {
  switch (gender) {
    case "male": return "♂";
    case "female": return "♀";
    case "probably-male": return "♂?";
    case "probably-female": return "♀?";
    default: return "";
  }
}

export interface GraphPaneHooks {
  onSelectPair(a: number, b: number): void;
}

/** Render the snapshot into an SVG element (cleared first). */
export function renderGraph(
  svg: SVGSVGElement,
  graph: GraphPayload,
  hooks?: GraphPaneHooks,
  selected: number[] = [],
): void {
  const width = Number(svg.getAttribute("width") ?? 640);
  const height = Number(svg.getAttribute("height") ?? 480);
  const layout = layoutGraph(graph, width, height);
  svg.replaceChildren();

  for (const edge of graph.edges) {
    const a = layout.get(edge.a);
    const b = layout.get(edge.b);
    if (!a || !b) continue;
    const line = document.createElementNS(SVG_NS, "line");
    line.setAttribute("x1", String(a.x));
    line.setAttribute("y1", String(a.y));
    line.setAttribute("x2", String(b.x));
    line.setAttribute("y2", String(b.y));
    line.setAttribute("class", edge.ambiguous ? "edge ambiguous" : "edge");
    line.setAttribute("data-edge", `${edge.a}-${edge.b}`);
    svg.appendChild(line);

    const label = document.createElementNS(SVG_NS, "text");
    label.setAttribute("x", String((a.x + b.x) / 2));
    label.setAttribute("y", String((a.y + b.y) / 2 - 4));
    label.setAttribute("class", edge.ambiguous ? "edge-label ambiguous" : "edge-label");
    label.setAttribute("data-edge-label", `${edge.a}-${edge.b}`);
    label.textContent = edge.ambiguous ? `${edgeLabel(edge)} ?` : edgeLabel(edge);
    svg.appendChild(label);
  }

  for (const entity of graph.entities) {
    const node = layout.get(entity.id);
    if (!node) continue;
    const group = document.createElementNS(SVG_NS, "g");
    group.setAttribute("data-node", String(entity.id));
    const classes = ["node"];
    if (entity.narrator) classes.push("narrator");
    if (selected.includes(entity.id)) classes.push("selected");
    group.setAttribute("class", classes.join(" "));
    const circle = document.createElementNS(SVG_NS, "circle");
    circle.setAttribute("cx", String(node.x));
    circle.setAttribute("cy", String(node.y));
    circle.setAttribute("r", entity.narrator ? "14" : "11");
    group.appendChild(circle);
    const text = document.createElementNS(SVG_NS, "text");
    text.setAttribute("x", String(node.x));
    text.setAttribute("y", String(node.y + 26));
    text.setAttribute("class", "node-label");
    text.textContent = `${nodeLabel(entity)} ${genderBadge(entity.gender)}`.trim();
    group.appendChild(text);
    if (hooks) {
      group.addEventListener("click", () => {
        const partner = selected.length === 1 && selected[0] !== entity.id
          ? selected[0] : null;
        if (partner !== null) {
          hooks.onSelectPair(partner, entity.id);
        } else {
          hooks.onSelectPair(entity.id, entity.id);
        }
      });
    }
    svg.appendChild(group);
  }
}
