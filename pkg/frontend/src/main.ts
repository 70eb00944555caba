import { ApiClient } from "./api.js";
import { mountChat } from "./chat.js";
import { renderGraph } from "./graph.js";
import { Store } from "./state.js";

function byId<T extends HTMLElement>(id: string): T {
  const element = document.getElementById(id);
  if (!element) throw new Error(`missing #${id}`);
  return element as T;
}

export function bootstrap(): Store {
  const store = new Store(new ApiClient());
  const svg = byId<HTMLElement>("graph") as unknown as SVGSVGElement;
  const overlay = byId<HTMLElement>("overlay");
  let selected: number[] = [];

  const hooks = {
    onSelectPair(a: number, b: number) {
      if (a === b) {
        selected = selected.includes(a) ? [] : [a];
        overlay.textContent = selected.length
          ? "select a second person to inspect the pair"
          : "";
        redraw();
        return;
      }
      selected = [a, b];
      redraw();
      void store.inspectPair(a, b).then((text) => {
        overlay.textContent = text;
      });
    },
  };

  const redraw = () => {
    if (store.state.graph) {
      renderGraph(svg, store.state.graph, hooks, selected);
    }
  };

  mountChat({
    transcript: byId("transcript"),
    input: byId<HTMLInputElement>("say"),
    send: byId<HTMLButtonElement>("send"),
    options: byId("options"),
    banner: byId("banner"),
  }, store);

  store.subscribe(() => redraw());
  void store.start();
  return store;
}

if (typeof document !== "undefined" && document.getElementById("graph")) {
  bootstrap();
}
