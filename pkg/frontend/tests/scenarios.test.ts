// Every scripted scenario must be completable through the chat pane:
// typing each user line (exactly as a person would) drives the session
// to its recorded end state, and the graph pane always shows the
// service's snapshot verbatim.

import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { mountChat } from "../src/chat.js";
import { renderGraph } from "../src/graph.js";
import { Store } from "../src/state.js";
import { FakeService, loadFixture } from "./fake_service.js";

const SCENARIOS = [
  "a_two_sams",
  "b_two_bills_split",
  "c_two_bills_merge",
  "d_susan_self",
  "e_indeed_paraphrase",
  "f_slot_generalization",
];

function chatDom() {
  document.body.innerHTML = `
    <div id="banner"></div>
    <div id="transcript"></div>
    <div id="options"></div>
    <input id="say" type="text">
    <button id="send">Send</button>
    <svg id="graph" width="640" height="480"
         xmlns="http://www.w3.org/2000/svg"></svg>`;
  return {
    banner: document.getElementById("banner") as HTMLElement,
    transcript: document.getElementById("transcript") as HTMLElement,
    options: document.getElementById("options") as HTMLElement,
    input: document.getElementById("say") as HTMLInputElement,
    send: document.getElementById("send") as HTMLButtonElement,
    svg: document.getElementById("graph") as unknown as SVGSVGElement,
  };
}

async function settle() {
  // two macrotask turns let the send + snapshot round trips finish
  await new Promise((resolve) => setTimeout(resolve, 0));
  await new Promise((resolve) => setTimeout(resolve, 0));
  await new Promise((resolve) => setTimeout(resolve, 0));
}

describe.each(SCENARIOS)("scenario %s through the chat pane", (name) => {
  it("completes and mirrors the service graph", async () => {
    const fixture = await loadFixture(name);
    for (const session of fixture.sessions) {
      const service = new FakeService(session);
      const store = new Store(new ApiClient("", service.fetch));
      const dom = chatDom();
      mountChat(dom, store);
      store.subscribe((state) => {
        if (state.graph) renderGraph(dom.svg, state.graph);
      });
      await store.start();

      for (const step of session.steps) {
        dom.input.value = step.text;
        dom.send.click();
        await settle();
        expect(store.state.error).toBeNull();
      }

      // transcript contains every user line and every reply, in order
      const texts = store.state.transcript.map((t) => t.text);
      for (const step of session.steps) {
        expect(texts).toContain(step.text);
        for (const reply of step.say.replies) {
          expect(texts).toContain(reply);
        }
      }

      // the displayed graph is exactly the service's final snapshot
      expect(store.state.graph).toEqual(service.finalGraph);
      const lines = dom.svg.querySelectorAll("line.edge");
      expect(lines.length).toBe(service.finalGraph.edges.length);
      for (const edge of service.finalGraph.edges) {
        const label = dom.svg.querySelector(
          `[data-edge-label="${edge.a}-${edge.b}"]`)!;
        const expected = edge.ambiguous
          ? `${edge.atoms.join(", ")} ?`
          : edge.atoms.join(", ");
        expect(label.textContent).toBe(expected);
      }
    }
  });
});

describe("option buttons", () => {
  it("clicking an option answers with its number", async () => {
    // build a fake session where a multiple-choice question is pending
    const fixture = await loadFixture("a_two_sams");
    const base = fixture.sessions[0];
    const withQuestion = {
      ...base,
      steps: [
        {
          ...base.steps[0],
          say: {
            ...base.steps[0].say,
            question: {
              kind: "choose-relation",
              text: "How is Sam related to you?",
              options: ["father", "uncle"],
            },
          },
        },
        {
          text: "1",
          say: { replies: ["So Sam is your father."],
                 graph_version: base.steps[0].graph.version + 1 },
          graph: base.steps[0].graph,
        },
      ],
    };
    const service = new FakeService(withQuestion);
    const store = new Store(new ApiClient("", service.fetch));
    const dom = chatDom();
    mountChat(dom, store);
    await store.start();
    dom.input.value = withQuestion.steps[0].text;
    dom.send.click();
    await settle();
    const buttons = dom.options.querySelectorAll("button.option");
    expect(buttons.length).toBe(2);
    (buttons[0] as HTMLButtonElement).click();
    await settle();
    const texts = store.state.transcript.map((t) => t.text);
    expect(texts).toContain("1");
    expect(texts).toContain("So Sam is your father.");
  });
});
