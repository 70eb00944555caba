import type { Store } from "./state.js";
import type { ViewState } from "./state.js";

export interface ChatElements {
  transcript: HTMLElement;
  input: HTMLInputElement;
  send: HTMLButtonElement;
  options: HTMLElement;
  banner: HTMLElement;
}

/** Wire the chat pane to the store and keep it rendered. */
export function mountChat(elements: ChatElements, store: Store): void {
  const submit = () => {
    const text = elements.input.value;
    elements.input.value = "";
    void store.sendUtterance(text);
  };
  elements.send.addEventListener("click", submit);
  elements.input.addEventListener("keydown", (event) => {
    if (event.key === "Enter") submit();
  });
  store.subscribe((state) => renderChat(elements, state, store));
  renderChat(elements, store.state, store);
}

export function renderChat(elements: ChatElements, state: ViewState,
                           store?: Store): void {
  elements.transcript.replaceChildren();
  for (const item of state.transcript) {
    const row = document.createElement("div");
    row.className = `msg ${item.role}`;
    row.textContent = item.text;
    elements.transcript.appendChild(row);
  }
  elements.transcript.scrollTop = elements.transcript.scrollHeight;

  elements.banner.textContent = state.error ?? "";
  elements.banner.style.display = state.error ? "block" : "none";

  elements.options.replaceChildren();
  const options = state.question?.options ?? [];
  options.forEach((option, i) => {
    const button = document.createElement("button");
    button.className = "option";
    button.textContent = `${i + 1}) ${option}`;
    button.addEventListener("click", () => {
      // a click answers with the option number, exactly like typing it
      void store?.sendUtterance(String(i + 1));
    });
    elements.options.appendChild(button);
  });

  elements.input.disabled = state.busy;
  elements.send.disabled = state.busy;
}
