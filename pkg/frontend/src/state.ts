import type { ApiClient } from "./api.js";
import type {
  GraphPayload,
  QuestionPayload,
  TranscriptItem,
} from "./types.js";

export interface ViewState {
  sessionId: string | null;
  transcript: TranscriptItem[];
  question: QuestionPayload | null;
  graph: GraphPayload | null;
  lastVersion: number;
  busy: boolean;
  error: string | null;
}

export function initialState(): ViewState {
  return {
    sessionId: null,
    transcript: [],
    question: null,
    graph: null,
    lastVersion: -1,
    busy: false,
    error: null,
  };
}

type Listener = (state: ViewState) => void;

/**
 * Session store. One request is active at a time; snapshots older than
 * the last seen version are discarded; a failed send leaves the
 * transcript untouched and raises the error banner instead.
 */
export class Store {
  state: ViewState = initialState();
  private listeners: Listener[] = [];

  constructor(private api: ApiClient) {}

  subscribe(listener: Listener): void {
    this.listeners.push(listener);
  }

  private emit(): void {
    for (const listener of this.listeners) {
      listener(this.state);
    }
  }

  private patch(partial: Partial<ViewState>): void {
    this.state = { ...this.state, ...partial };
    this.emit();
  }

  async start(): Promise<void> {
    const sessionId = await this.api.createSession();
    this.patch({ sessionId });
    await this.refreshGraph();
  }

  async sendUtterance(text: string): Promise<void> {
    const trimmed = text.trim();
    if (!trimmed || this.state.busy || this.state.sessionId === null) {
      return;
    }
    this.patch({ busy: true, error: null });
    let response;
    try {
      response = await this.api.say(this.state.sessionId, trimmed);
    } catch (err) {
      // transport failure: transcript unchanged, banner raised
      this.patch({ busy: false, error: `send failed: ${String(err)}` });
      return;
    }
    const transcript: TranscriptItem[] = [
      ...this.state.transcript,
      { role: "user", text: trimmed },
      ...response.replies.map((r): TranscriptItem => ({ role: "system", text: r })),
    ];
    if (response.question) {
      transcript.push({ role: "system", text: response.question.text });
    }
    this.patch({
      transcript,
      question: response.question ?? null,
      busy: false,
    });
    if (response.graph_version !== this.state.lastVersion) {
      await this.refreshGraph();
    }
  }

  async refreshGraph(): Promise<void> {
    if (this.state.sessionId === null) {
      return;
    }
    let graph: GraphPayload;
    try {
      graph = await this.api.graph(this.state.sessionId);
    } catch (err) {
      this.patch({ error: `snapshot failed: ${String(err)}` });
      return;
    }
    if (graph.version < this.state.lastVersion) {
      return; // stale response from an older poll
    }
    this.patch({ graph, lastVersion: graph.version });
  }

  async inspectPair(a: number, b: number): Promise<string> {
    if (a === b || this.state.sessionId === null) {
      return "";
    }
    const payload = await this.api.relations(this.state.sessionId, a, b);
    if (payload.disjoint) {
      return "no known connection";
    }
    return payload.atoms.join(", ");
  }
}
