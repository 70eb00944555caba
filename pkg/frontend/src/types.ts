// Payload shapes of the session service. The UI treats every field as
// opaque display data; it never derives relations on its own.

export interface QuestionPayload {
  kind: string;
  text: string;
  options?: string[];
}

export interface SayResponse {
  replies: string[];
  question?: QuestionPayload;
  graph_version: number;
}

export interface EntityPayload {
  id: number;
  names: string[];
  gender: string;
  narrator: boolean;
}

export interface EdgePayload {
  a: number;
  b: number;
  atoms: string[];
  ambiguous: boolean;
}

export interface GraphPayload {
  entities: EntityPayload[];
  edges: EdgePayload[];
  components: Record<string, number>;
  version: number;
}

export type RelationsPayload =
  | { atoms: string[]; disjoint: false }
  | { disjoint: true };

export interface TranscriptItem {
  role: "user" | "system" | "error";
  text: string;
}
