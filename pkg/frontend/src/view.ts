/** View model for the chat-style timeline.
 *
 * Every value a card displays is a `Cell` carrying its provenance: the key of
 * the recorded API exchange it came from and the JSON path of the field
 * inside that response.  The contract tests rely on this to prove the console
 * invents no numbers of its own.
 */

export interface Source {
  /** Key of the API exchange this value was read from. */
  response: string;
  /** Dotted path of the field inside the response body, e.g. "records.0.flow_count". */
  path: string;
}

export interface Cell {
  label: string;
  value: string | number | boolean;
  source: Source;
}

export type CardKind =
  | "session"
  | "operator"
  | "ir"
  | "notice"
  | "conflicts"
  | "resolution"
  | "plans"
  | "apply"
  | "verification";

export interface Card {
  kind: CardKind;
  title: string;
  cells: Cell[];
}

/** Resolve a dotted path inside a JSON document. */
export function deepGet(doc: unknown, path: string): unknown {
  let node: unknown = doc;
  for (const part of path.split(".")) {
    if (node === null || typeof node !== "object") return undefined;
    node = (node as Record<string, unknown>)[part];
  }
  return node;
}

export function cell(
  label: string,
  value: string | number | boolean,
  response: string,
  path: string,
): Cell {
  return { label, value, source: { response, path } };
}
