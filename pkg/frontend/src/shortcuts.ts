// Keyboard mapping for continuous no-pointer coding:
// digits 1-8 pick the active dimension, p/e/n set its label, o toggles the
// whole-post off-topic shortcut, x clears the active dimension, Enter submits.

import { DIMENSIONS, Dimension, Label } from "./api.js";

export type ShortcutAction =
  | { kind: "dimension"; dimension: Dimension }
  | { kind: "label"; label: Label }
  | { kind: "offtopic" }
  | { kind: "clear" }
  | { kind: "submit" };

const LABEL_KEYS: Record<string, Label> = {
  p: "positive",
  e: "neutral",
  n: "negative",
};

export function actionForKey(key: string): ShortcutAction | null {
  if (key >= "1" && key <= "8") {
    return { kind: "dimension", dimension: DIMENSIONS[Number(key) - 1] };
  }
  const lower = key.toLowerCase();
  if (lower in LABEL_KEYS) {
    return { kind: "label", label: LABEL_KEYS[lower] };
  }
  if (lower === "o") {
    return { kind: "offtopic" };
  }
  if (lower === "x") {
    return { kind: "clear" };
  }
  if (key === "Enter") {
    return { kind: "submit" };
  }
  return null;
}
