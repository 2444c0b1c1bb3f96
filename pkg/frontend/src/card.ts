// Card state machine and the submit/advance protocol.
//
// Coding rules enforced client-side: the off-topic toggle and any
// per-dimension selection are mutually exclusive, untouched dimensions are
// omitted from the request body (the server records them as unanswered), and
// a fully untouched card is a legitimate skip.

import { ApiClient, ApiError, DIMENSIONS, Dimension, Label, NextCard } from "./api.js";

export class CardState {
  private selections = new Map<Dimension, Label>();
  private offtopicAll = false;

  select(dimension: Dimension, label: Label): void {
    this.offtopicAll = false;
    this.selections.set(dimension, label);
  }

  clear(dimension: Dimension): void {
    this.selections.delete(dimension);
  }

  toggleOfftopic(): void {
    this.offtopicAll = !this.offtopicAll;
    if (this.offtopicAll) {
      this.selections.clear();
    }
  }

  get offtopic(): boolean {
    return this.offtopicAll;
  }

  selection(dimension: Dimension): Label | undefined {
    return this.selections.get(dimension);
  }

  get untouched(): boolean {
    return !this.offtopicAll && this.selections.size === 0;
  }

  reset(): void {
    this.selections.clear();
    this.offtopicAll = false;
  }

  /** Request body for the labels endpoint: only touched dimensions appear. */
  payload(): Record<string, string> {
    if (this.offtopicAll) {
      return { all: "offtopic" };
    }
    const body: Record<string, string> = {};
    for (const dimension of DIMENSIONS) {
      const label = this.selections.get(dimension);
      if (label !== undefined) {
        body[dimension] = label;
      }
    }
    return body;
  }
}

export type SubmitOutcome = "advanced" | "done" | "reloaded";

export class CardController {
  readonly state = new CardState();
  current: NextCard | null = null;

  constructor(
    private client: ApiClient,
    private sessionId: string,
  ) {}

  /** Fetch the card at the server cursor; "done" when the queue is finished. */
  async load(): Promise<"card" | "done"> {
    this.current = await this.client.next(this.sessionId);
    this.state.reset();
    return this.current.post_id === null ? "done" : "card";
  }

  /**
   * Submit the current card. A stale-cursor rejection reloads the server's
   * actual current card instead of failing the session.
   */
  async submit(): Promise<SubmitOutcome> {
    if (this.current === null || this.current.post_id === null) {
      return "done";
    }
    try {
      await this.client.submitLabels(this.sessionId, this.current.post_id, this.state.payload());
    } catch (error) {
      if (error instanceof ApiError && error.status === 409) {
        await this.load();
        return "reloaded";
      }
      throw error;
    }
    return (await this.load()) === "done" ? "done" : "advanced";
  }
}
