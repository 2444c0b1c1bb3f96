// Client for the annotation HTTP API. The coder UI talks to these
// endpoints and nothing else.

export const DIMENSIONS = ["emo", "sat", "vit", "res", "fun", "tru", "rel", "wor"] as const;
export type Dimension = (typeof DIMENSIONS)[number];
export type Label = "positive" | "neutral" | "negative";

export type SessionInfo = {
  session_id: string;
  coder_id: string;
  queue_length: number;
};

export type NextCard = {
  post_id: string | null;
  text: string | null;
  remaining: number;
};

export type SubmitResult = {
  ok: boolean;
  cursor: number;
};

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

async function parseError(response: Response): Promise<ApiError> {
  let code = "http_error";
  let message = `${response.status}`;
  try {
    const body = await response.json();
    if (body && typeof body === "object") {
      code = body.error ?? code;
      message = body.message ?? message;
    }
  } catch {
    // non-JSON error body; keep the status text
  }
  return new ApiError(response.status, code, message);
}

export class ApiClient {
  constructor(private baseUrl: string = "") {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await fetch(this.baseUrl + path, {
      method,
      headers: body === undefined ? undefined : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!response.ok) {
      throw await parseError(response);
    }
    return (await response.json()) as T;
  }

  openSession(coderId: string, dimensionPool: string, seed: number): Promise<SessionInfo> {
    return this.request("POST", "/api/sessions", {
      coder_id: coderId,
      dimension_pool: dimensionPool,
      seed,
    });
  }

  next(sessionId: string): Promise<NextCard> {
    return this.request("GET", `/api/sessions/${sessionId}/next`);
  }

  submitLabels(
    sessionId: string,
    postId: string,
    labels: Record<string, string>,
  ): Promise<SubmitResult> {
    return this.request("POST", `/api/sessions/${sessionId}/labels`, {
      post_id: postId,
      labels,
    });
  }

  progress(): Promise<Record<string, number>> {
    return this.request("GET", "/api/progress");
  }

  async exportDimension(dimension: Dimension): Promise<string> {
    const response = await fetch(`${this.baseUrl}/api/export/${dimension}`);
    if (!response.ok) {
      throw await parseError(response);
    }
    return response.text();
  }
}
