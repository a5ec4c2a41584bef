/** Typed client for the rating service wire API. */

export type Cohort = "neurologist" | "medical_officer" | "intern_house_officer";

export interface SessionCreated {
  session_id: string;
  total: number;
}

export interface NextStimulus {
  done: false;
  stimulus_id: string;
  reference_url: string;
  processed_url: string;
  rated: number;
  total: number;
}

export interface SessionDone {
  done: true;
  rated: number;
  total: number;
}

export type NextResponse = NextStimulus | SessionDone;

export interface RatingAck {
  session_id: string;
  stimulus_id: string;
  scale: number;
  percent: number;
  timestamp: string;
}

export interface ScaleLevel {
  value: number;
  label: string;
}

export interface Instructions {
  protocol: string;
  scale: ScaleLevel[];
  percent: string;
  total_stimuli: number;
}

export class ApiError extends Error {
  constructor(
    readonly kind: string,
    message: string,
    readonly status: number,
  ) {
    super(message);
  }
}

async function parseError(response: Response): Promise<never> {
  let kind = "http";
  let message = `${response.status} ${response.statusText}`;
  try {
    const body = (await response.json()) as { error?: string; message?: string };
    if (body.error) kind = body.error;
    if (body.message) message = body.message;
  } catch {
    // non-JSON error body; keep the status text
  }
  throw new ApiError(kind, message, response.status);
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  private async get<T>(path: string): Promise<T> {
    const response = await this.fetchFn(this.baseUrl + path);
    if (!response.ok) await parseError(response);
    return (await response.json()) as T;
  }

  private async post<T>(path: string, body: unknown): Promise<T> {
    const response = await this.fetchFn(this.baseUrl + path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!response.ok) await parseError(response);
    return (await response.json()) as T;
  }

  instructions(): Promise<Instructions> {
    return this.get("/instructions");
  }

  createSession(cohort: Cohort, seed: number): Promise<SessionCreated> {
    return this.post("/sessions", { cohort, seed });
  }

  nextStimulus(sessionId: string): Promise<NextResponse> {
    return this.get(`/sessions/${sessionId}/next`);
  }

  submitRating(
    sessionId: string,
    stimulusId: string,
    scale: number,
    percent: number,
  ): Promise<RatingAck> {
    return this.post(`/sessions/${sessionId}/ratings`, {
      stimulus_id: stimulusId,
      scale,
      percent,
    });
  }

  /** Raw image bytes for a stimulus URL (PGM payload). */
  async imageBytes(url: string): Promise<Uint8Array> {
    const response = await this.fetchFn(this.baseUrl + url);
    if (!response.ok) await parseError(response);
    return new Uint8Array(await response.arrayBuffer());
  }
}
