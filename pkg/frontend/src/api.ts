import {
  NextResponseSchema,
  ObjectPayloadSchema,
  SubmitResponseSchema,
  type NextResponse,
  type ObjectPayload,
  type SubmitRequest,
  type SubmitResponse,
} from "./types";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

/** 409 from /api/submit: the lease expired or another annotator holds it. */
export class StaleLeaseError extends ApiError {
  constructor(message: string) {
    super(409, message);
    this.name = "StaleLeaseError";
  }
}

async function errorDetail(res: Response): Promise<string> {
  try {
    const body = (await res.json()) as { detail?: string };
    return body.detail ?? res.statusText;
  } catch {
    return res.statusText;
  }
}

export class ApiClient {
  constructor(
    private readonly baseUrl = "",
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async getJson(path: string): Promise<unknown> {
    const res = await this.fetchFn(this.baseUrl + path);
    if (!res.ok) throw new ApiError(res.status, await errorDetail(res));
    return res.json();
  }

  async next(annotator: string): Promise<NextResponse> {
    const raw = await this.getJson(`/api/next?annotator=${encodeURIComponent(annotator)}`);
    return NextResponseSchema.parse(raw);
  }

  async object(objectId: string): Promise<ObjectPayload> {
    const raw = await this.getJson(`/api/object/${encodeURIComponent(objectId)}`);
    return ObjectPayloadSchema.parse(raw);
  }

  async submit(req: SubmitRequest): Promise<SubmitResponse> {
    const res = await this.fetchFn(`${this.baseUrl}/api/submit`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(req),
    });
    if (res.status === 409) throw new StaleLeaseError(await errorDetail(res));
    if (!res.ok) throw new ApiError(res.status, await errorDetail(res));
    return SubmitResponseSchema.parse(await res.json());
  }

  async stats(): Promise<Record<string, unknown>> {
    return (await this.getJson("/api/stats")) as Record<string, unknown>;
  }
}
