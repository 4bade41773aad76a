import { vi } from "vitest";

export function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

export function rawResponse(status: number, text: string): Response {
  return new Response(text, { status, headers: { "content-type": "application/json" } });
}

/** Installs a fetch stub that answers from a queue; returns the mock for call inspection. */
export function stubFetch(...responses: Response[]) {
  const queue = [...responses];
  const mock = vi.fn(async () => {
    const next = queue.shift();
    if (next === undefined) {
      throw new Error("fetch stub queue exhausted");
    }
    return next;
  });
  vi.stubGlobal("fetch", mock);
  return mock;
}

export function requestBodyOf(mock: ReturnType<typeof vi.fn>, call = 0): unknown {
  const init = mock.mock.calls[call]?.[1] as RequestInit | undefined;
  return init?.body === undefined ? undefined : JSON.parse(String(init.body));
}

export function requestUrlOf(mock: ReturnType<typeof vi.fn>, call = 0): string {
  return String(mock.mock.calls[call]?.[0]);
}
