import type { ApiErrorBody } from "./types.js";

export class ApiError extends Error {
    constructor(
        readonly status: number,
        readonly code: string,
        readonly detail: string,
    ) {
        super(`${code}: ${detail}`);
        this.name = "ApiError";
    }
}

export interface RawResponse {
    status: number;
    text: string;
}

/**
 * Thin fetch wrapper for the consent service. Every non-2xx response is
 * turned into an ApiError carrying the service's {error, detail} body.
 */
export class ApiClient {
    private token: string | null = null;

    constructor(readonly baseUrl: string = "") {}

    setToken(token: string | null): void {
        this.token = token;
    }

    hasToken(): boolean {
        return this.token !== null;
    }

    async get<T>(path: string): Promise<T> {
        return this.request<T>("GET", path);
    }

    async post<T>(path: string, body?: unknown): Promise<T> {
        return this.request<T>("POST", path, body);
    }

    /** Like get(), but hands back the exact response body text. */
    async getRaw(path: string): Promise<RawResponse> {
        const raw = await this.send("GET", path);
        if (raw.status >= 400) {
            throw this.toError(raw);
        }
        return raw;
    }

    private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
        const raw = await this.send(method, path, body);
        if (raw.status >= 400) {
            throw this.toError(raw);
        }
        return JSON.parse(raw.text) as T;
    }

    private async send(method: string, path: string, body?: unknown): Promise<RawResponse> {
        const headers: Record<string, string> = {};
        if (this.token !== null) {
            headers["Authorization"] = `Bearer ${this.token}`;
        }
        const init: RequestInit = { method, headers };
        if (body !== undefined) {
            headers["Content-Type"] = "application/json";
            init.body = JSON.stringify(body);
        }
        const res = await fetch(this.baseUrl + path, init);
        return { status: res.status, text: await res.text() };
    }

    private toError(raw: RawResponse): ApiError {
        let parsed: Partial<ApiErrorBody> = {};
        try {
            parsed = JSON.parse(raw.text) as ApiErrorBody;
        } catch {
            // non-JSON error body (proxy, crash page); keep the raw text
        }
        return new ApiError(raw.status, parsed.error ?? "unknown_error", parsed.detail ?? raw.text);
    }
}
