// Client for the completion service; all generation happens server-side.

import { SseParser } from "./sse.js";

export interface Meta {
  image_size: number;
  joint_size: [number, number];
  latent_dim: number;
  style: string;
  directions: string[];
  default_iterations: number;
  preview_every: number;
}

export interface SubmitParams {
  lambda?: number;
  iterations?: number;
  seed?: number;
  direction?: string;
}

export interface ProgressEvent {
  iter: number;
  contextual: number;
  perceptual: number;
  preview?: string;
}

export interface JobStatus {
  id: string;
  state: "queued" | "running" | "done" | "failed";
  progress: number;
  iterations: number;
  latest: { iter: number; contextual: number; perceptual: number } | null;
  warning?: string;
  error?: string;
}

export interface WatchHandlers {
  onEvent: (event: ProgressEvent) => void;
  onEnd: (state: string, error?: string) => void;
  onError: (message: string) => void;
}

type FetchLike = typeof fetch;

export class ApiClient {
  constructor(private base: string = "", private fetchFn: FetchLike = fetch) {}

  private url(path: string): string {
    return `${this.base}${path}`;
  }

  async meta(): Promise<Meta> {
    const response = await this.fetchFn(this.url("/api/meta"));
    if (!response.ok) throw new Error(`meta failed: HTTP ${response.status}`);
    return (await response.json()) as Meta;
  }

  async submit(sketchPngB64: string, params: SubmitParams): Promise<string> {
    const response = await this.fetchFn(this.url("/api/complete"), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ sketch: sketchPngB64, ...params }),
    });
    const body = (await response.json()) as { id?: string; error?: string };
    if (response.status !== 202 || !body.id) {
      throw new Error(body.error ?? `submit failed: HTTP ${response.status}`);
    }
    return body.id;
  }

  async status(jobId: string): Promise<JobStatus> {
    const response = await this.fetchFn(this.url(`/api/jobs/${jobId}`));
    if (!response.ok) throw new Error(`status failed: HTTP ${response.status}`);
    return (await response.json()) as JobStatus;
  }

  resultUrl(jobId: string): string {
    return this.url(`/api/jobs/${jobId}/result`);
  }

  /**
   * Stream progress events. The server replays the full event history on
   * each connect, so dropping the connection mid-run and re-subscribing
   * resumes cleanly; seen iterations are deduplicated here. Returns a
   * cancel function (a new submission should cancel the previous watch).
   */
  watch(jobId: string, handlers: WatchHandlers): () => void {
    const controller = new AbortController();
    let cancelled = false;
    let lastIter = 0;

    const poll = async (): Promise<boolean> => {
      try {
        const status = await this.status(jobId);
        if (status.state === "done" || status.state === "failed") {
          handlers.onEnd(status.state, status.error);
          return true;
        }
      } catch {
        // server unreachable; keep retrying
      }
      return false;
    };

    const run = async () => {
      for (let attempt = 0; !cancelled; attempt++) {
        try {
          const response = await this.fetchFn(this.url(`/api/jobs/${jobId}/events`), {
            signal: controller.signal,
          });
          if (!response.ok || !response.body) throw new Error(`HTTP ${response.status}`);
          const reader = response.body.getReader();
          const decoder = new TextDecoder();
          const parser = new SseParser();
          for (;;) {
            const { done, value } = await reader.read();
            if (done) break;
            for (const message of parser.push(decoder.decode(value, { stream: true }))) {
              if (cancelled) return;
              if (message.event === "end") {
                const payload = JSON.parse(message.data) as { state: string; error?: string };
                handlers.onEnd(payload.state, payload.error);
                return;
              }
              const event = JSON.parse(message.data) as ProgressEvent;
              if (event.iter > lastIter) {
                lastIter = event.iter;
                handlers.onEvent(event);
              }
            }
          }
          // stream ended without an end event: fall back to status polling
          if (await poll()) return;
        } catch (err) {
          if (cancelled) return;
          handlers.onError(err instanceof Error ? err.message : String(err));
          if (await poll()) return;
        }
        await new Promise((resolve) => setTimeout(resolve, Math.min(2000, 250 * (attempt + 1))));
      }
    };

    void run();
    return () => {
      cancelled = true;
      controller.abort();
    };
  }
}

/** Base64 of a binary blob (browser-safe chunking). */
export function bytesToBase64(bytes: Uint8Array): string {
  let binary = "";
  const chunk = 0x8000;
  for (let i = 0; i < bytes.length; i += chunk) {
    binary += String.fromCharCode(...bytes.subarray(i, i + chunk));
  }
  return btoa(binary);
}
