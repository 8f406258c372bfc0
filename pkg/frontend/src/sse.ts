// Incremental parser for text/event-stream bodies read in chunks.

export interface SseMessage {
  event: string;
  data: string;
}

export class SseParser {
  private buffer = "";
  private eventType = "message";
  private dataLines: string[] = [];

  /** Feed one chunk; returns every message completed by it. */
  push(chunk: string): SseMessage[] {
    this.buffer += chunk;
    const out: SseMessage[] = [];
    for (;;) {
      const newline = this.buffer.indexOf("\n");
      if (newline < 0) break;
      const line = this.buffer.slice(0, newline).replace(/\r$/, "");
      this.buffer = this.buffer.slice(newline + 1);

      if (line === "") {
        if (this.dataLines.length > 0) {
          out.push({ event: this.eventType, data: this.dataLines.join("\n") });
        }
        this.eventType = "message";
        this.dataLines = [];
      } else if (line.startsWith("event:")) {
        this.eventType = line.slice(6).trim();
      } else if (line.startsWith("data:")) {
        this.dataLines.push(line.slice(5).replace(/^ /, ""));
      }
      // comments (:) and unknown fields are ignored per the SSE spec
    }
    return out;
  }
}
