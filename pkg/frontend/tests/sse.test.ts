import { describe, expect, it } from "vitest";

import { SseParser } from "../src/sse.js";

describe("sse parser", () => {
  it("parses a complete message", () => {
    const parser = new SseParser();
    const messages = parser.push('data: {"iter": 25}\n\n');
    expect(messages).toEqual([{ event: "message", data: '{"iter": 25}' }]);
  });

  it("handles chunks split mid-line", () => {
    const parser = new SseParser();
    expect(parser.push("data: {\"it")).toEqual([]);
    expect(parser.push('er": 5}')).toEqual([]);
    const messages = parser.push("\n\n");
    expect(messages).toEqual([{ event: "message", data: '{"iter": 5}' }]);
  });

  it("carries explicit event types", () => {
    const parser = new SseParser();
    const messages = parser.push('event: end\ndata: {"state": "done"}\n\n');
    expect(messages).toEqual([{ event: "end", data: '{"state": "done"}' }]);
  });

  it("resets event type between messages", () => {
    const parser = new SseParser();
    const first = parser.push("event: end\ndata: a\n\ndata: b\n\n");
    expect(first).toEqual([
      { event: "end", data: "a" },
      { event: "message", data: "b" },
    ]);
  });

  it("parses many messages across arbitrary chunking", () => {
    const stream = Array.from({ length: 20 }, (_, i) => `data: {"iter": ${i + 1}}\n\n`).join("")
      + 'event: end\ndata: {"state": "done"}\n\n';
    for (const chunkSize of [1, 3, 7, 1000]) {
      const parser = new SseParser();
      const out: Array<{ event: string; data: string }> = [];
      for (let i = 0; i < stream.length; i += chunkSize) {
        out.push(...parser.push(stream.slice(i, i + chunkSize)));
      }
      expect(out.length).toBe(21);
      expect(out[20].event).toBe("end");
      expect(JSON.parse(out[5].data).iter).toBe(6);
    }
  });

  it("tolerates CRLF newlines", () => {
    const parser = new SseParser();
    const messages = parser.push("data: x\r\n\r\n");
    expect(messages).toEqual([{ event: "message", data: "x" }]);
  });
});
