// Stream consumption: chunk reassembly, keepalives, reconnect-with-cursor.

import { describe, expect, it } from "vitest";

import { EventStream, linesOf, LineSource } from "../src/stream.js";
import type { EventRecord } from "../src/types.js";

async function* chunks(parts: string[]): AsyncGenerator<string> {
  for (const part of parts) yield part;
}

async function collect(gen: AsyncIterable<string>): Promise<string[]> {
  const out: string[] = [];
  for await (const line of gen) out.push(line);
  return out;
}

function record(seq: number): string {
  const event: EventRecord = {
    seq,
    project_id: "p",
    kind: "LabelAdded",
    payload: { label_id: `l${seq}`, name: `L${seq}` },
    author: "t",
    server_time: "now",
  };
  return JSON.stringify(event) + "\n";
}

describe("linesOf", () => {
  it("reassembles lines across arbitrary chunk boundaries", async () => {
    const lines = await collect(linesOf(chunks(['{"a"', ": 1}\n{", '"b": 2}\n'])));
    expect(lines).toEqual(['{"a": 1}', '{"b": 2}']);
  });

  it("yields a trailing unterminated line", async () => {
    const lines = await collect(linesOf(chunks(["x\ny"])));
    expect(lines).toEqual(["x", "y"]);
  });
});

describe("EventStream", () => {
  it("resumes from its cursor after a drop, without duplicates", async () => {
    // connection 1 delivers seqs 1-2 then dies; connection 2 must be opened
    // with since=2 and delivers 3-4.
    const opened: number[] = [];
    const source: LineSource = {
      async *open(since: number) {
        opened.push(since);
        if (opened.length === 1) {
          yield record(1) + record(2);
          throw new Error("connection reset");
        }
        for (let seq = since + 1; seq <= 4; seq += 1) yield record(seq);
      },
    };
    const seen: number[] = [];
    const stream = new EventStream(
      source,
      (event) => {
        seen.push(event.seq);
        if (event.seq === 4) stream.stop();
      },
      0,
      { reconnectDelayMs: 0, sleep: async () => undefined },
    );
    await stream.run();
    expect(opened).toEqual([0, 2]);
    expect(seen).toEqual([1, 2, 3, 4]);
  });

  it("skips keepalive blank lines and re-sent duplicates", async () => {
    const source: LineSource = {
      async *open(since: number) {
        yield "\n\n";
        yield record(1);
        yield "\n";
        yield record(1); // duplicate after a server-side retry
        yield record(2);
      },
    };
    const seen: number[] = [];
    const stream = new EventStream(
      source,
      (event) => {
        seen.push(event.seq);
        if (event.seq === 2) stream.stop();
      },
      0,
      { reconnectDelayMs: 0, sleep: async () => undefined },
    );
    await stream.run();
    expect(seen).toEqual([1, 2]);
  });

  it("starts from a caller-provided cursor", async () => {
    const opened: number[] = [];
    const source: LineSource = {
      async *open(since: number) {
        opened.push(since);
        yield record(since + 1);
      },
    };
    const seen: number[] = [];
    const stream = new EventStream(
      source,
      (event) => {
        seen.push(event.seq);
        stream.stop();
      },
      7,
      { reconnectDelayMs: 0, sleep: async () => undefined },
    );
    await stream.run();
    expect(opened).toEqual([7]);
    expect(seen).toEqual([8]);
  });
});
