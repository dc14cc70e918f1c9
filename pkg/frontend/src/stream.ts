// NDJSON event-stream consumer with cursor resume.
//
// The server holds the connection open and writes one JSON event per line
// (blank lines are keepalives). On any drop we reconnect with
// since=<last applied seq>, so delivery is exactly-once from the replica's
// point of view no matter how often the connection dies.

import type { EventRecord } from "./types.js";

export interface LineSource {
  // Yields raw text chunks (not necessarily line-aligned); ends on EOF/drop.
  open(since: number): AsyncIterable<string>;
}

export function fetchLineSource(baseUrl: string, projectId: string): LineSource {
  return {
    async *open(since: number) {
      const response = await fetch(
        `${baseUrl}/projects/${projectId}/events/stream?since=${since}`,
      );
      if (!response.ok || !response.body) {
        throw new Error(`stream failed: HTTP ${response.status}`);
      }
      const reader = response.body.getReader();
      const decoder = new TextDecoder();
      while (true) {
        const { done, value } = await reader.read();
        if (done) return;
        yield decoder.decode(value, { stream: true });
      }
    },
  };
}

// Splits an unaligned chunk stream into complete lines, buffering partials.
export async function* linesOf(chunks: AsyncIterable<string>): AsyncGenerator<string> {
  let buffer = "";
  for await (const chunk of chunks) {
    buffer += chunk;
    let index;
    while ((index = buffer.indexOf("\n")) >= 0) {
      yield buffer.slice(0, index);
      buffer = buffer.slice(index + 1);
    }
  }
  if (buffer.trim()) yield buffer;
}

export interface StreamOptions {
  reconnectDelayMs?: number;
  sleep?: (ms: number) => Promise<void>;
}

export class EventStream {
  cursor: number;
  private stopped = false;

  constructor(
    private source: LineSource,
    private onEvent: (event: EventRecord) => void,
    startCursor = 0,
    private options: StreamOptions = {},
  ) {
    this.cursor = startCursor;
  }

  stop(): void {
    this.stopped = true;
  }

  // Runs until stop(); resumes from the cursor after every failure.
  async run(): Promise<void> {
    const sleep =
      this.options.sleep ?? ((ms: number) => new Promise((resolve) => setTimeout(resolve, ms)));
    const delay = this.options.reconnectDelayMs ?? 1000;
    while (!this.stopped) {
      try {
        for await (const line of linesOf(this.source.open(this.cursor))) {
          if (this.stopped) return;
          if (!line.trim()) continue; // keepalive
          const event = JSON.parse(line) as EventRecord;
          if (event.seq <= this.cursor) continue; // duplicate after reconnect race
          this.onEvent(event);
          this.cursor = event.seq;
        }
      } catch {
        // fall through to reconnect
      }
      if (!this.stopped) await sleep(delay);
    }
  }
}
