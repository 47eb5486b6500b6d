/** Incremental parser for a text/event-stream body.
 *
 * Frames arrive as arbitrary chunks; the parser buffers partial lines and
 * dispatches one event per blank-line terminator.  Only the `event:` and
 * `data:` fields matter here; anything else (comments, ids, retry) is
 * skipped the way a browser EventSource would skip it.
 */

export interface SseFrame {
  event: string;
  data: string;
}

export class SseParser {
  private buffer = "";
  private eventName = "";
  private dataLines: string[] = [];

  /** Feed a chunk of stream text; returns every frame it completed. */
  feed(chunk: string): SseFrame[] {
    this.buffer += chunk;
    const frames: SseFrame[] = [];
    for (;;) {
      const newline = this.buffer.indexOf("\n");
      if (newline < 0) {
        break;
      }
      let line = this.buffer.slice(0, newline);
      this.buffer = this.buffer.slice(newline + 1);
      if (line.endsWith("\r")) {
        line = line.slice(0, -1);
      }
      const frame = this.takeLine(line);
      if (frame !== null) {
        frames.push(frame);
      }
    }
    return frames;
  }

  private takeLine(line: string): SseFrame | null {
    if (line === "") {
      if (this.dataLines.length === 0 && this.eventName === "") {
        return null;
      }
      const frame = {
        event: this.eventName || "message",
        data: this.dataLines.join("\n"),
      };
      this.eventName = "";
      this.dataLines = [];
      return frame;
    }
    if (line.startsWith(":")) {
      return null; // comment
    }
    const colon = line.indexOf(":");
    const field = colon < 0 ? line : line.slice(0, colon);
    let value = colon < 0 ? "" : line.slice(colon + 1);
    if (value.startsWith(" ")) {
      value = value.slice(1);
    }
    if (field === "event") {
      this.eventName = value;
    } else if (field === "data") {
      this.dataLines.push(value);
    }
    return null;
  }
}
