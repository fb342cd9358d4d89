import { describe, expect, it } from "vitest";

import { parseMetricLine, SseFrame, SseParser } from "../src/api.js";
import { describeEvent, involvesAgent, parseEventLine } from "../src/events.js";

describe("parseEventLine", () => {
  it("parses a canonical action line", () => {
    const line = "action=eat\tdetail=done\tkind=action\tstatus=ok\tsubject=a00000001\ttick=00000004";
    const e = parseEventLine(line)!;
    expect(e.tick).toBe(4);
    expect(e.kind).toBe("action");
    expect(e.subject).toBe("a00000001");
    expect(e.attrs["action"]).toBe("eat");
    expect(e.attrs["status"]).toBe("ok");
  });

  it("unescapes tabs and newlines", () => {
    const e = parseEventLine("detail=a\\tb\\nc\tkind=warning\tsubject=SYSTEM\ttick=00000001")!;
    expect(e.attrs["detail"]).toBe("a\tb\nc");
  });

  it("rejects garbage", () => {
    expect(parseEventLine("not an event")).toBeNull();
    expect(parseEventLine("kind=action\tsubject=x")).toBeNull();
  });

  it("matches recipients in message events", () => {
    const e = parseEventLine(
      "id=00000005-SYSTEM-0000\tkind=message\tseq=0\tsubject=SYSTEM\ttick=00000005\tto=a00000002,a00000003",
    )!;
    expect(involvesAgent(e, "a00000002")).toBe(true);
    expect(involvesAgent(e, "a00000004")).toBe(false);
    expect(involvesAgent(e, "SYSTEM")).toBe(true);
  });

  it("describes events compactly", () => {
    const e = parseEventLine("cause=natural\tkind=death\tsubject=a00000001\ttick=00000164")!;
    expect(describeEvent(e)).toContain("died a00000001");
    expect(describeEvent(e)).toContain("natural");
  });
});

describe("sse parser", () => {
  it("separates named metric frames from default event frames", () => {
    const frames: SseFrame[] = [];
    const parser = new SseParser((f) => frames.push(f));
    parser.feed("data: kind=routine\tsteps=6\tsubject=a1\ttick=00000002\n\n");
    parser.feed("event: metric\ndata: name=population\ttick=2\tvalue=9\n\n");
    parser.feed("data: kind=routine\tsteps=6\tsubj"); // split mid-line
    parser.feed("ect=a2\ttick=00000002\n\n");
    expect(frames.map((f) => f.type)).toEqual(["event", "metric", "event"]);
    expect(frames[1].data).toContain("name=population");
  });

  it("parses metric lines", () => {
    const point = parseMetricLine("name=tick_wall_ms\ttick=42\tvalue=3.25")!;
    expect(point).toEqual({ name: "tick_wall_ms", tick: 42, value: 3.25 });
    expect(parseMetricLine("garbage")).toBeNull();
  });
});
