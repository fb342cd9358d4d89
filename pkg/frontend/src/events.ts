// Canonical event records: one line of key=value pairs, keys sorted, tab separated.

export interface EventRecord {
  tick: number;
  kind: string;
  subject: string;
  attrs: Record<string, string>;
}

function unescapeField(value: string): string {
  let out = "";
  for (let i = 0; i < value.length; i++) {
    const ch = value[i];
    if (ch === "\\" && i + 1 < value.length) {
      const next = value[i + 1];
      out += next === "t" ? "\t" : next === "n" ? "\n" : next === "r" ? "\r" : next;
      i++;
    } else {
      out += ch;
    }
  }
  return out;
}

export function parseEventLine(line: string): EventRecord | null {
  const attrs: Record<string, string> = {};
  for (const part of line.trim().split("\t")) {
    const eq = part.indexOf("=");
    if (eq < 0) return null;
    attrs[part.slice(0, eq)] = unescapeField(part.slice(eq + 1));
  }
  if (!("tick" in attrs) || !("kind" in attrs) || !("subject" in attrs)) return null;
  const tick = parseInt(attrs["tick"], 10);
  const kind = attrs["kind"];
  const subject = attrs["subject"];
  delete attrs["tick"];
  delete attrs["kind"];
  delete attrs["subject"];
  return { tick, kind, subject, attrs };
}

export function involvesAgent(e: EventRecord, agentId: string): boolean {
  if (e.subject === agentId) return true;
  const to = e.attrs["to"];
  if (to && to.split(",").includes(agentId)) return true;
  return false;
}

export function describeEvent(e: EventRecord): string {
  switch (e.kind) {
    case "action":
      return `t${e.tick} ${e.subject} ${e.attrs["action"]} -> ${e.attrs["status"] ?? ""} ${e.attrs["detail"] ?? ""}`.trim();
    case "message":
      return `t${e.tick} ${e.subject} -> ${e.attrs["to"]}${e.attrs["status"] === "dead-letter" ? " (dead-letter)" : ""}`;
    case "birth":
      return `t${e.tick} born ${e.subject} (mother ${e.attrs["mother"] || "?"})`;
    case "death":
      return `t${e.tick} died ${e.subject} (${e.attrs["cause"] || "?"})`;
    case "intercept":
      return `t${e.tick} ${e.subject} ${e.attrs["action"]} denied by ${e.attrs["rule"]}`;
    case "stage":
      return `t${e.tick} ${e.subject} now ${e.attrs["to"]}`;
    default:
      return `t${e.tick} ${e.kind} ${e.subject}`;
  }
}
