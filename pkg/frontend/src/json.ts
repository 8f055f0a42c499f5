/**
 * JSON parsing that keeps numbers as their verbatim source text.
 *
 * The dashboard's contract is that every number it displays appears
 * byte-for-byte in some server response.  JSON.parse would re-encode
 * numbers through a JS double (turning 1.50 into 1.5, or 1e-07 into
 * 1e-7), so numeric tokens are kept as strings and only converted when
 * something genuinely numeric is needed (sort order, pixel positions).
 */

/** A numeric JSON token, exactly as the server sent it. */
export type RawNumber = string & { readonly __raw: unique symbol };

export type RawJson =
  | RawNumber
  | string
  | boolean
  | null
  | RawJson[]
  | { [key: string]: RawJson };

/** Convert a raw token to a JS number (for ordering and geometry only). */
export function toNumber(raw: RawNumber): number {
  return Number(raw);
}

const WS = new Set([" ", "\t", "\n", "\r"]);

class Scanner {
  pos = 0;
  constructor(readonly text: string) {}

  error(msg: string): never {
    throw new SyntaxError(`${msg} at position ${this.pos}`);
  }

  skipWs(): void {
    while (this.pos < this.text.length && WS.has(this.text[this.pos]!)) this.pos++;
  }

  peek(): string {
    if (this.pos >= this.text.length) this.error("unexpected end of input");
    return this.text[this.pos]!;
  }

  expect(ch: string): void {
    if (this.peek() !== ch) this.error(`expected '${ch}'`);
    this.pos++;
  }

  value(): RawJson {
    this.skipWs();
    const ch = this.peek();
    if (ch === "{") return this.object();
    if (ch === "[") return this.array();
    if (ch === '"') return this.string();
    if (ch === "-" || (ch >= "0" && ch <= "9")) return this.number();
    if (this.text.startsWith("true", this.pos)) { this.pos += 4; return true; }
    if (this.text.startsWith("false", this.pos)) { this.pos += 5; return false; }
    if (this.text.startsWith("null", this.pos)) { this.pos += 4; return null; }
    this.error(`unexpected character '${ch}'`);
  }

  object(): { [key: string]: RawJson } {
    this.expect("{");
    const out: { [key: string]: RawJson } = {};
    this.skipWs();
    if (this.peek() === "}") { this.pos++; return out; }
    for (;;) {
      this.skipWs();
      const key = this.string();
      this.skipWs();
      this.expect(":");
      out[key] = this.value();
      this.skipWs();
      if (this.peek() === ",") { this.pos++; continue; }
      this.expect("}");
      return out;
    }
  }

  array(): RawJson[] {
    this.expect("[");
    const out: RawJson[] = [];
    this.skipWs();
    if (this.peek() === "]") { this.pos++; return out; }
    for (;;) {
      out.push(this.value());
      this.skipWs();
      if (this.peek() === ",") { this.pos++; continue; }
      this.expect("]");
      return out;
    }
  }

  // String decoding defers to JSON.parse on the quoted slice so escape
  // handling cannot drift from the standard.
  string(): string {
    if (this.peek() !== '"') this.error("expected string");
    const start = this.pos;
    this.pos++;
    while (this.peek() !== '"') {
      if (this.peek() === "\\") this.pos++;
      this.pos++;
    }
    this.pos++;
    return JSON.parse(this.text.slice(start, this.pos)) as string;
  }

  number(): RawNumber {
    const start = this.pos;
    if (this.peek() === "-") this.pos++;
    while (this.pos < this.text.length && /[0-9eE+.\-]/.test(this.text[this.pos]!)) {
      this.pos++;
    }
    const token = this.text.slice(start, this.pos);
    if (!/^-?(?:0|[1-9][0-9]*)(?:\.[0-9]+)?(?:[eE][+-]?[0-9]+)?$/.test(token)) {
      this.error(`malformed number '${token}'`);
    }
    return token as RawNumber;
  }
}

/** Parse JSON text, preserving every numeric token verbatim. */
export function parseRawJson(text: string): RawJson {
  const scanner = new Scanner(text);
  const value = scanner.value();
  scanner.skipWs();
  if (scanner.pos !== text.length) scanner.error("trailing content");
  return value;
}
