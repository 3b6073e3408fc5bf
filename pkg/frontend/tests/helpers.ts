// Shared test helpers: a scriptable fake socket and DOM wait utilities.

export class FakeSocket {
  sent: string[] = [];
  closed = false;
  private listeners = new Map<string, Array<(event: any) => void>>();

  addEventListener(type: string, listener: (event: any) => void): void {
    const existing = this.listeners.get(type) ?? [];
    existing.push(listener);
    this.listeners.set(type, existing);
  }

  send(data: string): void {
    if (this.closed) {
      throw new Error("socket closed");
    }
    this.sent.push(data);
  }

  close(): void {
    if (!this.closed) {
      this.closed = true;
      this.fire("close", {});
    }
  }

  // test-side controls
  open(): void {
    this.fire("open", {});
  }

  message(data: unknown): void {
    this.fire("message", { data: typeof data === "string" ? data : JSON.stringify(data) });
  }

  dropConnection(): void {
    this.closed = true;
    this.fire("close", {});
  }

  sentJson(): any[] {
    return this.sent.map((raw) => JSON.parse(raw));
  }

  private fire(type: string, event: any): void {
    for (const listener of this.listeners.get(type) ?? []) {
      listener(event);
    }
  }
}

export function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

export async function waitFor(
  predicate: () => boolean,
  timeoutMs = 10_000,
  what = "condition",
): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    if (predicate()) {
      return;
    }
    await sleep(25);
  }
  throw new Error(`timed out waiting for ${what}`);
}
