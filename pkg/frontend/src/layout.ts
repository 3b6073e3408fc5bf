// Four-pane layout state: file browser | editor | problem statement on
// top, terminal strip below. Fractions are user-resizable but always sum
// to 1 and the editor pane can never be squeezed out.

export const MIN_COLUMN_FRACTION = 0.08;
export const MIN_EDITOR_FRACTION = 0.2;
export const MIN_TERMINAL_FRACTION = 0.1;
export const MAX_TERMINAL_FRACTION = 0.8;

export type ColumnId = 0 | 1 | 2; // fileBrowser, editor, problemStatement

export class LayoutState {
  columns: [number, number, number];
  terminalFraction: number;
  terminalVisible: boolean;
  private listeners: Array<() => void> = [];

  constructor() {
    this.columns = [0.18, 0.54, 0.28];
    this.terminalFraction = 0.3;
    this.terminalVisible = false;
  }

  onChange(listener: () => void): void {
    this.listeners.push(listener);
  }

  /**
   * Drags the divider right of `left` by `delta` (fraction of the
   * viewport width). Width moves between the two neighbors only, so the
   * total stays 1; both panes respect their minimums.
   */
  resizeColumns(left: ColumnId, delta: number): void {
    const right = (left + 1) as ColumnId;
    if (right > 2) {
      return;
    }
    const minLeft = left === 1 ? MIN_EDITOR_FRACTION : MIN_COLUMN_FRACTION;
    const minRight = right === 1 ? MIN_EDITOR_FRACTION : MIN_COLUMN_FRACTION;
    const moved = Math.max(
      minLeft - this.columns[left],
      Math.min(delta, this.columns[right] - minRight),
    );
    this.columns[left] += moved;
    this.columns[right] -= moved;
    this.emit();
  }

  resizeTerminal(delta: number): void {
    this.terminalFraction = Math.min(
      MAX_TERMINAL_FRACTION,
      Math.max(MIN_TERMINAL_FRACTION, this.terminalFraction + delta),
    );
    this.emit();
  }

  showTerminal(visible: boolean): void {
    if (this.terminalVisible !== visible) {
      this.terminalVisible = visible;
      this.emit();
    }
  }

  columnTemplate(): string {
    return this.columns.map((fraction) => `${(fraction * 100).toFixed(3)}%`).join(" ");
  }

  rowTemplate(): string {
    if (!this.terminalVisible) {
      return "1fr 0";
    }
    const terminal = (this.terminalFraction * 100).toFixed(3);
    return `1fr ${terminal}%`;
  }

  private emit(): void {
    for (const listener of this.listeners) {
      listener();
    }
  }
}
