/** Panel-grid arithmetic: n viewports in a near-square grid. */

export interface Grid {
  cols: number;
  rows: number;
}

/** Default column count is ceil(sqrt(n)): 4 robots -> 2x2, 12 -> 4x3. */
export function gridFor(n: number, colsOverride?: number): Grid {
  if (!Number.isInteger(n) || n < 1) throw new Error(`invalid panel count ${n}`);
  const cols = colsOverride && colsOverride >= 1 ? Math.floor(colsOverride) : Math.ceil(Math.sqrt(n));
  return { cols, rows: Math.ceil(n / cols) };
}

export interface Rect {
  x: number;
  y: number;
  w: number;
  h: number;
}

/** Pixel rectangle of panel `i` inside a width x height canvas. */
export function panelRect(i: number, n: number, width: number, height: number, colsOverride?: number): Rect {
  const { cols, rows } = gridFor(n, colsOverride);
  const w = width / cols;
  const h = height / rows;
  return { x: (i % cols) * w, y: Math.floor(i / cols) * h, w, h };
}

/** Panel index under a canvas-relative point, or null if past the last panel. */
export function panelAt(px: number, py: number, n: number, width: number, height: number, colsOverride?: number): number | null {
  const { cols, rows } = gridFor(n, colsOverride);
  const col = Math.min(Math.floor((px / width) * cols), cols - 1);
  const row = Math.min(Math.floor((py / height) * rows), rows - 1);
  if (px < 0 || py < 0 || px >= width || py >= height) return null;
  const i = row * cols + col;
  return i < n ? i : null;
}
