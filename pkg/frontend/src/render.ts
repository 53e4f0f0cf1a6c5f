/**
 * Immediate-mode canvas rendering: one top-down panel per robot.
 *
 * Each panel draws the arena, walls, hazard shading, remaining health packs,
 * the goal, the robot as a heading triangle, and a health bar. The controlled
 * panel gets a highlight border (plus a flash right after an assisted switch),
 * and panels may show a per-robot score bar.
 *
 * Drawing goes through the `Draw2D` subset of CanvasRenderingContext2D so
 * tests can substitute a recording context.
 */
import { gridFor, panelRect } from "./layout";
import type { ViewModel } from "./viewmodel";

export interface Draw2D {
  fillStyle: string | CanvasGradient | CanvasPattern;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  font: string;
  fillRect(x: number, y: number, w: number, h: number): void;
  strokeRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  closePath(): void;
  fill(): void;
  stroke(): void;
  fillText(text: string, x: number, y: number): void;
  save(): void;
  restore(): void;
}

export const COLORS = {
  background: "#101418",
  arena: "#1c2228",
  wall: "#4a5560",
  hazard: "rgba(200,60,40,0.35)",
  pack: "#3fae6a",
  goal: "#3a78c9",
  robot: "#e8e4d8",
  healthOk: "#3fae6a",
  healthLow: "#c94030",
  highlight: "#ffd24a",
  flash: "#ffffff",
  reset: "#ff5a4a",
  score: "#7a9cc9",
  text: "#c8ccd0",
};

export interface RenderOptions {
  showScores: boolean;
  panelCols?: number;
}

export function renderFrame(
  vm: ViewModel,
  ctx: Draw2D,
  width: number,
  height: number,
  opts: RenderOptions = { showScores: true },
): void {
  if (!vm.ready || vm.map === null) return; // nothing received yet
  const n = vm.robots.length;
  gridFor(n, opts.panelCols); // validates the layout before any drawing
  ctx.fillStyle = COLORS.background;
  ctx.fillRect(0, 0, width, height);
  for (let i = 0; i < n; i++) {
    drawPanel(vm, ctx, i, width, height, opts);
  }
}

function drawPanel(
  vm: ViewModel,
  ctx: Draw2D,
  i: number,
  width: number,
  height: number,
  opts: RenderOptions,
): void {
  const map = vm.map!;
  const robot = vm.robots[i];
  const panel = panelRect(i, vm.robots.length, width, height, opts.panelCols);
  const pad = 4;
  const [ax0, ay0, ax1, ay1] = map.arena;
  const sx = (panel.w - 2 * pad) / (ax1 - ax0);
  const sy = (panel.h - 2 * pad) / (ay1 - ay0);
  // world -> panel pixels, y flipped so +y in the world points up on screen
  const X = (wx: number) => panel.x + pad + (wx - ax0) * sx;
  const Y = (wy: number) => panel.y + pad + (ay1 - wy) * sy;

  ctx.save();
  ctx.fillStyle = COLORS.arena;
  ctx.fillRect(X(ax0), Y(ay1), (ax1 - ax0) * sx, (ay1 - ay0) * sy);

  for (const [hx0, hy0, hx1, hy1] of map.hazards) {
    ctx.fillStyle = COLORS.hazard;
    ctx.fillRect(X(hx0), Y(hy1), (hx1 - hx0) * sx, (hy1 - hy0) * sy);
  }
  for (const [wx0, wy0, wx1, wy1] of map.walls) {
    ctx.fillStyle = COLORS.wall;
    ctx.fillRect(X(wx0), Y(wy1), (wx1 - wx0) * sx, (wy1 - wy0) * sy);
  }
  for (const [px, py] of map.packs) {
    ctx.fillStyle = COLORS.pack;
    ctx.beginPath();
    ctx.arc(X(px), Y(py), map.packRadius * sx, 0, 2 * Math.PI);
    ctx.fill();
  }
  const [gx, gy, gr] = map.goal;
  ctx.strokeStyle = COLORS.goal;
  ctx.lineWidth = 2;
  ctx.beginPath();
  ctx.arc(X(gx), Y(gy), gr * sx, 0, 2 * Math.PI);
  ctx.stroke();

  // robot pose triangle pointing along its heading
  const r = Math.max(3, 0.3 * sx);
  const cx = X(robot.x);
  const cy = Y(robot.y);
  const th = robot.heading;
  ctx.fillStyle = COLORS.robot;
  ctx.beginPath();
  ctx.moveTo(cx + r * Math.cos(th), cy - r * Math.sin(th));
  ctx.lineTo(cx + 0.6 * r * Math.cos(th + 2.5), cy - 0.6 * r * Math.sin(th + 2.5));
  ctx.lineTo(cx + 0.6 * r * Math.cos(th - 2.5), cy - 0.6 * r * Math.sin(th - 2.5));
  ctx.closePath();
  ctx.fill();

  // health bar across the panel bottom
  const barW = (panel.w - 2 * pad) * Math.max(0, Math.min(1, robot.health / 100));
  ctx.fillStyle = robot.health > 30 ? COLORS.healthOk : COLORS.healthLow;
  ctx.fillRect(panel.x + pad, panel.y + panel.h - pad - 3, barW, 3);

  if (opts.showScores && vm.scores !== null) {
    const span = scoreSpan(vm.scores);
    const frac = span === 0 ? 0.5 : (vm.scores[i] - Math.min(...vm.scores)) / span;
    ctx.fillStyle = COLORS.score;
    ctx.fillRect(panel.x + pad, panel.y + pad, (panel.w - 2 * pad) * frac, 3);
  }

  if (robot.justReset) {
    ctx.fillStyle = COLORS.reset;
    ctx.font = "12px monospace";
    ctx.fillText("RESET", panel.x + pad + 2, panel.y + pad + 16);
  }

  if (i === vm.controlled) {
    ctx.strokeStyle = vm.flashActive() ? COLORS.flash : COLORS.highlight;
    ctx.lineWidth = 3;
    ctx.strokeRect(panel.x + 1.5, panel.y + 1.5, panel.w - 3, panel.h - 3);
  }
  ctx.restore();
}

function scoreSpan(scores: number[]): number {
  return Math.max(...scores) - Math.min(...scores);
}
