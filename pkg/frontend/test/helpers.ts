import type { Draw2D } from "../src/render";
import type { MapGeometry, StateFrame, RobotView } from "../src/protocol";

/** Records every draw call with the fill/stroke style active at the time. */
export class RecordingContext implements Draw2D {
  fillStyle = "";
  strokeStyle = "";
  lineWidth = 1;
  font = "";
  calls: { op: string; style: string; args: number[] }[] = [];

  private log(op: string, style: string, args: number[] = []) {
    this.calls.push({ op, style, args });
  }
  fillRect(x: number, y: number, w: number, h: number) {
    this.log("fillRect", this.fillStyle, [x, y, w, h]);
  }
  strokeRect(x: number, y: number, w: number, h: number) {
    this.log("strokeRect", this.strokeStyle, [x, y, w, h]);
  }
  beginPath() {
    this.log("beginPath", "");
  }
  moveTo(x: number, y: number) {
    this.log("moveTo", "", [x, y]);
  }
  lineTo(x: number, y: number) {
    this.log("lineTo", "", [x, y]);
  }
  arc(x: number, y: number, r: number, a0: number, a1: number) {
    this.log("arc", "", [x, y, r, a0, a1]);
  }
  closePath() {
    this.log("closePath", "");
  }
  fill() {
    this.log("fill", this.fillStyle);
  }
  stroke() {
    this.log("stroke", this.strokeStyle);
  }
  fillText(text: string, x: number, y: number) {
    this.log("fillText", this.fillStyle, [x, y]);
  }
  save() {}
  restore() {}
}

export const TEST_MAP: MapGeometry = {
  arena: [0, 0, 10, 8],
  walls: [[4, 0, 4.5, 3]],
  hazards: [[6, 5, 8, 7]],
  packs: [[2, 6, 50]],
  packRadius: 0.4,
  goal: [9, 7, 0.6],
};

export function robot(overrides: Partial<RobotView> = {}): RobotView {
  return { x: 1, y: 1, heading: 0, health: 100, justReset: false, ...overrides };
}

export function stateFrame(n: number, overrides: Partial<StateFrame> = {}): StateFrame {
  return {
    type: "state",
    tick: 0,
    controlled: 0,
    robots: Array.from({ length: n }, () => robot()),
    scores: null,
    map: TEST_MAP,
    ...overrides,
  };
}

/** A socket double that records outbound text frames. */
export class FakeSocket {
  sent: string[] = [];
  private listeners = new Map<string, ((ev: any) => void)[]>();

  send(data: string) {
    this.sent.push(data);
  }
  addEventListener(type: string, listener: (ev: any) => void) {
    const list = this.listeners.get(type) ?? [];
    list.push(listener);
    this.listeners.set(type, list);
  }
  emit(type: string, ev: any = {}) {
    for (const l of this.listeners.get(type) ?? []) l(ev);
  }
  receive(obj: unknown) {
    this.emit("message", { data: JSON.stringify(obj) });
  }
  sentMessages(): any[] {
    return this.sent.map((s) => JSON.parse(s));
  }
}
