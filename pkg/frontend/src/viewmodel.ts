/**
 * Console view model: the latest server-reported session state.
 *
 * The console never simulates locally — every rendered quantity comes from a
 * received frame, so two consoles fed the same frame stream draw identical
 * output.
 */
import type { MapGeometry, Mode, RobotView, ServerMessage } from "./protocol";

export type ConnectionStatus = "connecting" | "open" | "closed";

export interface Toast {
  code: string;
  tick: number;
}

export class ViewModel {
  map: MapGeometry | null = null;
  robots: RobotView[] = [];
  controlled = -1;
  tick = -1;
  scores: number[] | null = null;
  mode: Mode = "manual";
  status: ConnectionStatus = "connecting";
  toast: Toast | null = null;
  /** Tick at which the controlled robot last changed; drives the switch flash. */
  switchedAtTick: number | null = null;

  private previousMode: Mode = "manual";

  get ready(): boolean {
    return this.map !== null && this.robots.length > 0;
  }

  /** Optimistically adopt a requested mode; reverted if the server rejects it. */
  requestMode(value: Mode): void {
    this.previousMode = this.mode;
    this.mode = value;
  }

  apply(msg: ServerMessage): void {
    if (msg.type === "error") {
      this.toast = { code: msg.code, tick: this.tick };
      if (msg.code === "no_scorer" || msg.code === "unknown_mode") {
        this.mode = this.previousMode;
      }
      return;
    }
    if (msg.map) this.map = msg.map;
    if (this.tick >= 0 && msg.controlled !== this.controlled) {
      this.switchedAtTick = msg.tick;
    }
    this.robots = msg.robots;
    this.controlled = msg.controlled;
    this.tick = msg.tick;
    this.scores = msg.scores;
  }

  /** Switch flash lasts a few frames after a controlled-robot change. */
  flashActive(durationTicks = 5): boolean {
    return this.switchedAtTick !== null && this.tick - this.switchedAtTick < durationTicks;
  }
}
