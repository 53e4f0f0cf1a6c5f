/**
 * Message types for the operator-console WebSocket protocol.
 *
 * Inbound (console -> server): input / select / mode / end.
 * Outbound (server -> console): state frames and error codes.
 */

export type InputAction = "forward" | "backward" | "left" | "right";
export type Mode = "manual" | "assisted";

export type ClientMessage =
  | { type: "input"; action: InputAction }
  | { type: "select"; robot: number }
  | { type: "mode"; value: Mode }
  | { type: "end" };

export interface RobotView {
  x: number;
  y: number;
  heading: number;
  health: number;
  justReset: boolean;
}

export interface MapGeometry {
  /** [xMin, yMin, xMax, yMax] */
  arena: [number, number, number, number];
  /** axis-aligned rectangles [xMin, yMin, xMax, yMax] */
  walls: [number, number, number, number][];
  hazards: [number, number, number, number][];
  /** [x, y, healAmount] */
  packs: [number, number, number][];
  packRadius: number;
  /** [x, y, radius] */
  goal: [number, number, number];
}

export interface StateFrame {
  type: "state";
  tick: number;
  controlled: number;
  robots: RobotView[];
  scores: number[] | null;
  map?: MapGeometry;
}

export interface ErrorFrame {
  type: "error";
  code: string;
}

export type ServerMessage = StateFrame | ErrorFrame;

const INPUT_ACTIONS: readonly string[] = ["forward", "backward", "left", "right"];
const MODES: readonly string[] = ["manual", "assisted"];

/** True iff `msg` is a well-formed message the server will accept. */
export function isValidClientMessage(msg: unknown): msg is ClientMessage {
  if (typeof msg !== "object" || msg === null) return false;
  const m = msg as Record<string, unknown>;
  const keys = Object.keys(m);
  switch (m.type) {
    case "input":
      return keys.length === 2 && typeof m.action === "string" && INPUT_ACTIONS.includes(m.action);
    case "select":
      return keys.length === 2 && typeof m.robot === "number" && Number.isInteger(m.robot) && m.robot >= 0;
    case "mode":
      return keys.length === 2 && typeof m.value === "string" && MODES.includes(m.value);
    case "end":
      return keys.length === 1;
    default:
      return false;
  }
}

/** Parses a server JSON text frame; returns null for anything malformed. */
export function parseServerMessage(text: string): ServerMessage | null {
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch {
    return null;
  }
  if (typeof raw !== "object" || raw === null) return null;
  const m = raw as Record<string, unknown>;
  if (m.type === "error" && typeof m.code === "string") {
    return { type: "error", code: m.code };
  }
  if (
    m.type === "state" &&
    typeof m.tick === "number" &&
    typeof m.controlled === "number" &&
    Array.isArray(m.robots) &&
    (m.scores === null || Array.isArray(m.scores))
  ) {
    return m as unknown as StateFrame;
  }
  return null;
}
