/**
 * Keyboard / click translation into protocol messages.
 *
 * Arrow keys steer the controlled robot; number keys and panel clicks request
 * control of a robot (the server rejects this in assisted mode); M toggles the
 * operating mode.
 */
import type { ClientMessage, InputAction } from "./protocol";
import type { ViewModel } from "./viewmodel";
import { panelAt } from "./layout";

const KEY_ACTIONS: Record<string, InputAction> = {
  ArrowUp: "forward",
  ArrowDown: "backward",
  ArrowLeft: "left",
  ArrowRight: "right",
};

/** Maps a keydown to an outbound message, or null if the key is unbound. */
export function messageForKey(key: string, vm: ViewModel): ClientMessage | null {
  const action = KEY_ACTIONS[key];
  if (action) return { type: "input", action };
  if (/^[0-9]$/.test(key)) {
    const robot = Number(key);
    if (robot < vm.robots.length) return { type: "select", robot };
    return null;
  }
  if (key === "m" || key === "M") {
    const value = vm.mode === "manual" ? "assisted" : "manual";
    vm.requestMode(value);
    return { type: "mode", value };
  }
  return null;
}

/** Maps a canvas-relative click to a select message, or null outside panels. */
export function messageForClick(
  px: number,
  py: number,
  vm: ViewModel,
  width: number,
  height: number,
  colsOverride?: number,
): ClientMessage | null {
  const n = vm.robots.length;
  if (n === 0) return null;
  const robot = panelAt(px, py, n, width, height, colsOverride);
  return robot === null ? null : { type: "select", robot };
}
