import { describe, expect, it } from "vitest";
import { ViewModel } from "../src/viewmodel";
import { robot, stateFrame, TEST_MAP } from "./helpers";

describe("ViewModel", () => {
  it("is not ready before the first frame", () => {
    const vm = new ViewModel();
    expect(vm.ready).toBe(false);
  });

  it("keeps the first frame's map when later frames omit it", () => {
    const vm = new ViewModel();
    vm.apply(stateFrame(4, { tick: 0 }));
    const next = stateFrame(4, { tick: 1 });
    delete next.map;
    vm.apply(next);
    expect(vm.map).toEqual(TEST_MAP);
    expect(vm.tick).toBe(1);
    expect(vm.ready).toBe(true);
  });

  it("mirrors robots, controlled index, and scores from the server", () => {
    const vm = new ViewModel();
    vm.apply(stateFrame(3, { controlled: 2, scores: [0.5, 1.5, -0.25] }));
    expect(vm.robots).toHaveLength(3);
    expect(vm.controlled).toBe(2);
    expect(vm.scores).toEqual([0.5, 1.5, -0.25]);
  });

  it("flags a switch flash when the controlled robot changes", () => {
    const vm = new ViewModel();
    vm.apply(stateFrame(4, { tick: 0, controlled: 0 }));
    expect(vm.flashActive()).toBe(false);
    const next = stateFrame(4, { tick: 1, controlled: 3 });
    delete next.map;
    vm.apply(next);
    expect(vm.switchedAtTick).toBe(1);
    expect(vm.flashActive()).toBe(true);
  });

  it("shows errors as toasts", () => {
    const vm = new ViewModel();
    vm.apply({ type: "error", code: "manual_select_forbidden" });
    expect(vm.toast?.code).toBe("manual_select_forbidden");
  });

  it("reverts an optimistic mode change the server rejects", () => {
    const vm = new ViewModel();
    expect(vm.mode).toBe("manual");
    vm.requestMode("assisted");
    expect(vm.mode).toBe("assisted");
    vm.apply({ type: "error", code: "no_scorer" });
    expect(vm.mode).toBe("manual");
  });

  it("keeps the mode when unrelated errors arrive", () => {
    const vm = new ViewModel();
    vm.requestMode("assisted");
    vm.apply({ type: "error", code: "bad_robot_index" });
    expect(vm.mode).toBe("assisted");
  });

  it("reports a justReset robot", () => {
    const vm = new ViewModel();
    const frame = stateFrame(2);
    frame.robots[1] = robot({ justReset: true, health: 100 });
    vm.apply(frame);
    expect(vm.robots[1].justReset).toBe(true);
  });
});
