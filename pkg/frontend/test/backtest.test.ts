import { describe, expect, it } from "vitest";

import { BacktestPanel } from "../src/backtest.js";
import { FakeBacktestApi, flushAsync, makeRoot } from "./helpers.js";

function makePanel() {
  const api = new FakeBacktestApi();
  const root = makeRoot();
  const panel = new BacktestPanel(api, "m-1", root, { cutoff: 16, horizon: 14 });
  return { api, root, panel };
}

describe("BacktestPanel", () => {
  it("plots the SSE curve and marks the best C2", async () => {
    const { root, panel } = makePanel();
    await panel.run(20, 7);
    const path = root.querySelector("path.series-line");
    expect(path?.getAttribute("data-label")).toBe("SSE");
    expect(path?.getAttribute("data-points")).toBe("5"); // one point per grid value
    const marker = root.querySelector("line.marker");
    expect(marker?.getAttribute("data-label")).toBe("C2* = 1.50");
    expect(root.querySelector("[data-role=status]")?.textContent).toContain("best C2 = 1.50");
    expect(panel.last?.c2_star).toBe(1.5);
  });

  it("the run button reads the cutoff and horizon inputs", async () => {
    const { api, root } = makePanel();
    (root.querySelector("[data-role=cutoff-input]") as HTMLInputElement).value = "25";
    (root.querySelector("[data-role=horizon-input]") as HTMLInputElement).value = "10";
    (root.querySelector("[data-role=run-backtest]") as HTMLButtonElement).click();
    await flushAsync();
    expect(api.calls).toEqual([{ cutoff: 25, horizon: 10 }]);
  });

  it("seeds the inputs with the provided defaults", () => {
    const { root } = makePanel();
    expect((root.querySelector("[data-role=cutoff-input]") as HTMLInputElement).value).toBe("16");
    expect((root.querySelector("[data-role=horizon-input]") as HTMLInputElement).value).toBe("14");
  });

  it("reports API failures inline", async () => {
    const { api, root, panel } = makePanel();
    api.failWith = new Error("cutoff 40 + horizon 14 exceeds the 30-day panel");
    await panel.run(40, 14);
    expect(root.querySelector("[data-role=status]")?.textContent).toContain("exceeds the 30-day panel");
    expect(panel.last).toBeNull();
  });
});
