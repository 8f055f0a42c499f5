import { describe, expect, it } from "vitest";
import { chanceToBeatPixels, renderChart } from "../src/chart.js";
import { SeriesPoint } from "../src/history.js";
import { RawNumber } from "../src/json.js";

const raw = (s: string) => s as RawNumber;

function point(
  seq: number,
  chance: string,
  ci: [string | null, string | null] | null = ["-0.1", "0.3"],
): SeriesPoint {
  return {
    seq,
    chanceToBeat: raw(chance),
    pValue: raw("0.5"),
    ciByLevel:
      ci === null
        ? {}
        : { "0.95": [ci[0] === null ? null : raw(ci[0]), ci[1] === null ? null : raw(ci[1])] },
  };
}

describe("renderChart", () => {
  it("plots a nondecreasing series as nonincreasing pixel y values", () => {
    const container = document.createElement("div");
    renderChart(
      container,
      [point(1, "0.10"), point(2, "0.10"), point(3, "0.55"), point(4, "0.90")],
      { level: "0.95" },
    );
    const ys = chanceToBeatPixels(container);
    expect(ys).toHaveLength(4);
    for (let i = 1; i < ys.length; i++) {
      expect(ys[i]!).toBeLessThanOrEqual(ys[i - 1]!);
    }
    expect(ys[1]).toBe(ys[0]); // flat segment stays flat
  });

  it("uses a fixed 0..1 scale, not one fitted to the data", () => {
    // same value must land on the same pixel no matter what else is plotted
    const low = document.createElement("div");
    renderChart(low, [point(1, "0.10"), point(2, "0.20")], { level: "0.95" });
    const high = document.createElement("div");
    renderChart(high, [point(1, "0.20"), point(2, "0.90")], { level: "0.95" });

    const lowYs = chanceToBeatPixels(low);
    const highYs = chanceToBeatPixels(high);
    expect(lowYs[1]).toBe(highYs[0]); // 0.20 in both charts
    // default geometry: 0 -> 144, 1 -> 10, linear in between
    expect(lowYs[0]).toBeCloseTo(144 - 134 * 0.1, 2);
    expect(highYs[1]).toBeCloseTo(144 - 134 * 0.9, 2);
  });

  it("labels the current value with the verbatim server token", () => {
    const container = document.createElement("div");
    renderChart(container, [point(1, "0.10"), point(2, "0.97750")], { level: "0.95" });
    const label = container.querySelector("text.chance-to-beat-now");
    expect(label!.textContent).toBe("0.97750");
  });

  it("draws a band for the selected level plus a zero line", () => {
    const container = document.createElement("div");
    renderChart(
      container,
      [point(1, "0.5", ["-0.2", "0.4"]), point(2, "0.6", ["-0.1", "0.3"])],
      { level: "0.95" },
    );
    expect(container.querySelector("polygon.ci-band.level-0\\.95")).not.toBeNull();
    const zero = container.querySelector("line.zero-line");
    expect(zero).not.toBeNull();
    // band spans [-0.2, 0.4]; zero sits inside, between the panel edges
    const y0 = Number(zero!.getAttribute("y1"));
    expect(y0).toBeGreaterThan(320 * 0.55);
    expect(y0).toBeLessThan(320 - 15);
  });

  it("skips unbounded intervals instead of inventing edges", () => {
    const container = document.createElement("div");
    renderChart(
      container,
      [point(1, "0.1", [null, null]), point(2, "0.2", [null, null])],
      { level: "0.95" },
    );
    expect(container.querySelector("polyline.chance-to-beat")).not.toBeNull();
    expect(container.querySelector("polygon.ci-band")).toBeNull();
  });

  it("renders an empty svg for an empty series", () => {
    const container = document.createElement("div");
    renderChart(container, [], { level: "0.95" });
    expect(container.querySelector("svg")).not.toBeNull();
    expect(chanceToBeatPixels(container)).toEqual([]);
  });

  it("replaces the previous drawing on re-render", () => {
    const container = document.createElement("div");
    renderChart(container, [point(1, "0.1")], { level: "0.95" });
    renderChart(container, [point(1, "0.1"), point(2, "0.2")], { level: "0.95" });
    expect(container.querySelectorAll("svg")).toHaveLength(1);
    expect(chanceToBeatPixels(container)).toHaveLength(2);
  });
});
