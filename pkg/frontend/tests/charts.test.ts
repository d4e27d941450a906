import { describe, expect, it } from "vitest";

import { barChart, shareChart, trendChart } from "../src/charts.js";

describe("actor bar chart", () => {
  it("renders one bar per actor with its count", () => {
    const svg = barChart([
      { label: "u1", value: 4 }, { label: "u2", value: 3 }, { label: "u3", value: 1 },
    ]);
    expect((svg.match(/<rect/g) ?? []).length).toBe(3);
    expect(svg).toContain("u1");
    expect(svg).toContain(">4<");
    expect(svg).toContain("u3: 1");
  });

  it("shows an explicit placeholder for an empty store", () => {
    expect(barChart([])).toContain("no activity");
  });

  it("escapes labels", () => {
    const svg = barChart([{ label: "<xss>", value: 1 }]);
    expect(svg).not.toContain("<xss>");
    expect(svg).toContain("&lt;xss&gt;");
  });
});

describe("object share chart", () => {
  it("segments are proportional to the service percentages", () => {
    const svg = shareChart([
      { label: "DOCUMENT:D1", value: 62.5 }, { label: "PROCESS_MODEL:P1", value: 37.5 },
    ], { width: 400 });
    expect(svg).toContain('width="250.00"'); // 62.5% of 400
    expect(svg).toContain('width="150.00"');
    expect(svg).toContain("62.5%");
    expect(svg).toContain("37.5%");
  });

  it("placeholder on empty data", () => {
    expect(shareChart([])).toContain("no activity");
  });
});

describe("process model trend chart", () => {
  it("shows the total and one bar per bucket", () => {
    const svg = trendChart([
      { from: "2008-04-28T09:00:00Z", value: 2 },
      { from: "2008-04-28T10:00:00Z", value: 1 },
    ], 3);
    expect(svg).toContain("3 changes");
    expect((svg.match(/<rect/g) ?? []).length).toBe(2);
  });

  it("zero changes stays explicit, not blank", () => {
    const svg = trendChart([], 0);
    expect(svg).toContain("0 changes");
    expect(svg).toContain("no changes in window");
  });
});
