// SVG chart renderers: pure functions from service data to markup strings.
// Values arrive straight from one service response each; the only arithmetic
// here is pixel scaling.

export interface BarDatum {
  label: string;
  value: number;
}

const PALETTE = ["#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#76b7b2",
                 "#edc948", "#b07aa1", "#ff9da7", "#9c755f"];

function esc(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function barChart(data: BarDatum[], opts: { width?: number; unit?: string } = {}): string {
  const width = opts.width ?? 420;
  const rowH = 26;
  if (data.length === 0) {
    return `<svg class="chart" width="${width}" height="40" role="img">` +
      `<text x="8" y="24" class="placeholder">no activity</text></svg>`;
  }
  const max = Math.max(...data.map((d) => d.value), 1);
  const labelW = 110;
  const barSpace = width - labelW - 70;
  const rows = data.map((d, i) => {
    const y = i * rowH;
    const w = Math.round((d.value / max) * barSpace);
    return (
      `<g transform="translate(0,${y})">` +
      `<text x="${labelW - 8}" y="17" text-anchor="end">${esc(d.label)}</text>` +
      `<rect x="${labelW}" y="4" width="${Math.max(w, 1)}" height="18" ` +
      `fill="${PALETTE[i % PALETTE.length]}"><title>${esc(d.label)}: ${d.value}</title></rect>` +
      `<text x="${labelW + Math.max(w, 1) + 6}" y="17">${d.value}${opts.unit ? " " + esc(opts.unit) : ""}</text>` +
      `</g>`
    );
  });
  return `<svg class="chart" width="${width}" height="${data.length * rowH}" role="img">` +
    rows.join("") + `</svg>`;
}

export function shareChart(data: BarDatum[], opts: { width?: number } = {}): string {
  const width = opts.width ?? 420;
  if (data.length === 0) {
    return `<svg class="chart" width="${width}" height="40" role="img">` +
      `<text x="8" y="24" class="placeholder">no activity</text></svg>`;
  }
  const barH = 30;
  const legendRow = 20;
  let x = 0;
  const segments: string[] = [];
  const legends: string[] = [];
  data.forEach((d, i) => {
    const w = (d.value / 100) * width;
    const color = PALETTE[i % PALETTE.length];
    segments.push(
      `<rect x="${x.toFixed(2)}" y="0" width="${w.toFixed(2)}" height="${barH}" fill="${color}">` +
      `<title>${esc(d.label)}: ${d.value.toFixed(1)}%</title></rect>`);
    legends.push(
      `<g transform="translate(0,${barH + 10 + i * legendRow})">` +
      `<rect width="12" height="12" fill="${color}"/>` +
      `<text x="18" y="11">${esc(d.label)} — ${d.value.toFixed(1)}%</text></g>`);
    x += w;
  });
  const height = barH + 16 + data.length * legendRow;
  return `<svg class="chart" width="${width}" height="${height}" role="img">` +
    segments.join("") + legends.join("") + `</svg>`;
}

export function trendChart(series: { from: string; value: number }[], total: number,
                           opts: { width?: number } = {}): string {
  const width = opts.width ?? 420;
  const height = 120;
  if (series.length === 0) {
    return `<svg class="chart" width="${width}" height="${height}" role="img">` +
      `<text x="8" y="24" class="total">${total} changes</text>` +
      `<text x="8" y="48" class="placeholder">no changes in window</text></svg>`;
  }
  const max = Math.max(...series.map((p) => p.value), 1);
  const barW = Math.max(Math.floor(width / series.length) - 2, 2);
  const bars = series.map((p, i) => {
    const h = Math.round((p.value / max) * (height - 40));
    const x = i * (barW + 2);
    return `<rect x="${x}" y="${height - h - 16}" width="${barW}" height="${h}" fill="#4e79a7">` +
      `<title>${esc(p.from)}: ${p.value}</title></rect>`;
  });
  return `<svg class="chart" width="${width}" height="${height}" role="img">` +
    `<text x="8" y="16" class="total">${total} changes</text>` + bars.join("") + `</svg>`;
}
