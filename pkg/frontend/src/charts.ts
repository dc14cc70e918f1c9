// Canvas bar charts: confidence distributions and class-balance counts.

export interface Bar {
  label: string;
  value: number; // [0, 1] for confidence, raw counts for balance
  highlight?: boolean;
}

export function drawBars(
  canvas: HTMLCanvasElement,
  bars: Bar[],
  options: { maxValue?: number; format?: (v: number) => string } = {},
): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const width = canvas.width;
  const height = canvas.height;
  ctx.clearRect(0, 0, width, height);
  if (!bars.length) return;

  const max = options.maxValue ?? Math.max(...bars.map((b) => b.value), 1e-9);
  const format = options.format ?? ((v: number) => `${(v * 100).toFixed(0)}%`);
  const rowHeight = Math.min(34, height / bars.length);
  const labelWidth = 110;
  const barSpan = width - labelWidth - 64;

  bars.forEach((bar, i) => {
    const y = i * rowHeight;
    ctx.fillStyle = "#dfe6f0";
    ctx.font = "13px system-ui, sans-serif";
    ctx.textBaseline = "middle";
    ctx.textAlign = "right";
    ctx.fillText(bar.label.slice(0, 14), labelWidth - 8, y + rowHeight / 2);

    const w = Math.max((bar.value / max) * barSpan, 0);
    ctx.fillStyle = bar.highlight ? "#6acc65" : "#4878cf";
    ctx.fillRect(labelWidth, y + rowHeight * 0.18, w, rowHeight * 0.64);

    ctx.fillStyle = "#aab4c4";
    ctx.textAlign = "left";
    ctx.fillText(format(bar.value), labelWidth + w + 6, y + rowHeight / 2);
  });
}
