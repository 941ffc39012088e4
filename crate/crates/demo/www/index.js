import init, { f_field, bound_curve, coupled_run } from "./pkg/asep2d_demo.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function parseCsv(text) {
  const lines = text.trim().split("\n").filter((l) => !l.startsWith("#"));
  const header = lines[0].split(",");
  const rows = lines.slice(1).map((l) => l.split(",").map((v) => (v === "" ? NaN : Number(v))));
  return { header, rows };
}

// Draws one or more series on a canvas; x may be log-scaled.
function plot(canvas, series, { logX = false } = {}) {
  const ctx = canvas.getContext("2d");
  const { width, height } = canvas;
  const pad = 40;
  ctx.clearRect(0, 0, width, height);
  const pts = series.flatMap((s) => s.points).filter(([x, y]) => Number.isFinite(x) && Number.isFinite(y));
  if (pts.length === 0) return;
  const fx = (x) => (logX ? Math.log10(x) : x);
  const xs = pts.map(([x]) => fx(x));
  const ys = pts.map(([, y]) => y);
  const [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  const [y0, y1] = [Math.min(0, ...ys), Math.max(...ys)];
  const sx = (x) => pad + ((fx(x) - x0) / (x1 - x0 || 1)) * (width - 2 * pad);
  const sy = (y) => height - pad + ((y0 - y) / (y1 - y0 || 1)) * (height - 2 * pad);
  ctx.strokeStyle = "#888";
  ctx.strokeRect(pad, pad, width - 2 * pad, height - 2 * pad);
  ctx.fillStyle = "#333";
  ctx.font = "11px sans-serif";
  ctx.fillText(logX ? `1e${x0.toFixed(1)}` : x0.toPrecision(3), pad, height - pad + 14);
  ctx.fillText(logX ? `1e${x1.toFixed(1)}` : x1.toPrecision(3), width - pad - 30, height - pad + 14);
  ctx.fillText(y1.toPrecision(3), 2, pad + 4);
  ctx.fillText(y0.toPrecision(3), 2, height - pad);
  series.forEach((s, k) => {
    ctx.strokeStyle = s.color;
    ctx.beginPath();
    s.points.filter(([x, y]) => Number.isFinite(y)).forEach(([x, y], i) => (i ? ctx.lineTo(sx(x), sy(y)) : ctx.moveTo(sx(x), sy(y))));
    ctx.stroke();
    ctx.fillStyle = s.color;
    ctx.fillText(s.label, width - pad - 120, pad + 14 + 14 * k);
  });
}

function guarded(out, f) {
  return () => {
    out.classList.remove("error");
    try {
      f();
    } catch (e) {
      out.classList.add("error");
      out.textContent = String(e.message ?? e);
    }
  };
}

await init();

$("field-go").onclick = guarded($("field-out"), () => {
  const [f1, f2, e1, e2] = f_field(num("u"), num("w"), num("lambda"), num("b1"), num("b2"), num("a1"), num("a2"));
  $("field-out").textContent = `F1 = ${f1.toPrecision(8)}  (err ${e1.toExponential(1)})\nF2 = ${f2.toPrecision(8)}  (err ${e2.toExponential(1)})`;
});

$("bound-go").onclick = guarded($("bound-out"), () => {
  const csv = bound_curve($("kernel").value, num("lmin"), num("lmax"), num("npts"));
  $("bound-out").textContent = csv;
  const { rows } = parseCsv(csv);
  plot(
    $("bound-plot"),
    [
      { label: "general", color: "#1f77b4", points: rows.map((r) => [r[0], r[1]]) },
      { label: "axis", color: "#d62728", points: rows.map((r) => [r[0], r[3]]) },
    ],
    { logX: true },
  );
});

$("coupled-go").onclick = guarded($("coupled-out"), () => {
  const csv = coupled_run($("kernel").value, num("side"), num("rho"), num("horizon"), num("replicas"), num("seed"));
  $("coupled-out").textContent = csv;
  const { rows } = parseCsv(csv);
  plot($("coupled-plot"), [
    { label: "P(R = 0)", color: "#1f77b4", points: rows.map((r) => [r[0], r[1]]) },
    { label: "mean R1 / t", color: "#2ca02c", points: rows.slice(1).map((r) => [r[0], r[3] / r[0]]) },
    { label: "mean R2 / t", color: "#9467bd", points: rows.slice(1).map((r) => [r[0], r[4] / r[0]]) },
  ]);
});
