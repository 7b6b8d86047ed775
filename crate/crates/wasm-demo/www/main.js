import init, { lpSeries, phiCurve, tailCurve } from "./pkg/cesaro_wasm_demo.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function specJson() {
  const x = num("param");
  const specs = {
    pareto: { family: "pareto_radial", params: { alpha: x, scale: 1.0 }, dim_D: 8 },
    constant: { family: "constant", params: { value: x }, dim_D: 1 },
    spiked: { family: "spiked_cui", params: { gap: 2, bulk: 0.0 }, dim_D: 8 },
    growing: { family: "growing_non_cui", params: { exponent: x }, dim_D: 1 },
  };
  return JSON.stringify({ ...specs[$("family").value], moment_mode: "analytic" });
}

function plot(canvas, series, { logX = false, logY = false } = {}) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = 40;
  ctx.clearRect(0, 0, w, h);
  const fx = logX ? Math.log10 : (v) => v;
  const fy = logY ? (v) => Math.log10(Math.max(v, 1e-12)) : (v) => v;
  const pts = series.flatMap((s) => s.x.map((x, i) => [fx(x), fy(s.y[i])]));
  const xs = pts.map((p) => p[0]);
  const ys = pts.map((p) => p[1]);
  const [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  const [y0, y1] = [Math.min(...ys), Math.max(...ys)];
  const sx = (v) => pad + ((v - x0) / (x1 - x0 || 1)) * (w - 2 * pad);
  const sy = (v) => h - pad - ((v - y0) / (y1 - y0 || 1)) * (h - 2 * pad);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
  ctx.fillStyle = "#555";
  ctx.font = "11px monospace";
  const label = (v, log) => (log ? `1e${v.toFixed(1)}` : v.toPrecision(3));
  ctx.fillText(label(x0, logX), pad, h - pad + 14);
  ctx.fillText(label(x1, logX), w - pad - 40, h - pad + 14);
  ctx.fillText(label(y1, logY), 2, pad + 4);
  ctx.fillText(label(y0, logY), 2, h - pad);
  for (const s of series) {
    ctx.strokeStyle = s.color;
    ctx.beginPath();
    s.x.forEach((x, i) => {
      const [px, py] = [sx(fx(x)), sy(fy(s.y[i]))];
      i ? ctx.lineTo(px, py) : ctx.moveTo(px, py);
    });
    ctx.stroke();
  }
}

function guarded(fn) {
  return () => {
    $("status").textContent = "";
    try {
      fn();
    } catch (e) {
      $("status").textContent = String(e.message ?? e);
    }
  };
}

function runLp() {
  const r = JSON.parse(lpSeries(specJson(), num("p"), num("lp-d"), num("lp-hi"), num("lp-reps"), num("seed")));
  const x = r.points.map((q) => q.size);
  const y = r.points.map((q) => q.moment);
  const ref = x.map((n) => y[0] * Math.sqrt(x[0] / n));
  plot($("lp-plot"), [
    { x, y, color: "#1565c0" },
    { x, y: ref, color: "#bbb" },
  ], { logX: true, logY: true });
  $("lp-out").textContent = `log-log slope ${r.slope.toFixed(3)}, trend ${r.trend_pass ? "decreasing" : "not decreasing"}`;
}

function runPhi() {
  const r = JSON.parse(phiCurve(specJson(), num("p"), num("phi-h"), num("phi-j")));
  const ratio = r.t.map((t, i) => r.phi[i] / t);
  plot($("phi-plot"), [
    { x: r.t, y: r.phi, color: "#2e7d32" },
    { x: r.t, y: ratio, color: "#ef6c00" },
  ]);
  $("phi-out").textContent = `thresholds ${r.thresholds.join(", ")}; domain up to ${r.n_max}`;
}

function runTail() {
  const r = JSON.parse(tailCurve(specJson(), num("p"), num("tail-h"), num("tail-d"), 1, num("seed")));
  plot($("tail-plot"), [{ x: r.a, y: r.tail_sup, color: "#6a1b9a" }], { logX: true, logY: true });
  const first = r.a.findIndex((_, i) => r.tail_sup[i] <= 0.1);
  $("tail-out").textContent = first < 0 ? "tail sup never drops below 0.1 on this grid" : `tail sup <= 0.1 from a = ${r.a[first].toPrecision(4)}`;
}

await init();
$("lp-run").onclick = guarded(runLp);
$("phi-run").onclick = guarded(runPhi);
$("tail-run").onclick = guarded(runTail);
guarded(runTail)();
