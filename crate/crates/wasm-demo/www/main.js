import init, { induced_density, unit_density_profile, response_curve } from "./pkg/pmresp_wasm.js";

const $ = (id) => document.getElementById(id);

// Split a flat array into columns of a table with `width` entries per row.
function columns(flat, width) {
  const cols = Array.from({ length: width }, () => []);
  for (let i = 0; i < flat.length; i += width) {
    for (let k = 0; k < width; k++) cols[k].push(flat[i + k]);
  }
  return cols;
}

// Line plot of several series against a shared x column.
function plot(canvas, xs, series, { logx = false, logy = false } = {}) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = 48;
  ctx.clearRect(0, 0, w, h);
  const tx = (v) => (logx ? Math.log10(v) : v);
  const ty = (v) => (logy ? Math.log10(Math.max(Math.abs(v), 1e-300)) : v);
  const px = xs.map(tx);
  const all = series.flatMap((s) => s.ys.map(ty)).filter(Number.isFinite);
  let [x0, x1] = [Math.min(...px), Math.max(...px)];
  let [y0, y1] = [Math.min(...all), Math.max(...all)];
  if (y0 === y1) { y0 -= 1; y1 += 1; }
  const X = (v) => pad + ((v - x0) / (x1 - x0)) * (w - 2 * pad);
  const Y = (v) => h - pad + ((v - y0) / (y1 - y0)) * (2 * pad - h);

  ctx.strokeStyle = "#999";
  ctx.fillStyle = "#444";
  ctx.font = "11px system-ui";
  ctx.beginPath();
  ctx.moveTo(pad, pad / 2);
  ctx.lineTo(pad, h - pad);
  ctx.lineTo(w - pad / 2, h - pad);
  ctx.stroke();
  const fmt = (v, log) => (log ? `1e${v.toFixed(1)}` : v.toPrecision(3));
  for (let i = 0; i <= 4; i++) {
    const xv = x0 + ((x1 - x0) * i) / 4;
    const yv = y0 + ((y1 - y0) * i) / 4;
    ctx.fillText(fmt(xv, logx), X(xv) - 14, h - pad + 16);
    ctx.fillText(fmt(yv, logy), 2, Y(yv) + 4);
  }
  if (!logy && y0 < 0 && y1 > 0) {
    ctx.strokeStyle = "#ddd";
    ctx.beginPath();
    ctx.moveTo(pad, Y(0));
    ctx.lineTo(w - pad / 2, Y(0));
    ctx.stroke();
  }
  for (const s of series) {
    ctx.strokeStyle = s.color;
    ctx.setLineDash(s.dash ?? []);
    ctx.lineWidth = 1.6;
    ctx.beginPath();
    s.ys.forEach((v, i) => {
      const p = [X(px[i]), Y(ty(v))];
      i === 0 ? ctx.moveTo(...p) : ctx.lineTo(...p);
    });
    ctx.stroke();
  }
  ctx.setLineDash([]);
}

// Run `job` after the status line had a chance to repaint.
function busy(statusId, job) {
  const status = $(statusId);
  status.textContent = "computing...";
  setTimeout(() => {
    const t = performance.now();
    try {
      job();
      status.textContent = `done in ${((performance.now() - t) / 1000).toFixed(2)} s`;
    } catch (e) {
      status.textContent = `error: ${e.message ?? e}`;
    }
  }, 20);
}

function runInduced() {
  const alpha = Number($("h-alpha").value);
  busy("h-status", () => {
    const [x, h, dh] = columns(induced_density(alpha, 0), 3);
    plot($("h-plot"), x, [
      { ys: h, color: "#1f77b4" },
      { ys: dh, color: "#d62728" },
    ]);
  });
}

function runUnit() {
  const alpha = Number($("u-alpha").value);
  const zmin = Number($("u-zmin").value);
  busy("u-status", () => {
    const [z, rho, drho] = columns(unit_density_profile(alpha, 120, zmin), 3);
    // reference line z^-alpha through the density at z = 1
    const ref = z.map((v) => rho[rho.length - 1] * Math.pow(v, -alpha));
    plot($("u-plot"), z, [
      { ys: rho, color: "#1f77b4" },
      { ys: drho.map(Math.abs), color: "#d62728" },
      { ys: ref, color: "#999", dash: [4, 4] },
    ], { logx: true, logy: true });
  });
}

function runResponse() {
  const obs = $("r-obs").value.trim();
  const a0 = Number($("r-a0").value);
  const a1 = Number($("r-a1").value);
  const n = Number($("r-n").value);
  busy("r-status", () => {
    const [a, e, d] = columns(response_curve(obs, a0, a1, n), 3);
    plot($("r-plot"), a, [
      { ys: e, color: "#1f77b4" },
      { ys: d, color: "#d62728" },
    ]);
  });
}

await init();
$("h-alpha").addEventListener("input", (ev) => {
  $("h-alpha-out").textContent = Number(ev.target.value).toFixed(2);
});
$("h-alpha").addEventListener("change", runInduced);
$("h-run").addEventListener("click", runInduced);
$("u-run").addEventListener("click", runUnit);
$("r-run").addEventListener("click", runResponse);
runInduced();
