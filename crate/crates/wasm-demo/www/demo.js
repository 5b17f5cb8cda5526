// Plain ES-module glue: one Demo session, three interactive operations
// (train/snapshot, probe, evaluate) drawn onto canvases. No framework.

import init, { Demo } from "./pkg/ssv_demo.js";

const $ = (id) => document.getElementById(id);
const status = (msg) => { $("status").textContent = msg; };

const SUPER_COLORS = ["#2b6cb0", "#2f855a", "#6b46c1", "#b7791f", "#c53030"];
const NEAR_COLOR = "#dd6b20";
const FAR_COLOR = "#718096";

let demo = null;

function currentConfig() {
  return JSON.stringify({
    intra_spread: Number($("intra").value),
    sibling_offset: Number($("sibling").value),
    superclass_offset: Number($("super").value),
    data_seed: Number($("dataSeed").value),
    train_seed: Number($("trainSeed").value),
    hierarchy_loss_enabled: $("hier").checked,
  });
}

function rebuild() {
  try {
    demo = new Demo(currentConfig());
    status("fresh session: untrained head, random prototypes");
    drawSnapshot();
    $("ssvMeans").textContent = "";
    $("evalTables").innerHTML = '<span class="note">press “Evaluate risk”</span>';
    clearCanvas($("ssvCanvas"));
  } catch (e) {
    status("config error: " + e);
  }
}

function clearCanvas(canvas) {
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
}

function fitTransform(groups, canvas, pad = 26) {
  let xmin = Infinity, xmax = -Infinity, ymin = Infinity, ymax = -Infinity;
  for (const g of groups) {
    for (let i = 0; i < g.xs.length; i++) {
      xmin = Math.min(xmin, g.xs[i]); xmax = Math.max(xmax, g.xs[i]);
      ymin = Math.min(ymin, g.ys[i]); ymax = Math.max(ymax, g.ys[i]);
    }
  }
  if (!isFinite(xmin)) { xmin = -1; xmax = 1; ymin = -1; ymax = 1; }
  const sx = (canvas.width - 2 * pad) / Math.max(xmax - xmin, 1e-9);
  const sy = (canvas.height - 2 * pad) / Math.max(ymax - ymin, 1e-9);
  const s = Math.min(sx, sy);
  return (x, y) => [
    pad + (x - xmin) * s,
    canvas.height - pad - (y - ymin) * s,
  ];
}

function drawSnapshot() {
  if (!demo) return;
  const snap = JSON.parse(demo.snapshot());
  const canvas = $("scatter");
  const ctx = canvas.getContext("2d");
  clearCanvas(canvas);
  const t = fitTransform(
    [snap.train, snap.id_test, snap.near_ood, snap.far_ood, snap.prototypes],
    canvas
  );

  const dot = (x, y, r, color, alpha = 1) => {
    ctx.globalAlpha = alpha;
    ctx.fillStyle = color;
    ctx.beginPath();
    const [px, py] = t(x, y);
    ctx.arc(px, py, r, 0, Math.PI * 2);
    ctx.fill();
    ctx.globalAlpha = 1;
  };

  snap.train.xs.forEach((x, i) => {
    const color = SUPER_COLORS[snap.train.superclasses[i] % SUPER_COLORS.length];
    dot(x, snap.train.ys[i], 2.2, color, 0.25);
  });
  snap.id_test.xs.forEach((x, i) => {
    const color = SUPER_COLORS[snap.id_test.superclasses[i] % SUPER_COLORS.length];
    dot(x, snap.id_test.ys[i], 3, color, 0.9);
  });
  snap.near_ood.xs.forEach((x, i) => dot(x, snap.near_ood.ys[i], 3, NEAR_COLOR, 0.8));
  snap.far_ood.xs.forEach((x, i) => dot(x, snap.far_ood.ys[i], 2.5, FAR_COLOR, 0.5));

  // prototypes as diamonds
  snap.prototypes.xs.forEach((x, i) => {
    const color = SUPER_COLORS[snap.prototypes.superclasses[i] % SUPER_COLORS.length];
    const [px, py] = t(x, snap.prototypes.ys[i]);
    ctx.fillStyle = color;
    ctx.strokeStyle = "#111";
    ctx.beginPath();
    ctx.moveTo(px, py - 7);
    ctx.lineTo(px + 7, py);
    ctx.lineTo(px, py + 7);
    ctx.lineTo(px - 7, py);
    ctx.closePath();
    ctx.fill();
    ctx.stroke();
  });

  const fmt = (v) => (v == null ? "–" : v.toFixed(4));
  $("mEpoch").textContent = snap.epoch;
  $("mCmp").textContent = fmt(snap.compactness);
  $("mCoh").textContent = fmt(snap.cohesion);
  $("mSep").textContent = fmt(snap.separation);
  $("mIntra").textContent = snap.intra_angle_deg == null ? "–" : snap.intra_angle_deg.toFixed(2) + "°";
  $("mInter").textContent = snap.inter_angle_deg == null ? "–" : snap.inter_angle_deg.toFixed(2) + "°";

  drawLoss(snap.loss_history);
}

function drawLoss(history) {
  const canvas = $("lossCanvas");
  const ctx = canvas.getContext("2d");
  clearCanvas(canvas);
  if (!history.length) {
    ctx.fillStyle = "#999";
    ctx.fillText("no epochs yet", 16, 24);
    return;
  }
  const pad = 24;
  const totals = history.map((h) => h.total);
  const max = Math.max(...totals), min = Math.min(...totals);
  const x = (i) => pad + (i / Math.max(history.length - 1, 1)) * (canvas.width - 2 * pad);
  const y = (v) => canvas.height - pad - ((v - min) / Math.max(max - min, 1e-9)) * (canvas.height - 2 * pad);
  const series = [
    ["total", totals, "#1a202c"],
    ["mle", history.map((h) => h.mle), "#2b6cb0"],
    ["hierarchy", history.map((h) => h.hierarchy), "#2f855a"],
  ];
  for (const [name, vals, color] of series) {
    ctx.strokeStyle = color;
    ctx.lineWidth = name === "total" ? 2 : 1;
    ctx.beginPath();
    vals.forEach((v, i) => (i ? ctx.lineTo(x(i), y(v)) : ctx.moveTo(x(i), y(v))));
    ctx.stroke();
  }
  ctx.fillStyle = "#555";
  ctx.fillText(`total ${totals[totals.length - 1].toFixed(3)} (min ${min.toFixed(3)})`, pad, 14);
}

function drawProbe() {
  if (!demo) return;
  const report = JSON.parse(demo.probe_ssv());
  const canvas = $("ssvCanvas");
  const ctx = canvas.getContext("2d");
  clearCanvas(canvas);

  const tiers = [
    ["ID", report.id, "#2b6cb0"],
    ["Near", report.near, NEAR_COLOR],
    ["Far", report.far, FAR_COLOR],
  ];
  const all = tiers.flatMap(([, t]) => t.novel);
  const max = Math.max(...all, 1e-9);
  const bins = 40, pad = 26;
  const counts = tiers.map(([, t]) => {
    const c = new Array(bins).fill(0);
    t.novel.forEach((v) => c[Math.min(bins - 1, Math.floor((v / max) * bins))]++);
    return c;
  });
  const peak = Math.max(...counts.flat(), 1);
  const bw = (canvas.width - 2 * pad) / bins;
  counts.forEach((c, ti) => {
    ctx.fillStyle = tiers[ti][2];
    ctx.globalAlpha = 0.55;
    c.forEach((n, b) => {
      const h = (n / peak) * (canvas.height - 2 * pad);
      ctx.fillRect(pad + b * bw, canvas.height - pad - h, bw - 1, h);
    });
  });
  ctx.globalAlpha = 1;
  ctx.fillStyle = "#555";
  ctx.fillText("novelty surprise →", canvas.width - 130, canvas.height - 8);

  $("ssvMeans").innerHTML = tiers
    .map(([name, t, color]) =>
      `<span><span class="dot" style="background:${color}"></span>${name} mean ${t.mean_novel.toFixed(3)}</span>`)
    .join(" ");
}

function confusionTable(title, rep) {
  const rows = ["ID", "Near", "Far"];
  let html = `<table style="margin-bottom:10px"><tr><th colspan="5">${title} — nSR ${rep.nsr.toFixed(4)}, macro F1 ${rep.macro_f1.toFixed(4)}</th></tr>`;
  html += "<tr><th>true \\ pred</th><th>ID</th><th>Near</th><th>Far</th><th>F1</th></tr>";
  rows.forEach((r, i) => {
    html += `<tr><th>${r}</th>`;
    for (let j = 0; j < 3; j++) html += `<td>${rep.confusion[i][j]}</td>`;
    html += `<td>${rep.f1[i].toFixed(3)}</td></tr>`;
  });
  return html + "</table>";
}

function runEvaluate() {
  if (!demo) return;
  const rep = JSON.parse(demo.evaluate(BigInt(Number($("trainSeed").value))));
  $("evalTables").innerHTML =
    confusionTable("Surprise-vector classifier", rep.classifier) +
    confusionTable("K-means baseline", rep.kmeans) +
    `<div class="note">always-predict-ID baseline scores nSR ${rep.always_id_nsr.toFixed(1)} by construction; ${rep.eval_rows} held-out rows.</div>`;
}

function busy(fn, label) {
  return async () => {
    const buttons = document.querySelectorAll("button");
    buttons.forEach((b) => (b.disabled = true));
    status(label + "…");
    await new Promise((r) => setTimeout(r, 15)); // let the UI paint
    try {
      fn();
      status("done: " + label);
    } catch (e) {
      status("error: " + e);
    } finally {
      buttons.forEach((b) => (b.disabled = false));
    }
  };
}

for (const [id, labelId] of [["intra", "intraLabel"], ["sibling", "siblingLabel"], ["super", "superLabel"]]) {
  $(id).addEventListener("input", () => ($(labelId).textContent = Number($(id).value).toFixed(2)));
}
$("regen").addEventListener("click", busy(rebuild, "regenerating"));
$("train10").addEventListener("click", busy(() => { demo.train_epochs(10); drawSnapshot(); }, "training 10 epochs"));
$("train1").addEventListener("click", busy(() => { demo.train_epochs(1); drawSnapshot(); }, "training 1 epoch"));
$("probe").addEventListener("click", busy(drawProbe, "probing"));
$("evaluate").addEventListener("click", busy(runEvaluate, "evaluating"));

init()
  .then(() => rebuild())
  .catch((e) => status("failed to load wasm module (is pkg/ built?): " + e));
