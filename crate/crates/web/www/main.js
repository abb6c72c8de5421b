import init, { Lab, threat_curve } from "./pkg/vipguard_web.js";

const COLORS = ["#d62728", "#1f77b4", "#7f7f7f", "#2ca02c"];
const EPISODE = 25;
const RES = 48;

const $ = (id) => document.getElementById(id);
let lab = null;
let timer = null;

function reset() {
  stop();
  lab = new Lab($("scenario").value, $("controller").value, BigInt($("seed").value || 0));
  draw();
}

function stop() {
  clearInterval(timer);
  timer = null;
  $("play").textContent = "Play";
}

function tick() {
  if (Number(lab.time()) >= EPISODE) {
    stop();
    return;
  }
  lab.step();
  draw();
}

function draw() {
  const cv = $("arena");
  const ctx = cv.getContext("2d");
  const half = lab.arena();
  const s = cv.width / (2 * half);
  const px = (x) => (x + half) * s;
  const py = (y) => (half - y) * s;
  ctx.clearRect(0, 0, cv.width, cv.height);

  if ($("heat").checked) {
    const h = lab.heatmap(RES);
    const cell = cv.width / RES;
    for (let k = 0; k < h.length; k++) {
      if (h[k] <= 0) continue;
      ctx.fillStyle = `rgba(214,39,40,${(0.8 * h[k]).toFixed(3)})`;
      ctx.fillRect((k % RES) * cell, Math.floor(k / RES) * cell, cell + 0.5, cell + 0.5);
    }
  }

  const e = lab.entities();
  for (let i = e.length - 4; i >= 0; i -= 4) {
    ctx.beginPath();
    ctx.arc(px(e[i + 1]), py(e[i + 2]), Math.max(2, e[i + 3] * s), 0, 2 * Math.PI);
    ctx.fillStyle = COLORS[e[i]];
    ctx.fill();
  }
  $("status").textContent = `t=${lab.time()}  CRT=${lab.crt().toFixed(4)}`;
}

function drawCurve() {
  const cv = $("curve");
  const ctx = cv.getContext("2d");
  const maxDist = 1.0;
  const ys = threat_curve(200, maxDist);
  const pad = 28;
  const w = cv.width - 2 * pad;
  const h = cv.height - 2 * pad;
  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad, w, h);
  ctx.fillStyle = "#222";
  ctx.fillText("0", pad - 4, cv.height - pad + 14);
  ctx.fillText(maxDist.toFixed(1), pad + w - 8, cv.height - pad + 14);
  ctx.fillText("1", pad - 14, pad + 4);
  ctx.beginPath();
  ys.forEach((y, k) => {
    const x = pad + (w * k) / (ys.length - 1);
    const yy = pad + h * (1 - y);
    k ? ctx.lineTo(x, yy) : ctx.moveTo(x, yy);
  });
  ctx.strokeStyle = "#d62728";
  ctx.stroke();
}

await init();
drawCurve();
reset();
$("reset").onclick = reset;
["scenario", "controller", "seed"].forEach((id) => ($(id).onchange = reset));
$("heat").onchange = draw;
$("play").onclick = () => {
  if (timer) return stop();
  if (Number(lab.time()) >= EPISODE) reset();
  timer = setInterval(tick, 120);
  $("play").textContent = "Pause";
};
