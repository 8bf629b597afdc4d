import init, { Demo } from "./pkg/mgst_web.js";

const $ = (id) => document.getElementById(id);
const sliders = ["alpha", "beta", "lg", "ll", "theta"];
let demo = null;
let running = false;

function blit(canvas, rgba, w, h) {
  const tmp = new OffscreenCanvas(w, h);
  tmp.getContext("2d").putImageData(new ImageData(new Uint8ClampedArray(rgba), w, h), 0, 0);
  const ctx = canvas.getContext("2d");
  ctx.imageSmoothingEnabled = false;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.drawImage(tmp, 0, 0, canvas.width, canvas.height);
}

function drawImages() {
  const w = demo.width(), h = demo.height();
  for (const v of ["content", "style", "output"]) blit($(v), demo.rgba(v), w, h);
}

function drawAttention() {
  const k = Number($("tap").value);
  const [, h, w] = demo.tapShape(k);
  blit($("attn"), demo.attentionRgba(k, $("which").value === "style"), w, h);
}

function drawPlot() {
  const c = $("plot"), ctx = c.getContext("2d");
  const l = Array.from(demo.losses(), (v) => Math.log10(Math.max(v, 1e-300)));
  ctx.clearRect(0, 0, c.width, c.height);
  if (l.length < 2) return;
  const lo = Math.min(...l), hi = Math.max(...l), span = hi - lo || 1;
  ctx.strokeStyle = "#36c";
  ctx.beginPath();
  l.forEach((v, i) => {
    const x = 10 + (i / (l.length - 1)) * (c.width - 20);
    const y = 10 + (1 - (v - lo) / span) * (c.height - 20);
    i ? ctx.lineTo(x, y) : ctx.moveTo(x, y);
  });
  ctx.stroke();
  ctx.fillStyle = "#666";
  ctx.fillText(hi.toFixed(2), 12, 20);
  ctx.fillText(lo.toFixed(2), 12, c.height - 12);
}

function readouts(status) {
  const [content, style, tv, total] = demo.terms();
  $("iter").value = demo.iteration();
  $("status").value = status;
  $("shift").value = demo.pupilShift().toFixed(3);
  $("lc").value = content.toExponential(3);
  $("ls").value = style.toExponential(3);
  $("ltv").value = tv.toExponential(3);
  $("lt").value = total.toExponential(3);
}

function refresh(status = "running") {
  drawImages();
  drawPlot();
  readouts(status);
}

function step(n) {
  const status = demo.step(n);
  refresh(status);
  return status;
}

function loop() {
  if (!running) return;
  if (step(1) !== "running") {
    running = false;
    $("run").textContent = "Run";
    return;
  }
  requestAnimationFrame(loop);
}

function applyWeights() {
  const v = sliders.map((id) => 10 ** Number($(id).value));
  sliders.forEach((id, i) => ($(id).nextElementSibling.value = v[i].toPrecision(3)));
  demo.setWeights(...v);
  refresh();
}

function build() {
  running = false;
  $("run").textContent = "Run";
  demo = new Demo(Number($("size").value), 3n);
  $("tap").innerHTML = "";
  for (let k = 0; k < demo.tapCount(); k++) {
    const [layer, h, w] = demo.tapShape(k);
    $("tap").add(new Option(`layer ${layer} (${w}x${h})`, k));
  }
  applyWeights();
  drawAttention();
}

await init();
build();

$("run").onclick = () => {
  running = !running;
  $("run").textContent = running ? "Pause" : "Run";
  loop();
};
$("step").onclick = () => step(1);
$("noise").onclick = () => { demo.restart(BigInt(Math.floor(Math.random() * 1e9)), false); refresh(); };
$("warm").onclick = () => { demo.restart(0n, true); refresh(); };
$("size").onchange = build;
$("tap").onchange = drawAttention;
$("which").onchange = drawAttention;
for (const id of sliders) $(id).oninput = applyWeights;
