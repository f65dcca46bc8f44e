// Built with: wasm-bindgen --target web --out-dir www/pkg ssr_web.wasm
import init, { srFactor, notchCurve, Demo } from "./pkg/ssr_web.js";

const $ = (id) => document.getElementById(id);
const SCALE = 4;
let demo = null;
let picked = null;

function blit(canvas, rgba, n) {
  canvas.width = n * SCALE;
  canvas.height = n * SCALE;
  const ctx = canvas.getContext("2d");
  if (rgba.length === 0) {
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    return;
  }
  const tmp = new OffscreenCanvas(n, n);
  tmp.getContext("2d").putImageData(new ImageData(new Uint8ClampedArray(rgba), n, n), 0, 0);
  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(tmp, 0, 0, canvas.width, canvas.height);
}

function plotLines(canvas, xs, series, colors, yMax = 1) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#ccc";
  ctx.strokeRect(30, 10, w - 40, h - 30);
  ctx.fillStyle = "#555";
  ctx.font = "11px sans-serif";
  ctx.fillText(`${xs[0]} nm`, 30, h - 5);
  ctx.fillText(`${xs[xs.length - 1]} nm`, w - 55, h - 5);
  const px = (i) => 30 + ((w - 40) * i) / (xs.length - 1);
  const py = (v) => 10 + (h - 30) * (1 - v / yMax);
  series.forEach((ys, k) => {
    ctx.strokeStyle = colors[k];
    ctx.beginPath();
    ys.forEach((v, i) => (i ? ctx.lineTo(px(i), py(v)) : ctx.moveTo(px(i), py(v))));
    ctx.stroke();
  });
}

function updateBound() {
  const v = srFactor(+$("ap").value, +$("fl").value, +$("px").value, +$("wl").value, +$("k").value);
  $("bound").textContent = v.toFixed(3);
}

function updateCurve() {
  $("center-v").textContent = $("center").value;
  $("hw-v").textContent = $("hw").value;
  const xs = Array.from({ length: 301 }, (_, i) => 400 + i);
  const ys = Array.from(notchCurve(+$("center").value, +$("hw").value, 400, 1, 301));
  plotLines($("curve"), xs, [ys], ["#c33"], 1.1);
}

function drawCapture() {
  if (demo) blit($("capture"), demo.captureRgba(+$("aperture").value), demo.lowSize());
}

function drawSpectra() {
  if (!demo || !picked) return;
  const wl = Array.from(demo.wavelengths());
  const s = Array.from(demo.spectra(picked.x, picked.y));
  const series = [s.slice(0, wl.length)];
  if (s.length > wl.length) series.push(s.slice(wl.length));
  plotLines($("plot"), wl, series, ["#222", "#e07000"]);
}

async function runDemo(ev) {
  ev?.preventDefault();
  $("run").disabled = true;
  $("status").textContent = "Working…";
  // let the status repaint before the synchronous work
  await new Promise((r) => setTimeout(r, 20));
  try {
    demo?.free();
    demo = new Demo(+$("size").value, +$("seed").value, +$("noise").value);
    const n = demo.size();
    blit($("truth"), demo.truthRgba(), n);
    drawCapture();
    const t0 = performance.now();
    const [rmse, sam] = demo.run(+$("ps-it").value, +$("admm-it").value);
    const secs = ((performance.now() - t0) / 1000).toFixed(1);
    blit($("pan"), demo.panRgba(), n);
    blit($("recon"), demo.reconRgba(), n);
    picked = { x: n >> 1, y: n >> 1 };
    drawSpectra();
    $("status").textContent = `RMSE ${rmse.toFixed(2)} (8-bit), SAM ${sam.toFixed(3)} rad, ${secs} s`;
  } catch (e) {
    $("status").textContent = `Error: ${e.message ?? e}`;
  }
  $("run").disabled = false;
}

await init();
for (let i = 0; i < 9; i++) $("aperture").add(new Option(String(i + 1), String(i)));
$("aperture").value = "0";
$("aperture").addEventListener("change", drawCapture);
$("bound-form").addEventListener("input", updateBound);
$("center").addEventListener("input", updateCurve);
$("hw").addEventListener("input", updateCurve);
$("demo-form").addEventListener("submit", runDemo);
$("truth").addEventListener("click", (e) => {
  const r = e.target.getBoundingClientRect();
  picked = { x: Math.floor((e.clientX - r.left) / SCALE), y: Math.floor((e.clientY - r.top) / SCALE) };
  drawSpectra();
});
updateBound();
updateCurve();
$("status").textContent = "Ready.";
runDemo();
