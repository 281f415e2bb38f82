import init, { Scene } from "./pkg/csc_wasm_demo.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

let scene = null;
let observed = null;

function status(text) {
  $("status").textContent = text;
}

function fit(canvas) {
  const ratio = window.devicePixelRatio || 1;
  canvas.width = canvas.clientWidth * ratio;
  canvas.height = canvas.clientHeight * ratio;
  const ctx = canvas.getContext("2d");
  ctx.setTransform(ratio, 0, 0, ratio, 0, 0);
  ctx.clearRect(0, 0, canvas.clientWidth, canvas.clientHeight);
  return ctx;
}

function scaleOf(series) {
  let peak = 1e-12;
  for (const s of series) for (const v of s) peak = Math.max(peak, Math.abs(v));
  return peak;
}

function drawLine(canvas, values) {
  const ctx = fit(canvas);
  const w = canvas.clientWidth, h = canvas.clientHeight;
  const peak = scaleOf([values]);
  ctx.strokeStyle = "#333";
  ctx.beginPath();
  values.forEach((v, i) => {
    const x = (i / (values.length - 1)) * w;
    const y = h / 2 - (v / peak) * (h / 2 - 4);
    i ? ctx.lineTo(x, y) : ctx.moveTo(x, y);
  });
  ctx.stroke();
}

function drawStems(canvas, planted, recovered) {
  const ctx = fit(canvas);
  const w = canvas.clientWidth, h = canvas.clientHeight;
  const peak = scaleOf(recovered ? [planted, recovered] : [planted]);
  ctx.strokeStyle = "#ccc";
  ctx.beginPath();
  ctx.moveTo(0, h / 2);
  ctx.lineTo(w, h / 2);
  ctx.stroke();
  const stems = (values, color, dx) => {
    ctx.strokeStyle = color;
    ctx.fillStyle = color;
    values.forEach((v, i) => {
      if (v === 0) return;
      const x = ((i + 0.5) / values.length) * w + dx;
      const y = h / 2 - (v / peak) * (h / 2 - 6);
      ctx.beginPath();
      ctx.moveTo(x, h / 2);
      ctx.lineTo(x, y);
      ctx.stroke();
      ctx.fillRect(x - 2, y - 2, 4, 4);
    });
  };
  stems(planted, "#1f77b4", -1);
  if (recovered) stems(recovered, "#d62728", 1);
}

function guard(fn) {
  return () => {
    try {
      fn();
    } catch (e) {
      status(`error: ${e}`);
    }
  };
}

function build() {
  if (scene) scene.free();
  const kind = $("kind").value;
  scene = new Scene(kind, 25, num("m"), num("len"));
  observed = null;
  status(`mu = ${scene.coherence.toFixed(4)}; OMP recovers noiseless codes with l0,inf < ${scene.ompLimit.toFixed(2)}`);
  generate();
}

function generate() {
  observed = scene.generate(BigInt(num("seed")), num("card"), num("amp"), num("noise"));
  drawLine($("signal"), observed);
  drawStems($("code"), scene.truth(), null);
  status(`mu = ${scene.coherence.toFixed(4)}; planted l0,inf = ${scene.truthDensity} (OMP limit ${scene.ompLimit.toFixed(2)})`);
}

function recover(run) {
  if (!observed) generate();
  const t0 = performance.now();
  const code = run();
  const ms = performance.now() - t0;
  drawStems($("code"), scene.truth(), code);
  status(`${scene.report()}\n${ms.toFixed(0)} ms`);
}

await init();
$("build").onclick = guard(build);
$("generate").onclick = guard(generate);
$("omp").onclick = guard(() => recover(() => scene.solveOmp()));
$("admm").onclick = guard(() => recover(() => scene.solveAdmm(num("lambda"), num("rho"), num("iters"))));
guard(build)();
