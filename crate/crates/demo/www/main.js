import init, { ParticleDemo, crossRanks, varianceTrace } from "./pkg/ttbrwp_demo.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function drawTrace() {
  const sigma = num("sigma"), t = num("trace-t"), h = num("trace-h");
  const n = 200;
  const series = [
    [varianceTrace(sigma, t, h, 2, n, true), "#1f5fbf"],
    [varianceTrace(sigma, t, h, 2, n, false), "#c0392b"],
  ];
  const c = $("trace"), g = c.getContext("2d");
  g.clearRect(0, 0, c.width, c.height);
  const s2 = sigma * sigma;
  const top = 2.2 * s2;
  const y = (v) => c.height - 10 - (Math.min(Math.max(v, 0), top) / top) * (c.height - 20);
  const x = (k) => 10 + (k / n) * (c.width - 20);
  g.strokeStyle = "#999";
  g.setLineDash([4, 4]);
  g.beginPath(); g.moveTo(x(0), y(s2)); g.lineTo(x(n), y(s2)); g.stroke();
  g.setLineDash([]);
  for (const [vals, colour] of series) {
    g.strokeStyle = colour;
    g.beginPath();
    vals.forEach((v, k) => (k ? g.lineTo(x(k), y(v)) : g.moveTo(x(k), y(v))));
    g.stroke();
    if (vals.length < n + 1) {
      g.fillStyle = colour;
      g.fillText(`stopped at step ${vals.length - 1}`, x(vals.length - 1) + 4, y(vals[vals.length - 1]));
    }
  }
}

let demo = null, iteration = 0, playing = false;

function resetParticles() {
  try {
    demo = new ParticleDemo($("target").value, $("method").value, num("particles"), 0.1, 0.1, 1n);
    iteration = 0;
    drawParticles(demo.positions());
  } catch (e) {
    $("iter").textContent = String(e);
  }
}

function drawParticles(pos) {
  const c = $("particles-canvas"), g = c.getContext("2d");
  g.clearRect(0, 0, c.width, c.height);
  const scale = c.width / 10;
  g.fillStyle = "#1f5fbf";
  for (let i = 0; i < pos.length; i += 2) {
    g.fillRect(c.width / 2 + pos[i] * scale - 1.5, c.height / 2 - pos[i + 1] * scale - 1.5, 3, 3);
  }
  $("iter").textContent = `iteration ${iteration}`;
}

function tick() {
  if (!playing || !demo) return;
  try {
    const pos = demo.step(1);
    iteration += 1;
    drawParticles(pos);
    requestAnimationFrame(tick);
  } catch (e) {
    playing = false;
    $("play").textContent = "Run";
    $("iter").textContent = `stopped: ${e}`;
  }
}

function probeRanks() {
  try {
    const ranks = crossRanks($("rank-target").value, num("rank-dim"), num("rank-tol"), 8);
    $("ranks").textContent = `ranks [${Array.from(ranks).join(", ")}], max ${Math.max(...ranks)}`;
  } catch (e) {
    $("ranks").textContent = String(e);
  }
}

await init();
$("trace-run").onclick = drawTrace;
$("reset").onclick = resetParticles;
$("play").onclick = () => {
  playing = !playing;
  $("play").textContent = playing ? "Pause" : "Run";
  tick();
};
$("rank-run").onclick = probeRanks;
drawTrace();
resetParticles();
