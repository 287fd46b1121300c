import init, { FrameFill } from "./pkg/framefill_demo.js";

const $ = (id) => document.getElementById(id);
const out = $("out");
let ff;

function show(html) {
  out.innerHTML = html;
}

function escape(s) {
  return s.replace(/[&<>"]/g, (c) => ({ "&": "&amp;", "<": "&lt;", ">": "&gt;", '"': "&quot;" })[c]);
}

function candidates(result) {
  if (result.failed) return "<p class=muted>No sentence satisfies these frames.</p>";
  return "<ol>" + result.candidates
    .map((c) => `<li>${escape(c.text)} <span class=muted>${c.logprob.toFixed(2)}</span></li>`)
    .join("") + "</ol>";
}

// runs after the browser has painted the "working" message
function run(label, f) {
  show(`<p class=muted>${label}…</p>`);
  setTimeout(() => {
    try {
      show(f());
    } catch (e) {
      show(`<p class=error>${escape(String(e.message ?? e))}</p>`);
    }
  }, 10);
}

$("suggest").onclick = () => run("Suggesting", () => {
  const r = JSON.parse(ff.suggest($("story").value, 5));
  return "<ol>" + r.frames
    .map((f) => `<li><a href="#" data-frame="${escape(f.frame)}">${escape(f.frame)}</a> <span class=muted>${f.probability.toFixed(3)}</span></li>`)
    .join("") + "</ol><p class=muted>Click a frame to use it.</p>";
});

out.onclick = (e) => {
  const frame = e.target.dataset?.frame;
  if (!frame) return;
  e.preventDefault();
  $("frames").value = frame;
};

$("infill").onclick = () => run("Generating", () => {
  const r = JSON.parse(ff.infill($("story").value, $("frames").value, $("ordered").checked));
  return r.blanks.map((b) => `<h3>Blank ${b.position + 1} ${escape(b.frames.join(" "))}</h3>` + candidates(b)).join("");
});

$("diversify").onclick = () => run("Generating for each frame", () => {
  const r = JSON.parse(ff.diversify($("story").value, 3));
  return r.groups.map((g) => `<h3><mark>${escape(g.frame)}</mark></h3>` + candidates(g.result)).join("");
});

$("frames").oninput = () => {
  const word = $("frames").value.split(/\s+/).pop().replace(/[[\]]/g, "");
  if (word.length < 2) return;
  $("frame-list").innerHTML = JSON.parse(ff.frames(word))
    .slice(0, 20)
    .map((f) => `<option value="${escape(f.id)}">`)
    .join("");
};

await init();
ff = new FrameFill();
$("status").textContent = "Ready.";
for (const b of document.querySelectorAll("button")) b.disabled = false;
