import { PerspectiveCamera, WebGLRenderer } from "three";
import { ApiClient } from "./api";
import { SharedCamera } from "./camera";
import { actionForKey } from "./keyboard";
import { buildViewports, type ViewportSpec } from "./scene";
import { AnnotationSession } from "./session";
import { DISCARD_REASONS, type DiscardReason, type ObjectPayload } from "./types";
import "./style.css";

const GRID_COLS = 3;
const GRID_ROWS = 2;

function annotatorId(): string {
  let id = localStorage.getItem("annotator-id");
  if (!id) {
    id = window.prompt("Annotator id:")?.trim() || `anon-${Date.now()}`;
    localStorage.setItem("annotator-id", id);
  }
  return id;
}

const app = document.getElementById("app") as HTMLDivElement;
app.innerHTML = `
  <div id="status"></div>
  <div id="grid"><canvas id="canvas"></canvas><div id="labels"></div></div>
  <div id="toast" hidden></div>
  <div id="reasons" hidden>
    <h2>Discard reason</h2>
    <ol>${DISCARD_REASONS.map((r) => `<li>${r}</li>`).join("")}</ol>
    <p>Press 1–${DISCARD_REASONS.length}, Esc to cancel</p>
  </div>
  <div id="done" hidden></div>
`;
const statusBar = document.getElementById("status") as HTMLDivElement;
const grid = document.getElementById("grid") as HTMLDivElement;
const canvas = document.getElementById("canvas") as HTMLCanvasElement;
const labels = document.getElementById("labels") as HTMLDivElement;
const toast = document.getElementById("toast") as HTMLDivElement;
const reasonsOverlay = document.getElementById("reasons") as HTMLDivElement;
const doneScreen = document.getElementById("done") as HTMLDivElement;

const renderer = new WebGLRenderer({ canvas, antialias: true });
renderer.setPixelRatio(window.devicePixelRatio);

let viewports: ViewportSpec[] = [];
let cameras: PerspectiveCamera[] = [];
const sharedCamera = new SharedCamera();
let firstFramePending = false;

function showItem(item: ObjectPayload): void {
  viewports = buildViewports(item.template_cloud, item.object_cloud, item.candidates);
  cameras = viewports.map(() => new PerspectiveCamera(40, 1, 0.01, 100));
  sharedCamera.setCameras(cameras); // fixed initial view for every item
  labels.innerHTML = viewports
    .map(
      (v, i) => `<div class="label" style="grid-area: a${i}">
        <span class="title">${v.title}</span>
        <span class="subtitle" title="${v.subtitle}">${v.subtitle}</span></div>`,
    )
    .join("");
  const flagNote = item.flags.length ? ` · flags: ${item.flags.join(", ")}` : "";
  statusBar.textContent =
    `${item.object_id} · ${item.template_category} · ${item.axis_convention}` +
    `${flagNote} — 1–5 select, D discard, R reset view, drag to orbit`;
  doneScreen.hidden = true;
  firstFramePending = true;
}

const session = new AnnotationSession(
  new ApiClient(),
  annotatorId(),
  {
    onItem: showItem,
    onDone: (stats) => {
      viewports = [];
      labels.innerHTML = "";
      statusBar.textContent = "";
      doneScreen.hidden = false;
      doneScreen.innerHTML =
        `<h2>All objects annotated</h2><pre>${JSON.stringify(stats, null, 2)}</pre>`;
    },
    onNotice: (message) => {
      toast.textContent = message;
      toast.hidden = false;
      setTimeout(() => (toast.hidden = true), 3000);
    },
    onState: (state) => {
      reasonsOverlay.hidden = state !== "pick-reason";
    },
  },
);

window.addEventListener("keydown", (event) => {
  const action = actionForKey(event.key, session.state);
  if (!action) return;
  event.preventDefault();
  if (action.kind === "select") void session.select(action.index);
  else if (action.kind === "discard-open") session.beginDiscard();
  else if (action.kind === "discard-reason") {
    void session.discard(DISCARD_REASONS[action.index] as DiscardReason);
  } else if (action.kind === "cancel") session.cancelDiscard();
  else if (action.kind === "reset-camera") sharedCamera.reset();
});

let dragging = false;
canvas.addEventListener("pointerdown", (e) => {
  dragging = true;
  canvas.setPointerCapture(e.pointerId);
});
canvas.addEventListener("pointerup", () => (dragging = false));
canvas.addEventListener("pointermove", (e) => {
  if (dragging) sharedCamera.orbit(-e.movementX * 0.008, e.movementY * 0.008);
});
canvas.addEventListener(
  "wheel",
  (e) => {
    e.preventDefault();
    sharedCamera.zoom(Math.exp(e.deltaY * 0.001));
  },
  { passive: false },
);

function renderFrame(): void {
  const width = grid.clientWidth;
  const height = grid.clientHeight;
  renderer.setSize(width, height, false);
  renderer.setScissorTest(true);
  const cellW = Math.floor(width / GRID_COLS);
  const cellH = Math.floor(height / GRID_ROWS);
  viewports.forEach((viewport, i) => {
    const col = i % GRID_COLS;
    const row = Math.floor(i / GRID_COLS);
    const x = col * cellW;
    const y = height - (row + 1) * cellH; // WebGL origin is bottom-left
    const camera = cameras[i];
    if (!camera) return;
    camera.aspect = cellW / cellH;
    camera.updateProjectionMatrix();
    renderer.setViewport(x, y, cellW, cellH);
    renderer.setScissor(x, y, cellW, cellH);
    renderer.render(viewport.scene, camera);
  });
  if (firstFramePending && viewports.length) {
    firstFramePending = false;
    session.markRendered(); // decision timer starts at first painted frame
  }
  requestAnimationFrame(renderFrame);
}

requestAnimationFrame(renderFrame);
void session.start();
