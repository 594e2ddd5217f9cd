import { ApiClient } from "./api";
import { App } from "./app";

function fatal(text: string) {
  const overlay = document.createElement("div");
  overlay.className = "fatal-overlay";
  overlay.textContent = text;
  document.body.appendChild(overlay);
}

window.addEventListener("error", (ev) => fatal(`error: ${ev.message}`));
window.addEventListener("unhandledrejection", (ev) =>
  fatal(`unhandled: ${ev.reason instanceof Error ? ev.reason.message : String(ev.reason)}`),
);

const root = document.getElementById("app")!;
const app = new App(root, new ApiClient());
app.start().catch((err) => fatal(`failed to reach annotation service: ${err.message ?? err}`));
