/** Browser entry: connect to the fleet server and start the console. */
import { ConsoleClient, attach, optionsFromQuery } from "./client";

const opts = optionsFromQuery(window.location.search);
const canvas = document.getElementById("console") as HTMLCanvasElement;
canvas.width = opts.width;
canvas.height = opts.height;
const ctx = canvas.getContext("2d");
if (ctx === null) throw new Error("2d canvas unavailable");

const host = window.location.hostname || "localhost";
const port = new URLSearchParams(window.location.search).get("port") ?? "8700";
const socket = new WebSocket(`ws://${host}:${port}/ws`);
const client = new ConsoleClient(socket, ctx, opts);
attach(client, document, canvas);

const status = document.getElementById("status")!;
setInterval(() => {
  const vm = client.vm;
  const toast = vm.toast ? `  [${vm.toast.code}]` : "";
  status.textContent = `tick ${vm.tick}  mode ${vm.mode}  controlled ${vm.controlled}  ${vm.status}${toast}`;
}, 100);

window.addEventListener("beforeunload", () => client.end());
