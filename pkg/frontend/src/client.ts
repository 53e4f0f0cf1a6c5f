/**
 * WebSocket wiring: connects the view model, input translation, and renderer
 * to a live server. Kept free of direct `window` access so tests can inject a
 * fake socket, document, and canvas.
 */
import { isValidClientMessage, parseServerMessage, type ClientMessage } from "./protocol";
import { messageForClick, messageForKey } from "./input";
import { ViewModel } from "./viewmodel";
import { renderFrame, type Draw2D, type RenderOptions } from "./render";

/** The subset of WebSocket the console uses. */
export interface SocketLike {
  send(data: string): void;
  addEventListener(type: string, listener: (ev: any) => void): void;
}

export interface ConsoleOptions extends RenderOptions {
  width: number;
  height: number;
}

/** Parses `?panelCols=&showScores=0|1` into render options. */
export function optionsFromQuery(query: string, width = 960, height = 720): ConsoleOptions {
  const params = new URLSearchParams(query);
  const cols = Number(params.get("panelCols"));
  return {
    width,
    height,
    showScores: params.get("showScores") !== "0",
    panelCols: Number.isInteger(cols) && cols >= 1 ? cols : undefined,
  };
}

export class ConsoleClient {
  readonly vm = new ViewModel();

  constructor(
    private readonly socket: SocketLike,
    private readonly ctx: Draw2D,
    private readonly opts: ConsoleOptions,
  ) {
    socket.addEventListener("open", () => {
      this.vm.status = "open";
    });
    socket.addEventListener("close", () => {
      this.vm.status = "closed";
    });
    socket.addEventListener("message", (ev: { data: string }) => {
      const msg = parseServerMessage(ev.data);
      if (msg === null) return;
      this.vm.apply(msg);
      this.draw();
    });
  }

  /** Sends only schema-valid messages; anything else is dropped. */
  send(msg: ClientMessage | null): boolean {
    if (msg === null || !isValidClientMessage(msg)) return false;
    this.socket.send(JSON.stringify(msg));
    return true;
  }

  onKeyDown(key: string): boolean {
    return this.send(messageForKey(key, this.vm));
  }

  onClick(px: number, py: number): boolean {
    return this.send(messageForClick(px, py, this.vm, this.opts.width, this.opts.height, this.opts.panelCols));
  }

  end(): boolean {
    return this.send({ type: "end" });
  }

  draw(): void {
    renderFrame(this.vm, this.ctx, this.opts.width, this.opts.height, this.opts);
  }
}

/** Binds DOM events to a client; returns the unbind function. */
export function attach(client: ConsoleClient, doc: Document, canvas: HTMLCanvasElement): () => void {
  const onKey = (ev: KeyboardEvent) => {
    if (client.onKeyDown(ev.key)) ev.preventDefault();
  };
  const onClick = (ev: MouseEvent) => {
    const rect = canvas.getBoundingClientRect();
    client.onClick(ev.clientX - rect.left, ev.clientY - rect.top);
  };
  doc.addEventListener("keydown", onKey as EventListener);
  canvas.addEventListener("click", onClick as EventListener);
  return () => {
    doc.removeEventListener("keydown", onKey as EventListener);
    canvas.removeEventListener("click", onClick as EventListener);
  };
}
