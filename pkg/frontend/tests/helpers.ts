import { readFileSync } from "node:fs";
import { resolve } from "node:path";

import { AnnotatorApp } from "../src/app.js";

export function serverBase(): string {
  const info = JSON.parse(
    readFileSync(resolve(__dirname, ".server.json"), "utf-8"),
  ) as { base: string };
  return info.base;
}

/** Points the happy-dom page at the annotator origin, as in production
 * where the service hosts the static bundle (same-origin requests). */
export function setOrigin(): void {
  const controller = (
    globalThis as unknown as { happyDOM?: { setURL(url: string): void } }
  ).happyDOM;
  controller?.setURL(serverBase() + "/");
}

/** Mounts the real page markup into the happy-dom document. */
export function mountPage(): void {
  setOrigin();
  const html = readFileSync(
    resolve(__dirname, "..", "public", "index.html"),
    "utf-8",
  );
  const body = html
    .slice(html.indexOf("<body>") + "<body>".length, html.indexOf("</body>"))
    .replace(/<script[\s\S]*?<\/script>/g, "");
  document.body.innerHTML = body;
}

export function makeApp(): AnnotatorApp {
  mountPage();
  const app = new AnnotatorApp(document, serverBase(), (input, init) =>
    fetch(input, init),
  );
  app.init();
  return app;
}

export async function waitFor(
  condition: () => boolean,
  timeoutMs = 10_000,
): Promise<void> {
  const start = Date.now();
  while (!condition()) {
    if (Date.now() - start > timeoutMs) {
      throw new Error("timed out waiting for condition");
    }
    await new Promise((r) => setTimeout(r, 20));
  }
}

export function setInput(id: string, value: string): void {
  const node = document.getElementById(id) as HTMLInputElement;
  node.value = value;
}

export function clickChoice(index: 0 | 1): void {
  const buttons = document.querySelectorAll<HTMLButtonElement>(
    "button[data-choice]",
  );
  buttons[index].click();
}

export function pressKey(key: string): void {
  document.dispatchEvent(new KeyboardEvent("keydown", { key }));
}
