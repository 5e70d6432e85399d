// @vitest-environment happy-dom

import { afterEach, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { SessionController } from "../src/controller.js";
import { MemoryStore, OfflineQueue } from "../src/queue.js";
import { SessionView } from "../src/view.js";
import { FakeService } from "./fake-service.js";

const mounted: SessionView[] = [];
afterEach(() => {
  for (const view of mounted.splice(0)) view.dispose();
  document.body.innerHTML = "";
});

async function mountedView(candidates = 5) {
  const service = new FakeService();
  service.seed(candidates);
  const api = new ApiClient("http://fake", service.fetch);
  const controller = new SessionController(api, new OfflineQueue(new MemoryStore()), "mod");
  await controller.load("s1");
  const root = document.createElement("main");
  document.body.append(root);
  const view = new SessionView(root, controller, api);
  view.mount();
  mounted.push(view);
  return { service, controller, root, view };
}

async function settle() {
  await new Promise((r) => setTimeout(r, 0));
}

describe("SessionView", () => {
  it("renders every candidate as a card, rank 1 first", async () => {
    const { root } = await mountedView(5);
    const cards = root.querySelectorAll(".card");
    expect(cards).toHaveLength(5);
    expect(cards[0].querySelector(".rank")?.textContent).toBe("#1");
    expect(cards[4].querySelector(".rank")?.textContent).toBe("#5");
    expect(cards[0].querySelector("audio")?.getAttribute("src")).toContain("/audio/c000");
  });

  it("shows the pending count and updates it after a judgment", async () => {
    const { root, controller } = await mountedView(3);
    expect(root.querySelector(".meta")?.textContent).toContain("pending: 3");
    await controller.judge(0, "keyword", true);
    await settle();
    expect(root.querySelector(".meta")?.textContent).toContain("pending: 2");
  });

  it("clicking yes marks the card only after the service acknowledges", async () => {
    const { root, service } = await mountedView(2);
    const yesButton = root.querySelectorAll<HTMLButtonElement>(".card .decision button")[0];
    yesButton.click();
    await settle();
    await settle();
    expect(service.log).toHaveLength(1);
    const state = root.querySelectorAll(".card")[0].querySelector(".state");
    expect(state?.textContent).toBe("yes");
  });

  it("report panel shows the service numbers verbatim", async () => {
    const { root, controller } = await mountedView(4);
    await controller.judge(0, "keyword", true);
    await controller.judge(1, "keyword", false);
    await settle();
    const panel = root.querySelector(".report");
    expect(panel?.textContent).toContain("precision 50%");
    expect(panel?.textContent).toContain("2 reviewed / 2 pending");
  });

  it("offline banner appears when the service drops", async () => {
    const { root, controller, service } = await mountedView(2);
    expect(root.querySelector(".banner")?.classList.contains("hidden")).toBe(true);
    service.offline = true;
    await controller.judge(0, "keyword", true);
    await settle();
    expect(root.querySelector(".banner")?.classList.contains("hidden")).toBe(false);
    expect(root.querySelector(".staged")?.textContent).toContain("staged");
  });

  it("keyboard shortcuts drive judgments on the focused card", async () => {
    const { service } = await mountedView(2);
    document.dispatchEvent(new KeyboardEvent("keydown", { key: "y" }));
    await settle();
    await settle();
    expect(service.log).toHaveLength(1);
    expect(service.log[0].utterance_id).toBe("c000");
    expect(service.log[0].contains_keyword).toBe(true);
    document.dispatchEvent(new KeyboardEvent("keydown", { key: "j" }));
    document.dispatchEvent(new KeyboardEvent("keydown", { key: "n" }));
    await settle();
    await settle();
    expect(service.log).toHaveLength(2);
    expect(service.log[1].utterance_id).toBe("c001");
    expect(service.log[1].contains_keyword).toBe(false);
  });
});
