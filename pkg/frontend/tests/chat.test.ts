import { beforeEach, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api";
import { ChatController, renderChat } from "../src/chat";
import { FakeServer, fig5Document } from "./fakeServer";

const ASK = "please lock the bike my user id is 12345";

function setup(server = new FakeServer(fig5Document(true))) {
  const api = new ApiClient("http://test", server.fetch);
  const root = document.createElement("div");
  const controller = new ChatController(api, () => renderChat(root, controller));
  return { server, api, root, controller };
}

beforeEach(() => {
  document.body.innerHTML = "";
});

describe("ChatController", () => {
  it("renders exactly the server's transcript after a turn", async () => {
    const { server, root, controller } = setup();
    await controller.start();
    const result = await controller.send(ASK);
    expect(result?.responses).toEqual(["bike locked successfully fee waived"]);

    const rendered = [...root.querySelectorAll(".msg")].map((el) => el.textContent);
    const serverTranscript = server.sessions.get(controller.state.sessionId!)!.transcript;
    expect(rendered).toEqual(serverTranscript.map((t) => t.text));
    expect(rendered).toEqual([ASK, "bike locked successfully fee waived"]);
  });

  it("shows a fallback banner on an ununderstood turn", async () => {
    const { root, controller } = setup();
    await controller.start();
    await controller.send("gibberish nonsense");
    expect(root.querySelector(".fallback-banner")).not.toBeNull();
    expect(controller.state.lastFallback).toBe(true);
    expect(controller.state.closed).toBe(false);
  });

  it("disables input once the conversation closes", async () => {
    const { root, controller } = setup();
    await controller.start();
    await controller.send(ASK);
    expect(controller.state.closed).toBe(true);
    const input = root.querySelector<HTMLInputElement>(".chat-input input")!;
    expect(input.disabled).toBe(true);
    expect(root.querySelector(".closed-note")).not.toBeNull();
    expect(await controller.send("hello again")).toBeNull();
  });

  it("restores the transcript from GET on resume (page reload)", async () => {
    const { server, controller } = setup();
    await controller.start();
    await controller.send(ASK);
    const sessionId = controller.state.sessionId!;

    const fresh = setup(server);
    await fresh.controller.resume(sessionId);
    expect(fresh.controller.state.transcript.map((t) => t.text)).toEqual([
      ASK,
      "bike locked successfully fee waived",
    ]);
    expect(fresh.controller.state.closed).toBe(true);
  });

  it("keeps the typed text for retry on network failure", async () => {
    const server = new FakeServer(fig5Document(true));
    let failNext = false;
    const flaky = (url: string, init?: RequestInit) => {
      if (failNext && url.includes("/messages")) {
        failNext = false;
        return Promise.reject(new Error("connection refused"));
      }
      return server.fetch(url, init);
    };
    const api = new ApiClient("http://test", flaky);
    const root = document.createElement("div");
    const controller = new ChatController(api, () => renderChat(root, controller));
    await controller.start();

    failNext = true;
    expect(await controller.send(ASK)).toBeNull();
    expect(root.querySelector(".error-banner")).not.toBeNull();
    const input = root.querySelector<HTMLInputElement>(".chat-input input")!;
    expect(input.value).toBe(ASK);
    expect(controller.state.transcript).toEqual([]);

    // retry succeeds and nothing was lost or duplicated
    const result = await controller.send(ASK);
    expect(result?.responses).toEqual(["bike locked successfully fee waived"]);
    expect(controller.state.transcript.map((t) => t.text)).toEqual([
      ASK,
      "bike locked successfully fee waived",
    ]);
  });

  it("takes the failure branch for the blocked account", async () => {
    const { controller } = setup();
    await controller.start();
    const result = await controller.send("please lock the bike my user id is 666");
    expect(result?.responses).toEqual(["cannot lock the bike please check again"]);
    expect(result?.api_calls[0]?.response).toEqual({ status: false });
  });
});
