import { ApiClient } from "./api";
import { ChatController, renderChat } from "./chat";
import { FlowEditor, renderFlow } from "./flow";
import "./style.css";

const params = new URLSearchParams(window.location.search);
const apiBase = params.get("api") ?? "http://127.0.0.1:8080";
const api = new ApiClient(apiBase);

const tabs = document.getElementById("tabs")!;
const chatRoot = document.getElementById("chat")!;
const flowRoot = document.getElementById("flow")!;

const chat = new ChatController(api, () => renderChat(chatRoot as HTMLElement, chat));
const editor = new FlowEditor(api, () => renderFlow(flowRoot as HTMLElement, editor));

function showTab(name: "chat" | "flow"): void {
  chatRoot.hidden = name !== "chat";
  flowRoot.hidden = name !== "flow";
  for (const button of tabs.querySelectorAll("button")) {
    button.classList.toggle("active", button.dataset.tab === name);
  }
  window.sessionStorage.setItem("tab", name);
}

tabs.querySelectorAll("button").forEach((button) => {
  button.addEventListener("click", () => showTab(button.dataset.tab as "chat" | "flow"));
});

async function boot(): Promise<void> {
  showTab((window.sessionStorage.getItem("tab") as "chat" | "flow") ?? "chat");
  const savedSession = window.sessionStorage.getItem("session_id");
  if (savedSession) {
    try {
      await chat.resume(savedSession);
    } catch {
      await chat.start();
    }
  } else {
    await chat.start();
  }
  if (chat.state.sessionId) {
    window.sessionStorage.setItem("session_id", chat.state.sessionId);
  }
  await editor.load();
}

void boot();
