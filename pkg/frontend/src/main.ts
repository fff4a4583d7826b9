/** Entry point: story picker plus the reading view. */

import { ApiClient } from "./api.js";
import { Reader } from "./reader.js";

const API_BASE = (window as { COREAD_API_BASE?: string }).COREAD_API_BASE ?? "";

async function boot(): Promise<void> {
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app element");
  const api = new ApiClient(API_BASE);
  const picker = document.createElement("div");
  picker.className = "story-picker";
  const heading = document.createElement("h1");
  heading.textContent = "Pick a story";
  picker.append(heading);

  const { stories } = await api.listStories();
  for (const story of stories) {
    const button = document.createElement("button");
    button.type = "button";
    button.className = "story-choice";
    button.textContent = story.title;
    button.addEventListener("click", () => {
      picker.remove();
      const reader = new Reader(root, api);
      const params = new URLSearchParams(window.location.search);
      const questionsEnabled = params.get("questions") !== "off";
      void reader.start(story.id, { questionsEnabled });
      window.addEventListener("beforeunload", () => {
        void reader.end();
      });
    });
    picker.append(button);
  }
  root.append(picker);
}

void boot();
