/**
 * Contract test against the real question service.
 *
 * Gated on COREAD_E2E_BASE (e.g. http://127.0.0.1:8123) pointing at a
 * running service whose data directory already contains a pre-generated
 * fixture story. scripts/e2e.sh arranges all of that and runs this file.
 */

import { describe, expect, it } from "vitest";

import { ApiClient, FetchLike } from "../src/api.js";
import { Reader } from "../src/reader.js";

const BASE = process.env.COREAD_E2E_BASE;

const realFetch: FetchLike = (input, init) => fetch(input, init);

async function waitFor(condition: () => boolean, timeoutMs = 5000): Promise<void> {
  const start = Date.now();
  while (!condition()) {
    if (Date.now() - start > timeoutMs) {
      throw new Error("condition not met in time");
    }
    await new Promise((resolve) => setTimeout(resolve, 25));
  }
}

describe.skipIf(!BASE)("reader against the live service", () => {
  it("shows served questions byte-identically and logs events", async () => {
    const api = new ApiClient(BASE!, realFetch);
    const { stories } = await api.listStories();
    expect(stories.length).toBeGreaterThan(0);
    const storyId = stories[0]!.id;

    const root = document.createElement("div");
    document.body.append(root);
    const reader = new Reader(root, api);
    await reader.start(storyId, { questionsEnabled: true });

    const record = await api.getCachedQuestion(storyId, 0);
    expect(record).not.toBeNull();
    const shown = root.querySelector(".question-tooltip .question-text")?.textContent;
    expect(shown).toBe(record!.text);

    const tooltip = root.querySelector(".question-tooltip")!;
    expect(root.querySelector(".page-area")!.contains(tooltip)).toBe(false);
    expect(root.querySelector(".tooltip-band")!.contains(tooltip)).toBe(true);

    // Button-only navigation, logged on the server.
    root.querySelector<HTMLButtonElement>('.turn-button[data-direction="1"]')!.click();
    await waitFor(() => reader.state.currentPage === 1);
    expect(reader.state.currentPage).toBe(1);

    await reader.showInfo();
    const infoShown = root.querySelector(".info-text")?.textContent;
    expect(infoShown).toBe(await api.getInfoText());
    await reader.end();

    const sessionId = reader.state.sessionId;
    const response = await realFetch(`${BASE}/sessions/${sessionId}/events`);
    const { events } = (await response.json()) as {
      events: Array<{ kind: string; page_index: number | null; question_id: string | null }>;
    };
    const kinds = events.map((event) => event.kind);
    expect(kinds[0]).toBe("session_start");
    expect(kinds).toContain("page_turn");
    expect(kinds).toContain("question_shown");
    expect(kinds).toContain("info_opened");
    expect(kinds.at(-1)).toBe("session_end");
    const turn = events.find((event) => event.kind === "page_turn");
    expect(turn?.page_index).toBe(1);
    const shownEvent = events.find((event) => event.kind === "question_shown");
    expect(shownEvent?.question_id).toBe(record!.question_id);
    const stamps = events.map((event) => (event as { timestamp_ms?: number }).timestamp_ms ?? 0);
    expect([...stamps].sort((a, b) => a - b)).toEqual(stamps);
  });
});
