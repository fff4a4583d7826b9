/**
 * The co-reading view: paginated story text, an unobtrusive question tooltip
 * in a reserved bottom band, an info pop-up, and page-turn buttons.
 *
 * Navigation is button-only by design: no swipe or touch handlers are ever
 * registered, so families can point at and touch the page while talking.
 * The tooltip band is a separate layout region below the text area, so the
 * question can never cover story content.
 */

import { ApiClient, QuestionRecord, StoryDocument } from "./api.js";
import { ReaderState, canTurn, initialState, withPage } from "./state.js";

export interface StartOptions {
  questionsEnabled?: boolean;
}

export class Reader {
  private story: StoryDocument | null = null;
  private stateValue: ReaderState | null = null;
  private readonly questionCache = new Map<number, QuestionRecord | null>();
  private ended = false;

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ApiClient,
  ) {}

  get state(): ReaderState {
    if (!this.stateValue) {
      throw new Error("reader has not been started");
    }
    return this.stateValue;
  }

  get currentRecord(): QuestionRecord | null {
    if (!this.stateValue) return null;
    return this.questionCache.get(this.stateValue.currentPage) ?? null;
  }

  async start(storyId: string, options: StartOptions = {}): Promise<void> {
    const questionsEnabled = options.questionsEnabled ?? true;
    this.story = await this.api.getStory(storyId);
    const sessionId = await this.api.createSession(storyId, questionsEnabled);
    this.stateValue = initialState(storyId, sessionId, questionsEnabled);
    this.buildSkeleton();
    await this.api.recordEvent(sessionId, { kind: "session_start", page_index: 0 });
    await this.showPage(0);
  }

  /** Advance or retreat via the on-screen button; never via gestures. */
  async turnPage(direction: 1 | -1): Promise<void> {
    const state = this.state;
    const story = this.requireStory();
    if (!canTurn(state, direction, story.page_count)) {
      if (direction === 1) {
        this.toggleEndIndicator(true);
      }
      return;
    }
    this.toggleEndIndicator(false);
    const target = state.currentPage + direction;
    await this.api.recordEvent(state.sessionId, { kind: "page_turn", page_index: target });
    await this.showPage(target);
  }

  async showInfo(): Promise<void> {
    const state = this.state;
    const popup = this.query(".info-popup");
    const text = await this.api.getInfoText();
    this.query(".info-text").textContent = text;
    popup.hidden = false;
    await this.api.recordEvent(state.sessionId, {
      kind: "info_opened",
      page_index: state.currentPage,
    });
  }

  dismissInfo(): void {
    this.query(".info-popup").hidden = true;
  }

  async end(): Promise<void> {
    if (this.ended || !this.stateValue) return;
    this.ended = true;
    await this.api.recordEvent(this.stateValue.sessionId, { kind: "session_end" });
  }

  // -- internals -----------------------------------------------------------

  private requireStory(): StoryDocument {
    if (!this.story) {
      throw new Error("reader has not been started");
    }
    return this.story;
  }

  private async showPage(pageIndex: number): Promise<void> {
    const story = this.requireStory();
    const record = this.state.questionsEnabled ? await this.questionFor(pageIndex) : null;
    this.stateValue = withPage(this.state, pageIndex, record?.text ?? null);
    this.renderPage();
    if (this.stateValue.currentQuestion !== null && record) {
      await this.api.recordEvent(this.stateValue.sessionId, {
        kind: "question_shown",
        page_index: pageIndex,
        question_id: record.question_id,
      });
    }
  }

  /** One cached lookup per page per session; revisits reuse the same record. */
  private async questionFor(pageIndex: number): Promise<QuestionRecord | null> {
    if (this.questionCache.has(pageIndex)) {
      return this.questionCache.get(pageIndex) ?? null;
    }
    const record = await this.api.getCachedQuestion(this.requireStory().id, pageIndex);
    this.questionCache.set(pageIndex, record);
    return record;
  }

  private buildSkeleton(): void {
    const story = this.requireStory();
    this.root.innerHTML = "";
    this.root.classList.add("reader");

    const header = document.createElement("header");
    header.className = "reader-header";
    const title = document.createElement("span");
    title.className = "story-title";
    title.textContent = story.title;
    const indicator = document.createElement("span");
    indicator.className = "page-indicator";
    header.append(title, indicator);

    const pageArea = document.createElement("main");
    pageArea.className = "page-area";

    // The tooltip lives in its own band below the text, never over it.
    const band = document.createElement("div");
    band.className = "tooltip-band";

    const controls = document.createElement("nav");
    controls.className = "page-controls";
    for (const direction of [-1, 1] as const) {
      const button = document.createElement("button");
      button.type = "button";
      button.className = "turn-button";
      button.dataset.direction = String(direction);
      button.textContent = direction === 1 ? "Next page ▶" : "◀ Back";
      button.addEventListener("click", () => {
        void this.turnPage(direction);
      });
      controls.append(button);
    }

    const endIndicator = document.createElement("div");
    endIndicator.className = "end-indicator";
    endIndicator.hidden = true;
    endIndicator.textContent = "The end! Thanks for reading together.";

    const popup = document.createElement("div");
    popup.className = "info-popup";
    popup.hidden = true;
    const infoText = document.createElement("p");
    infoText.className = "info-text";
    const dismiss = document.createElement("button");
    dismiss.type = "button";
    dismiss.className = "info-dismiss";
    dismiss.textContent = "Back to the story";
    dismiss.addEventListener("click", () => this.dismissInfo());
    popup.append(infoText, dismiss);

    this.root.append(header, pageArea, band, controls, endIndicator, popup);
  }

  private renderPage(): void {
    const story = this.requireStory();
    const state = this.state;
    const pageText = story.pages[state.currentPage] ?? "";
    this.query(".page-area").textContent = pageText;
    this.query(".page-indicator").textContent =
      `Page ${state.currentPage + 1} of ${story.page_count}`;
    this.renderTooltip();
    const back = this.query<HTMLButtonElement>('.turn-button[data-direction="-1"]');
    back.disabled = state.currentPage === 0;
  }

  private renderTooltip(): void {
    const band = this.query(".tooltip-band");
    band.innerHTML = "";
    const question = this.state.currentQuestion;
    if (question === null) {
      return;
    }
    const tooltip = document.createElement("div");
    tooltip.className = "question-tooltip";
    const text = document.createElement("span");
    text.className = "question-text";
    text.textContent = question;
    const info = document.createElement("button");
    info.type = "button";
    info.className = "info-button";
    info.setAttribute("aria-label", "Why ask questions?");
    info.textContent = "i";
    info.addEventListener("click", () => {
      void this.showInfo();
    });
    tooltip.append(text, info);
    band.append(tooltip);
  }

  private toggleEndIndicator(visible: boolean): void {
    this.query(".end-indicator").hidden = !visible;
  }

  private query<T extends HTMLElement = HTMLElement>(selector: string): T {
    const element = this.root.querySelector<T>(selector);
    if (!element) {
      throw new Error(`missing reader element: ${selector}`);
    }
    return element;
  }
}
