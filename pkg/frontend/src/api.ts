/** Typed client for the coread question service. */

export interface StoryDocument {
  id: string;
  title: string;
  pages: string[];
  page_count: number;
  source_hash: string;
}

export interface QuestionRecord {
  question_id: string;
  story_id: string;
  page_index: number;
  kind: string;
  text: string;
  verdict: unknown;
  prompt_version: string;
  model: string;
  created_at: string;
}

export type SessionEventKind =
  | "session_start"
  | "page_turn"
  | "question_shown"
  | "info_opened"
  | "session_end";

export interface SessionEventBody {
  kind: SessionEventKind;
  page_index?: number;
  question_id?: string;
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export class ApiClient {
  private readonly fetchFn: FetchLike;

  constructor(
    private readonly baseUrl: string,
    fetchFn?: FetchLike,
  ) {
    this.fetchFn = fetchFn ?? ((input, init) => globalThis.fetch(input, init));
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, init);
    if (!response.ok) {
      throw new ApiError(response.status, `${init?.method ?? "GET"} ${path} -> ${response.status}`);
    }
    return (await response.json()) as T;
  }

  private post<T>(path: string, body: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  listStories(): Promise<{ stories: Array<{ id: string; title: string; page_count: number }> }> {
    return this.request("/stories");
  }

  getStory(storyId: string): Promise<StoryDocument> {
    return this.request(`/stories/${encodeURIComponent(storyId)}`);
  }

  /**
   * Cached-mode question lookup. Resolves to null both for pages without a
   * question and on any failure: reading must never be blocked by the
   * question service.
   */
  async getCachedQuestion(storyId: string, pageIndex: number): Promise<QuestionRecord | null> {
    try {
      const payload = await this.request<{ question: QuestionRecord | null }>(
        `/stories/${encodeURIComponent(storyId)}/pages/${pageIndex}/question?mode=cached`,
      );
      return payload.question;
    } catch {
      return null;
    }
  }

  async getInfoText(): Promise<string> {
    const payload = await this.request<{ text: string }>("/meta/info-text");
    return payload.text;
  }

  async createSession(storyId: string, questionsEnabled: boolean): Promise<string> {
    const payload = await this.post<{ session_id: string }>("/sessions", {
      story_id: storyId,
      questions_enabled: questionsEnabled,
    });
    return payload.session_id;
  }

  /** Fire an event at the session log; failures are swallowed after logging. */
  async recordEvent(sessionId: string, event: SessionEventBody): Promise<void> {
    try {
      await this.post(`/sessions/${encodeURIComponent(sessionId)}/events`, event);
    } catch (error) {
      console.warn("session event dropped:", event.kind, error);
    }
  }
}
