/** Reader session state and its pure transitions. */

export interface ReaderState {
  storyId: string;
  currentPage: number;
  questionsEnabled: boolean;
  sessionId: string;
  /** Question text shown on the current page; null when none or disabled. */
  currentQuestion: string | null;
}

export function initialState(
  storyId: string,
  sessionId: string,
  questionsEnabled: boolean,
): ReaderState {
  return {
    storyId,
    currentPage: 0,
    questionsEnabled,
    sessionId,
    currentQuestion: null,
  };
}

export function canTurn(state: ReaderState, direction: 1 | -1, pageCount: number): boolean {
  const target = state.currentPage + direction;
  return target >= 0 && target < pageCount;
}

export function withPage(
  state: ReaderState,
  page: number,
  question: string | null,
): ReaderState {
  if (page < 0) {
    throw new RangeError(`page ${page} is out of range`);
  }
  return {
    ...state,
    currentPage: page,
    // A disabled session never carries a question, whatever was fetched.
    currentQuestion: state.questionsEnabled ? question : null,
  };
}
