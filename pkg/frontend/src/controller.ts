/** Polling controller: owns nothing but the latest API responses.
 *
 * Every view render goes through buildViewModel(lastStatus,
 * lastSuggestions, selections); a forced reload only re-fetches the same
 * two documents, so the rendered data is identical by construction.
 */

import {
  buildViewModel,
  defaultSelections,
  Selections,
  ViewModel,
} from "./model.js";
import type { RecordJson, StatusResponse, SuggestionsResponse } from "./types.js";

/** The slice of the API the steering view needs (ApiClient satisfies it). */
export interface SteeringApi {
  status(experimentId: string): Promise<StatusResponse>;
  suggestions(experimentId: string): Promise<SuggestionsResponse>;
  claimNext(
    experimentId: string,
    worker: string,
  ): Promise<{ status: string; record: RecordJson | null }>;
  submitResult(
    experimentId: string,
    recordId: number,
    objectives: number[],
  ): Promise<{ record: RecordJson }>;
  submitFailure(
    experimentId: string,
    recordId: number,
    reason: string,
  ): Promise<{ record: RecordJson }>;
  startRun(
    experimentId: string,
    evaluator: string | null,
  ): Promise<{ started: boolean }>;
  stopRun(experimentId: string): Promise<{ stopped: boolean }>;
}

export class UiController {
  private lastStatus: StatusResponse | null = null;
  private lastSuggestions: SuggestionsResponse | null = null;
  selections: Selections = defaultSelections();

  constructor(
    private api: SteeringApi,
    private experimentId: string,
  ) {}

  /** One poll: fetch status + suggestions, return the fresh view model. */
  async poll(): Promise<ViewModel> {
    this.lastStatus = await this.api.status(this.experimentId);
    this.lastSuggestions = await this.api.suggestions(this.experimentId);
    return this.view();
  }

  /** Re-render from the data already fetched (selection changes etc.). */
  view(): ViewModel {
    if (!this.lastStatus || !this.lastSuggestions) {
      throw new Error("no poll yet");
    }
    return buildViewModel(this.lastStatus, this.lastSuggestions, this.selections);
  }

  selectRecord(id: number | null): ViewModel {
    this.selections = { ...this.selections, selectedRecordId: id };
    return this.view();
  }

  selectObjectivePair(x: number, y: number): ViewModel {
    this.selections = { ...this.selections, objectiveX: x, objectiveY: y };
    return this.view();
  }

  async submitResult(recordId: number, objectives: number[]): Promise<ViewModel> {
    await this.api.submitResult(this.experimentId, recordId, objectives);
    return this.poll();
  }

  async submitFailure(recordId: number, reason: string): Promise<ViewModel> {
    await this.api.submitFailure(this.experimentId, recordId, reason);
    return this.poll();
  }

  async claim(worker: string): Promise<ViewModel> {
    await this.api.claimNext(this.experimentId, worker);
    return this.poll();
  }

  async startRun(evaluator: string | null): Promise<ViewModel> {
    await this.api.startRun(this.experimentId, evaluator);
    return this.poll();
  }

  async stopRun(): Promise<ViewModel> {
    await this.api.stopRun(this.experimentId);
    return this.poll();
  }
}
