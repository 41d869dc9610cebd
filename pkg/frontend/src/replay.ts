/** Api implementation that replays recorded exchanges.
 *
 * Used by the contract tests: the scripted flow is rerun against the recorded
 * responses, so every rendered value can be traced to a fixture field without
 * a live service.
 */

import {
  Api,
  ApplyResponse,
  ConflictsResponse,
  IntentView,
  PlanJson,
  ProtectResponse,
  SessionInfo,
  SessionRequest,
  VerificationJson,
} from "./api.js";
import { Exchange } from "./console.js";

export class ReplayMismatch extends Error {}

export class ReplayApi implements Api {
  private cursor = 0;

  constructor(private readonly entries: Exchange[]) {}

  get exhausted(): boolean {
    return this.cursor === this.entries.length;
  }

  private next<T>(op: string): T {
    const entry = this.entries[this.cursor];
    if (!entry) {
      throw new ReplayMismatch(`no recorded exchange left for ${op}`);
    }
    if (entry.op !== op) {
      throw new ReplayMismatch(
        `flow asked for ${op} but recording has ${entry.op} at step ${this.cursor}`,
      );
    }
    this.cursor += 1;
    return entry.response as T;
  }

  async createSession(_body: SessionRequest): Promise<SessionInfo> {
    return this.next("createSession");
  }

  async submitIntent(_sid: string, _text: string): Promise<IntentView> {
    return this.next("submitIntent");
  }

  async approve(_iid: string): Promise<IntentView> {
    return this.next("approve");
  }

  async feedback(_iid: string, _text: string): Promise<IntentView> {
    return this.next("feedback");
  }

  async conflicts(_iid: string): Promise<ConflictsResponse> {
    return this.next("conflicts");
  }

  async protect(_iid: string, _text: string): Promise<ProtectResponse> {
    return this.next("protect");
  }

  async plan(_sid: string, _strategy: string): Promise<PlanJson> {
    return this.next("plan");
  }

  async apply(_sid: string, _strategy: string): Promise<ApplyResponse> {
    return this.next("apply");
  }

  async verification(_sid: string): Promise<VerificationJson> {
    return this.next("verification");
  }
}
