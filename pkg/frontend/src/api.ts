/** Typed client for the aclwright pipeline service.
 *
 * The console never computes network semantics itself: every value it shows
 * comes from one of these response shapes.
 */

export interface SessionInfo {
  id: string;
  template: string;
  default_action: string;
  entities: string[];
  intents: string[];
}

export interface Diagnostic {
  code: string;
  message: string;
}

export interface EndpointJson {
  name: string;
  pairs: { gateway: string; prefix: string }[];
  unresolved?: boolean;
}

export interface AppFieldJson {
  name: string;
  pairs: { protocol: string; port: number | null }[];
}

export interface IrJson {
  source: EndpointJson;
  destination: EndpointJson;
  application: AppFieldJson;
  time: unknown;
  action: string;
}

export interface IntentView {
  id: string;
  session: string;
  text: string;
  stage: string;
  round: number;
  ir: IrJson | null;
  diagnostics: Diagnostic[];
  protect_texts: string[];
}

export interface RuleJson {
  src: string | null;
  dst: string | null;
  app: unknown;
  action: string;
  time?: unknown;
}

export interface SampleFlow {
  src: string;
  dst: string;
  app: string;
  when: string;
}

export interface ConflictRecordJson {
  interface: string;
  position: number;
  is_default: boolean;
  action: string;
  rule: RuleJson | null;
  flow_count: number;
  sample_flows: SampleFlow[];
}

export interface ConflictsResponse {
  intent: IntentView;
  positions_examined: number;
  records: ConflictRecordJson[];
}

export interface ProtectResponse {
  intent: IntentView;
  protect_rules: RuleJson[];
  remaining_flow_count: number;
  protected_flow_count: number;
}

export interface PlanJson {
  strategy: string;
  total_rules: number;
  num_placements: number;
  placements: Record<string, number>;
}

export interface ApplyResponse {
  strategy: string;
  interfaces_changed: string[];
}

export interface ViolationJson {
  intent_id: string;
  flow: number;
  date: string;
  path: string[];
  expected: string;
  got: string;
}

export interface VerificationJson {
  checked: number;
  status: "pass" | "fail";
  violations: ViolationJson[];
  drift: ViolationJson[];
}

export interface SessionRequest {
  template?: string;
  seed?: number;
  num_permit?: number;
  num_deny?: number;
  scenario?: unknown;
}

/** The operations the console needs; satisfied by the HTTP client and by the
 * fixture-replay client used in contract tests. */
export interface Api {
  createSession(body: SessionRequest): Promise<SessionInfo>;
  submitIntent(sessionId: string, text: string): Promise<IntentView>;
  approve(intentId: string): Promise<IntentView>;
  feedback(intentId: string, text: string): Promise<IntentView>;
  conflicts(intentId: string): Promise<ConflictsResponse>;
  protect(intentId: string, text: string): Promise<ProtectResponse>;
  plan(sessionId: string, strategy: string): Promise<PlanJson>;
  apply(sessionId: string, strategy: string): Promise<ApplyResponse>;
  verification(sessionId: string): Promise<VerificationJson>;
}

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
    this.name = "ApiError";
  }
}

export class HttpApi implements Api {
  constructor(readonly baseUrl: string) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await fetch(this.baseUrl + path, {
      method,
      headers: body === undefined ? {} : { "content-type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const data: unknown = await response.json().catch(() => null);
    if (!response.ok) {
      const detail =
        data && typeof data === "object" && "detail" in data
          ? String((data as { detail: unknown }).detail)
          : response.statusText;
      throw new ApiError(response.status, detail);
    }
    return data as T;
  }

  createSession(body: SessionRequest): Promise<SessionInfo> {
    return this.request("POST", "/sessions", body);
  }

  submitIntent(sessionId: string, text: string): Promise<IntentView> {
    return this.request("POST", `/sessions/${sessionId}/intents`, { text });
  }

  approve(intentId: string): Promise<IntentView> {
    return this.request("POST", `/intents/${intentId}/approve`);
  }

  feedback(intentId: string, text: string): Promise<IntentView> {
    return this.request("POST", `/intents/${intentId}/feedback`, { text });
  }

  conflicts(intentId: string): Promise<ConflictsResponse> {
    return this.request("GET", `/intents/${intentId}/conflicts`);
  }

  protect(intentId: string, text: string): Promise<ProtectResponse> {
    return this.request("POST", `/intents/${intentId}/protect`, { text });
  }

  plan(sessionId: string, strategy: string): Promise<PlanJson> {
    return this.request("GET", `/sessions/${sessionId}/plan?strategy=${strategy}`);
  }

  apply(sessionId: string, strategy: string): Promise<ApplyResponse> {
    return this.request("POST", `/sessions/${sessionId}/apply`, { strategy });
  }

  verification(sessionId: string): Promise<VerificationJson> {
    return this.request("GET", `/sessions/${sessionId}/verification`);
  }
}
