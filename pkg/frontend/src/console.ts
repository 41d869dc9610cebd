/** Operator console state: a chat-style timeline driven entirely by the
 * pipeline service.
 *
 * Every API response is recorded in `exchanges`; every card cell points back
 * into one of those responses.  The console holds no network logic: stages,
 * conflicts, plan totals, and verification verdicts all arrive from the API.
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
import { Card, Cell, cell } from "./view.js";

export interface Exchange {
  op: string;
  args: unknown[];
  response: unknown;
}

export const STRATEGIES = ["xumi", "endpoint", "bottleneck", "catchall"] as const;

const SAMPLE_ROWS = 5;

export class OperatorConsole {
  readonly timeline: Card[] = [];
  readonly exchanges: Record<string, Exchange> = {};
  private seq = 0;
  /** intent id -> the exchange holding its latest view, plus the path
   *  prefix of the view inside that response body. */
  private latest = new Map<string, { view: IntentView; key: string; prefix: string }>();
  private sessionIntents = new Map<string, string[]>();
  private applied = new Map<string, string>();

  constructor(private readonly api: Api) {}

  private record(op: string, args: unknown[], response: unknown): string {
    const key = `${op}#${++this.seq}`;
    this.exchanges[key] = { op, args, response };
    return key;
  }

  private push(card: Card): Card {
    this.timeline.push(card);
    return card;
  }

  private operatorSays(text: string): void {
    this.push({ kind: "operator", title: text, cells: [] });
  }

  private remember(view: IntentView, key: string, prefix = ""): void {
    this.latest.set(view.id, { view, key, prefix });
    const ids = this.sessionIntents.get(view.session) ?? [];
    if (!ids.includes(view.id)) ids.push(view.id);
    this.sessionIntents.set(view.session, ids);
  }

  private irCard(view: IntentView, key: string): Card {
    const cells: Cell[] = [
      cell("intent", view.id, key, "id"),
      cell("stage", view.stage, key, "stage"),
      cell("round", view.round, key, "round"),
    ];
    if (view.ir) {
      cells.push(cell("action", view.ir.action, key, "ir.action"));
      for (const [field, ep] of [
        ["source", view.ir.source],
        ["destination", view.ir.destination],
      ] as const) {
        cells.push(cell(field, ep.name, key, `ir.${field}.name`));
        ep.pairs.forEach((pair, i) => {
          cells.push(
            cell(`${field} gateway`, pair.gateway, key, `ir.${field}.pairs.${i}.gateway`),
            cell(`${field} prefix`, pair.prefix, key, `ir.${field}.pairs.${i}.prefix`),
          );
        });
      }
      cells.push(cell("application", view.ir.application.name, key, "ir.application.name"));
      view.ir.application.pairs.forEach((pair, i) => {
        cells.push(
          cell("protocol", pair.protocol, key, `ir.application.pairs.${i}.protocol`),
        );
        if (pair.port !== null) {
          cells.push(cell("port", pair.port, key, `ir.application.pairs.${i}.port`));
        }
      });
    }
    view.diagnostics.forEach((d, i) => {
      cells.push(
        cell("diagnostic", d.code, key, `diagnostics.${i}.code`),
        cell("detail", d.message, key, `diagnostics.${i}.message`),
      );
    });
    return this.push({ kind: "ir", title: "intent review", cells });
  }

  async start(request: SessionRequest): Promise<SessionInfo> {
    const info = await this.api.createSession(request);
    const key = this.record("createSession", [request], info);
    this.sessionIntents.set(info.id, []);
    this.push({
      kind: "session",
      title: "session opened",
      cells: [
        cell("session", info.id, key, "id"),
        cell("template", info.template, key, "template"),
        cell("default action", info.default_action, key, "default_action"),
        cell("entities", info.entities.join(", "), key, "entities"),
      ],
    });
    return info;
  }

  async submitIntent(sessionId: string, text: string): Promise<IntentView> {
    this.operatorSays(text);
    const view = await this.api.submitIntent(sessionId, text);
    const key = this.record("submitIntent", [sessionId, text], view);
    this.remember(view, key);
    this.irCard(view, key);
    return view;
  }

  async feedback(intentId: string, text: string): Promise<IntentView> {
    this.operatorSays(text);
    const view = await this.api.feedback(intentId, text);
    const key = this.record("feedback", [intentId, text], view);
    this.remember(view, key);
    this.irCard(view, key);
    return view;
  }

  /** Approve is gated client-side: outstanding diagnostics block the call. */
  async approve(intentId: string): Promise<IntentView | null> {
    const known = this.latest.get(intentId);
    if (known && known.view.diagnostics.length > 0) {
      const cells = known.view.diagnostics.map((d, i) =>
        cell("unresolved", d.message, known.key, `${known.prefix}diagnostics.${i}.message`),
      );
      this.push({ kind: "notice", title: "approve blocked: fix diagnostics first", cells });
      return null;
    }
    const view = await this.api.approve(intentId);
    const key = this.record("approve", [intentId], view);
    this.remember(view, key);
    this.irCard(view, key);
    return view;
  }

  async viewConflicts(intentId: string): Promise<ConflictsResponse> {
    const body = await this.api.conflicts(intentId);
    const key = this.record("conflicts", [intentId], body);
    this.remember(body.intent, key, "intent.");
    if (body.records.length === 0) {
      this.push({
        kind: "notice",
        title: "no conflicts: intent deployable as-is",
        cells: [cell("stage", body.intent.stage, key, "intent.stage")],
      });
      return body;
    }
    const cells: Cell[] = [
      cell("positions examined", body.positions_examined, key, "positions_examined"),
    ];
    body.records.forEach((rec, i) => {
      cells.push(
        cell("interface", rec.interface, key, `records.${i}.interface`),
        cell("position", rec.position, key, `records.${i}.position`),
        cell("existing action", rec.action, key, `records.${i}.action`),
        cell("default rule", rec.is_default, key, `records.${i}.is_default`),
        cell("conflicting flows", rec.flow_count, key, `records.${i}.flow_count`),
      );
      rec.sample_flows.slice(0, SAMPLE_ROWS).forEach((flow, j) => {
        cells.push(
          cell("flow src", flow.src, key, `records.${i}.sample_flows.${j}.src`),
          cell("flow dst", flow.dst, key, `records.${i}.sample_flows.${j}.dst`),
          cell("flow app", flow.app, key, `records.${i}.sample_flows.${j}.app`),
        );
      });
    });
    this.push({ kind: "conflicts", title: "detected conflicts", cells });
    return body;
  }

  async protect(intentId: string, text: string): Promise<ProtectResponse> {
    this.operatorSays(text);
    const body = await this.api.protect(intentId, text);
    const key = this.record("protect", [intentId, text], body);
    this.remember(body.intent, key, "intent.");
    const cells: Cell[] = [
      cell("stage", body.intent.stage, key, "intent.stage"),
      cell("protected flows", body.protected_flow_count, key, "protected_flow_count"),
      cell("remaining flows", body.remaining_flow_count, key, "remaining_flow_count"),
    ];
    body.protect_rules.forEach((rule, i) => {
      cells.push(
        cell("protect action", rule.action, key, `protect_rules.${i}.action`),
        cell("protect src", rule.src ?? "any", key, `protect_rules.${i}.src`),
        cell("protect dst", rule.dst ?? "any", key, `protect_rules.${i}.dst`),
      );
    });
    this.push({ kind: "resolution", title: "conflict resolution", cells });
    if (body.protected_flow_count === 0) {
      this.push({
        kind: "notice",
        title: "protect intent had no effect",
        cells: [cell("protected flows", body.protected_flow_count, key, "protected_flow_count")],
      });
    }
    return body;
  }

  async comparePlans(sessionId: string): Promise<Record<string, PlanJson>> {
    const cells: Cell[] = [];
    const plans: Record<string, PlanJson> = {};
    for (const strategy of STRATEGIES) {
      const plan = await this.api.plan(sessionId, strategy);
      const key = this.record("plan", [sessionId, strategy], plan);
      plans[strategy] = plan;
      cells.push(
        cell("strategy", plan.strategy, key, "strategy"),
        cell("rule additions", plan.total_rules, key, "total_rules"),
        cell("placements", plan.num_placements, key, "num_placements"),
      );
    }
    this.push({ kind: "plans", title: "deployment plans", cells });
    return plans;
  }

  /** Applying the already-applied strategy is a no-op (no second request). */
  async pickPlan(sessionId: string, strategy: string): Promise<ApplyResponse | null> {
    if (this.applied.get(sessionId) === strategy) {
      this.push({ kind: "notice", title: `plan already applied: ${strategy}`, cells: [] });
      return null;
    }
    const body = await this.api.apply(sessionId, strategy);
    const key = this.record("apply", [sessionId, strategy], body);
    this.applied.set(sessionId, strategy);
    this.push({
      kind: "apply",
      title: "plan applied",
      cells: [
        cell("strategy", body.strategy, key, "strategy"),
        cell("interfaces changed", body.interfaces_changed.join(", "), key, "interfaces_changed"),
      ],
    });
    return body;
  }

  async verification(sessionId: string): Promise<VerificationJson> {
    const body = await this.api.verification(sessionId);
    const key = this.record("verification", [sessionId], body);
    const cells: Cell[] = [
      cell("status", body.status, key, "status"),
      cell("checks", body.checked, key, "checked"),
    ];
    if (body.status === "pass") {
      for (const intentId of this.sessionIntents.get(sessionId) ?? []) {
        const known = this.latest.get(intentId);
        if (known) {
          cells.push(cell("verified intent", intentId, known.key, `${known.prefix}id`));
        }
        cells.push(cell("badge", body.status, key, "status"));
      }
    } else {
      body.violations.forEach((v, i) => {
        cells.push(
          cell("violating intent", v.intent_id, key, `violations.${i}.intent_id`),
          cell("flow", v.flow, key, `violations.${i}.flow`),
          cell("expected", v.expected, key, `violations.${i}.expected`),
          cell("got", v.got, key, `violations.${i}.got`),
        );
      });
    }
    this.push({ kind: "verification", title: "verification", cells });
    return body;
  }
}
