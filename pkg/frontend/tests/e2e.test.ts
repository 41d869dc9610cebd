/** Scripted end-to-end operator flow against a live pipeline service.
 *
 * Also records every API exchange into tests/fixtures/recorded.json, which
 * the purity contract tests replay.
 */

import { mkdirSync, renameSync, writeFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { HttpApi, PlanJson } from "../src/api.js";
import { Exchange, OperatorConsole } from "../src/console.js";
import { runConflictResolutionFlow, runPlanWalkthroughFlow } from "../src/flows.js";
import { renderTimeline } from "../src/render.js";
import { Card } from "../src/view.js";

import { conflictScenarioDoc, startService, Service } from "./helpers.js";

const HERE = dirname(fileURLToPath(import.meta.url));
const FIXTURE = join(HERE, "fixtures", "recorded.json");

let service: Service;

beforeAll(async () => {
  service = await startService();
});

afterAll(() => {
  service?.stop();
});

function planTotals(exchanges: Exchange[]): Record<string, number> {
  const totals: Record<string, number> = {};
  for (const e of exchanges.filter((x) => x.op === "plan")) {
    const plan = e.response as PlanJson;
    totals[String(e.args[1])] = plan.total_rules;
  }
  return totals;
}

function cards(console_: OperatorConsole, kind: string): Card[] {
  return console_.timeline.filter((c) => c.kind === kind);
}

describe("operator console end to end", () => {
  let conflictConsole: OperatorConsole;
  let walkthroughConsole: OperatorConsole;

  it("runs the conflict-resolution flow: review, feedback, approve, "
    + "conflict row, protect, apply, green verification", async () => {
    conflictConsole = new OperatorConsole(new HttpApi(service.baseUrl));
    await runConflictResolutionFlow(conflictConsole, conflictScenarioDoc());

    const irCards = cards(conflictConsole, "ir");
    // Submitted IR, refined IR (round 1), approved IR.
    expect(irCards.length).toBe(3);
    const round = (card: Card) => card.cells.find((c) => c.label === "round")?.value;
    const stage = (card: Card) => card.cells.find((c) => c.label === "stage")?.value;
    expect(round(irCards[0]!)).toBe(0);
    expect(round(irCards[1]!)).toBe(1);
    expect(stage(irCards[1]!)).toBe("awaiting-review");
    expect(stage(irCards[2]!)).toBe("approved");

    const [conflictCard] = cards(conflictConsole, "conflicts");
    expect(conflictCard).toBeDefined();
    const interfaces = conflictCard!.cells
      .filter((c) => c.label === "interface")
      .map((c) => c.value);
    expect(interfaces).toContain("A@1");

    const [resolution] = cards(conflictConsole, "resolution");
    expect(resolution).toBeDefined();
    expect(stage(resolution!)).toBe("resolved");
    const protectedFlows = resolution!.cells.find(
      (c) => c.label === "protected flows",
    );
    expect(Number(protectedFlows?.value)).toBeGreaterThan(0);

    // Second pick of the same plan is a client-side no-op.
    const applies = Object.values(conflictConsole.exchanges).filter(
      (e) => e.op === "apply",
    );
    expect(applies.length).toBe(1);
    expect(
      cards(conflictConsole, "notice").some((c) =>
        c.title.startsWith("plan already applied"),
      ),
    ).toBe(true);

    const [verification] = cards(conflictConsole, "verification");
    expect(verification!.cells.find((c) => c.label === "status")?.value).toBe("pass");
    expect(verification!.cells.filter((c) => c.label === "badge")
      .every((c) => c.value === "pass")).toBe(true);
    expect(renderTimeline(conflictConsole.timeline)).toContain("status: [ok]");
  });

  it("shows 7/4/3 on the planning walkthrough and verifies green", async () => {
    walkthroughConsole = new OperatorConsole(new HttpApi(service.baseUrl));
    await runPlanWalkthroughFlow(walkthroughConsole);

    const totals = planTotals(Object.values(walkthroughConsole.exchanges));
    expect(totals["endpoint"]).toBe(7);
    expect(totals["bottleneck"]).toBe(4);
    expect(totals["xumi"]).toBe(3);

    const [plansCard] = cards(walkthroughConsole, "plans");
    const shown = plansCard!.cells
      .filter((c) => c.label === "rule additions")
      .map((c) => c.value);
    expect(shown).toContain(7);
    expect(shown).toContain(4);
    expect(shown).toContain(3);

    const [verification] = cards(walkthroughConsole, "verification");
    expect(verification!.cells.find((c) => c.label === "status")?.value).toBe("pass");
  });

  it("records the exchanges for the contract tests", () => {
    const doc = {
      conflictFlow: Object.values(conflictConsole.exchanges),
      walkthroughFlow: Object.values(walkthroughConsole.exchanges),
    };
    mkdirSync(dirname(FIXTURE), { recursive: true });
    const tmp = FIXTURE + ".tmp";
    writeFileSync(tmp, JSON.stringify(doc, null, 2));
    renameSync(tmp, FIXTURE);
  });
});
