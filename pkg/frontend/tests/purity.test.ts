/** Contract tests: the console displays nothing it did not get from the API.
 *
 * The scripted flows are replayed against recorded service responses; every
 * cell's provenance is resolved back into the recorded response body, and
 * every digit sequence the renderer emits must come from a provenanced cell.
 */

import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";

import { SessionRequest } from "../src/api.js";
import { Exchange, OperatorConsole } from "../src/console.js";
import { runConflictResolutionFlow, runPlanWalkthroughFlow } from "../src/flows.js";
import { renderCard } from "../src/render.js";
import { ReplayApi } from "../src/replay.js";
import { deepGet } from "../src/view.js";

const HERE = dirname(fileURLToPath(import.meta.url));
const FIXTURE = join(HERE, "fixtures", "recorded.json");

interface RecordedFlows {
  conflictFlow: Exchange[];
  walkthroughFlow: Exchange[];
}

function loadFixture(): RecordedFlows {
  return JSON.parse(readFileSync(FIXTURE, "utf8"));
}

async function replayConflictFlow(entries: Exchange[]): Promise<OperatorConsole> {
  const api = new ReplayApi(entries);
  const console_ = new OperatorConsole(api);
  const scenario = (entries[0]!.args[0] as SessionRequest).scenario;
  await runConflictResolutionFlow(console_, scenario);
  expect(api.exhausted).toBe(true);
  return console_;
}

async function replayWalkthroughFlow(entries: Exchange[]): Promise<OperatorConsole> {
  const api = new ReplayApi(entries);
  const console_ = new OperatorConsole(api);
  await runPlanWalkthroughFlow(console_);
  expect(api.exhausted).toBe(true);
  return console_;
}

/** Every cell value must equal the field its provenance names. */
function checkProvenance(console_: OperatorConsole): number {
  let checked = 0;
  for (const card of console_.timeline) {
    for (const cell of card.cells) {
      const exchange = console_.exchanges[cell.source.response];
      expect(exchange, `${card.title}: unknown exchange ${cell.source.response}`)
        .toBeDefined();
      const field = deepGet(exchange!.response, cell.source.path);
      if (Array.isArray(field)) {
        expect(cell.value).toBe(field.join(", "));
      } else {
        expect(field, `${card.title} / ${cell.label} <- ${cell.source.path}`)
          .toBe(cell.value);
      }
      checked += 1;
    }
  }
  return checked;
}

/** Every digit run in a rendered card line must occur in one of that card's
 * provenanced values.  Operator messages are inputs, not displayed data. */
function checkRenderedDigits(console_: OperatorConsole): void {
  for (const card of console_.timeline) {
    if (card.kind === "operator") continue;
    const allowed = new Set(
      card.cells.flatMap((c) => String(c.value).match(/\d+/g) ?? []),
    );
    for (const line of renderCard(card)) {
      for (const run of line.match(/\d+/g) ?? []) {
        expect(allowed.has(run),
          `digit ${run} in "${line}" has no provenance on "${card.title}"`,
        ).toBe(true);
      }
    }
  }
}

describe("console purity over recorded fixtures", () => {
  it("conflict-resolution flow: every displayed value maps to an API field",
    async () => {
      const console_ = await replayConflictFlow(loadFixture().conflictFlow);
      expect(checkProvenance(console_)).toBeGreaterThan(20);
      checkRenderedDigits(console_);
    });

  it("plan walkthrough flow: every displayed value maps to an API field",
    async () => {
      const console_ = await replayWalkthroughFlow(loadFixture().walkthroughFlow);
      expect(checkProvenance(console_)).toBeGreaterThan(20);
      checkRenderedDigits(console_);
    });

  it("the recorded plan table is the source of the displayed 7/4/3", async () => {
    const flows = loadFixture();
    const console_ = await replayWalkthroughFlow(flows.walkthroughFlow);
    const plansCard = console_.timeline.find((c) => c.kind === "plans")!;
    const byStrategy = new Map<string, number>();
    let strategy = "";
    for (const cell of plansCard.cells) {
      if (cell.label === "strategy") strategy = String(cell.value);
      if (cell.label === "rule additions") {
        byStrategy.set(strategy, Number(cell.value));
        // The displayed number must be exactly the recorded response field.
        const exchange = console_.exchanges[cell.source.response]!;
        expect(deepGet(exchange.response, "total_rules")).toBe(cell.value);
      }
    }
    expect(byStrategy.get("endpoint")).toBe(7);
    expect(byStrategy.get("bottleneck")).toBe(4);
    expect(byStrategy.get("xumi")).toBe(3);
  });
});
