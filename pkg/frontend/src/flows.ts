/** The scripted operator flows.
 *
 * Shared by the live end-to-end test and the fixture-replay contract tests so
 * both drive the console through identical steps.
 */

import { OperatorConsole } from "./console.js";

/** Review loop plus conflict resolution over the two-datacenter deny setup:
 * submit, one feedback round, approve, inspect conflicts, protect HTTP,
 * compare plans, apply twice (second is a no-op), verify. */
export async function runConflictResolutionFlow(
  console_: OperatorConsole,
  scenario: unknown,
): Promise<string> {
  const session = await console_.start({ scenario });
  const intent = await console_.submitIntent(
    session.id,
    "Allow traffic from DC1 to DC2.",
  );
  await console_.feedback(intent.id, "the source should be DC1");
  await console_.approve(intent.id);
  await console_.viewConflicts(intent.id);
  await console_.protect(intent.id, "Protect all HTTP traffic.");
  await console_.comparePlans(session.id);
  await console_.pickPlan(session.id, "xumi");
  await console_.pickPlan(session.id, "xumi");
  await console_.verification(session.id);
  return session.id;
}

/** Plan comparison over the four-router walkthrough template: both intents
 * approved, strategy table fetched, optimized plan applied and verified. */
export async function runPlanWalkthroughFlow(
  console_: OperatorConsole,
): Promise<string> {
  const session = await console_.start({ template: "fig3" });
  for (const text of session.intents) {
    const view = await console_.submitIntent(session.id, text);
    await console_.approve(view.id);
  }
  await console_.comparePlans(session.id);
  await console_.pickPlan(session.id, "xumi");
  await console_.verification(session.id);
  return session.id;
}
