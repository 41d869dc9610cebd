/** Interactive terminal console against a running pipeline service.
 *
 * Usage: node dist/main.js [service-url]
 * Commands are listed by `help`.
 */

import * as readline from "node:readline/promises";

import { ApiError, HttpApi } from "./api.js";
import { OperatorConsole } from "./console.js";
import { renderCard } from "./render.js";

const HELP = `commands:
  new <template>             open a session (fig2, fig3, campus, cloud)
  intent <text>              submit an intent for review
  feedback <id> <text>       correct the latest IR of an intent
  approve <id>               approve an intent's IR
  conflicts <id>             show detected conflicts
  protect <id> <text>        submit a protect intent against the conflicts
  plans                      compare deployment strategies
  apply <strategy>           apply a plan (xumi, endpoint, bottleneck, catchall)
  verify                     run post-deployment verification
  quit`;

async function main(): Promise<void> {
  const baseUrl = process.argv[2] ?? "http://127.0.0.1:8640";
  const console_ = new OperatorConsole(new HttpApi(baseUrl));
  const rl = readline.createInterface({ input: process.stdin, output: process.stdout });
  let sessionId: string | null = null;
  let rendered = 0;

  const show = () => {
    for (const card of console_.timeline.slice(rendered)) {
      for (const line of renderCard(card)) process.stdout.write(line + "\n");
    }
    rendered = console_.timeline.length;
  };

  process.stdout.write(`aclwright console -> ${baseUrl}\n${HELP}\n`);
  for (;;) {
    const input = (await rl.question("aclw> ")).trim();
    if (!input) continue;
    const [command, ...rest] = input.split(/\s+/);
    try {
      switch (command) {
        case "quit":
          rl.close();
          return;
        case "help":
          process.stdout.write(HELP + "\n");
          break;
        case "new": {
          const info = await console_.start({ template: rest[0] ?? "fig2" });
          sessionId = info.id;
          break;
        }
        case "intent":
          if (!sessionId) throw new Error("open a session first");
          await console_.submitIntent(sessionId, rest.join(" "));
          break;
        case "feedback":
          await console_.feedback(rest[0] ?? "", rest.slice(1).join(" "));
          break;
        case "approve":
          await console_.approve(rest[0] ?? "");
          break;
        case "conflicts":
          await console_.viewConflicts(rest[0] ?? "");
          break;
        case "protect":
          await console_.protect(rest[0] ?? "", rest.slice(1).join(" "));
          break;
        case "plans":
          if (!sessionId) throw new Error("open a session first");
          await console_.comparePlans(sessionId);
          break;
        case "apply":
          if (!sessionId) throw new Error("open a session first");
          await console_.pickPlan(sessionId, rest[0] ?? "xumi");
          break;
        case "verify":
          if (!sessionId) throw new Error("open a session first");
          await console_.verification(sessionId);
          break;
        default:
          process.stdout.write(`unknown command: ${command}\n`);
      }
    } catch (err) {
      const what = err instanceof ApiError ? `service error ${err.status}` : "error";
      process.stdout.write(`${what}: ${(err as Error).message}\n`);
    }
    show();
  }
}

main().catch((err) => {
  process.stderr.write(String(err) + "\n");
  process.exit(1);
});
