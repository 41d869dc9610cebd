/** Test scaffolding: spawn the Python pipeline service and build the
 * two-datacenter scenario document the conflict-resolution flow posts to it.
 */

import { spawn, spawnSync, ChildProcess } from "node:child_process";

const SCENARIO_SCRIPT = `
import json
from aclwright.flowset import Rule
from aclwright.netmodel import Interface, parse_prefix
from aclwright.scenarios import ScenarioParams, generate_scenario

sc = generate_scenario(ScenarioParams(
    template="fig2", num_permit=0, num_deny=0, num_apps=2))
sc.acls = {
    Interface("A", 1): [Rule(parse_prefix("10.1.0.0/16"),
                             parse_prefix("10.2.0.0/16"), ("tcp", None), "deny")],
    Interface("B", 2): [Rule(parse_prefix("10.3.0.0/16"), None,
                             ("tcp", None), "deny")],
}
doc = sc.to_json()
doc["apps"] = ["http", "ssh"]
doc["default_action"] = "permit"
print(json.dumps(doc))
`;

/** The triangle-topology scenario with existing TCP denies between the
 * datacenters, built by the pipeline package itself. */
export function conflictScenarioDoc(): unknown {
  const run = spawnSync("python3", ["-c", SCENARIO_SCRIPT], { encoding: "utf8" });
  if (run.status !== 0) {
    throw new Error(`scenario generation failed: ${run.stderr}`);
  }
  return JSON.parse(run.stdout);
}

export interface Service {
  baseUrl: string;
  stop: () => void;
}

export async function startService(): Promise<Service> {
  const port = 20000 + Math.floor(Math.random() * 20000);
  const child: ChildProcess = spawn(
    "python3",
    ["-m", "uvicorn", "--factory", "aclwright.service:create_app",
     "--host", "127.0.0.1", "--port", String(port), "--log-level", "warning"],
    { stdio: ["ignore", "inherit", "inherit"] },
  );
  const baseUrl = `http://127.0.0.1:${port}`;
  const deadline = Date.now() + 30_000;
  for (;;) {
    if (child.exitCode !== null) {
      throw new Error(`service exited early with code ${child.exitCode}`);
    }
    try {
      const response = await fetch(baseUrl + "/openapi.json");
      if (response.ok) break;
    } catch {
      // not up yet
    }
    if (Date.now() > deadline) {
      child.kill();
      throw new Error("service did not become ready in 30s");
    }
    await new Promise((resolve) => setTimeout(resolve, 200));
  }
  return { baseUrl, stop: () => child.kill() };
}
