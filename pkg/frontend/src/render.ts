/** Plain-text rendering of the timeline for the terminal console. */

import { Card } from "./view.js";

const BADGES: Record<string, string> = { pass: "[ok]", fail: "[!!]" };

export function renderCard(card: Card): string[] {
  const lines: string[] = [];
  if (card.kind === "operator") {
    lines.push(`> ${card.title}`);
    return lines;
  }
  lines.push(`-- ${card.title} --`);
  for (const c of card.cells) {
    const badge = typeof c.value === "string" ? BADGES[c.value] : undefined;
    lines.push(`   ${c.label}: ${badge ?? String(c.value)}`);
  }
  return lines;
}

export function renderTimeline(cards: Card[]): string {
  return cards.flatMap(renderCard).join("\n");
}
