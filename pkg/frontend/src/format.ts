import type { Money, RateWire, SellerSummaryWire } from "./types.js";

/** "$1.50" from 150 integer cents; negatives keep the sign up front. */
export function formatCents(cents: number): string {
  const sign = cents < 0 ? "-" : "";
  const abs = Math.abs(cents);
  const dollars = Math.floor(abs / 100).toLocaleString("en-US");
  const rem = String(abs % 100).padStart(2, "0");
  return `${sign}$${dollars}.${rem}`;
}

export function formatMoney(money: Money): string {
  return formatCents(money.amount);
}

export function formatRate(rate: RateWire): string {
  const price = formatMoney(rate.amount);
  return rate.kind === "per_minute" ? `${price}/min` : `${price}/case`;
}

/** "4.3 ★ (12)" or "no ratings yet". */
export function formatStars(summary: SellerSummaryWire): string {
  if (summary.rating_count === 0 || summary.average === null) {
    return "no ratings yet";
  }
  const shown = Math.round(summary.average * 10) / 10;
  return `${shown} ★ (${summary.rating_count})`;
}

/** "1:30" from 90 seconds. */
export function formatDuration(seconds: number): string {
  const m = Math.floor(seconds / 60);
  const s = String(seconds % 60).padStart(2, "0");
  return `${m}:${s}`;
}

/** Whole seconds remaining until a deadline; never below zero. */
export function secondsLeft(deadline: number, now: number): number {
  return Math.max(0, deadline - now);
}

export function formatScoreParts(parts: Record<string, number>): string {
  return Object.entries(parts)
    .map(([name, value]) => `${name} ${value.toFixed(2)}`)
    .join(" · ");
}
