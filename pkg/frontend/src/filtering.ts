/** Client-side threshold refiltering over checker probabilities.
 *
 * This is the only score logic the UI owns. Rows arrive ranked by the
 * service and are never reordered here; the slider just decides which
 * rows count as passed, using the same inclusive rule as the engine:
 * checker_prob >= threshold. A row without a checker probability cannot
 * be refiltered and always counts as passed.
 */

interface Scored {
  checker_prob: number | null;
}

export function passesThreshold(prob: number | null,
                                threshold: number): boolean {
  return prob === null ? true : prob >= threshold;
}

export function passedCount(rows: readonly Scored[],
                            threshold: number): number {
  let n = 0;
  for (const row of rows) {
    if (passesThreshold(row.checker_prob, threshold)) n += 1;
  }
  return n;
}

/** Largest checker probability in the fetched rows, or null if none carry
 * one. Drives the "slider is above every candidate" empty state. */
export function maxCheckerProb(rows: readonly Scored[]): number | null {
  let best: number | null = null;
  for (const row of rows) {
    if (row.checker_prob !== null &&
        (best === null || row.checker_prob > best)) {
      best = row.checker_prob;
    }
  }
  return best;
}
