import type { ApiClient } from "./api.js";
import type { PlanVerdict } from "./types.js";

// Which stage could come next? The client never inspects pre/post conditions
// itself: a candidate is enabled exactly when the server plans the extended
// sequence cleanly, so every enable/disable decision here can be replayed
// against POST /api/pipelines/plan and must agree with it.

export interface CandidateState {
  module: string;
  enabled: boolean;
  /** Server objections, verbatim. Empty when enabled. */
  problems: string[];
  /** Server advisories for an enabled but redundant choice. */
  warnings: string[];
  verdict: PlanVerdict;
}

export interface GatingState {
  selected: string[];
  /** Whether the current selection would run as-is, per the server. */
  submittable: boolean;
  currentVerdict: PlanVerdict | null;
  candidates: CandidateState[];
}

export interface Planner {
  plan(pipeline: { name?: string; stages: string[] }): Promise<PlanVerdict>;
}

export async function computeGating(
  client: Planner | ApiClient,
  selected: string[],
  moduleNames: string[],
): Promise<GatingState> {
  const candidates = await Promise.all(
    moduleNames.map(async (name): Promise<CandidateState> => {
      const verdict = await client.plan({ name: "candidate", stages: [...selected, name] });
      return {
        module: name,
        enabled: verdict.ok,
        problems: verdict.problems.map((p) => p.message),
        warnings: [...verdict.warnings],
        verdict,
      };
    }),
  );
  let currentVerdict: PlanVerdict | null = null;
  if (selected.length > 0) {
    currentVerdict = await client.plan({ name: "selection", stages: [...selected] });
  }
  return {
    selected: [...selected],
    submittable: currentVerdict !== null && currentVerdict.ok,
    currentVerdict,
    candidates,
  };
}

/** Hover text for a stage button; names the missing types when disabled. */
export function tooltipFor(candidate: CandidateState): string {
  if (candidate.enabled) {
    return candidate.warnings.join("; ");
  }
  return candidate.problems.join("; ");
}
