// Wire types mirroring the service's JSON contracts. The client renders
// strictly from these payloads and never computes routing or CL itself.

export interface Presentation {
  show_ai_recommendation: boolean
  show_ai_confidence: boolean
  show_human_cl: boolean
  show_ai_cl: boolean
  show_explanation: boolean
  require_pre_decision: boolean
  summary_text: string
}

export interface CaseCard {
  id: string
  values: Record<string, number | string>
  label: string | null
}

export interface ExplanationItem {
  feature: string
  contribution?: number
  toward: string
  magnitude: number
}

export interface ExplanationBlock {
  contributions: ExplanationItem[]
  base?: number
}

export interface AiBlock {
  label?: string
  confidence?: number
  explanation?: ExplanationBlock
}

export interface NeighborTraceEntry {
  neighbor_id: string
  distance: number
  weight: number
  model_prediction: string
  ground_truth: string
  correct: boolean
}

export interface ClBlock {
  human_cl: number
  ai_cl: number | null
  higher: string | null
  routed: string | null
  neighbor_trace: NeighborTraceEntry[]
}

export interface StepPayload {
  stage: string
  batch_complete?: boolean
  next_stage?: string
  index?: number
  total?: number
  case?: CaseCard
  presentation?: Presentation
  ai?: AiBlock
  cl?: ClBlock
  tutorial?: { task: string; features: string[] }
  rules?: RuleSetJson | null
  history?: HistoryRow[]
  questionnaire?: SurveyQuestion[]
  summary?: Record<string, unknown>
}

export interface ConditionJson {
  feature: string
  op: string
  value: number | string | string[]
}

export interface RuleJson {
  id: string
  priority: number
  conditions: ConditionJson[]
  prediction: string
}

export interface RuleSetJson {
  format_version: number
  origin: string
  rules: RuleJson[]
  edit_history: unknown[]
}

export interface HistoryRow {
  case_id: string
  values: Record<string, number | string>
  decision: string
}

export interface RulesPayload {
  rules: RuleSetJson
  history: HistoryRow[]
}

export interface ConflictReport {
  history_conflicts: string[]
  rule_conflicts: string[]
  history_rows: HistoryRow[]
}

export interface SurveyQuestion {
  id: string
  text: string
  scale: number
}

export interface DecisionAck {
  ok: boolean
  advanced: boolean
  reveal?: AiBlock | null
}

export interface CreatedSession {
  session_id: string
  condition: string
  stage: string
}

export type EditRequest =
  | { action: 'add'; rule: RuleJson; position?: number | null }
  | { action: 'delete'; rule_id: string }
  | { action: 'modify'; rule_id: string; conditions?: ConditionJson[] | null; prediction?: string | null }
  | { action: 'reorder'; order: string[] }

export const LABEL_POS = '>50K'
export const LABEL_NEG = '<=50K'
export const DECISION_LABELS = [LABEL_POS, LABEL_NEG] as const
