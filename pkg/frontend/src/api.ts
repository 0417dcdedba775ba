import type {
  ConflictReport,
  CreatedSession,
  DecisionAck,
  EditRequest,
  RuleJson,
  RulesPayload,
  StepPayload,
} from './types.js'

export class ApiError extends Error {
  constructor(readonly status: number, readonly code: string, message: string) {
    super(message)
  }
}

async function parse<T>(response: Response): Promise<T> {
  const data = await response.json()
  if (!response.ok) {
    const err = (data && data.error) || {}
    throw new ApiError(response.status, err.code ?? 'unknown', err.message ?? 'request failed')
  }
  return data as T
}

/** Thin typed wrapper over the service HTTP+JSON API. */
export class ApiClient {
  constructor(private readonly baseUrl: string = '') {}

  private url(path: string): string {
    return `${this.baseUrl}${path}`
  }

  private async post<T>(path: string, body: unknown): Promise<T> {
    const response = await fetch(this.url(path), {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(body),
    })
    return parse<T>(response)
  }

  async createSession(participantId: string, condition: string, seed: number): Promise<CreatedSession> {
    return this.post('/sessions', { participant_id: participantId, condition, seed })
  }

  async next(sessionId: string): Promise<StepPayload> {
    const response = await fetch(this.url(`/sessions/${sessionId}/next`))
    return parse<StepPayload>(response)
  }

  async submitDecision(
    sessionId: string,
    caseId: string,
    decision: string,
    phase: 'pre' | 'final' = 'final',
  ): Promise<DecisionAck> {
    return this.post(`/sessions/${sessionId}/decisions`, { case_id: caseId, decision, phase })
  }

  async getRules(sessionId: string): Promise<RulesPayload> {
    const response = await fetch(this.url(`/sessions/${sessionId}/rules`))
    return parse<RulesPayload>(response)
  }

  async putEdit(sessionId: string, edit: EditRequest): Promise<{ rules: RulesPayload['rules'] }> {
    const response = await fetch(this.url(`/sessions/${sessionId}/rules`), {
      method: 'PUT',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ edit }),
    })
    return parse(response)
  }

  async checkRule(sessionId: string, rule: RuleJson): Promise<ConflictReport> {
    return this.post(`/sessions/${sessionId}/rules/check`, { rule })
  }

  async finalizeRules(sessionId: string): Promise<{ ok: boolean; stage: string }> {
    return this.post(`/sessions/${sessionId}/rules/finalize`, {})
  }

  async submitSurvey(sessionId: string, answers: Record<string, number | string>): Promise<{ ok: boolean; stage: string }> {
    return this.post(`/sessions/${sessionId}/survey`, { answers })
  }
}
