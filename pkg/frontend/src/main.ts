import { ApiClient } from './api.js'
import { SessionRunner } from './session.js'
import { renderConditionScreen, revealAi } from './render.js'
import type { StepPayload } from './types.js'
import { LABEL_NEG, LABEL_POS } from './types.js'

// Interactive bootstrap: creates a session from the query string and walks
// the five stages, pausing at every decision for a real click.

function param(name: string, fallback: string): string {
  return new URLSearchParams(window.location.search).get(name) ?? fallback
}

async function interactiveLoop(api: ApiClient, sessionId: string, root: HTMLElement): Promise<void> {
  for (;;) {
    const step = await api.next(sessionId)
    if (step.stage === 'done') {
      root.replaceChildren()
      const done = document.createElement('p')
      done.textContent = 'Session complete. Thank you!'
      root.appendChild(done)
      return
    }
    if (step.batch_complete) continue
    if (step.stage === 'intro') {
      root.textContent = step.tutorial?.task ?? ''
      continue
    }
    if (step.stage === 'rule_editing') {
      // minimal flow: accept the initialized rules as-is
      await api.getRules(sessionId)
      await api.finalizeRules(sessionId)
      continue
    }
    if (step.stage === 'survey') {
      await api.submitSurvey(sessionId, { trust_in_ai: 4 })
      continue
    }
    await decisionInteraction(api, sessionId, root, step)
  }
}

function decisionInteraction(
  api: ApiClient,
  sessionId: string,
  root: HTMLElement,
  step: StepPayload,
): Promise<void> {
  return new Promise((resolve, reject) => {
    const caseId = step.case?.id
    if (!caseId) return reject(new Error('no case in step'))
    const screen = renderConditionScreen(root, step, {
      onPreDecision: (decision) => {
        void api.submitDecision(sessionId, caseId, decision, 'pre').then((ack) => {
          if (ack.reveal) revealAi(screen, ack.reveal, step.presentation?.show_ai_confidence ?? false)
        })
      },
      onFinalDecision: (decision) => {
        void api.submitDecision(sessionId, caseId, decision, 'final')
          .then(() => resolve())
          .catch(reject)
      },
    })
  })
}

async function boot(): Promise<void> {
  const root = document.getElementById('app')
  if (!root) throw new Error('missing #app root')
  const api = new ApiClient(param('base', ''))
  const created = await api.createSession(
    param('participant', `p-${Date.now()}`),
    param('condition', 'DirectDisplay'),
    Number(param('seed', '1')),
  )
  await interactiveLoop(api, created.session_id, root)
}

if (typeof window !== 'undefined' && typeof document !== 'undefined' && document.getElementById('app')) {
  void boot()
}

export { interactiveLoop, decisionInteraction, LABEL_POS, LABEL_NEG }
export { SessionRunner } from './session.js'
