// Decision-screen rendering. Everything shown comes from the step payload;
// a widget exists exactly when its presentation flag is true, and elements
// carrying server data are tagged with data-bound="<datum>" so the leak
// test can verify structurally that hidden data never reaches the DOM.

import { renderGauge } from './gauge.js'
import type { AiBlock, StepPayload } from './types.js'
import { DECISION_LABELS } from './types.js'

export class RenderError extends Error {}

export interface DecisionHandlers {
  onPreDecision?: (decision: string) => void
  onFinalDecision?: (decision: string) => void
}

function profileArea(step: StepPayload): HTMLElement {
  const card = step.case
  if (!card) throw new RenderError('step payload has no case card')
  const area = document.createElement('section')
  area.dataset.role = 'profile'
  const table = document.createElement('table')
  for (const [name, value] of Object.entries(card.values)) {
    const row = table.insertRow()
    row.insertCell().textContent = name
    row.insertCell().textContent = String(value)
  }
  area.appendChild(table)
  return area
}

function decisionButtons(role: string, onClick?: (decision: string) => void): HTMLElement {
  const panel = document.createElement('div')
  panel.dataset.role = role
  for (const label of DECISION_LABELS) {
    const button = document.createElement('button')
    button.textContent = label
    button.dataset.decision = label
    if (onClick) button.addEventListener('click', () => onClick(label))
    panel.appendChild(button)
  }
  return panel
}

export function renderAiPanel(ai: AiBlock, showConfidence: boolean): HTMLElement {
  const panel = document.createElement('section')
  panel.dataset.role = 'ai-panel'

  if (ai.label !== undefined) {
    const recommendation = document.createElement('p')
    recommendation.dataset.role = 'ai-recommendation'
    recommendation.dataset.bound = 'ai-label'
    recommendation.textContent = `AI recommendation: ${ai.label}`
    panel.appendChild(recommendation)
  }
  if (showConfidence && ai.confidence !== undefined) {
    const confidence = document.createElement('p')
    confidence.dataset.role = 'ai-confidence'
    confidence.dataset.bound = 'ai-confidence'
    confidence.textContent = `AI confidence: ${(ai.confidence * 100).toFixed(1)}%`
    panel.appendChild(confidence)
  }
  if (ai.explanation) {
    const explanation = document.createElement('ul')
    explanation.dataset.role = 'ai-explanation'
    for (const item of ai.explanation.contributions) {
      const row = document.createElement('li')
      row.dataset.feature = item.feature
      row.textContent =
        `${item.feature}: pushes toward ${item.toward} (strength ${item.magnitude.toFixed(3)})`
      explanation.appendChild(row)
    }
    panel.appendChild(explanation)
  }
  return panel
}

function clPanel(step: StepPayload): HTMLElement {
  const cl = step.cl
  const presentation = step.presentation
  if (!cl || cl.ai_cl === null) throw new RenderError('CL flags set but no CL payload')
  const panel = document.createElement('section')
  panel.dataset.role = 'cl-panel'

  if (presentation && presentation.summary_text) {
    const summary = document.createElement('p')
    summary.dataset.role = 'cl-summary'
    summary.textContent = presentation.summary_text
    panel.appendChild(summary)
  }
  const gauges = document.createElement('div')
  gauges.dataset.role = 'cl-gauges'
  const human = renderGauge('Your estimated correctness likelihood', cl.human_cl, 'human-cl')
  human.title = `Based on ${cl.neighbor_trace.length} similar past cases`
  const ai = renderGauge("The AI's correctness likelihood", cl.ai_cl, 'ai-cl')
  gauges.appendChild(human)
  gauges.appendChild(ai)
  panel.appendChild(gauges)
  return panel
}

function validate(step: StepPayload): asserts step is StepPayload & {
  presentation: NonNullable<StepPayload['presentation']>
} {
  const p = step.presentation
  if (!p) throw new RenderError('step payload has no presentation')
  const flags = ['show_ai_recommendation', 'show_ai_confidence', 'show_human_cl',
                 'show_ai_cl', 'show_explanation', 'require_pre_decision'] as const
  for (const flag of flags) {
    if (typeof p[flag] !== 'boolean') throw new RenderError(`presentation flag ${flag} malformed`)
  }
  if (p.show_human_cl && p.show_ai_cl && !step.cl) {
    throw new RenderError('presentation shows CL but payload carries none')
  }
  if (p.show_ai_recommendation && !p.require_pre_decision && step.ai?.label === undefined) {
    throw new RenderError('presentation shows a recommendation but payload carries none')
  }
}

/**
 * The decision screen for one step. For a gated step (pre-decision
 * required) the AI panel is absent until `revealAi` is called with the
 * server's reveal payload; the pre-decision controls lock after commit.
 */
export function renderDecisionScreen(step: StepPayload, handlers: DecisionHandlers = {}): HTMLElement {
  validate(step)
  const presentation = step.presentation

  const screen = document.createElement('div')
  screen.dataset.role = 'decision-screen'
  screen.appendChild(profileArea(step))

  const decisionArea = document.createElement('section')
  decisionArea.dataset.role = 'decision-area'
  screen.appendChild(decisionArea)

  if (presentation.show_human_cl && presentation.show_ai_cl) {
    decisionArea.appendChild(clPanel(step))
  }

  if (presentation.require_pre_decision) {
    const prePanel = decisionButtons('pre-decision', (decision) => {
      for (const button of prePanel.querySelectorAll('button')) {
        button.setAttribute('disabled', 'disabled')
      }
      prePanel.dataset.committed = decision
      handlers.onPreDecision?.(decision)
    })
    const hint = document.createElement('p')
    hint.textContent = 'Commit your own decision first; the AI weighs in afterwards.'
    prePanel.prepend(hint)
    decisionArea.appendChild(prePanel)
  } else if (step.ai) {
    decisionArea.appendChild(renderAiPanel(step.ai, presentation.show_ai_confidence))
  }

  decisionArea.appendChild(decisionButtons('final-decision', handlers.onFinalDecision))
  return screen
}

/** Attach the AI block revealed after a committed pre-decision. */
export function revealAi(screen: HTMLElement, ai: AiBlock, showConfidence = false): void {
  const decisionArea = screen.querySelector('[data-role="decision-area"]')
  if (!decisionArea) throw new RenderError('not a decision screen')
  const finalPanel = decisionArea.querySelector('[data-role="final-decision"]')
  decisionArea.insertBefore(renderAiPanel(ai, showConfidence), finalPanel)
}

export function renderErrorScreen(message: string): HTMLElement {
  const screen = document.createElement('div')
  screen.dataset.role = 'error-screen'
  const text = document.createElement('p')
  text.textContent = message
  screen.appendChild(text)
  return screen
}

/** Render into the root, falling back to a full error screen on any
 * malformed payload: no partial renders. */
export function renderConditionScreen(
  root: HTMLElement,
  step: StepPayload,
  handlers: DecisionHandlers = {},
): HTMLElement {
  root.replaceChildren()
  let screen: HTMLElement
  try {
    screen = renderDecisionScreen(step, handlers)
  } catch (error) {
    screen = renderErrorScreen(error instanceof Error ? error.message : 'malformed payload')
  }
  root.appendChild(screen)
  return screen
}
