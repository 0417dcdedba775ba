// Five-stage session runner. The client is a strict follower of the
// server's stage machine: it renders whatever /next returns and submits
// decisions only after the server acknowledges the previous one
// (optimistic UI is deliberately impossible here).

import type { ApiClient } from './api.js'
import { renderConditionScreen, revealAi } from './render.js'
import { RuleEditor } from './ruleEditor.js'
import type { StepPayload, SurveyQuestion } from './types.js'

export type StageListener = (stage: string, step: StepPayload) => void

export class SessionRunner {
  private stages: string[] = []

  constructor(
    private readonly api: ApiClient,
    private readonly sessionId: string,
    private readonly root: HTMLElement,
    private readonly onStage?: StageListener,
  ) {}

  visitedStages(): string[] {
    return [...this.stages]
  }

  private note(step: StepPayload): void {
    if (this.stages[this.stages.length - 1] !== step.stage) {
      this.stages.push(step.stage)
    }
    this.onStage?.(step.stage, step)
  }

  /** Drive the session to completion; decisionPolicy picks the labels. */
  async run(decisionPolicy: (step: StepPayload) => string): Promise<void> {
    for (;;) {
      const step = await this.api.next(this.sessionId)
      this.note(step)
      if (step.stage === 'done') {
        this.renderDone(step)
        return
      }
      if (step.batch_complete) continue
      switch (step.stage) {
        case 'intro':
          this.renderIntro(step)
          break
        case 'batch1':
        case 'batch2':
          await this.decisionStep(step, decisionPolicy)
          break
        case 'rule_editing':
          await this.ruleEditingStep()
          break
        case 'survey':
          await this.surveyStep(step.questionnaire ?? [])
          break
        default:
          throw new Error(`unknown stage ${step.stage}`)
      }
    }
  }

  private renderIntro(step: StepPayload): void {
    this.root.replaceChildren()
    const intro = document.createElement('section')
    intro.dataset.role = 'intro'
    const text = document.createElement('p')
    text.textContent = step.tutorial?.task ?? 'Welcome.'
    intro.appendChild(text)
    this.root.appendChild(intro)
  }

  private async decisionStep(
    step: StepPayload,
    decisionPolicy: (step: StepPayload) => string,
  ): Promise<void> {
    const caseId = step.case?.id
    if (!caseId) throw new Error('decision step without a case')
    const screen = renderConditionScreen(this.root, step)
    const decision = decisionPolicy(step)
    if (step.presentation?.require_pre_decision) {
      const ack = await this.api.submitDecision(this.sessionId, caseId, decision, 'pre')
      if (ack.reveal) {
        revealAi(screen, ack.reveal, step.presentation.show_ai_confidence)
      }
    }
    await this.api.submitDecision(this.sessionId, caseId, decision, 'final')
  }

  private async ruleEditingStep(): Promise<void> {
    const payload = await this.api.getRules(this.sessionId)
    this.root.replaceChildren()
    const editor = new RuleEditor(payload.rules, payload.history, {
      putEdit: (edit) => this.api.putEdit(this.sessionId, edit),
      checkRule: (rule) => this.api.checkRule(this.sessionId, rule),
      finalize: () => this.api.finalizeRules(this.sessionId),
    })
    this.root.appendChild(editor.element)
    await this.api.finalizeRules(this.sessionId)
  }

  private async surveyStep(questionnaire: SurveyQuestion[]): Promise<void> {
    this.root.replaceChildren()
    const form = document.createElement('form')
    form.dataset.role = 'survey'
    const answers: Record<string, number> = {}
    for (const question of questionnaire) {
      const label = document.createElement('label')
      label.textContent = question.text
      label.dataset.questionId = question.id
      form.appendChild(label)
      answers[question.id] = Math.ceil(question.scale / 2)
    }
    this.root.appendChild(form)
    await this.api.submitSurvey(this.sessionId, answers)
  }

  private renderDone(step: StepPayload): void {
    this.root.replaceChildren()
    const done = document.createElement('p')
    done.dataset.role = 'done'
    done.textContent = 'Session complete. Thank you!'
    this.root.appendChild(done)
  }
}
