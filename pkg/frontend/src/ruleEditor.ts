// The interactive rule-set editor: priority-ordered if-then rules with a
// per-rule check button, conflict badges, and a read-only browser of the
// participant's first-batch decisions. Every edit maps 1:1 to a PUT.

import type {
  ConditionJson,
  ConflictReport,
  EditRequest,
  HistoryRow,
  RuleJson,
  RuleSetJson,
} from './types.js'

export interface EditorBackend {
  putEdit(edit: EditRequest): Promise<{ rules: RuleSetJson }>
  checkRule(rule: RuleJson): Promise<ConflictReport>
  finalize(): Promise<unknown>
}

export function conditionText(condition: ConditionJson): string {
  const value = Array.isArray(condition.value)
    ? `{${condition.value.join(', ')}}`
    : String(condition.value)
  const op = condition.op === 'in' ? 'is one of' : condition.op
  return `${condition.feature} ${op} ${value}`
}

export function ruleText(rule: RuleJson): string {
  const clauses = rule.conditions.map(conditionText).join(' AND ')
  return `IF ${clauses} THEN ${rule.prediction}`
}

export function renderConflictBadge(report: Pick<ConflictReport, 'history_conflicts' | 'rule_conflicts'>): HTMLElement {
  const badge = document.createElement('span')
  badge.dataset.role = 'conflict-badge'
  const history = report.history_conflicts.length
  const rules = report.rule_conflicts.length
  badge.dataset.historyCount = String(history)
  badge.dataset.ruleCount = String(rules)
  if (history === 0 && rules === 0) {
    badge.textContent = '0 conflicts'
    badge.className = 'badge badge-clean'
  } else {
    badge.textContent =
      `${history} past decision${history === 1 ? '' : 's'} conflict, ` +
      `${rules} rule${rules === 1 ? '' : 's'} conflict`
    badge.className = 'badge badge-conflict'
  }
  return badge
}

function historyTable(rows: HistoryRow[], highlight: Set<string>): HTMLElement {
  const table = document.createElement('table')
  table.dataset.role = 'history'
  for (const row of rows) {
    const tr = table.insertRow()
    tr.dataset.caseId = row.case_id
    if (highlight.has(row.case_id)) tr.classList.add('conflict-row')
    for (const value of Object.values(row.values)) {
      tr.insertCell().textContent = String(value)
    }
    tr.insertCell().textContent = row.decision
  }
  return table
}

export class RuleEditor {
  private rules: RuleJson[]
  readonly element: HTMLElement

  constructor(
    ruleset: RuleSetJson,
    private readonly history: HistoryRow[],
    private readonly backend: EditorBackend,
  ) {
    this.rules = [...ruleset.rules].sort((a, b) => a.priority - b.priority)
    this.element = document.createElement('div')
    this.element.dataset.role = 'rule-editor'
    this.render()
  }

  private render(): void {
    this.element.replaceChildren()

    const list = document.createElement('ol')
    list.dataset.role = 'rule-list'
    for (const rule of this.rules) {
      list.appendChild(this.ruleRow(rule))
    }
    this.element.appendChild(list)

    if (this.rules.length === 0) {
      const notice = document.createElement('p')
      notice.dataset.role = 'fallback-notice'
      notice.textContent =
        'No rules left: every case will use the system-initialized model.'
      this.element.appendChild(notice)
    }

    const historySection = document.createElement('section')
    historySection.dataset.role = 'history-browser'
    const title = document.createElement('h3')
    title.textContent = 'Your first-batch decisions (read-only)'
    historySection.appendChild(title)
    historySection.appendChild(historyTable(this.history, new Set()))
    this.element.appendChild(historySection)
  }

  private ruleRow(rule: RuleJson): HTMLElement {
    const row = document.createElement('li')
    row.dataset.role = 'rule'
    row.dataset.ruleId = rule.id

    const text = document.createElement('span')
    text.textContent = ruleText(rule)
    row.appendChild(text)

    const checkButton = document.createElement('button')
    checkButton.dataset.role = 'check-button'
    checkButton.textContent = 'Check'
    checkButton.addEventListener('click', () => void this.check(rule, row))
    row.appendChild(checkButton)

    const deleteButton = document.createElement('button')
    deleteButton.dataset.role = 'delete-button'
    deleteButton.textContent = 'Delete'
    deleteButton.addEventListener('click', () => void this.delete(rule.id))
    row.appendChild(deleteButton)
    return row
  }

  async check(rule: RuleJson, row: HTMLElement): Promise<ConflictReport> {
    const report = await this.backend.checkRule(rule)
    row.querySelector('[data-role="conflict-badge"]')?.remove()
    row.appendChild(renderConflictBadge(report))
    const browser = this.element.querySelector('[data-role="history-browser"]')
    if (browser) {
      browser.querySelector('[data-role="history"]')?.remove()
      browser.appendChild(
        historyTable(this.history, new Set(report.history_conflicts)))
    }
    return report
  }

  async add(rule: RuleJson, position?: number): Promise<void> {
    await this.apply({ action: 'add', rule, position: position ?? null })
  }

  async delete(ruleId: string): Promise<void> {
    await this.apply({ action: 'delete', rule_id: ruleId })
  }

  async modify(ruleId: string, changes: { conditions?: ConditionJson[]; prediction?: string }): Promise<void> {
    await this.apply({
      action: 'modify', rule_id: ruleId,
      conditions: changes.conditions ?? null,
      prediction: changes.prediction ?? null,
    })
  }

  private async apply(edit: EditRequest): Promise<void> {
    const updated = await this.backend.putEdit(edit)
    this.rules = [...updated.rules.rules].sort((a, b) => a.priority - b.priority)
    this.render()
  }
}
