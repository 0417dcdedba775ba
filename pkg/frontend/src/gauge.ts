// A semicircular gauge for a correctness-likelihood value. The value is
// rendered as a percentage with exactly one decimal so tests can pin it.

export function formatPercent(value: number): string {
  return `${(value * 100).toFixed(1)}%`
}

export function renderGauge(label: string, value: number, bound: string): HTMLElement {
  const clamped = Math.max(0, Math.min(1, value))
  const container = document.createElement('div')
  container.className = 'gauge'
  container.dataset.role = 'gauge'
  container.dataset.bound = bound

  const svg = document.createElementNS('http://www.w3.org/2000/svg', 'svg')
  svg.setAttribute('viewBox', '0 0 100 60')
  svg.setAttribute('class', 'gauge-arc')

  const track = document.createElementNS('http://www.w3.org/2000/svg', 'path')
  track.setAttribute('d', 'M 10 55 A 40 40 0 0 1 90 55')
  track.setAttribute('class', 'gauge-track')
  svg.appendChild(track)

  const sweep = Math.PI * clamped
  const x = 50 - 40 * Math.cos(sweep)
  const y = 55 - 40 * Math.sin(Math.PI - sweep)
  const fill = document.createElementNS('http://www.w3.org/2000/svg', 'path')
  fill.setAttribute('d', `M 10 55 A 40 40 0 0 1 ${x.toFixed(2)} ${y.toFixed(2)}`)
  fill.setAttribute('class', 'gauge-fill')
  svg.appendChild(fill)
  container.appendChild(svg)

  const caption = document.createElement('div')
  caption.className = 'gauge-caption'
  caption.textContent = label

  const reading = document.createElement('div')
  reading.className = 'gauge-value'
  reading.textContent = formatPercent(clamped)

  container.appendChild(reading)
  container.appendChild(caption)
  return container
}
