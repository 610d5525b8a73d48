/**
 * SVG rendering of the two comparison panels.
 *
 * Panel "trajectory": number versus time. Oracle mean solid, NPW mean
 * dashed with dotted +-precision band edges, P+ mean dash-dot with dotted
 * band edges. Missing values (a diverged method) break the polyline, so
 * curves stop at the divergence marker.
 *
 * Panel "accuracy_precision": accuracy and precision for both stochastic
 * methods on a log scale; values are floored at 1e-12 before taking logs
 * (accuracy is exactly zero at t=0).
 */

import { CompareTable } from './csv.js'

export const LOG_FLOOR = 1e-12

const W = 720
const H = 480
const MARGIN = { left: 64, right: 16, top: 24, bottom: 44 }

const COLORS = {
  oracle: '#2ca02c',
  npw: '#d62728',
  pplus: '#1f77b4',
}

interface Scale {
  (x: number): number
}

function linearScale(lo: number, hi: number, outLo: number, outHi: number): Scale {
  const span = hi - lo || 1
  return (x) => outLo + ((x - lo) / span) * (outHi - outLo)
}

/** Polyline path that breaks wherever a coordinate is not finite. */
function brokenPath(xs: number[], ys: number[], sx: Scale, sy: Scale): string {
  const parts: string[] = []
  let pen = false
  for (let i = 0; i < xs.length; i++) {
    if (!isFinite(xs[i]) || !isFinite(ys[i])) {
      pen = false
      continue
    }
    const cmd = pen ? 'L' : 'M'
    parts.push(`${cmd}${sx(xs[i]).toFixed(2)},${sy(ys[i]).toFixed(2)}`)
    pen = true
  }
  return parts.join(' ')
}

function finiteExtent(arrays: number[][]): [number, number] {
  let lo = Infinity
  let hi = -Infinity
  for (const arr of arrays) {
    for (const v of arr) {
      if (isFinite(v)) {
        if (v < lo) lo = v
        if (v > hi) hi = v
      }
    }
  }
  if (!isFinite(lo)) throw new Error('no finite data to plot')
  if (lo === hi) {
    lo -= 1
    hi += 1
  }
  return [lo, hi]
}

function axisTicks(lo: number, hi: number, n = 6): number[] {
  const span = hi - lo
  const step = Math.pow(10, Math.floor(Math.log10(span / n)))
  const mult = [1, 2, 5, 10].find((m) => span / (step * m) <= n) ?? 10
  const s = step * mult
  const first = Math.ceil(lo / s) * s
  const ticks: number[] = []
  for (let v = first; v <= hi + 1e-12 * span; v += s) ticks.push(v)
  return ticks
}

interface Curve {
  xs: number[]
  ys: number[]
  color: string
  dash: string // stroke-dasharray, '' for solid
  label: string
  width?: number
}

function panelSvg(
  curves: Curve[],
  opts: {
    xLabel: string
    yLabel: string
    logY?: boolean
    xLim?: [number, number]
    yLim?: [number, number]
  },
): string {
  const xExtent = opts.xLim ?? finiteExtent(curves.map((c) => c.xs))
  const yExtent = opts.yLim ?? finiteExtent(curves.map((c) => c.ys))
  const sx = linearScale(xExtent[0], xExtent[1], MARGIN.left, W - MARGIN.right)
  const sy = linearScale(yExtent[0], yExtent[1], H - MARGIN.bottom, MARGIN.top)

  const body: string[] = []
  body.push(
    `<rect x="${MARGIN.left}" y="${MARGIN.top}" width="${W - MARGIN.left - MARGIN.right}" ` +
      `height="${H - MARGIN.top - MARGIN.bottom}" fill="none" stroke="#333"/>`,
  )
  for (const t of axisTicks(xExtent[0], xExtent[1])) {
    const x = sx(t)
    body.push(
      `<line x1="${x.toFixed(2)}" y1="${H - MARGIN.bottom}" x2="${x.toFixed(2)}" ` +
        `y2="${H - MARGIN.bottom + 5}" stroke="#333"/>`,
      `<text x="${x.toFixed(2)}" y="${H - MARGIN.bottom + 18}" text-anchor="middle" ` +
        `font-size="11">${formatTick(t, false)}</text>`,
    )
  }
  for (const t of axisTicks(yExtent[0], yExtent[1])) {
    const y = sy(t)
    body.push(
      `<line x1="${MARGIN.left - 5}" y1="${y.toFixed(2)}" x2="${MARGIN.left}" ` +
        `y2="${y.toFixed(2)}" stroke="#333"/>`,
      `<text x="${MARGIN.left - 8}" y="${(y + 4).toFixed(2)}" text-anchor="end" ` +
        `font-size="11">${formatTick(t, opts.logY ?? false)}</text>`,
    )
  }
  for (const c of curves) {
    const d = brokenPath(c.xs, c.ys, sx, sy)
    if (d.length === 0) continue
    const dash = c.dash ? ` stroke-dasharray="${c.dash}"` : ''
    body.push(
      `<path d="${d}" fill="none" stroke="${c.color}" ` +
        `stroke-width="${c.width ?? 1.5}"${dash} data-label="${c.label}"/>`,
    )
  }
  // legend
  let ly = MARGIN.top + 14
  for (const c of curves) {
    if (!c.label) continue
    const dash = c.dash ? ` stroke-dasharray="${c.dash}"` : ''
    body.push(
      `<line x1="${W - 190}" y1="${ly - 4}" x2="${W - 160}" y2="${ly - 4}" ` +
        `stroke="${c.color}" stroke-width="2"${dash}/>`,
      `<text x="${W - 154}" y="${ly}" font-size="11">${c.label}</text>`,
    )
    ly += 16
  }
  body.push(
    `<text x="${(MARGIN.left + W - MARGIN.right) / 2}" y="${H - 8}" ` +
      `text-anchor="middle" font-size="12">${opts.xLabel}</text>`,
    `<text x="16" y="${(MARGIN.top + H - MARGIN.bottom) / 2}" text-anchor="middle" ` +
      `font-size="12" transform="rotate(-90 16 ${(MARGIN.top + H - MARGIN.bottom) / 2})">` +
      `${opts.yLabel}</text>`,
  )
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" width="${W}" height="${H}" ` +
    `viewBox="0 0 ${W} ${H}" font-family="sans-serif">\n` +
    body.join('\n') +
    '\n</svg>\n'
  )
}

function formatTick(v: number, logY: boolean): string {
  if (logY) return `1e${Math.round(v)}`
  if (v === 0) return '0'
  const a = Math.abs(v)
  if (a >= 1e4 || a < 1e-3) return v.toExponential(0)
  return String(Math.round(v * 1e6) / 1e6)
}

function col(table: CompareTable, name: string): number[] {
  const v = table.data.get(name)
  if (v === undefined) throw new Error(`column ${name} missing`)
  return v
}

function bandEdges(mean: number[], prec: number[]): [number[], number[]] {
  const up = mean.map((m, i) => m + prec[i])
  const dn = mean.map((m, i) => m - prec[i])
  return [up, dn]
}

/** Panel (a): number versus time with uncertainty band edges. */
export function renderTrajectoryPanel(table: CompareTable): string {
  const t = col(table, 't')
  const curves: Curve[] = []
  const [npwUp, npwDn] = bandEdges(col(table, 'npw_mean_n'), col(table, 'npw_precision'))
  const [ppUp, ppDn] = bandEdges(col(table, 'pplus_mean_n'), col(table, 'pplus_precision'))
  curves.push(
    { xs: t, ys: col(table, 'oracle_mean_n'), color: COLORS.oracle, dash: '', label: 'benchmark' },
    { xs: t, ys: col(table, 'npw_mean_n'), color: COLORS.npw, dash: '8 4', label: 'NPW' },
    { xs: t, ys: npwUp, color: COLORS.npw, dash: '2 4', label: '', width: 1 },
    { xs: t, ys: npwDn, color: COLORS.npw, dash: '2 4', label: '', width: 1 },
    { xs: t, ys: col(table, 'pplus_mean_n'), color: COLORS.pplus, dash: '10 4 2 4', label: 'P+' },
    { xs: t, ys: ppUp, color: COLORS.pplus, dash: '2 4', label: '', width: 1 },
    { xs: t, ys: ppDn, color: COLORS.pplus, dash: '2 4', label: '', width: 1 },
  )
  return panelSvg(curves, { xLabel: 'time', yLabel: 'number' })
}

/** Panel (b): log10 accuracy and precision for both stochastic methods. */
export function renderAccuracyPrecisionPanel(table: CompareTable): string {
  const t = col(table, 't')
  const log10 = (arr: number[]) =>
    arr.map((v) => (isFinite(v) ? Math.log10(Math.max(v, LOG_FLOOR)) : NaN))
  const curves: Curve[] = [
    { xs: t, ys: log10(col(table, 'npw_accuracy')), color: COLORS.npw, dash: '', label: 'NPW accuracy' },
    { xs: t, ys: log10(col(table, 'npw_precision')), color: COLORS.npw, dash: '8 4', label: 'NPW precision' },
    { xs: t, ys: log10(col(table, 'pplus_accuracy')), color: COLORS.pplus, dash: '10 4 2 4', label: 'P+ accuracy' },
    { xs: t, ys: log10(col(table, 'pplus_precision')), color: COLORS.pplus, dash: '2 4', label: 'P+ precision' },
  ]
  return panelSvg(curves, {
    xLabel: 'time',
    yLabel: 'log10(accuracy, precision)',
    logY: true,
  })
}

export type PanelName = 'trajectory' | 'accuracy_precision'

export function renderPanel(table: CompareTable, panel: PanelName): string {
  return panel === 'trajectory'
    ? renderTrajectoryPanel(table)
    : renderAccuracyPrecisionPanel(table)
}
