/**
 * Parsing for the compare CSV written by the simulation CLI.
 *
 * The format is a one-line header of comma-separated column names followed
 * by numeric rows; empty fields are missing values (NaN here). A method's
 * channels go missing from its divergence time onward.
 */

import { readFileSync } from 'node:fs'

export interface CompareTable {
  columns: string[]
  /** column name -> values per row; missing entries are NaN */
  data: Map<string, number[]>
  rows: number
}

/** Columns every compare CSV must carry for the figure panels. */
export const REQUIRED_COLUMNS = [
  't',
  'oracle_mean_n',
  'pplus_mean_n',
  'pplus_precision',
  'pplus_accuracy',
  'npw_mean_n',
  'npw_precision',
  'npw_accuracy',
]

export class SchemaError extends Error {}

export function parseCompareCsv(text: string): CompareTable {
  const lines = text.split(/\r?\n/).filter((ln) => ln.length > 0)
  if (lines.length === 0) throw new SchemaError('empty CSV')
  const columns = lines[0].split(',')
  const missing = REQUIRED_COLUMNS.filter((c) => !columns.includes(c))
  if (missing.length > 0) {
    throw new SchemaError(`missing required columns: ${missing.join(', ')}`)
  }
  const data = new Map<string, number[]>(columns.map((c) => [c, []]))
  for (const line of lines.slice(1)) {
    const fields = line.split(',')
    if (fields.length !== columns.length) {
      throw new SchemaError(
        `row has ${fields.length} fields, header has ${columns.length}`,
      )
    }
    fields.forEach((f, i) => {
      data.get(columns[i])!.push(f === '' ? NaN : Number(f))
    })
  }
  return { columns, data, rows: lines.length - 1 }
}

export function loadCompareCsv(path: string): CompareTable {
  return parseCompareCsv(readFileSync(path, 'utf-8'))
}
