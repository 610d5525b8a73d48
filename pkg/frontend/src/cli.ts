/**
 * npwsim-render: produce figure panels from a compare CSV.
 *
 *   npwsim-render render --in results/compare.csv --out-dir figs/ --panel both
 *
 * Panels: "trajectory", "accuracy_precision", or "both". Output files are
 * SVG, named after the panel. Exit code 0 on success, 2 on usage/schema
 * errors, 1 on I/O failures.
 */

import { mkdirSync, writeFileSync } from 'node:fs'
import { join } from 'node:path'

import { loadCompareCsv, SchemaError } from './csv.js'
import { renderPanel, PanelName } from './render.js'

interface Args {
  input: string
  outDir: string
  panel: 'both' | PanelName
}

export function parseArgs(argv: string[]): Args {
  if (argv[0] !== 'render') {
    throw new UsageError(`unknown command ${argv[0] ?? '(none)'}; expected "render"`)
  }
  let input: string | undefined
  let outDir: string | undefined
  let panel: Args['panel'] = 'both'
  for (let i = 1; i < argv.length; i++) {
    const a = argv[i]
    if (a === '--in') input = argv[++i]
    else if (a === '--out-dir') outDir = argv[++i]
    else if (a === '--panel') {
      const p = argv[++i]
      if (p !== 'both' && p !== 'trajectory' && p !== 'accuracy_precision') {
        throw new UsageError(`invalid --panel ${p}`)
      }
      panel = p
    } else throw new UsageError(`unknown flag ${a}`)
  }
  if (!input) throw new UsageError('--in is required')
  if (!outDir) throw new UsageError('--out-dir is required')
  return { input, outDir, panel }
}

export class UsageError extends Error {}

export function runRender(args: Args): string[] {
  const table = loadCompareCsv(args.input)
  const panels: PanelName[] =
    args.panel === 'both' ? ['trajectory', 'accuracy_precision'] : [args.panel]
  mkdirSync(args.outDir, { recursive: true })
  const written: string[] = []
  for (const p of panels) {
    const path = join(args.outDir, `${p}.svg`)
    writeFileSync(path, renderPanel(table, p), 'utf-8')
    written.push(path)
  }
  return written
}

export function main(argv: string[]): number {
  try {
    const files = runRender(parseArgs(argv))
    for (const f of files) console.log(f)
    return 0
  } catch (err) {
    if (err instanceof UsageError || err instanceof SchemaError) {
      console.error(`error: ${(err as Error).message}`)
      return 2
    }
    console.error(`error: ${(err as Error).message}`)
    return 1
  }
}

const invokedDirectly =
  process.argv[1] !== undefined &&
  import.meta.url === new URL(`file://${process.argv[1]}`).href
if (invokedDirectly) {
  process.exit(main(process.argv.slice(2)))
}
