/**
 * Minimal columnar dataframe backing snippet execution. Cells are the protocol
 * scalars (string | number | boolean | null); list/map-shaped cell text is kept
 * as-is — decoding is the orchestrator's job, not the runner's.
 */
import { readFileSync } from "fs";
import Papa from "papaparse";

export type Cell = string | number | boolean | null;

/** Unknown column access; the name deliberately contains "Column" so the
 * orchestrator classifies it as a schema mismatch. */
export class ColumnLookupError extends Error {
  constructor(column: string) {
    super(`no column named '${column}'`);
    this.name = "ColumnLookupError";
  }
}

export class TableLoadError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "TableLoadError";
  }
}

export class Series {
  constructor(
    public readonly name: string,
    public readonly values: readonly Cell[],
  ) {}

  private numbers(): number[] {
    return this.values.filter((v): v is number => typeof v === "number");
  }

  count(): number {
    return this.values.filter((v) => v !== null).length;
  }

  sum(): number {
    return this.numbers().reduce((a, b) => a + b, 0);
  }

  mean(): number {
    const nums = this.numbers();
    return nums.reduce((a, b) => a + b, 0) / nums.length;
  }

  min(): number {
    return Math.min(...this.numbers());
  }

  max(): number {
    return Math.max(...this.numbers());
  }

  unique(): Cell[] {
    return [...new Set(this.values)];
  }

  toList(): Cell[] {
    return [...this.values];
  }

  filter(pred: (v: Cell, i: number) => boolean): Series {
    return new Series(this.name, this.values.filter(pred));
  }

  map(fn: (v: Cell, i: number) => Cell): Series {
    return new Series(this.name, this.values.map(fn));
  }

  at(i: number): Cell {
    const v = this.values[i];
    return v === undefined ? null : v;
  }

  get length(): number {
    return this.values.length;
  }
}

export class DataFrame {
  private readonly byName = new Map<string, Series>();

  constructor(
    public readonly columns: readonly string[],
    series: readonly Series[],
  ) {
    for (const s of series) this.byName.set(s.name, s);
  }

  col(name: string): Series {
    const found = this.byName.get(name);
    if (!found) throw new ColumnLookupError(name);
    return found;
  }

  has(name: string): boolean {
    return this.byName.has(name);
  }

  get rowCount(): number {
    const first = this.byName.get(this.columns[0]);
    return first ? first.length : 0;
  }
}

/** Snippets see `df` through this proxy: `df['Age']` / `df.Age` resolves a
 * column, unknown names throw ColumnLookupError, own members pass through. */
export function snippetView(df: DataFrame): DataFrame {
  return new Proxy(df, {
    get(target, prop, receiver) {
      if (typeof prop !== "string" || prop in target) {
        return Reflect.get(target, prop, receiver);
      }
      return target.col(prop);
    },
    has(target, prop) {
      if (typeof prop === "string" && target.has(prop)) return true;
      return Reflect.has(target, prop);
    },
  });
}

const NUMBER_PATTERN = /^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$/;
const NON_FINITE = new Set(["nan", "inf", "infinity", "+inf", "-inf", "+infinity", "-infinity"]);

/** Mirror of the orchestrator's field parsing: empty -> null, numeric text ->
 * number, non-finite spellings -> null, anything else stays text. */
export function parseScalar(raw: string): Cell {
  if (raw === "") return null;
  const trimmed = raw.trim();
  if (NON_FINITE.has(trimmed.toLowerCase())) return null;
  if (NUMBER_PATTERN.test(trimmed)) {
    const num = Number(trimmed);
    return Number.isFinite(num) ? num : null;
  }
  return raw;
}

function fromRows(header: string[], rows: Cell[][]): DataFrame {
  const series = header.map(
    (name, j) => new Series(name, rows.map((row) => (row[j] === undefined ? null : row[j]))),
  );
  return new DataFrame(header, series);
}

function loadCsv(path: string): DataFrame {
  const text = readFileSync(path, "utf-8");
  const parsed = Papa.parse<string[]>(text, { skipEmptyLines: true });
  if (parsed.errors.length > 0) {
    const first = parsed.errors[0];
    throw new TableLoadError(`${path}: ${first.message} (row ${first.row})`);
  }
  const data = parsed.data;
  if (data.length === 0) throw new TableLoadError(`empty file: ${path}`);
  const [header, ...rows] = data;
  return fromRows(header, rows.map((row) => row.map(parseScalar)));
}

function jsonCell(v: unknown): Cell {
  if (v === null || v === undefined) return null;
  if (typeof v === "boolean" || typeof v === "string") return v;
  if (typeof v === "number") return Number.isFinite(v) ? v : null;
  return JSON.stringify(v);
}

function loadJsonLines(path: string): DataFrame {
  const text = readFileSync(path, "utf-8");
  const header: string[] = [];
  const records: Record<string, unknown>[] = [];
  for (const [i, line] of text.split("\n").entries()) {
    if (!line.trim()) continue;
    let record: unknown;
    try {
      record = JSON.parse(line);
    } catch (err) {
      throw new TableLoadError(`${path}:${i + 1}: ${(err as Error).message}`);
    }
    if (typeof record !== "object" || record === null || Array.isArray(record)) {
      throw new TableLoadError(`${path}:${i + 1}: record is not an object`);
    }
    for (const key of Object.keys(record)) {
      if (!header.includes(key)) header.push(key);
    }
    records.push(record as Record<string, unknown>);
  }
  if (header.length === 0) throw new TableLoadError(`empty file: ${path}`);
  const rows = records.map((rec) => header.map((key) => jsonCell(rec[key])));
  return fromRows(header, rows);
}

export function loadTable(path: string, format: string): DataFrame {
  try {
    if (format === "jsonl" || format === "tabular-json-lines") {
      return loadJsonLines(path);
    }
    return loadCsv(path);
  } catch (err) {
    if (err instanceof TableLoadError) throw err;
    throw new TableLoadError((err as Error).message);
  }
}
