/**
 * Reader for the experiment CSVs: `#`-prefixed header lines carry the run
 * config, a single column row follows, then data rows. Comment lines after
 * the first data row are footer metadata (e.g. regression summaries).
 */
import { readFileSync } from "fs";

export class SchemaError extends Error {}

export interface CsvTable {
  /** config header lines, `#` stripped */
  header: string[];
  columns: string[];
  /** column name -> values as strings */
  cells: Map<string, string[]>;
  nRows: number;
  /** footer `# key = value` entries */
  footer: Map<string, string>;
}

export function parseCsv(path: string): CsvTable {
  const text = readFileSync(path, "utf-8");
  const header: string[] = [];
  const footer = new Map<string, string>();
  let columns: string[] | null = null;
  const rows: string[][] = [];

  for (const raw of text.split("\n")) {
    const line = raw.trimEnd();
    if (line.length === 0) continue;
    if (line.startsWith("#")) {
      const body = line.replace(/^#\s*/, "");
      if (columns === null) {
        header.push(body);
      } else {
        const eq = body.indexOf("=");
        if (eq > 0) footer.set(body.slice(0, eq).trim(), body.slice(eq + 1).trim());
      }
      continue;
    }
    if (columns === null) {
      columns = line.split(",");
    } else {
      rows.push(line.split(","));
    }
  }
  if (columns === null) throw new SchemaError(`${path}: no column row found`);

  const cells = new Map<string, string[]>();
  columns.forEach((name, i) => {
    cells.set(
      name,
      rows.map((r) => r[i] ?? ""),
    );
  });
  return { header, columns, cells, nRows: rows.length, footer };
}

/**
 * Check the table against the expected schema: missing columns are hard
 * errors; unknown columns only warn and are ignored.
 */
export function requireColumns(table: CsvTable, required: string[], optional: string[] = []): void {
  for (const name of required) {
    if (!table.columns.includes(name)) {
      throw new SchemaError(`missing required column '${name}' (have: ${table.columns.join(", ")})`);
    }
  }
  const known = new Set([...required, ...optional]);
  for (const name of table.columns) {
    if (!known.has(name)) {
      console.warn(`warning: ignoring unknown column '${name}'`);
    }
  }
}

export function numbers(table: CsvTable, column: string): number[] {
  const raw = table.cells.get(column);
  if (raw === undefined) throw new SchemaError(`missing required column '${column}'`);
  return raw.map((s, i) => {
    const v = Number(s);
    if (Number.isNaN(v)) throw new SchemaError(`column '${column}' row ${i + 1}: not a number: '${s}'`);
    return v;
  });
}

export function strings(table: CsvTable, column: string): string[] {
  const raw = table.cells.get(column);
  if (raw === undefined) throw new SchemaError(`missing required column '${column}'`);
  return raw;
}
