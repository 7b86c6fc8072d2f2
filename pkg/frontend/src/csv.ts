import { readFileSync } from "fs";

export class MissingColumn extends Error {
  constructor(public column: string, public path: string) {
    super(`missing column "${column}" in ${path}`);
    this.name = "MissingColumn";
  }
}

export interface Table {
  path: string;
  header: string[];
  columns: Map<string, number[]>;
  rows: number;
}

/** Parse a plain numeric CSV with a single header line. */
export function readCsv(path: string): Table {
  const text = readFileSync(path, "utf8").trim();
  const lines = text.split(/\r?\n/);
  const header = lines[0].split(",").map((h) => h.trim());
  const columns = new Map<string, number[]>(header.map((h) => [h, []]));
  for (const line of lines.slice(1)) {
    if (!line.trim()) continue;
    const cells = line.split(",");
    header.forEach((h, i) => columns.get(h)!.push(Number(cells[i])));
  }
  return { path, header, columns, rows: lines.length - 1 };
}

export function requireColumns(table: Table, names: string[]): number[][] {
  return names.map((name) => {
    const col = table.columns.get(name);
    if (!col) throw new MissingColumn(name, table.path);
    return col;
  });
}
