/**
 * Snippet execution and reply construction for the sandbox wire protocol.
 *
 * Contract (shared with the orchestrator): the reply is a single JSON line;
 * status "ok" carries value + value_kind, status "error" carries error_name +
 * message; whatever the snippet prints is demoted into the trace field.
 */
import * as vm from "vm";

import { Cell, DataFrame, Series, loadTable, snippetView } from "./dataframe";

export type RunnerReply =
  | { status: "ok"; value: unknown; value_kind: string; trace: string }
  | { status: "error"; error_name: string; message: string; trace: string };

function scalar(v: unknown): Cell {
  if (v === null || v === undefined) return null;
  if (typeof v === "boolean" || typeof v === "string") return v;
  if (typeof v === "number") return Number.isFinite(v) ? v : null;
  return String(v);
}

/** Map a result value to (value, value_kind). Single-element sequences stay
 * lists; non-finite numbers and missing values become null; anything
 * non-serializable becomes its text rendering. */
export function serialize(obj: unknown): { value: unknown; value_kind: string } {
  if (obj === null || obj === undefined) return { value: null, value_kind: "null" };
  if (typeof obj === "boolean") return { value: obj, value_kind: "boolean" };
  if (typeof obj === "number") {
    if (!Number.isFinite(obj)) return { value: null, value_kind: "null" };
    return { value: obj, value_kind: "number" };
  }
  if (typeof obj === "string") return { value: obj, value_kind: "text" };
  if (obj instanceof Series) {
    return { value: obj.toList().map(scalar), value_kind: "list" };
  }
  if (Array.isArray(obj)) {
    return { value: obj.map(scalar), value_kind: "list" };
  }
  if (obj instanceof Set) {
    const items = [...obj].map(scalar);
    items.sort((a, b) => JSON.stringify(a).localeCompare(JSON.stringify(b)));
    return { value: items, value_kind: "list" };
  }
  if (obj instanceof DataFrame) {
    if (obj.columns.length === 1) {
      return { value: obj.col(obj.columns[0]).toList().map(scalar), value_kind: "list" };
    }
    return { value: `DataFrame(${obj.columns.join(", ")})`, value_kind: "text" };
  }
  return { value: String(obj), value_kind: "text" };
}

function errorReply(err: unknown, trace: string): RunnerReply {
  const e = err instanceof Error ? err : new Error(String(err));
  return {
    status: "error",
    error_name: e.name || "Error",
    message: e.message,
    trace,
  };
}

export function runSnippet(code: string, tablePath: string, format: string): RunnerReply {
  const printed: string[] = [];
  const capture = (...args: unknown[]) =>
    printed.push(args.map((a) => (typeof a === "string" ? a : String(a))).join(" "));

  let df: DataFrame;
  try {
    df = loadTable(tablePath, format);
  } catch (err) {
    return errorReply(err, "");
  }

  let script: vm.Script;
  try {
    script = new vm.Script(code, { filename: "<snippet>" });
  } catch (err) {
    return errorReply(err, "");
  }

  const context = vm.createContext({
    df: snippetView(df),
    console: { log: capture, error: capture, warn: capture, info: capture },
    Math,
    JSON,
  });
  try {
    script.runInContext(context);
  } catch (err) {
    return errorReply(err, printed.join("\n"));
  }

  if (!("result" in context)) {
    return {
      status: "error",
      error_name: "NoResultBinding",
      message: "snippet did not bind a variable named result",
      trace: printed.join("\n"),
    };
  }
  const { value, value_kind } = serialize(context.result);
  return { status: "ok", value, value_kind, trace: printed.join("\n") };
}
