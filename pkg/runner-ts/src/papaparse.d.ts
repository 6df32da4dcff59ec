// Minimal typing for the papaparse API surface used by this package.
declare module "papaparse" {
  export interface ParseError {
    type: string;
    code: string;
    message: string;
    row?: number;
  }

  export interface ParseResult<T> {
    data: T[];
    errors: ParseError[];
  }

  export interface ParseConfig {
    skipEmptyLines?: boolean | "greedy";
    delimiter?: string;
  }

  export function parse<T>(input: string, config?: ParseConfig): ParseResult<T>;

  const Papa: { parse: typeof parse };
  export default Papa;
}
