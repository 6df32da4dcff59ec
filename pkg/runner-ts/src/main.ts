/**
 * Entry point: node dist/main.js TABLE_PATH FORMAT
 * Snippet code arrives on stdin; exactly one JSON reply line leaves on stdout.
 * Exit code is 0 for every properly reported outcome.
 */
import { RunnerReply, runSnippet } from "./runner";

function emit(reply: RunnerReply): void {
  process.stdout.write(JSON.stringify(reply) + "\n");
}

async function readStdin(): Promise<string> {
  const chunks: Buffer[] = [];
  for await (const chunk of process.stdin) {
    chunks.push(Buffer.from(chunk));
  }
  return Buffer.concat(chunks).toString("utf-8");
}

async function main(): Promise<number> {
  const args = process.argv.slice(2);
  if (args.length !== 2) {
    emit({
      status: "error",
      error_name: "UsageError",
      message: "expected: TABLE_PATH FORMAT",
      trace: "",
    });
    return 0;
  }
  const code = await readStdin();
  emit(runSnippet(code, args[0], args[1]));
  return 0;
}

main().then(
  (code) => process.exit(code),
  (err) => {
    process.stderr.write(String(err) + "\n");
    process.exit(1);
  },
);
