#!/usr/bin/env node
/**
 * plots render --spec <file.json>
 *
 * The spec file holds one plot spec or an array of them; paths inside are
 * resolved relative to the spec file. Schema violations exit non-zero with
 * the offending column named.
 */
import { SchemaError } from "./schema.js";
import { renderSpecFile } from "./render.js";

function usage(): void {
  console.error("usage: plots render --spec <file.json>");
}

export function main(argv: string[]): number {
  const [command, ...rest] = argv;
  if (command !== "render") {
    usage();
    return 2;
  }
  const flag = rest.indexOf("--spec");
  const specPath = flag >= 0 ? rest[flag + 1] : undefined;
  if (!specPath) {
    usage();
    return 2;
  }
  try {
    for (const path of renderSpecFile(specPath)) {
      console.log(`wrote ${path}`);
    }
    return 0;
  } catch (err) {
    if (err instanceof SchemaError) {
      console.error(`schema error: ${err.message}`);
      return 3;
    }
    throw err;
  }
}

process.exit(main(process.argv.slice(2)));
