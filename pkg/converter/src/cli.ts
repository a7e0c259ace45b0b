#!/usr/bin/env node
/** Command line: convert <name> <src> <dst> | verify <dst> */

import { convert } from "./convert.js";
import { DATASET_NAMES } from "./datasets.js";
import { verify } from "./verify.js";

function usage(): void {
	console.error("usage: gpn-convert convert <name> <src_dir> <dst_dir>");
	console.error("       gpn-convert verify <dst_dir>");
	console.error(`datasets: ${DATASET_NAMES.join(", ")}`);
}

export function main(argv: string[]): number {
	const [command, ...rest] = argv;
	if (command === "convert") {
		if (rest.length !== 3) {
			usage();
			return 2;
		}
		const [name, src, dst] = rest;
		try {
			const manifest = convert(name, src, dst);
			console.log(
				`${name}: ${manifest.n_nodes} nodes, ${manifest.n_edges} undirected edges ` +
				`(${manifest.n_edges_raw} raw), ${manifest.n_features} features, ` +
				`${manifest.n_classes} classes -> ${dst}`,
			);
			return 0;
		} catch (err) {
			console.error(`error: ${err instanceof Error ? err.message : err}`);
			return 1;
		}
	}
	if (command === "verify") {
		if (rest.length !== 1) {
			usage();
			return 2;
		}
		const report = verify(rest[0]);
		if (report.ok) {
			console.log("ok");
			return 0;
		}
		for (const p of report.problems) {
			console.error(`FAIL: ${p}`);
		}
		return 1;
	}
	usage();
	return 2;
}

process.exitCode = main(process.argv.slice(2));
