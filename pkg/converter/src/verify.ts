/** Re-read a converted directory and check every structural invariant. */

import * as fs from "node:fs";
import * as path from "node:path";

import { readNeutral } from "./neutral.js";

export interface VerifyReport {
	ok: boolean;
	problems: string[];
}

export function verify(dir: string): VerifyReport {
	const problems: string[] = [];
	if (!fs.existsSync(path.join(dir, "meta.json"))) {
		return { ok: false, problems: [`missing ${path.join(dir, "meta.json")}`] };
	}
	const { manifest, features, edges, labels, split } = readNeutral(dir);
	const n = manifest.n_nodes;

	if (features.length !== n * manifest.n_features) {
		problems.push(
			`features.bin holds ${features.length} floats, expected ${n * manifest.n_features}`,
		);
	}
	for (let i = 0; i < features.length; i++) {
		if (!Number.isFinite(features[i])) {
			problems.push(`non-finite feature at flat index ${i}`);
			break;
		}
	}

	if (labels.length !== n) {
		problems.push(`labels.bin holds ${labels.length} labels, expected ${n}`);
	}
	const badLabels: number[] = [];
	for (let i = 0; i < labels.length; i++) {
		if (labels[i] >= manifest.n_classes) badLabels.push(i);
	}
	if (badLabels.length > 0) {
		problems.push(`labels out of range at indices ${badLabels.slice(0, 10).join(", ")}`);
	}

	if (edges.length !== manifest.n_edges) {
		problems.push(`edges.bin holds ${edges.length} pairs, meta says ${manifest.n_edges}`);
	}
	const seen = new Set<number>();
	edges.forEach(([a, b], idx) => {
		if (a >= b) problems.push(`edge ${idx} violates i < j: (${a}, ${b})`);
		if (b >= n) problems.push(`edge ${idx} endpoint out of range: (${a}, ${b})`);
		const key = a * n + b;
		if (seen.has(key)) problems.push(`duplicate edge (${a}, ${b})`);
		seen.add(key);
	});

	if (manifest.has_fixed_split !== (split !== null)) {
		problems.push("has_fixed_split disagrees with split_fixed.json presence");
	}
	if (split !== null) {
		const tally = new Uint8Array(n);
		for (const part of ["train", "val", "test"] as const) {
			const arr = split[part];
			if (arr.length === 0) problems.push(`split part ${part} is empty`);
			for (const i of arr) {
				if (i < 0 || i >= n) {
					problems.push(`split part ${part} index ${i} out of range`);
				} else {
					tally[i] += 1;
				}
			}
		}
		for (let i = 0; i < n; i++) {
			if (tally[i] > 1) {
				problems.push(`split parts overlap at node ${i}`);
				break;
			}
		}
	}

	return { ok: problems.length === 0, problems };
}
