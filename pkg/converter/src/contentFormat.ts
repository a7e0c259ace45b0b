/** Parser for the plain-text citation distributions (cora, citeseer).
 *
 * <name>.content lines: <paper_id> <feat_0> ... <feat_{F-1}> <class_label>
 * <name>.cites lines:   <cited_id> <citing_id>
 *
 * Node indices follow first appearance in the .content file; class indices
 * follow the sorted class-name order. Citations whose endpoints never appear
 * in .content are counted and skipped (citeseer has several).
 */

import * as fs from "node:fs";

import type { RawDataset } from "./types.js";

export function parseContentDataset(contentPath: string, citesPath: string): RawDataset {
	if (!fs.existsSync(contentPath)) {
		throw new Error(`missing source file: ${contentPath}`);
	}
	if (!fs.existsSync(citesPath)) {
		throw new Error(`missing source file: ${citesPath}`);
	}
	const contentLines = readLines(contentPath);
	if (contentLines.length === 0) {
		throw new Error(`${contentPath} is empty`);
	}

	const idToIndex = new Map<string, number>();
	const labelNames: string[] = [];
	const rows: Array<{ feats: number[]; label: string }> = [];
	let nFeatures = -1;

	for (const line of contentLines) {
		const parts = line.split(/\s+/);
		if (parts.length < 3) {
			throw new Error(`malformed content line: ${line.slice(0, 80)}`);
		}
		const id = parts[0];
		const label = parts[parts.length - 1];
		const feats = parts.slice(1, -1).map(Number);
		if (feats.some(Number.isNaN)) {
			throw new Error(`non-numeric feature for node ${id}`);
		}
		if (nFeatures === -1) {
			nFeatures = feats.length;
		} else if (feats.length !== nFeatures) {
			throw new Error(
				`node ${id} has ${feats.length} features, expected ${nFeatures}`,
			);
		}
		if (idToIndex.has(id)) {
			throw new Error(`duplicate node id ${id}`);
		}
		idToIndex.set(id, rows.length);
		rows.push({ feats, label });
		if (!labelNames.includes(label)) {
			labelNames.push(label);
		}
	}

	labelNames.sort();
	const n = rows.length;
	const features = new Float32Array(n * nFeatures);
	const labels = new Uint32Array(n);
	rows.forEach((row, i) => {
		features.set(row.feats, i * nFeatures);
		labels[i] = labelNames.indexOf(row.label);
	});

	const edges: Array<[number, number]> = [];
	let rawEdgeCount = 0;
	let dangling = 0;
	for (const line of readLines(citesPath)) {
		const parts = line.split(/\s+/);
		if (parts.length < 2) continue;
		rawEdgeCount += 1;
		const a = idToIndex.get(parts[0]);
		const b = idToIndex.get(parts[1]);
		if (a === undefined || b === undefined) {
			dangling += 1;
			continue;
		}
		edges.push([a, b]);
	}

	return {
		n,
		features,
		nFeatures,
		labels,
		classNames: labelNames,
		edges,
		rawEdgeCount,
		danglingEdges: dangling,
	};
}

function readLines(p: string): string[] {
	return fs
		.readFileSync(p, "utf-8")
		.split(/\r?\n/)
		.map((l) => l.trim())
		.filter((l) => l.length > 0);
}
