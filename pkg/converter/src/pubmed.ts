/** Parser for the Pubmed-Diabetes tab distribution.
 *
 * NODE.paper.tab: two header lines (the second lists the attribute schema
 * `numeric:w-...:0.0` entries, which fix the 500-column feature order),
 * then one line per paper: `<id>  label=<1..3>  w-word=<tfidf> ...  summary=...`.
 * DIRECTED.cites.tab: two header lines, then `<edge_id>  paper:<a>  |  paper:<b>`.
 *
 * TF-IDF values are preserved verbatim; absent words are zero.
 */

import * as fs from "node:fs";

import type { RawDataset } from "./types.js";

export function parsePubmed(nodePath: string, citesPath: string): RawDataset {
	if (!fs.existsSync(nodePath)) {
		throw new Error(`missing source file: ${nodePath}`);
	}
	if (!fs.existsSync(citesPath)) {
		throw new Error(`missing source file: ${citesPath}`);
	}
	const nodeLines = fs.readFileSync(nodePath, "utf-8").split(/\r?\n/);
	if (nodeLines.length < 3) {
		throw new Error(`${nodePath} is too short to contain a schema and data`);
	}

	// Attribute order comes from the schema line: numeric:<word>:0.0 entries.
	const attrOrder: string[] = [];
	for (const field of nodeLines[1].split(/\s+/)) {
		const m = field.match(/^numeric:([^:]+):/);
		if (m) attrOrder.push(m[1]);
	}
	if (attrOrder.length === 0) {
		throw new Error(`no numeric attributes found in schema of ${nodePath}`);
	}
	const attrIndex = new Map(attrOrder.map((a, i) => [a, i] as const));
	const nFeatures = attrOrder.length;

	const idToIndex = new Map<string, number>();
	const rows: Array<{ label: number; feats: Map<number, number> }> = [];
	const labelValues = new Set<number>();

	for (const line of nodeLines.slice(2)) {
		const trimmed = line.trim();
		if (!trimmed) continue;
		const parts = trimmed.split("\t");
		const id = parts[0];
		let label = -1;
		const feats = new Map<number, number>();
		for (const field of parts.slice(1)) {
			if (field.startsWith("label=")) {
				label = Number(field.slice("label=".length));
			} else if (field.includes("=")) {
				const eq = field.indexOf("=");
				const name = field.slice(0, eq);
				const col = attrIndex.get(name);
				if (col !== undefined) {
					feats.set(col, Number(field.slice(eq + 1)));
				}
			}
		}
		if (label < 0 || Number.isNaN(label)) {
			throw new Error(`node ${id} has no label`);
		}
		if (idToIndex.has(id)) {
			throw new Error(`duplicate node id ${id}`);
		}
		idToIndex.set(id, rows.length);
		rows.push({ label, feats });
		labelValues.add(label);
	}

	const classNames = Array.from(labelValues).sort((a, b) => a - b).map(String);
	const classOf = new Map(classNames.map((c, i) => [Number(c), i] as const));
	const n = rows.length;
	const features = new Float32Array(n * nFeatures);
	const labels = new Uint32Array(n);
	rows.forEach((row, i) => {
		labels[i] = classOf.get(row.label)!;
		for (const [col, value] of row.feats) {
			features[i * nFeatures + col] = value;
		}
	});

	const edges: Array<[number, number]> = [];
	let rawEdgeCount = 0;
	let dangling = 0;
	const citeLines = fs.readFileSync(citesPath, "utf-8").split(/\r?\n/).slice(2);
	for (const line of citeLines) {
		const refs = Array.from(line.matchAll(/paper:(\S+)/g), (m) => m[1]);
		if (refs.length < 2) continue;
		rawEdgeCount += 1;
		const a = idToIndex.get(refs[0]);
		const b = idToIndex.get(refs[1]);
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
		classNames,
		edges,
		rawEdgeCount,
		danglingEdges: dangling,
	};
}
