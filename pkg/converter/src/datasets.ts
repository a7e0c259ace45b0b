/** Per-dataset source adapters and the expected benchmark statistics. */

import * as fs from "node:fs";
import * as path from "node:path";

import { parseContentDataset } from "./contentFormat.js";
import { readNpz, type NpyArray } from "./npz.js";
import { parsePubmed } from "./pubmed.js";
import type { ExpectedStats, RawDataset } from "./types.js";

/** Published statistics of the supported distributions (raw edge counts). */
export const EXPECTED: Record<string, ExpectedStats> = {
	cora: { nodes: 2708, rawEdges: 5429, features: 1433, classes: 7, standardSplit: true },
	citeseer: { nodes: 3327, rawEdges: 4732, features: 3703, classes: 6, standardSplit: true },
	pubmed: { nodes: 19717, rawEdges: 44338, features: 500, classes: 3, standardSplit: true },
	cora_full: { nodes: 19793, rawEdges: 65311, features: 8710, classes: 70, classFloor: 50 },
	"amazon-computers": { nodes: 13381, rawEdges: 245778, features: 767, classes: 10, classFloor: 50 },
	"coauthor-cs": { nodes: 18333, rawEdges: 81894, features: 6805, classes: 15, classFloor: 50 },
};

export const DATASET_NAMES = Object.keys(EXPECTED);

/** Locate a file under src_dir, tolerating a single nesting level. */
function find(srcDir: string, candidates: string[]): string {
	for (const c of candidates) {
		const direct = path.join(srcDir, c);
		if (fs.existsSync(direct)) return direct;
	}
	if (fs.existsSync(srcDir)) {
		for (const entry of fs.readdirSync(srcDir)) {
			const nested = path.join(srcDir, entry);
			if (fs.statSync(nested).isDirectory()) {
				for (const c of candidates) {
					const p = path.join(nested, c);
					if (fs.existsSync(p)) return p;
				}
			}
		}
	}
	throw new Error(`cannot find any of [${candidates.join(", ")}] under ${srcDir}`);
}

export function loadSource(name: string, srcDir: string): RawDataset {
	switch (name) {
		case "cora":
			return parseContentDataset(
				find(srcDir, ["cora.content"]),
				find(srcDir, ["cora.cites"]),
			);
		case "citeseer":
			return parseContentDataset(
				find(srcDir, ["citeseer.content"]),
				find(srcDir, ["citeseer.cites"]),
			);
		case "pubmed":
			return parsePubmed(
				find(srcDir, ["Pubmed-Diabetes.NODE.paper.tab"]),
				find(srcDir, ["Pubmed-Diabetes.DIRECTED.cites.tab"]),
			);
		case "cora_full":
			return loadNpzDataset(find(srcDir, ["cora_full.npz"]));
		case "amazon-computers":
			return loadNpzDataset(
				find(srcDir, ["amazon_electronics_computers.npz", "amazon-computers.npz"]),
			);
		case "coauthor-cs":
			return loadNpzDataset(find(srcDir, ["ms_academic_cs.npz", "coauthor-cs.npz"]));
		default:
			throw new Error(
				`unknown dataset ${name}; supported: ${DATASET_NAMES.join(", ")}`,
			);
	}
}

/** Archives with CSR adjacency + CSR attributes + labels (+ class names). */
export function loadNpzDataset(npzPath: string): RawDataset {
	const arrays = readNpz(npzPath);
	const need = (key: string): NpyArray => {
		const a = arrays.get(key);
		if (!a) throw new Error(`${npzPath} is missing array ${key}`);
		return a;
	};

	const adjShape = numeric(need("adj_shape"));
	const n = adjShape[0];
	const adjIndices = numeric(need("adj_indices"));
	const adjIndptr = numeric(need("adj_indptr"));

	const attrShape = numeric(need("attr_shape"));
	const nFeatures = attrShape[1];
	const attrData = numeric(need("attr_data"));
	const attrIndices = numeric(need("attr_indices"));
	const attrIndptr = numeric(need("attr_indptr"));

	const labelsArr = numeric(need("labels"));
	const labels = new Uint32Array(labelsArr.length);
	labelsArr.forEach((v, i) => (labels[i] = v));

	const classCount = Math.max(...labelsArr) + 1;
	const classNamesArr = arrays.get("class_names");
	const classNames =
		classNamesArr && Array.isArray(classNamesArr.data)
			? (classNamesArr.data as string[])
			: Array.from({ length: classCount }, (_, i) => String(i));

	const features = new Float32Array(n * nFeatures);
	for (let i = 0; i < n; i++) {
		for (let p = attrIndptr[i]; p < attrIndptr[i + 1]; p++) {
			features[i * nFeatures + attrIndices[p]] = attrData[p];
		}
	}

	const edges: Array<[number, number]> = [];
	for (let i = 0; i < n; i++) {
		for (let p = adjIndptr[i]; p < adjIndptr[i + 1]; p++) {
			edges.push([i, adjIndices[p]]);
		}
	}

	return {
		n,
		features,
		nFeatures,
		labels,
		classNames,
		edges,
		rawEdgeCount: edges.length,
		danglingEdges: 0,
	};
}

function numeric(a: NpyArray): number[] {
	if (Array.isArray(a.data)) {
		throw new Error("expected a numeric npy array, found strings");
	}
	return Array.from(a.data as Float64Array, Number);
}
