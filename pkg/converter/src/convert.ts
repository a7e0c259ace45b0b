/** Conversion pipeline: parse a source distribution, clean it up, and write
 * the neutral format.
 *
 * Cleanup: symmetrize edges, deduplicate, drop self-loops; for the large
 * archives, remove classes with fewer than 50 labeled nodes. For the three
 * citation benchmarks a fixed split in the standard sizes is synthesized
 * deterministically (20 per class for training, the next 500 nodes for
 * validation, the next 1000 for testing, in node-index order).
 */

import { EXPECTED, loadSource } from "./datasets.js";
import { canonicalizeEdges, writeNeutral } from "./neutral.js";
import type { DatasetManifest, FixedSplit, RawDataset } from "./types.js";

export interface ConvertOptions {
	/** fail when counts differ from the published statistics (CLI default) */
	enforceExpected?: boolean;
}

export function convert(
	name: string,
	srcDir: string,
	dstDir: string,
	options: ConvertOptions = {},
): DatasetManifest {
	const expected = EXPECTED[name];
	if (!expected) {
		throw new Error(`unknown dataset ${name}`);
	}
	const raw = loadSource(name, srcDir);
	return convertRaw(name, raw, dstDir, {
		enforceExpected: options.enforceExpected ?? true,
		classFloor: expected.classFloor ?? 0,
		standardSplit: expected.standardSplit ?? false,
	});
}

export interface ConvertRawOptions {
	enforceExpected: boolean;
	classFloor: number;
	standardSplit: boolean;
}

/** Core pipeline, also usable on synthetic fixtures with enforcement off. */
export function convertRaw(
	name: string,
	raw: RawDataset,
	dstDir: string,
	options: ConvertRawOptions,
): DatasetManifest {
	let dataset = raw;
	if (options.classFloor > 0) {
		dataset = dropSmallClasses(dataset, options.classFloor);
	}
	const edges = canonicalizeEdges(dataset.edges, dataset.n);

	const expected = EXPECTED[name];
	if (options.enforceExpected && expected) {
		const problems: string[] = [];
		if (options.classFloor === 0 && dataset.n !== expected.nodes) {
			problems.push(`nodes ${dataset.n} != expected ${expected.nodes}`);
		}
		if (dataset.nFeatures !== expected.features) {
			problems.push(`features ${dataset.nFeatures} != expected ${expected.features}`);
		}
		if (options.classFloor === 0 && dataset.classNames.length !== expected.classes) {
			problems.push(
				`classes ${dataset.classNames.length} != expected ${expected.classes}`,
			);
		}
		if (options.classFloor === 0 && raw.rawEdgeCount !== expected.rawEdges) {
			problems.push(
				`raw edges ${raw.rawEdgeCount} != expected ${expected.rawEdges}`,
			);
		}
		if (problems.length > 0) {
			throw new Error(`${name}: count mismatch vs expected manifest: ${problems.join("; ")}`);
		}
	}

	const split = options.standardSplit
		? standardFixedSplit(dataset.labels, dataset.classNames.length, dataset.n)
		: null;

	const manifest: DatasetManifest = {
		name,
		n_nodes: dataset.n,
		n_features: dataset.nFeatures,
		n_classes: dataset.classNames.length,
		n_edges: edges.length,
		n_edges_raw: raw.rawEdgeCount,
		class_names: dataset.classNames,
		has_fixed_split: split !== null,
	};
	writeNeutral(dstDir, manifest, dataset.features, edges, dataset.labels, split);
	return manifest;
}

/** Remove classes holding fewer than `floor` nodes; reindex nodes and labels. */
export function dropSmallClasses(raw: RawDataset, floor: number): RawDataset {
	const counts = new Map<number, number>();
	for (const label of raw.labels) {
		counts.set(label, (counts.get(label) ?? 0) + 1);
	}
	const kept = Array.from(counts.entries())
		.filter(([, c]) => c >= floor)
		.map(([label]) => label)
		.sort((a, b) => a - b);
	if (kept.length === counts.size) {
		return raw;
	}
	const newLabelOf = new Map(kept.map((label, i) => [label, i] as const));
	const newIndexOf = new Map<number, number>();
	const keptNodes: number[] = [];
	for (let i = 0; i < raw.n; i++) {
		if (newLabelOf.has(raw.labels[i])) {
			newIndexOf.set(i, keptNodes.length);
			keptNodes.push(i);
		}
	}
	const n = keptNodes.length;
	const features = new Float32Array(n * raw.nFeatures);
	const labels = new Uint32Array(n);
	keptNodes.forEach((old, i) => {
		features.set(
			raw.features.subarray(old * raw.nFeatures, (old + 1) * raw.nFeatures),
			i * raw.nFeatures,
		);
		labels[i] = newLabelOf.get(raw.labels[old])!;
	});
	const edges: Array<[number, number]> = [];
	for (const [a, b] of raw.edges) {
		const na = newIndexOf.get(a);
		const nb = newIndexOf.get(b);
		if (na !== undefined && nb !== undefined) {
			edges.push([na, nb]);
		}
	}
	return {
		n,
		features,
		nFeatures: raw.nFeatures,
		labels,
		classNames: kept.map((label) => raw.classNames[label]),
		edges,
		rawEdgeCount: raw.rawEdgeCount,
		danglingEdges: raw.danglingEdges,
	};
}

/** 20 labels per class for training, then 500 validation and 1000 test nodes
 * in node-index order. Matches the standard benchmark sizes (Cora:
 * 140/500/1000) without reproducing the historical index sets bit for bit.
 */
export function standardFixedSplit(
	labels: Uint32Array,
	nClasses: number,
	n: number,
	perClass = 20,
	valSize = 500,
	testSize = 1000,
): FixedSplit {
	const train: number[] = [];
	const perClassLeft = new Array(nClasses).fill(perClass);
	for (let i = 0; i < n; i++) {
		if (perClassLeft[labels[i]] > 0) {
			perClassLeft[labels[i]] -= 1;
			train.push(i);
		}
	}
	if (perClassLeft.some((x: number) => x > 0)) {
		throw new Error("not enough labeled nodes for the standard train split");
	}
	const inTrain = new Set(train);
	const rest: number[] = [];
	for (let i = 0; i < n && rest.length < valSize + testSize; i++) {
		if (!inTrain.has(i)) rest.push(i);
	}
	if (rest.length < valSize + testSize) {
		throw new Error("not enough nodes for the standard val/test split");
	}
	return {
		train,
		val: rest.slice(0, valSize),
		test: rest.slice(valSize, valSize + testSize),
	};
}
