/** Neutral on-disk dataset format: binary columns plus a JSON manifest.
 *
 * meta.json       counts and class names
 * features.bin    N*F little-endian float32, row-major
 * edges.bin       one (uint32, uint32) little-endian pair per undirected
 *                 edge with i < j, sorted lexicographically
 * labels.bin      N little-endian uint32
 * split_fixed.json optional {"train": [...], "val": [...], "test": [...]}
 */

import * as fs from "node:fs";
import * as path from "node:path";

import type { DatasetManifest, FixedSplit } from "./types.js";

export function writeNeutral(
	dst: string,
	manifest: DatasetManifest,
	features: Float32Array,
	edges: Array<[number, number]>,
	labels: Uint32Array,
	split: FixedSplit | null,
): void {
	fs.mkdirSync(dst, { recursive: true });

	const feat = Buffer.alloc(features.length * 4);
	for (let i = 0; i < features.length; i++) {
		feat.writeFloatLE(features[i], i * 4);
	}
	fs.writeFileSync(path.join(dst, "features.bin"), feat);

	const edge = Buffer.alloc(edges.length * 8);
	for (let i = 0; i < edges.length; i++) {
		edge.writeUInt32LE(edges[i][0], i * 8);
		edge.writeUInt32LE(edges[i][1], i * 8 + 4);
	}
	fs.writeFileSync(path.join(dst, "edges.bin"), edge);

	const lab = Buffer.alloc(labels.length * 4);
	for (let i = 0; i < labels.length; i++) {
		lab.writeUInt32LE(labels[i], i * 4);
	}
	fs.writeFileSync(path.join(dst, "labels.bin"), lab);

	fs.writeFileSync(
		path.join(dst, "meta.json"),
		JSON.stringify(manifest, Object.keys(manifest).sort(), 2) + "\n",
	);
	if (split !== null) {
		fs.writeFileSync(path.join(dst, "split_fixed.json"), JSON.stringify(split) + "\n");
	}
}

export interface NeutralDataset {
	manifest: DatasetManifest;
	features: Float32Array;
	edges: Array<[number, number]>;
	labels: Uint32Array;
	split: FixedSplit | null;
}

export function readNeutral(dir: string): NeutralDataset {
	const manifest = JSON.parse(
		fs.readFileSync(path.join(dir, "meta.json"), "utf-8"),
	) as DatasetManifest;

	const feat = fs.readFileSync(path.join(dir, "features.bin"));
	const features = new Float32Array(feat.length / 4);
	for (let i = 0; i < features.length; i++) {
		features[i] = feat.readFloatLE(i * 4);
	}

	const edgeBuf = fs.readFileSync(path.join(dir, "edges.bin"));
	const edges: Array<[number, number]> = [];
	for (let off = 0; off + 8 <= edgeBuf.length; off += 8) {
		edges.push([edgeBuf.readUInt32LE(off), edgeBuf.readUInt32LE(off + 4)]);
	}

	const labBuf = fs.readFileSync(path.join(dir, "labels.bin"));
	const labels = new Uint32Array(labBuf.length / 4);
	for (let i = 0; i < labels.length; i++) {
		labels[i] = labBuf.readUInt32LE(i * 4);
	}

	const splitPath = path.join(dir, "split_fixed.json");
	const split = fs.existsSync(splitPath)
		? (JSON.parse(fs.readFileSync(splitPath, "utf-8")) as FixedSplit)
		: null;
	return { manifest, features, edges, labels, split };
}

/** Symmetrize, deduplicate, and strip self-loops; returns sorted i<j pairs. */
export function canonicalizeEdges(
	edges: Array<[number, number]>,
	n: number,
): Array<[number, number]> {
	const seen = new Set<number>();
	for (const [a, b] of edges) {
		if (a === b) continue;
		const i = Math.min(a, b);
		const j = Math.max(a, b);
		seen.add(i * n + j);
	}
	const keys = Array.from(seen).sort((x, y) => x - y);
	return keys.map((k) => [Math.floor(k / n), k % n]);
}
