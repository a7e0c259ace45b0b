/** Shared shapes for the converter pipeline. */

/** A parsed source dataset, before cleanup. */
export interface RawDataset {
	/** node count */
	n: number;
	/** row-major N x F features */
	features: Float32Array;
	nFeatures: number;
	/** per-node class index, re-encoded to 0..K-1 */
	labels: Uint32Array;
	classNames: string[];
	/** directed or undirected edge list as (src, dst) pairs, node indices */
	edges: Array<[number, number]>;
	/** edge records in the source before any cleanup */
	rawEdgeCount: number;
	/** source edge endpoints that referenced unknown node ids */
	danglingEdges: number;
}

export interface FixedSplit {
	train: number[];
	val: number[];
	test: number[];
}

/** What lands in meta.json, plus the convert() return value. */
export interface DatasetManifest {
	name: string;
	n_nodes: number;
	n_features: number;
	n_classes: number;
	/** undirected edges stored in edges.bin after symmetrize/dedup */
	n_edges: number;
	/** edge records in the raw distribution */
	n_edges_raw: number;
	class_names: string[];
	has_fixed_split: boolean;
}

/** Expected statistics for the supported benchmark distributions. */
export interface ExpectedStats {
	nodes: number;
	rawEdges: number;
	features: number;
	classes: number;
	/** classes with fewer labeled nodes than this are removed */
	classFloor?: number;
	/** synthesize the standard 20-per-class / 500 / 1000 fixed split */
	standardSplit?: boolean;
}
