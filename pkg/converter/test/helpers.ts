/** Fixture builders: tiny source distributions in each supported layout. */

import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";
import * as zlib from "node:zlib";

export function tmpdir(tag: string): string {
	return fs.mkdtempSync(path.join(os.tmpdir(), `gpnconv-${tag}-`));
}

/** cora-style .content/.cites fixture: 6 papers, 4 features, 2 classes. */
export function writeContentFixture(dir: string, name = "mini"): void {
	fs.mkdirSync(dir, { recursive: true });
	const content = [
		"p1\t1\t0\t0\t0\tgenetic",
		"p2\t0\t1\t0\t0\tgenetic",
		"p3\t1\t1\t0\t0\tgenetic",
		"p4\t0\t0\t1\t0\tneural",
		"p5\t0\t0\t0\t1\tneural",
		"p6\t0\t0\t1\t1\tneural",
	].join("\n");
	// p2->p1 appears twice and p6->p6 is a self loop; p9 is dangling.
	const cites = [
		"p1\tp2",
		"p2\tp1",
		"p2\tp3",
		"p4\tp5",
		"p5\tp6",
		"p6\tp6",
		"p9\tp1",
	].join("\n");
	fs.writeFileSync(path.join(dir, `${name}.content`), content + "\n");
	fs.writeFileSync(path.join(dir, `${name}.cites`), cites + "\n");
}

/** Pubmed-style tab fixture: 5 papers, 3 word attributes, 2 classes. */
export function writePubmedFixture(dir: string): void {
	fs.mkdirSync(dir, { recursive: true });
	const nodes = [
		"NODE\tpaper",
		"cat=label:label\tnumeric:w-alpha:0.0\tnumeric:w-beta:0.0\tnumeric:w-gamma:0.0\tstring:summary",
		"101\tlabel=1\tw-alpha=0.5\tw-gamma=0.25\tsummary=a",
		"102\tlabel=1\tw-beta=1.0\tsummary=b",
		"103\tlabel=2\tw-alpha=0.125\tsummary=c",
		"104\tlabel=2\tw-beta=0.75\tw-gamma=0.5\tsummary=d",
		"105\tlabel=2\tsummary=e",
	].join("\n");
	const cites = [
		"DIRECTED",
		"NO_FEATURES",
		"1\tpaper:101\t|\tpaper:102",
		"2\tpaper:103\t|\tpaper:104",
		"3\tpaper:104\t|\tpaper:105",
		"4\tpaper:999\t|\tpaper:101",
	].join("\n");
	fs.writeFileSync(path.join(dir, "Pubmed-Diabetes.NODE.paper.tab"), nodes + "\n");
	fs.writeFileSync(path.join(dir, "Pubmed-Diabetes.DIRECTED.cites.tab"), cites + "\n");
}

// --- minimal npy/npz writing (stored zip entries) ---------------------------

function npyHeader(descr: string, shape: number[]): Buffer {
	const shapeText =
		shape.length === 1 ? `(${shape[0]},)` : `(${shape.join(", ")})`;
	let dict = `{'descr': '${descr}', 'fortran_order': False, 'shape': ${shapeText}, }`;
	const base = 10 + dict.length + 1;
	const pad = (64 - (base % 64)) % 64;
	dict = dict + " ".repeat(pad) + "\n";
	const header = Buffer.alloc(10 + dict.length);
	header[0] = 0x93;
	header.write("NUMPY", 1, "latin1");
	header[6] = 1;
	header[7] = 0;
	header.writeUInt16LE(dict.length, 8);
	header.write(dict, 10, "latin1");
	return header;
}

export function npyInt64(values: number[]): Buffer {
	const body = Buffer.alloc(values.length * 8);
	values.forEach((v, i) => body.writeBigInt64LE(BigInt(v), i * 8));
	return Buffer.concat([npyHeader("<i8", [values.length]), body]);
}

export function npyFloat32(values: number[]): Buffer {
	const body = Buffer.alloc(values.length * 4);
	values.forEach((v, i) => body.writeFloatLE(v, i * 4));
	return Buffer.concat([npyHeader("<f4", [values.length]), body]);
}

export function npyUnicode(values: string[]): Buffer {
	const width = Math.max(...values.map((v) => v.length), 1);
	const body = Buffer.alloc(values.length * width * 4);
	values.forEach((v, i) => {
		for (let c = 0; c < v.length; c++) {
			body.writeUInt32LE(v.codePointAt(c)!, (i * width + c) * 4);
		}
	});
	return Buffer.concat([npyHeader(`<U${width}`, [values.length]), body]);
}

/** Write a stored (uncompressed) zip of named members. */
export function writeZip(entries: Array<[string, Buffer]>, out: string): void {
	const locals: Buffer[] = [];
	const centrals: Buffer[] = [];
	let offset = 0;
	for (const [name, data] of entries) {
		const crc = zlib.crc32(data);
		const nameBuf = Buffer.from(name, "utf-8");
		const local = Buffer.alloc(30);
		local.writeUInt32LE(0x04034b50, 0);
		local.writeUInt16LE(20, 4);
		local.writeUInt16LE(0, 6);
		local.writeUInt16LE(0, 8); // stored
		local.writeUInt32LE(crc, 14);
		local.writeUInt32LE(data.length, 18);
		local.writeUInt32LE(data.length, 22);
		local.writeUInt16LE(nameBuf.length, 26);
		locals.push(local, nameBuf, data);

		const central = Buffer.alloc(46);
		central.writeUInt32LE(0x02014b50, 0);
		central.writeUInt16LE(20, 4);
		central.writeUInt16LE(20, 6);
		central.writeUInt16LE(0, 10); // stored
		central.writeUInt32LE(crc, 16);
		central.writeUInt32LE(data.length, 20);
		central.writeUInt32LE(data.length, 24);
		central.writeUInt16LE(nameBuf.length, 28);
		central.writeUInt32LE(offset, 42);
		centrals.push(central, nameBuf);
		offset += 30 + nameBuf.length + data.length;
	}
	const centralStart = offset;
	const centralBuf = Buffer.concat(centrals);
	const eocd = Buffer.alloc(22);
	eocd.writeUInt32LE(0x06054b50, 0);
	eocd.writeUInt16LE(entries.length, 8);
	eocd.writeUInt16LE(entries.length, 10);
	eocd.writeUInt32LE(centralBuf.length, 12);
	eocd.writeUInt32LE(centralStart, 16);
	fs.writeFileSync(out, Buffer.concat([...locals, centralBuf, eocd]));
}

/** npz fixture: 4-node, 2-feature CSR graph with two classes. */
export function writeNpzFixture(dir: string, fileName = "mini.npz"): string {
	fs.mkdirSync(dir, { recursive: true });
	// adjacency: 0-1, 1-2, 2-3 stored symmetrically in CSR
	const adjIndptr = [0, 1, 3, 5, 6];
	const adjIndices = [1, 0, 2, 1, 3, 2];
	const adjData = [1, 1, 1, 1, 1, 1];
	// attributes: CSR of a 4x2 matrix
	const attrIndptr = [0, 1, 2, 3, 4];
	const attrIndices = [0, 1, 0, 1];
	const attrData = [1.0, 2.0, 3.0, 4.0];
	const out = path.join(dir, fileName);
	writeZip(
		[
			["adj_data.npy", npyFloat32(adjData)],
			["adj_indices.npy", npyInt64(adjIndices)],
			["adj_indptr.npy", npyInt64(adjIndptr)],
			["adj_shape.npy", npyInt64([4, 4])],
			["attr_data.npy", npyFloat32(attrData)],
			["attr_indices.npy", npyInt64(attrIndices)],
			["attr_indptr.npy", npyInt64(attrIndptr)],
			["attr_shape.npy", npyInt64([4, 2])],
			["labels.npy", npyInt64([0, 0, 1, 1])],
			["class_names.npy", npyUnicode(["left", "right"])],
		],
		out,
	);
	return out;
}
