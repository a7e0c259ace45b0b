/** Minimal NPZ/NPY reading: enough for the larger benchmark archives, which
 * store a CSR adjacency, CSR attributes, integer labels, and class names.
 * Handles stored and deflated zip members and little-endian int/float/unicode
 * npy payloads.
 */

import * as fs from "node:fs";
import * as zlib from "node:zlib";

export type NpyValue = Float64Array | BigInt64Array | string[];

export interface NpyArray {
	shape: number[];
	/** numeric data widened to float64, or decoded strings for <U dtypes */
	data: NpyValue;
}

export function readNpz(path: string): Map<string, NpyArray> {
	const buf = fs.readFileSync(path);
	const out = new Map<string, NpyArray>();
	for (const [name, payload] of zipEntries(buf)) {
		const key = name.endsWith(".npy") ? name.slice(0, -4) : name;
		out.set(key, parseNpy(payload));
	}
	return out;
}

function zipEntries(buf: Buffer): Array<[string, Buffer]> {
	// End-of-central-directory record: scan backwards for its signature.
	let eocd = -1;
	for (let i = buf.length - 22; i >= 0; i--) {
		if (buf.readUInt32LE(i) === 0x06054b50) {
			eocd = i;
			break;
		}
	}
	if (eocd < 0) {
		throw new Error("not a zip archive (no end-of-central-directory)");
	}
	const count = buf.readUInt16LE(eocd + 10);
	let off = buf.readUInt32LE(eocd + 16);

	const entries: Array<[string, Buffer]> = [];
	for (let k = 0; k < count; k++) {
		if (buf.readUInt32LE(off) !== 0x02014b50) {
			throw new Error("corrupt zip central directory");
		}
		const method = buf.readUInt16LE(off + 10);
		const compSize = buf.readUInt32LE(off + 20);
		const nameLen = buf.readUInt16LE(off + 28);
		const extraLen = buf.readUInt16LE(off + 30);
		const commentLen = buf.readUInt16LE(off + 32);
		const localOff = buf.readUInt32LE(off + 42);
		const name = buf.toString("utf-8", off + 46, off + 46 + nameLen);

		const localNameLen = buf.readUInt16LE(localOff + 26);
		const localExtraLen = buf.readUInt16LE(localOff + 28);
		const dataStart = localOff + 30 + localNameLen + localExtraLen;
		const raw = buf.subarray(dataStart, dataStart + compSize);
		let payload: Buffer;
		if (method === 0) {
			payload = Buffer.from(raw);
		} else if (method === 8) {
			payload = zlib.inflateRawSync(raw);
		} else {
			throw new Error(`unsupported zip compression method ${method}`);
		}
		entries.push([name, payload]);
		off += 46 + nameLen + extraLen + commentLen;
	}
	return entries;
}

function parseNpy(buf: Buffer): NpyArray {
	if (buf.length < 10 || buf.toString("latin1", 1, 6) !== "NUMPY" || buf[0] !== 0x93) {
		throw new Error("not an npy payload");
	}
	const major = buf[6];
	let headerLen: number;
	let headerStart: number;
	if (major === 1) {
		headerLen = buf.readUInt16LE(8);
		headerStart = 10;
	} else {
		headerLen = buf.readUInt32LE(8);
		headerStart = 12;
	}
	const header = buf.toString("latin1", headerStart, headerStart + headerLen);
	const descr = match(header, /'descr':\s*'([^']+)'/, "descr");
	const fortran = match(header, /'fortran_order':\s*(True|False)/, "fortran_order");
	if (fortran === "True") {
		throw new Error("fortran-ordered npy arrays are not supported");
	}
	const shapeText = match(header, /'shape':\s*\(([^)]*)\)/, "shape");
	const shape = shapeText
		.split(",")
		.map((s) => s.trim())
		.filter((s) => s.length > 0)
		.map(Number);
	const count = shape.reduce((a, b) => a * b, 1);
	const body = buf.subarray(headerStart + headerLen);

	const unicode = descr.match(/^[<>|=]?U(\d+)$/);
	if (unicode) {
		const chars = Number(unicode[1]);
		const strings: string[] = [];
		for (let i = 0; i < count; i++) {
			let s = "";
			for (let c = 0; c < chars; c++) {
				const code = body.readUInt32LE((i * chars + c) * 4);
				if (code !== 0) s += String.fromCodePoint(code);
			}
			strings.push(s);
		}
		return { shape, data: strings };
	}

	const data = new Float64Array(count);
	const kind = descr.replace(/^[<>|=]/, "");
	for (let i = 0; i < count; i++) {
		switch (kind) {
			case "f8": data[i] = body.readDoubleLE(i * 8); break;
			case "f4": data[i] = body.readFloatLE(i * 4); break;
			case "i8": data[i] = Number(body.readBigInt64LE(i * 8)); break;
			case "i4": data[i] = body.readInt32LE(i * 4); break;
			case "i2": data[i] = body.readInt16LE(i * 2); break;
			case "i1": data[i] = body.readInt8(i); break;
			case "u8": data[i] = Number(body.readBigUInt64LE(i * 8)); break;
			case "u4": data[i] = body.readUInt32LE(i * 4); break;
			case "u2": data[i] = body.readUInt16LE(i * 2); break;
			case "u1":
			case "b1": data[i] = body.readUInt8(i); break;
			default:
				throw new Error(`unsupported npy dtype ${descr}`);
		}
	}
	return { shape, data };
}

function match(header: string, re: RegExp, what: string): string {
	const m = header.match(re);
	if (!m) throw new Error(`npy header missing ${what}`);
	return m[1];
}
