"""Generates golden fixtures under tests/fixtures/.

  kquant_blocks.json    encoded bytes + float32 reconstruction + rmse for a
                        set of fixed blocks per format, produced by the
                        independent codec model in kquant_oracle.py
  tiny.gguf             small GGUF v3 container with mixed metadata types and
                        four tensors (f32, f16, q8_0, q4_k)
  tiny_gguf_expect.json frozen directory/metadata view of tiny.gguf

Every encoded block is cross-checked against the reference dequantizer
(reference/ref_dequant.cpp) and the container against the reference
inspector (reference/ref_gguf_inspect.cpp) before fixtures are written;
generation aborts on any disagreement.
"""

import json
import os
import struct
import subprocess
import sys

import numpy as np

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))
import kquant_oracle as ko

HERE = os.path.dirname(os.path.abspath(__file__))
FIXTURES = os.path.normpath(os.path.join(HERE, "..", "fixtures"))
REF = os.path.join(HERE, "reference")

FORMATS = ["q2_k", "q3_k", "q4_k", "q5_k", "q6_k", "q8_0"]


def build_ref_tools():
    tools = {}
    for name in ("ref_dequant", "ref_gguf_inspect"):
        out = os.path.join("/tmp", name)
        src = os.path.join(REF, name + ".cpp")
        subprocess.run(
            ["g++", "-O2", "-ffp-contract=off", "-o", out, src], check=True
        )
        tools[name] = out
    return tools


def block_inputs(fmt):
    n = ko.BLOCK_LEN[fmt]
    cases = []
    for seed, name in ((1001, "gauss1"), (1002, "gauss2"), (1003, "gauss3")):
        rng = np.random.default_rng(seed)
        cases.append((name, rng.standard_normal(n).astype(np.float32)))
    rng = np.random.default_rng(1004)
    cases.append(("gauss_small", (rng.standard_normal(n) * 0.02).astype(np.float32)))
    cases.append(("zeros", np.zeros(n, np.float32)))
    cases.append(("const_pos", np.full(n, 0.7109375, np.float32)))
    cases.append(("const_neg", np.full(n, -0.3203125, np.float32)))
    rng = np.random.default_rng(1005)
    cases.append(("shifted_pos", (np.abs(rng.standard_normal(n)) + 0.5).astype(np.float32)))
    rng = np.random.default_rng(1006)
    x = rng.standard_normal(n).astype(np.float32)
    x[n // 3] = np.float32(x[n // 3] * 64.0)
    cases.append(("outlier", x))
    return cases


def gen_kquant_blocks(ref_dequant):
    entries = []
    checked = 0
    for fmt in FORMATS:
        for name, x in block_inputs(fmt):
            blk, enc = ko.encode_block(x, fmt)
            deq = ko.decode_block(blk, fmt)
            assert np.array_equal(deq.view(np.uint32), enc.recon.view(np.uint32))
            r = subprocess.run(
                [ref_dequant, fmt], input=blk, capture_output=True, check=True
            )
            ref = np.frombuffer(r.stdout, np.float32)
            if not np.array_equal(ref.view(np.uint32), deq.view(np.uint32)):
                raise SystemExit(f"reference mismatch for {fmt}/{name}")
            checked += 1
            x64 = x.astype(np.float64)
            d64 = deq.astype(np.float64)
            rmse = float(np.sqrt(np.mean((x64 - d64) ** 2)))
            entries.append(
                {
                    "format": fmt,
                    "name": name,
                    "input_bits": [int(v) for v in x.view(np.uint32)],
                    "encoded_hex": blk.hex(),
                    "dequant_bits": [int(v) for v in deq.view(np.uint32)],
                    "rmse": rmse,
                }
            )
    doc = {
        "comment": "golden k-quant blocks; float32 values stored as uint32 bit patterns",
        "blocks": entries,
    }
    path = os.path.join(FIXTURES, "kquant_blocks.json")
    with open(path, "w") as f:
        json.dump(doc, f, indent=1)
        f.write("\n")
    print(f"wrote {path}: {len(entries)} blocks, {checked} reference-checked")


# ---------------------------------------------------------------------------
# GGUF fixture

GGUF_T_U8, GGUF_T_I8, GGUF_T_U16, GGUF_T_I16 = 0, 1, 2, 3
GGUF_T_U32, GGUF_T_I32, GGUF_T_F32, GGUF_T_BOOL = 4, 5, 6, 7
GGUF_T_STR, GGUF_T_ARR, GGUF_T_U64, GGUF_T_I64, GGUF_T_F64 = 8, 9, 10, 11, 12

TENSOR_TYPE_IDS = {"f32": 0, "f16": 1, "q8_0": 8, "q2_k": 10, "q3_k": 11, "q4_k": 12, "q5_k": 13, "q6_k": 14}


def gstr(s):
    b = s.encode()
    return struct.pack("<Q", len(b)) + b


def kv_bytes(key, type_id, value):
    out = gstr(key) + struct.pack("<i", type_id)
    if type_id == GGUF_T_U32:
        out += struct.pack("<I", value)
    elif type_id == GGUF_T_I32:
        out += struct.pack("<i", value)
    elif type_id == GGUF_T_F32:
        out += struct.pack("<f", value)
    elif type_id == GGUF_T_BOOL:
        out += struct.pack("<B", 1 if value else 0)
    elif type_id == GGUF_T_U64:
        out += struct.pack("<Q", value)
    elif type_id == GGUF_T_I64:
        out += struct.pack("<q", value)
    elif type_id == GGUF_T_F64:
        out += struct.pack("<d", value)
    elif type_id == GGUF_T_STR:
        out += gstr(value)
    elif type_id == GGUF_T_ARR:
        elem_type, elems = value
        out += struct.pack("<i", elem_type) + struct.pack("<Q", len(elems))
        for e in elems:
            if elem_type == GGUF_T_STR:
                out += gstr(e)
            elif elem_type == GGUF_T_I32:
                out += struct.pack("<i", e)
            elif elem_type == GGUF_T_F32:
                out += struct.pack("<f", e)
            else:
                raise ValueError(elem_type)
    else:
        raise ValueError(type_id)
    return out


def gen_tiny_gguf(ref_inspect):
    align = 32
    kvs = [
        ("general.architecture", GGUF_T_STR, "toy"),
        ("general.alignment", GGUF_T_U32, align),
        ("general.name", GGUF_T_STR, "tiny fixture"),
        ("test.bool_true", GGUF_T_BOOL, True),
        ("test.f32", GGUF_T_F32, 0.25),
        ("test.i32", GGUF_T_I32, -7),
        ("test.u64", GGUF_T_U64, 1 << 40),
        ("test.arr_i32", GGUF_T_ARR, (GGUF_T_I32, [1, 2, 3])),
        ("test.arr_str", GGUF_T_ARR, (GGUF_T_STR, ["alpha", "beta"])),
    ]

    rng = np.random.default_rng(2002)
    f32_data = np.array([0.0, 1.0, -1.0, 0.5, -2.5, 3.25, -0.125, 7.0], np.float32)
    f16_data = rng.standard_normal(256).astype(np.float16)
    rng = np.random.default_rng(2003)
    q8_src = rng.standard_normal(64).astype(np.float32)
    q8_data = b"".join(ko.encode_block(q8_src[i * 32 : (i + 1) * 32], "q8_0")[0] for i in range(2))
    rng = np.random.default_rng(2004)
    q4_src = rng.standard_normal(512).astype(np.float32)
    q4_data = b"".join(ko.encode_block(q4_src[i * 256 : (i + 1) * 256], "q4_k")[0] for i in range(2))

    tensors = [
        ("t.f32", [8], "f32", f32_data.tobytes()),
        ("t.f16", [256], "f16", f16_data.tobytes()),
        ("t.q8", [64], "q8_0", q8_data),
        ("t.q4k", [256, 2], "q4_k", q4_data),
    ]

    infos = b""
    data = b""
    dir_expect = []
    for name, ne, tname, payload in tensors:
        if len(data) % align:
            data += b"\x00" * (align - len(data) % align)
        offset = len(data)
        data += payload
        infos += gstr(name) + struct.pack("<I", len(ne))
        for d in ne:
            infos += struct.pack("<Q", d)
        infos += struct.pack("<i", TENSOR_TYPE_IDS[tname]) + struct.pack("<Q", offset)
        dir_expect.append(
            {"name": name, "ne": ne, "type": tname, "offset": offset, "bytes": len(payload)}
        )

    head = b"GGUF" + struct.pack("<I", 3) + struct.pack("<Q", len(tensors)) + struct.pack("<Q", len(kvs))
    for k in kvs:
        head += kv_bytes(*k)
    head += infos
    data_offset = len(head)
    if data_offset % align:
        data_offset += align - data_offset % align
    blob = head + b"\x00" * (data_offset - len(head)) + data

    path = os.path.join(FIXTURES, "tiny.gguf")
    with open(path, "wb") as f:
        f.write(blob)

    # cross-check with the reference inspector
    r = subprocess.run([ref_inspect, path], capture_output=True, text=True, check=True)
    lines = r.stdout.splitlines()
    assert lines[0] == f"version=3 n_tensors={len(tensors)} n_kv={len(kvs)}", lines[0]
    tensor_lines = [l for l in lines if l.startswith("tensor ")]
    assert len(tensor_lines) == len(tensors)
    for line, exp in zip(tensor_lines, dir_expect):
        ne4 = (exp["ne"] + [1, 1, 1, 1])[:4]
        want = (
            f"tensor {exp['name']} n_dims={len(exp['ne'])} "
            f"ne=[{ne4[0]},{ne4[1]},{ne4[2]},{ne4[3]}] "
            f"type={TENSOR_TYPE_IDS[exp['type']]} offset={exp['offset']}"
        )
        assert line == want, (line, want)
    assert lines[-1] == f"alignment={align} data_offset={data_offset}", lines[-1]
    kv_lines = [l for l in lines if l.startswith("kv ")]
    assert kv_lines[1] == "kv general.alignment type=4 value=0x20"
    assert kv_lines[0] == "kv general.architecture type=8 value=toy"
    assert kv_lines[5] == "kv test.i32 type=5 value=0xfffffff9"

    expect = {
        "version": 3,
        "alignment": align,
        "n_kv": len(kvs),
        "n_tensors": len(tensors),
        "kv": [
            {"key": "general.architecture", "type": "string", "value": "toy"},
            {"key": "general.alignment", "type": "u32", "value": 32},
            {"key": "general.name", "type": "string", "value": "tiny fixture"},
            {"key": "test.bool_true", "type": "bool", "value": True},
            {"key": "test.f32", "type": "f32", "value": 0.25},
            {"key": "test.i32", "type": "i32", "value": -7},
            {"key": "test.u64", "type": "u64", "value": 1 << 40},
            {"key": "test.arr_i32", "type": "array", "elem_type": "i32", "value": [1, 2, 3]},
            {"key": "test.arr_str", "type": "array", "elem_type": "string", "value": ["alpha", "beta"]},
        ],
        "tensors": dir_expect,
        "data_offset": data_offset,
        "data_size": len(data),
        "file_size": len(blob),
    }
    epath = os.path.join(FIXTURES, "tiny_gguf_expect.json")
    with open(epath, "w") as f:
        json.dump(expect, f, indent=1)
        f.write("\n")
    print(f"wrote {path} ({len(blob)} bytes) and {epath}; reference inspector agreed")


def gen_fp16_cases():
    """float32 -> float16 conversion pairs (round-to-nearest-even), stressing
    ties, subnormal boundaries, overflow, and specials."""
    pats = [
        0x00000000, 0x80000000,  # +-0
        0x7F800000, 0xFF800000,  # +-inf
        0x7FC00000, 0x7F800001,  # NaNs
        0x3F800000, 0xBF800000,  # +-1
        0x477FE000,              # 65504, largest half
        0x477FF000,              # 65520, ties to inf
        0x477FEFFF,              # just below the tie
        0x477FF001,              # just above the tie
        0x33000000,              # 2^-25, ties to zero
        0x33000001,              # rounds to smallest subnormal
        0x33800000,              # 2^-24, smallest half subnormal
        0x38800000,              # 2^-14, smallest half normal
        0x387FC000, 0x387FE000, 0x387FFFFF,  # around the normal boundary
        0x3F801000, 0x3F803000,  # mantissa ties (even/odd targets)
        0x3F801001,
    ]
    rng = np.random.default_rng(3001)
    pats += [int(v) for v in rng.integers(0, 1 << 32, 4096, dtype=np.uint64)]
    # random values with small exponents to hit subnormal halves
    exps = rng.integers(0x33, 0x39, 1024, dtype=np.uint64)
    rest = rng.integers(0, 1 << 24, 1024, dtype=np.uint64)
    sign = rng.integers(0, 2, 1024, dtype=np.uint64)
    pats += [int((s << 31) | (e << 23) | (m & 0x7FFFFF)) for s, e, m in zip(sign, exps, rest)]
    cases = []
    for p in pats:
        f = np.uint32(p).view(np.float32)
        h = int(np.float16(f).view(np.uint16))
        cases.append([int(p), h])
    path = os.path.join(FIXTURES, "fp16_cases.json")
    with open(path, "w") as f:
        json.dump({"f32_to_f16": cases}, f)
        f.write("\n")
    print(f"wrote {path}: {len(cases)} conversion pairs")


def main():
    os.makedirs(FIXTURES, exist_ok=True)
    tools = build_ref_tools()
    gen_kquant_blocks(tools["ref_dequant"])
    gen_tiny_gguf(tools["ref_gguf_inspect"])
    gen_fp16_cases()


if __name__ == "__main__":
    main()
