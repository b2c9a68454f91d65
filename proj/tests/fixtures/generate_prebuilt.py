#!/usr/bin/env python3
"""Writes the prebuilt decompiler exports under corpus/builds/.

Each cell directory holds bin.export.json (what the decompiler export script
emits for the stripped binary) and bin.symbols.json (the companion build's
function symbols). Addresses follow a gcc-like layout; gcc and cross-gcc cells
are position independent and loaded at 0x100000, clang cells are not.
"""

import json
import os
import sys

HERE = os.path.dirname(os.path.abspath(__file__))
BUILDS = os.path.join(HERE, "corpus", "builds")

CELLS = [
    ("gcc", "x86", "O0"),
    ("gcc", "x86", "O3"),
    ("clang", "x86", "O0"),
    ("clang", "x86", "O3"),
    ("cross-gcc", "arm", "O0"),
    ("cross-gcc", "arm", "O3"),
]

PRINT_LINE = """void {self}(long param_1)

{{
  if (param_1 != 0) {{
    puts((char *)param_1);
  }}
  return;
}}
"""

PRINT_INT_LINE = """void {self}(uint param_1)

{{
  printf("%d\\n",(ulong)param_1);
  return;
}}
"""

BODIES = {
    "CWE121_fixture__bad": {
        "O0": """void {self}(void)

{{
  long in_FS_OFFSET;
  char local_2e [10];
  undefined local_24 [19];
  undefined local_11;
  long local_10;

  local_10 = *(long *)(in_FS_OFFSET + 0x28);
  memset(local_24,0x41,0x13);
  local_11 = 0;
  strcpy(local_2e,local_24);
  {printLine}(local_2e);
  if (local_10 != *(long *)(in_FS_OFFSET + 0x28)) {{
    __stack_chk_fail();
  }}
  return;
}}
""",
        "O3": """void {self}(void)

{{
  long in_FS_OFFSET;
  undefined8 local_38;
  undefined2 local_30;
  long local_20;

  local_20 = *(long *)(in_FS_OFFSET + 0x28);
  local_38 = 0x4141414141414141;
  local_30 = 0x4141;
  builtin_strncpy((char *)&local_38 + 10,"AAAAAAAAA",10);
  {printLine}(&local_38);
  if (local_20 == *(long *)(in_FS_OFFSET + 0x28)) {{
    return;
  }}
  __stack_chk_fail();
}}
""",
    },
    "goodG2B@CWE121": {
        "O0": """void {self}(void)

{{
  long in_FS_OFFSET;
  char local_38 [32];
  char local_18 [19];
  undefined local_5;
  long local_10;

  local_10 = *(long *)(in_FS_OFFSET + 0x28);
  memset(local_18,0x41,0x13);
  local_5 = 0;
  strcpy(local_38,local_18);
  {printLine}(local_38);
  if (local_10 != *(long *)(in_FS_OFFSET + 0x28)) {{
    __stack_chk_fail();
  }}
  return;
}}
""",
    },
    "CWE121_fixture__good": {
        "O0": """void {self}(void)

{{
  {helper}();
  return;
}}
""",
        "O3": """void {self}(void)

{{
  long in_FS_OFFSET;
  undefined8 local_48;
  undefined8 local_40;
  undefined4 local_38;
  long local_20;

  local_20 = *(long *)(in_FS_OFFSET + 0x28);
  local_48 = 0x4141414141414141;
  local_40 = 0x4141414141414141;
  local_38 = 0x414141;
  {printLine}(&local_48);
  if (local_20 == *(long *)(in_FS_OFFSET + 0x28)) {{
    return;
  }}
  __stack_chk_fail();
}}
""",
    },
    "main@CWE121": {
        "O0": """undefined8 {self}(void)

{{
  {printLine}("Calling {which}()...");
  {entry}();
  return 0;
}}
""",
    },
    "CWE476_knr__bad": {
        "O0": """void {self}(int param_1)

{{
  int *local_10;

  local_10 = (int *)0x0;
  if (0 < param_1) {{
    local_10 = (int *)malloc(4);
  }}
  *local_10 = param_1;
  {printIntLine}(*local_10);
  free(local_10);
  return;
}}
""",
        "O3": """void {self}(int param_1)

{{
  int *__ptr;

  if (param_1 < 1) {{
    __ptr = (int *)0x0;
  }}
  else {{
    __ptr = (int *)malloc(4);
  }}
  *__ptr = param_1;
  {printIntLine}(param_1);
  free(__ptr);
  return;
}}
""",
    },
    "goodB2G@CWE476": {
        "O0": """void {self}(int param_1)

{{
  int *__ptr;

  __ptr = (int *)malloc(4);
  if (__ptr != (int *)0x0) {{
    *__ptr = param_1;
    {printIntLine}(*__ptr);
    free(__ptr);
  }}
  return;
}}
""",
    },
    "CWE476_knr__good": {
        "O0": """void {self}(void)

{{
  {helper}(1);
  {helper}(0);
  return;
}}
""",
        "O3": """void {self}(void)

{{
  int *piVar1;

  piVar1 = (int *)malloc(4);
  if (piVar1 != (int *)0x0) {{
    *piVar1 = 1;
    {printIntLine}(1);
    free(piVar1);
  }}
  piVar1 = (int *)malloc(4);
  if (piVar1 != (int *)0x0) {{
    *piVar1 = 0;
    {printIntLine}(0);
    free(piVar1);
    return;
  }}
  return;
}}
""",
    },
    "main@CWE476": {
        "O0": """undefined8 {self}(void)

{{
  {entry}({arg});
  return 0;
}}
""",
    },
    "CWE416_fixture__bad": {
        "O0": """void {self}(void)

{{
  undefined4 *puVar1;

  puVar1 = (undefined4 *)operator_new(0x14);
  *(undefined8 *)puVar1 = 0;
  *(undefined8 *)(puVar1 + 2) = 0;
  puVar1[4] = 0;
  *puVar1 = 7;
  operator_delete(puVar1,0x14);
  {printIntLine}(*puVar1);
  return;
}}
""",
        "O3": """void {self}(void)

{{
  undefined4 *puVar1;

  puVar1 = (undefined4 *)operator_new(0x14);
  *puVar1 = 7;
  operator_delete(puVar1,0x14);
  {printIntLine}(*puVar1);
  return;
}}
""",
    },
    "goodG2B@CWE416": {
        "O0": """void {self}(void)

{{
  undefined4 *puVar1;

  puVar1 = (undefined4 *)operator_new(0x14);
  *(undefined8 *)puVar1 = 0;
  *(undefined8 *)(puVar1 + 2) = 0;
  puVar1[4] = 0;
  *puVar1 = 7;
  {printIntLine}(7);
  if (puVar1 != (undefined4 *)0x0) {{
    operator_delete(puVar1,0x14);
  }}
  return;
}}
""",
    },
    "CWE416_fixture__good": {
        "O0": """void {self}(void)

{{
  {helper}();
  {printLine}("done");
  return;
}}
""",
        "O3": """void {self}(void)

{{
  void *pvVar1;

  pvVar1 = operator_new(0x14);
  *(undefined4 *)pvVar1 = 7;
  {printIntLine}(7);
  operator_delete(pvVar1,0x14);
  {printLine}("done");
  return;
}}
""",
    },
    "main@CWE416": {
        "O0": """undefined8 {self}(void)

{{
  {entry}();
  return 0;
}}
""",
    },
    "png_skip": {
        "O0": """ulong {self}(undefined8 param_1,ulong param_2,long param_3)

{{
  if (param_3 + 4U <= param_2) {{
    param_2 = param_3 + 4;
  }}
  return param_2;
}}
""",
    },
    "png_crc": {
        "O0": """uint {self}(long param_1,ulong param_2)

{{
  uint local_1c;
  int local_18;
  ulong local_10;

  local_1c = 0xffffffff;
  for (local_10 = 0; local_10 < param_2; local_10 = local_10 + 1) {{
    local_1c = local_1c ^ *(byte *)(param_1 + local_10);
    for (local_18 = 0; local_18 < 8; local_18 = local_18 + 1) {{
      local_1c = -(local_1c & 1) & 0xedb88320 ^ local_1c >> 1;
    }}
  }}
  return ~local_1c;
}}
""",
        "O3": """uint {self}(byte *param_1,long param_2)

{{
  byte *pbVar1;
  uint uVar2;
  int iVar3;

  if (param_2 == 0) {{
    return 0;
  }}
  pbVar1 = param_1 + param_2;
  uVar2 = 0xffffffff;
  do {{
    uVar2 = uVar2 ^ *param_1;
    iVar3 = 8;
    do {{
      uVar2 = uVar2 >> 1 ^ -(uVar2 & 1) & 0xedb88320;
      iVar3 = iVar3 + -1;
    }} while (iVar3 != 0);
    param_1 = param_1 + 1;
  }} while (param_1 != pbVar1);
  return ~uVar2;
}}
""",
    },
    "png_read_chunk": {
        "O0": """undefined4 {self}(uint *param_1,uint *param_2,ulong param_3)

{{
  undefined4 uVar1;
  long lVar2;

  if (param_3 < 4) {{
    uVar1 = 0xffffffff;
  }}
  else {{
    *param_1 = (uint)*(byte *)param_2 << 0x18 | (uint)*(byte *)((long)param_2 + 1) << 0x10 |
               (uint)*(byte *)((long)param_2 + 2) << 8 | (uint)*(byte *)((long)param_2 + 3);
    lVar2 = {skip}(param_2,param_3,4);
    memcpy(param_1 + 1,(void *)((long)param_2 + lVar2),(ulong)*param_1);
    uVar1 = {crc}(param_1 + 1,*param_1);
  }}
  return uVar1;
}}
""",
        "O3": """undefined4 {self}(uint *param_1,uint *param_2,ulong param_3)

{{
  uint uVar1;
  undefined4 uVar2;
  ulong uVar3;

  if (param_3 < 4) {{
    return 0xffffffff;
  }}
  uVar1 = *param_2;
  uVar1 = uVar1 >> 0x18 | (uVar1 & 0xff0000) >> 8 | (uVar1 & 0xff00) << 8 | uVar1 << 0x18;
  *param_1 = uVar1;
  uVar3 = 8;
  if (param_3 < 8) {{
    uVar3 = param_3;
  }}
  memcpy(param_1 + 1,(void *)((long)param_2 + uVar3),(ulong)uVar1);
  uVar2 = {crc}(param_1 + 1,*param_1);
  return uVar2;
}}
""",
    },
    "main@png": {
        "O0": """bool {self}(void)

{{
  int iVar1;
  long in_FS_OFFSET;
  undefined local_58 [68];
  long local_10;

  local_10 = *(long *)(in_FS_OFFSET + 0x28);
  iVar1 = {read}(local_58,&DAT_00102010,0xc);
  if (local_10 != *(long *)(in_FS_OFFSET + 0x28)) {{
    __stack_chk_fail();
  }}
  return iVar1 == 0;
}}
""",
    },
}

EMPTY_BODY = """void {self}(void)

{{
}}
"""

RUNTIME_HEAD = [("_init", 0x1000), ("_start", None)]
RUNTIME_TAIL = ["deregister_tm_clones", "register_tm_clones", "__do_global_dtors_aux", "frame_dummy"]


def unit_functions(unit, variant, opt):
    """(symbol names, body key, source name) of the unit functions present in the binary."""
    if unit == "nvd/png_chunk":
        fns = [("png_skip", "png_skip"), ("png_crc", "png_crc"), ("png_read_chunk", "png_read_chunk")]
        if opt == "O3":
            fns = fns[1:]
        return fns + [("main", "main@png")]
    tag = {"testcases/CWE121_fixture": "CWE121", "testcases/CWE476_knr": "CWE476",
           "testcases/CWE416_fixture": "CWE416"}[unit]
    stem = os.path.basename(unit)
    helper = {"CWE121": "goodG2B", "CWE476": "goodB2G", "CWE416": "goodG2B"}[tag]
    if variant == "bad":
        fns = [(f"{stem}__bad", f"{stem}__bad")]
    else:
        fns = [(helper, f"{helper}@{tag}"), (f"{stem}__good", f"{stem}__good")]
        if opt == "O3":
            fns = fns[1:]
    return fns + [("main", f"main@{tag}")]


def mangle(name, unit, static=False):
    if not unit.endswith("CWE416_fixture") or name == "main":
        return name
    prefix = "_ZL" if static else "_Z"
    return f"{prefix}{len(name)}{name}v"


def support_symbols(unit):
    if unit.endswith("CWE416_fixture"):
        return [("_Z9printLinePKc", "printLine"), ("_Z12printIntLinei", "printIntLine")]
    return [("printLine", "printLine"), ("printIntLine", "printIntLine")]


def layout(unit, variant, compiler, opt):
    """Ordered [(symbol, logical name, body key)] with addresses relative to the load base."""
    fns = unit_functions(unit, variant, opt)
    entries = []
    addr = 0x1000
    entries.append(("_init", "_init", None, addr))
    order = []
    if opt == "O3":
        order.append(fns[-1])  # gcc places main in .text.startup first
        fns = fns[:-1]
    order.append(("_start", None))
    order += [(n, None) for n in RUNTIME_TAIL]
    order += fns
    addr = 0x10c0 if compiler != "clang" else 0x1050
    for name, key in order:
        static = key is not None and key.startswith(("goodG2B", "goodB2G", "png_skip"))
        sym = mangle(name, unit, static) if key else name
        entries.append((sym, name, key, addr))
        addr += 0x30 if key is None else 0x60 + 0x10 * len(name)
        addr = (addr + 0xf) & ~0xf if opt == "O3" else addr + 9
    for sym, logical in support_symbols(unit):
        entries.append((sym, logical, logical, addr))
        addr += 0x26
    entries.append(("_fini", "_fini", None, (addr + 3) & ~3))
    return entries


def render(unit, variant, compiler, arch, opt):
    entries = layout(unit, variant, compiler, opt)
    pie = compiler != "clang"
    base = 0x100000 if pie else 0x400000
    offset = 0x100000 if pie else 0
    symbol_base = 0 if pie else 0x400000

    placeholder = {}
    for sym, logical, key, addr in entries:
        entry = symbol_base + addr + offset
        if logical in ("_init", "_fini"):
            placeholder[logical] = logical
        elif logical == "_start":
            placeholder[logical] = "entry"
        else:
            placeholder[logical] = f"FUN_{entry:08x}"

    stem = os.path.basename(unit)
    helper = {"CWE121_fixture": "goodG2B", "CWE476_knr": "goodB2G", "CWE416_fixture": "goodG2B"}.get(stem)
    which = "bad" if variant == "bad" else "good"
    values = {
        "printLine": placeholder.get("printLine"),
        "printIntLine": placeholder.get("printIntLine"),
        "helper": placeholder.get(helper, ""),
        "skip": placeholder.get("png_skip", "FUN_inlined"),
        "crc": placeholder.get("png_crc"),
        "read": placeholder.get("png_read_chunk"),
        "which": which,
        "entry": placeholder.get(f"{stem}__{which}", ""),
        "arg": "1" if which == "bad" else "",
    }

    functions = []
    symbols = {}
    for sym, logical, key, addr in entries:
        entry = symbol_base + addr + offset
        symbols[sym] = f"0x{symbol_base + addr:x}"
        if sym != logical and logical not in ("_start",):
            symbols[logical] = f"0x{symbol_base + addr:x}"
        if key is None:
            code = "void {self}(void)\n\n{{\n  return;\n}}\n"
            if logical == "_start":
                code = "void {self}(undefined8 param_1,undefined8 param_2)\n\n{{\n  __libc_start_main();\n  do {{\n  }} while( true );\n}}\n"
        elif key == "printLine":
            code = PRINT_LINE
        elif key == "printIntLine":
            code = PRINT_INT_LINE
        else:
            bodies = BODIES[key]
            code = bodies.get(opt, bodies["O0"])
        if (stem, variant, compiler, opt, logical) == ("CWE476_knr", "good", "cross-gcc", "O3", "CWE476_knr__good"):
            code = EMPTY_BODY
        if (stem, variant, compiler, opt, logical) == ("CWE121_fixture", "bad", "clang", "O0", "printLine"):
            code = ""
        functions.append({"name": placeholder[logical], "entry": f"0x{entry:x}",
                          "decompiled_c": code.format(self=placeholder[logical], **values) if code else ""})

    export = {
        "binary": "bin",
        "image_base": f"0x{base:x}",
        "functions": functions,
        "language_id": "x86:LE:64:default" if arch == "x86" else "AARCH64:LE:64:v8A",
        "compiler_spec": "gcc",
    }
    return export, dict(sorted(symbols.items()))


def main():
    units = ["testcases/CWE121_fixture", "testcases/CWE476_knr", "testcases/CWE416_fixture"]
    written = 0
    for unit in units:
        for variant in ("bad", "good"):
            for compiler, arch, opt in CELLS:
                write(unit, variant, compiler, arch, opt)
                written += 1
    for compiler, arch, opt in CELLS[:2]:
        write("nvd/png_chunk", "all", compiler, arch, opt)
        written += 1
    print(f"wrote {written} cells", file=sys.stderr)


def write(unit, variant, compiler, arch, opt):
    export, symbols = render(unit, variant, compiler, arch, opt)
    cell = f"{compiler}-{arch}-{opt}-{variant}"
    out = os.path.join(BUILDS, unit, cell)
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "bin.export.json"), "w") as f:
        json.dump(export, f, indent=2)
        f.write("\n")
    with open(os.path.join(out, "bin.symbols.json"), "w") as f:
        json.dump(symbols, f, indent=2)
        f.write("\n")


if __name__ == "__main__":
    main()
