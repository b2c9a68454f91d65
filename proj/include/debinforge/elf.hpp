#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "debinforge/model.hpp"

namespace debinforge::elf {

struct Symbol {
    std::string name;
    std::uint64_t value = 0;
    bool is_function = false;
    bool defined = false;
};

struct SymbolTables {
    bool has_symtab = false;
    std::vector<Symbol> symtab;
    std::vector<Symbol> dynsym;
};

// Reads .symtab and .dynsym of a 32/64-bit, little/big-endian ELF file.
// Throws UnreadableBinary.
SymbolTables read_symbols(const std::filesystem::path& path);

// "ns::Cls::run(int) const" -> "run" for mangled C++ names; other names unchanged.
std::string demangled_base_name(const std::string& symbol);

// Defined function symbols of .symtab, name -> address. C++ symbols also appear under
// their demangled base name when that name is unambiguous.
SymbolMap function_symbols(const SymbolTables& tables);

} // namespace debinforge::elf
