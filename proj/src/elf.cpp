#include "debinforge/elf.hpp"

#include <cxxabi.h>
#include <elf.h>

#include <cstdlib>
#include <cstring>
#include <map>
#include <memory>
#include <set>
#include <span>

#include "debinforge/error.hpp"

namespace debinforge::elf {

namespace {

class Reader {
public:
    Reader(std::span<const unsigned char> bytes, bool big_endian) : bytes_(bytes), big_(big_endian) {}

    template <typename T>
    T read(std::uint64_t offset) const
    {
        if (offset > bytes_.size() || bytes_.size() - offset < sizeof(T))
            fail(ErrorKind::UnreadableBinary, "truncated ELF file");
        T value{};
        std::memcpy(&value, bytes_.data() + offset, sizeof(T));
        if (big_)
            value = swap(value);
        return value;
    }

    std::string cstring(std::uint64_t offset, std::uint64_t limit) const
    {
        if (offset >= limit || limit > bytes_.size())
            return {};
        const char* begin = reinterpret_cast<const char*>(bytes_.data() + offset);
        std::size_t length = strnlen(begin, limit - offset);
        return std::string(begin, length);
    }

    std::size_t size() const { return bytes_.size(); }

private:
    template <typename T>
    static T swap(T value)
    {
        unsigned char raw[sizeof(T)];
        std::memcpy(raw, &value, sizeof(T));
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i)
            std::swap(raw[i], raw[sizeof(T) - 1 - i]);
        std::memcpy(&value, raw, sizeof(T));
        return value;
    }

    std::span<const unsigned char> bytes_;
    bool big_;
};

struct Section {
    std::uint32_t type;
    std::uint64_t offset;
    std::uint64_t size;
    std::uint32_t link;
    std::uint64_t entsize;
};

template <bool Is64>
SymbolTables parse(const Reader& r)
{
    using Ehdr = std::conditional_t<Is64, Elf64_Ehdr, Elf32_Ehdr>;
    using Shdr = std::conditional_t<Is64, Elf64_Shdr, Elf32_Shdr>;
    using Sym = std::conditional_t<Is64, Elf64_Sym, Elf32_Sym>;

    const auto shoff = r.read<decltype(Ehdr::e_shoff)>(offsetof(Ehdr, e_shoff));
    const auto shentsize = r.read<decltype(Ehdr::e_shentsize)>(offsetof(Ehdr, e_shentsize));
    std::uint64_t shnum = r.read<decltype(Ehdr::e_shnum)>(offsetof(Ehdr, e_shnum));
    if (shoff == 0)
        return {};
    if (shentsize != sizeof(Shdr))
        fail(ErrorKind::UnreadableBinary, "unexpected section header size");
    if (shnum == 0)
        shnum = r.read<decltype(Shdr::sh_size)>(shoff + offsetof(Shdr, sh_size));
    if (shnum > r.size() / sizeof(Shdr))
        fail(ErrorKind::UnreadableBinary, "implausible section count");

    std::vector<Section> sections;
    sections.reserve(shnum);
    for (std::uint64_t i = 0; i < shnum; ++i) {
        const std::uint64_t base = shoff + i * sizeof(Shdr);
        sections.push_back({
            r.read<decltype(Shdr::sh_type)>(base + offsetof(Shdr, sh_type)),
            r.read<decltype(Shdr::sh_offset)>(base + offsetof(Shdr, sh_offset)),
            r.read<decltype(Shdr::sh_size)>(base + offsetof(Shdr, sh_size)),
            r.read<decltype(Shdr::sh_link)>(base + offsetof(Shdr, sh_link)),
            r.read<decltype(Shdr::sh_entsize)>(base + offsetof(Shdr, sh_entsize)),
        });
    }

    SymbolTables tables;
    for (const auto& s : sections) {
        if (s.type != SHT_SYMTAB && s.type != SHT_DYNSYM)
            continue;
        if (s.link >= sections.size() || s.entsize != sizeof(Sym))
            fail(ErrorKind::UnreadableBinary, "malformed symbol table");
        const Section& strtab = sections[s.link];
        const std::uint64_t strtab_end = strtab.offset + strtab.size;
        auto& out = s.type == SHT_SYMTAB ? tables.symtab : tables.dynsym;
        if (s.type == SHT_SYMTAB)
            tables.has_symtab = true;
        for (std::uint64_t off = s.offset; off + sizeof(Sym) <= s.offset + s.size; off += sizeof(Sym)) {
            const auto name_index = r.read<decltype(Sym::st_name)>(off + offsetof(Sym, st_name));
            const auto info = r.read<decltype(Sym::st_info)>(off + offsetof(Sym, st_info));
            const auto shndx = r.read<decltype(Sym::st_shndx)>(off + offsetof(Sym, st_shndx));
            const auto value = r.read<decltype(Sym::st_value)>(off + offsetof(Sym, st_value));
            Symbol sym;
            sym.name = r.cstring(strtab.offset + name_index, strtab_end);
            if (sym.name.empty())
                continue;
            sym.value = value;
            sym.is_function = (info & 0xf) == STT_FUNC;
            sym.defined = shndx != SHN_UNDEF;
            out.push_back(std::move(sym));
        }
    }
    return tables;
}

} // namespace

SymbolTables read_symbols(const std::filesystem::path& path)
{
    std::string bytes;
    try {
        bytes = read_file(path);
    } catch (const Error&) {
        fail(ErrorKind::UnreadableBinary, "cannot read " + path.string());
    }
    if (bytes.size() < EI_NIDENT || std::memcmp(bytes.data(), ELFMAG, SELFMAG) != 0)
        fail(ErrorKind::UnreadableBinary, "not an ELF file: " + path.string());
    const auto cls = static_cast<unsigned char>(bytes[EI_CLASS]);
    const auto data = static_cast<unsigned char>(bytes[EI_DATA]);
    if ((cls != ELFCLASS32 && cls != ELFCLASS64) || (data != ELFDATA2LSB && data != ELFDATA2MSB))
        fail(ErrorKind::UnreadableBinary, "unsupported ELF class or encoding: " + path.string());
    Reader reader({reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size()}, data == ELFDATA2MSB);
    return cls == ELFCLASS64 ? parse<true>(reader) : parse<false>(reader);
}

std::string demangled_base_name(const std::string& symbol)
{
    if (symbol.rfind("_Z", 0) != 0)
        return symbol;
    int status = 0;
    std::unique_ptr<char, void (*)(void*)> raw(abi::__cxa_demangle(symbol.c_str(), nullptr, nullptr, &status),
                                               std::free);
    if (status != 0 || !raw)
        return symbol;
    std::string text = raw.get();
    // Drop a trailing "(...)" parameter list and any cv/ref qualifiers after it.
    if (auto close = text.rfind(')'); close != std::string::npos) {
        int depth = 0;
        for (std::size_t i = close + 1; i-- > 0;) {
            if (text[i] == ')')
                ++depth;
            else if (text[i] == '(' && --depth == 0) {
                text.erase(i);
                break;
            }
        }
    }
    if (!text.empty() && text.back() == '>') {
        int depth = 0;
        for (std::size_t i = text.size(); i-- > 0;) {
            if (text[i] == '>')
                ++depth;
            else if (text[i] == '<' && --depth == 0) {
                text.erase(i);
                break;
            }
        }
    }
    if (auto colon = text.rfind("::"); colon != std::string::npos)
        text.erase(0, colon + 2);
    return text.empty() ? symbol : text;
}

SymbolMap function_symbols(const SymbolTables& tables)
{
    SymbolMap map;
    std::map<std::string, std::set<std::uint64_t>> demangled;
    for (const auto& s : tables.symtab) {
        if (!s.is_function || !s.defined)
            continue;
        map.emplace(s.name, s.value);
        if (auto base = demangled_base_name(s.name); base != s.name)
            demangled[base].insert(s.value);
    }
    // Overloads sharing a base name are ambiguous and stay reachable only by their mangled name.
    for (const auto& [base, addresses] : demangled) {
        if (addresses.size() == 1)
            map.emplace(base, *addresses.begin());
    }
    return map;
}

} // namespace debinforge::elf
