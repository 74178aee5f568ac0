#include "ipsg/trust_store.hpp"

#include "ipsg/error.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <system_error>
#include <unistd.h>

namespace ipsg {

namespace {

std::optional<std::uint64_t> parse_uint(std::string_view s)
{
    if (s.empty() || (s.size() > 1 && s.front() == '0')) return std::nullopt;
    std::uint64_t v = 0;
    const auto* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || ptr != end) return std::nullopt;
    return v;
}

bool is_digits(std::string_view s)
{
    return !s.empty() && s.find_first_not_of("0123456789") == std::string_view::npos;
}

void check_record(const TrustRecord& rec)
{
    if (!rec.well_formed()) throw InvalidArgument("malformed trust record for " + rec.signature.digest.hex());
    if (!is_valid_label(rec.signature.label)) throw InvalidArgument("invalid label for " + rec.signature.digest.hex());
}

TrustRecord parse_record(std::string_view line, std::size_t lineno)
{
    // Eight space-separated fields, then the label as the rest of the line.
    std::string_view fields[8];
    std::size_t pos = 0;
    for (int i = 0; i < 8; ++i) {
        const auto sp = line.find(' ', pos);
        if (sp == std::string_view::npos) throw FormatError("record has too few fields", lineno);
        fields[i] = line.substr(pos, sp - pos);
        pos = sp + 1;
    }
    const std::string_view label = line.substr(pos);

    if (fields[0] != "R") throw FormatError("expected record line starting with 'R'", lineno);
    if (!is_lower_hex(fields[1])) throw FormatError("digest must be lowercase hex", lineno);
    const auto digest = Digest::from_hex(fields[1]);
    if (!digest) throw FormatError("digest must be 64 hex characters", lineno);
    const auto kind = parse_signature_kind(fields[2]);
    if (!kind) throw FormatError("unknown kind '" + std::string(fields[2]) + "'", lineno);
    if (fields[3] != "-" && !is_valid_principal(fields[3])) throw FormatError("invalid scope", lineno);
    const auto compliant = parse_uint(fields[4]);
    const auto total = parse_uint(fields[5]);
    if (!compliant || !total) throw FormatError("counters must be unsigned integers", lineno);
    if (fields[6] != "0" && fields[6] != "1") throw FormatError("granted flag must be 0 or 1", lineno);
    if (!is_valid_label(label)) throw FormatError("invalid label", lineno);

    TrustRecord rec;
    rec.signature = EntitySignature{*digest, *kind, std::string(label)};
    rec.scope = Scope::parse(fields[3]);
    rec.compliant_count = *compliant;
    rec.total_count = *total;
    rec.granted = fields[6] == "1";
    if (fields[7] != "-") {
        const auto tick = parse_uint(fields[7]);
        if (!tick) throw FormatError("granted_tick must be an unsigned integer or '-'", lineno);
        rec.granted_tick = *tick;
    }
    if (rec.compliant_count > rec.total_count) throw FormatError("compliant count exceeds total", lineno);
    if (rec.granted != rec.granted_tick.has_value()) throw FormatError("granted_tick must be present iff granted", lineno);
    return rec;
}

}  // namespace

std::string serialize_store(std::span<const TrustRecord> records)
{
    std::set<std::pair<Digest, Scope>> seen;
    std::ostringstream out;
    out << kStoreHeader << '\n';
    for (const auto& rec : records) {
        check_record(rec);
        if (!seen.emplace(rec.signature.digest, rec.scope).second) {
            throw DuplicateKeyError("two records share key " + rec.signature.digest.hex() + " " + rec.scope.render());
        }
        out << "R " << rec.signature.digest.hex() << ' ' << to_string(rec.signature.kind) << ' ' << rec.scope.render()
            << ' ' << rec.compliant_count << ' ' << rec.total_count << ' ' << (rec.granted ? '1' : '0') << ' '
            << (rec.granted_tick ? std::to_string(*rec.granted_tick) : "-") << ' ' << rec.signature.label << '\n';
    }
    std::string body = out.str();
    body += "# " + sha256(body).hex() + "\n";
    return body;
}

std::vector<TrustRecord> parse_store(std::string_view text)
{
    const auto first_nl = text.find('\n');
    const std::string_view header = text.substr(0, first_nl);
    // A well-formed header naming another version is reported as such even if
    // that version would lay out its trailer differently.
    if (header.starts_with("IPSDB ") && is_digits(header.substr(6)) && header != kStoreHeader) {
        throw VersionError("unsupported store version '" + std::string(header.substr(6)) + "'", 1);
    }
    if (first_nl == std::string_view::npos) throw FormatError("missing header line", 1);
    if (text.back() != '\n') throw FormatError("store must end with a newline");
    if (first_nl + 1 == text.size()) throw FormatError("missing trailer", 2);

    // The trailer has a fixed width, so it is located by position rather than
    // by line structure; any change to the covered bytes is then a digest
    // mismatch even when it merges or splits lines.
    constexpr std::size_t kTrailerSize = 2 + 64 + 1;
    const std::size_t trailer_start = text.size() >= kTrailerSize ? text.size() - kTrailerSize : 0;
    const std::string_view covered = text.substr(0, trailer_start);
    const std::string_view trailer = text.substr(trailer_start, text.size() - 1 - trailer_start);
    const std::size_t trailer_line = static_cast<std::size_t>(std::count(covered.begin(), covered.end(), '\n')) + 1;
    if (text.size() < kTrailerSize + 1 || !trailer.starts_with("# ") || !is_lower_hex(trailer.substr(2))) {
        throw FormatError("last line must be '# <sha256>'", trailer_line);
    }
    if (sha256(covered).hex() != trailer.substr(2)) throw IntegrityError("store digest mismatch");
    if (covered.back() != '\n') throw FormatError("last line must be '# <sha256>'", trailer_line);

    if (header != kStoreHeader) throw FormatError("expected header 'IPSDB 1'", 1);

    std::vector<TrustRecord> records;
    std::set<std::pair<Digest, Scope>> seen;
    std::size_t pos = first_nl + 1;
    std::size_t lineno = 2;
    while (pos < trailer_start) {
        const auto nl = text.find('\n', pos);
        auto rec = parse_record(text.substr(pos, nl - pos), lineno);
        if (!seen.emplace(rec.signature.digest, rec.scope).second) throw FormatError("duplicate record key", lineno);
        records.push_back(std::move(rec));
        pos = nl + 1;
        ++lineno;
    }
    return records;
}

namespace detail {

std::filesystem::path stage_content(std::string_view content, const std::filesystem::path& path)
{
    std::filesystem::path staged = path;
    staged += ".tmp." + std::to_string(::getpid());

    std::FILE* f = std::fopen(staged.c_str(), "wb");
    if (f == nullptr) throw IoError("cannot write " + staged.string());
    const bool ok = std::fwrite(content.data(), 1, content.size(), f) == content.size() && std::fflush(f) == 0 &&
                    ::fsync(::fileno(f)) == 0;
    if (std::fclose(f) != 0 || !ok) {
        std::error_code ec;
        std::filesystem::remove(staged, ec);
        throw IoError("failed writing " + staged.string());
    }
    return staged;
}

std::filesystem::path stage_store(std::span<const TrustRecord> records, const std::filesystem::path& path)
{
    return stage_content(serialize_store(records), path);
}

void commit_store(const std::filesystem::path& staged, const std::filesystem::path& path)
{
    std::error_code ec;
    std::filesystem::rename(staged, path, ec);
    if (ec) {
        std::filesystem::remove(staged, ec);
        throw IoError("cannot replace " + path.string());
    }
}

}  // namespace detail

void save_store(std::span<const TrustRecord> records, const std::filesystem::path& path)
{
    detail::commit_store(detail::stage_store(records, path), path);
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content)
{
    detail::commit_store(detail::stage_content(content, path), path);
}

std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("error reading " + path.string());
    return ss.str();
}

std::vector<TrustRecord> load_store(const std::filesystem::path& path) { return parse_store(read_file(path)); }

std::vector<TrustRecord> load_store_or_empty(const std::filesystem::path& path)
{
    std::error_code ec;
    if (!std::filesystem::exists(path, ec)) return {};
    return load_store(path);
}

}  // namespace ipsg
