#pragma once

// Line-oriented trust database with a SHA-256 trailer:
//
//   IPSDB 1
//   R <digest> <kind> <scope|-> <compliant> <total> <0|1> <granted_tick|-> <label>
//   # <sha256 of every preceding byte>

#include "ipsg/privilege.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ipsg {

inline constexpr std::string_view kStoreHeader = "IPSDB 1";

/// Throws DuplicateKeyError when two records share (digest, scope), and
/// InvalidArgument for a malformed record.
std::string serialize_store(std::span<const TrustRecord> records);

/// Throws VersionError, IntegrityError or FormatError (with line number).
std::vector<TrustRecord> parse_store(std::string_view text);

/// Atomic: the new content is written next to `path` and renamed over it.
void save_store(std::span<const TrustRecord> records, const std::filesystem::path& path);

std::vector<TrustRecord> load_store(const std::filesystem::path& path);

/// As load_store, but an absent file is an empty store.
std::vector<TrustRecord> load_store_or_empty(const std::filesystem::path& path);

namespace detail {

std::filesystem::path stage_content(std::string_view content, const std::filesystem::path& path);

// First half of save_store: writes and flushes the staging file and returns
// its path without touching `path`.
std::filesystem::path stage_store(std::span<const TrustRecord> records, const std::filesystem::path& path);

void commit_store(const std::filesystem::path& staged, const std::filesystem::path& path);

}  // namespace detail

std::string read_file(const std::filesystem::path& path);

/// Write-then-rename replacement of `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace ipsg
