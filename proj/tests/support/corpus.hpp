#pragma once

// Fixture corpus: ten files, three of which carry a threat pattern, plus a
// signature database and a user database with two users whose verifiers were
// computed outside this code base.

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace ipsg::testing {

inline constexpr char kAliceVerifier[] = "e8d1e18507861757b13674f2e9d0e9149ed6667f432ad5b8220f9c049a29dc54";
inline constexpr char kBobVerifier[] = "76138862f00f8758aa78dd05a54ab686c5242551d50669846236398d617fc9c9";

inline constexpr char kUserDb[] =
    "IPSUSR 1\n"
    "U alice 000102030405060708090a0b0c0d0e0f e8d1e18507861757b13674f2e9d0e9149ed6667f432ad5b8220f9c049a29dc54\n"
    "U bob 101112131415161718191a1b1c1d1e1f 76138862f00f8758aa78dd05a54ab686c5242551d50669846236398d617fc9c9\n";

inline constexpr char kSigDb[] =
    "IPSSIG 1\n"
    "S deadbeef deadbeef\n"
    "S evil 6576696c2d7061796c6f6164\n"
    "S nop-sled 90909090\n";

struct Corpus {
    std::vector<std::filesystem::path> files;
    std::vector<std::filesystem::path> infected;  // in corpus order
    std::filesystem::path sigdb;
    std::filesystem::path userdb;
};

inline void write_bytes(const std::filesystem::path& p, const std::string& bytes)
{
    std::ofstream(p, std::ios::binary) << bytes;
}

inline Corpus make_corpus(const std::filesystem::path& dir)
{
    Corpus c;
    const std::vector<std::string> contents = {
        "plain text file\n",
        std::string("\x01\x02\xde\xad\xbe\xef\x03", 7),
        "readme: nothing to see\n",
        "config=1\nmode=fast\n",
        "launcher evil-payload here\n",
        std::string("\xde\xad\xbe", 3),  // truncated pattern, clean
        "another harmless document\n",
        std::string("\x90\x90\x90\x00\x90", 5),  // interrupted sled, clean
        std::string("prefix\x90\x90\x90\x90suffix", 16),
        "",
    };
    for (std::size_t i = 0; i < contents.size(); ++i) {
        const auto p = dir / ("file" + std::to_string(i) + ".bin");
        write_bytes(p, contents[i]);
        c.files.push_back(p);
    }
    c.infected = {c.files[1], c.files[4], c.files[8]};
    c.sigdb = dir / "sigs.db";
    c.userdb = dir / "users.db";
    write_bytes(c.sigdb, kSigDb);
    write_bytes(c.userdb, kUserDb);
    return c;
}

}  // namespace ipsg::testing
