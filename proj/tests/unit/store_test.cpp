#include "doctest.h"

#include "ipsg/error.hpp"
#include "ipsg/trust_store.hpp"
#include "temp_dir.hpp"

#include <filesystem>
#include <fstream>
#include <random>

using namespace ipsg;
using ipsg::testing::TempDir;

namespace {

TrustRecord random_record(std::mt19937_64& rng, int index)
{
    Digest::Bytes bytes{};
    for (auto& b : bytes) b = static_cast<std::uint8_t>(rng());
    TrustRecord r;
    r.signature.digest = Digest(bytes);
    r.signature.kind = rng() % 2 ? SignatureKind::AgentToken : SignatureKind::FileContent;
    static const std::string alphabet = "abcdefghijklmnopqrstuvwxyz ABC-_.:/\t\xc3\xa9";
    const std::size_t label_len = rng() % 20;
    for (std::size_t i = 0; i < label_len; ++i) r.signature.label += alphabet[rng() % alphabet.size()];
    // Unique scopes keep (digest, scope) unique even if digests collided.
    r.scope = index % 3 == 0 ? Scope::global() : Scope::principal("user" + std::to_string(index));
    r.total_count = rng() % 1000;
    r.compliant_count = r.total_count == 0 ? 0 : rng() % (r.total_count + 1);
    r.granted = rng() % 2 == 1;
    if (r.granted) r.granted_tick = rng() % 2 ? rng() : rng() % 100;
    return r;
}

std::vector<TrustRecord> small_store()
{
    return {
        TrustRecord{EntitySignature{sha256("token:blue"), SignatureKind::AgentToken, "token:blue"}, Scope::global(), 1, 1,
                    true, 28},
        TrustRecord{EntitySignature{sha256("file"), SignatureKind::FileContent, "a.bin"}, Scope::principal("alice"), 0, 2,
                    false, std::nullopt},
    };
}

}  // namespace

TEST_CASE("empty store serializes to header and trailer only")
{
    CHECK(serialize_store({}) ==
          "IPSDB 1\n# 3e8e128bc48f75e08c76fc2cad66833e91e1e5013c3bb5e25e016d210e465f1b\n");
    CHECK(parse_store(serialize_store({})).empty());
}

TEST_CASE("record line layout")
{
    const auto recs = small_store();
    const std::string text = serialize_store(recs);
    const std::string body = "IPSDB 1\nR " + sha256("token:blue").hex() + " AgentToken - 1 1 1 28 token:blue\nR " +
                             sha256("file").hex() + " FileContent alice 0 2 0 - a.bin\n";
    CHECK(text == body + "# " + sha256(body).hex() + "\n");
}

TEST_CASE("single record round trip")
{
    TempDir dir;
    const auto recs = std::vector<TrustRecord>{small_store()[0]};
    save_store(recs, dir / "s.db");
    const auto back = load_store(dir / "s.db");
    REQUIRE(back.size() == 1);
    CHECK(back[0] == recs[0]);
    CHECK(back[0].signature.label == "token:blue");
}

TEST_CASE("100 random records round trip through a file")
{
    TempDir dir;
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        std::mt19937_64 rng(seed);
        std::vector<TrustRecord> recs;
        for (int i = 0; i < 100; ++i) recs.push_back(random_record(rng, i));
        save_store(recs, dir / "r.db");
        CHECK(load_store(dir / "r.db") == recs);
    }
}

TEST_CASE("duplicate (digest, scope) is rejected and nothing is written")
{
    TempDir dir;
    auto recs = small_store();
    auto dup = recs[0];
    dup.signature.kind = SignatureKind::FileContent;
    recs.push_back(dup);
    CHECK_THROWS_AS(save_store(recs, dir / "d.db"), DuplicateKeyError);
    CHECK_FALSE(std::filesystem::exists(dir / "d.db"));
    CHECK(std::distance(std::filesystem::directory_iterator(dir.path()), std::filesystem::directory_iterator{}) == 0);
}

TEST_CASE("every single-byte corruption is detected")
{
    const std::string text = serialize_store(small_store());
    const std::size_t header_end = text.find('\n') + 1;
    const std::size_t trailer_start = text.rfind("# ");
    for (std::size_t i = 0; i < text.size(); ++i) {
        for (unsigned mask : {0x01u, 0x20u, 0x80u, 0xffu}) {
            std::string bad = text;
            bad[i] = static_cast<char>(static_cast<unsigned char>(bad[i]) ^ mask);
            if (i >= header_end && i < trailer_start) {
                CHECK_THROWS_AS(parse_store(bad), IntegrityError);
            } else {
                CHECK_THROWS_AS(parse_store(bad), Error);
            }
        }
    }
}

TEST_CASE("header and trailer errors")
{
    const std::string body2 = "IPSDB 2\n";
    CHECK_THROWS_AS(parse_store(body2 + "# " + sha256(body2).hex() + "\n"), VersionError);
    CHECK_THROWS_AS(parse_store("IPSDB 2\n# 0000\n"), VersionError);
    CHECK_THROWS_AS(parse_store(""), FormatError);
    CHECK_THROWS_AS(parse_store("\n"), FormatError);
    CHECK_THROWS_AS(parse_store("IPSDB 1\n"), FormatError);
    CHECK_THROWS_AS(parse_store("hello\n# " + sha256("hello\n").hex() + "\n"), FormatError);
    const std::string good = serialize_store({});
    CHECK_THROWS_AS(parse_store(good.substr(0, good.size() - 1)), FormatError);
    std::string upper = good;
    for (std::size_t i = 10; i < upper.size(); ++i) upper[i] = static_cast<char>(std::toupper(upper[i]));
    CHECK_THROWS_AS(parse_store(upper), FormatError);
}

TEST_CASE("well-signed but malformed records report the line")
{
    auto signed_text = [](const std::string& body) { return body + "# " + sha256(body).hex() + "\n"; };
    const std::string d = sha256("x").hex();
    const auto line_of = [&](const std::string& body) -> std::size_t {
        try {
            parse_store(signed_text(body));
        } catch (const FormatError& e) {
            return e.line();
        }
        return 0;
    };
    CHECK(line_of("IPSDB 1\nR " + d + " AgentToken - 1 1 1 5 ok\nR " + d + " Bogus - 1 1 1 5 x\n") == 3);
    CHECK(line_of("IPSDB 1\nR " + d + " AgentToken - 2 1 1 5 x\n") == 2);
    CHECK(line_of("IPSDB 1\nR " + d + " AgentToken - 1 1 1 - x\n") == 2);
    CHECK(line_of("IPSDB 1\nR " + d + " AgentToken - 01 1 1 5 x\n") == 2);
    CHECK(line_of("IPSDB 1\nR " + d + " AgentToken - 1 1 0 - x\nR " + d + " FileContent - 1 1 0 - y\n") == 3);
    CHECK(line_of("IPSDB 1\nQ " + d + " AgentToken - 1 1 0 - x\n") == 2);
    CHECK(line_of("IPSDB 1\nR " + d + " AgentToken -  1 1 0 - x\n") == 2);
    // Same digest under two scopes is fine.
    CHECK(parse_store(signed_text("IPSDB 1\nR " + d + " AgentToken - 1 1 0 - x\nR " + d + " AgentToken bob 1 1 0 - x\n"))
              .size() == 2);
}

TEST_CASE("crash between write and rename leaves the original intact")
{
    TempDir dir;
    const auto path = dir / "t.db";
    save_store(small_store(), path);
    const std::string before = read_file(path);

    std::mt19937_64 rng(5);
    std::vector<TrustRecord> next;
    for (int i = 0; i < 10; ++i) next.push_back(random_record(rng, i));
    const auto staged = detail::stage_store(next, path);
    CHECK(staged != path);
    CHECK(std::filesystem::exists(staged));
    // Simulated crash: the rename never happens.
    CHECK(read_file(path) == before);
    CHECK(load_store(path) == small_store());

    detail::commit_store(staged, path);
    CHECK(load_store(path) == next);
    CHECK_FALSE(std::filesystem::exists(staged));
}

TEST_CASE("missing store")
{
    TempDir dir;
    CHECK_THROWS_AS(load_store(dir / "absent.db"), IoError);
    CHECK(load_store_or_empty(dir / "absent.db").empty());
    CHECK_THROWS_AS(save_store({}, dir / "no" / "such" / "dir.db"), IoError);
}
