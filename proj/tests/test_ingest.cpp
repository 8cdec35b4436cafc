#include "steerlens/container.hpp"
#include "steerlens/error.hpp"
#include "steerlens/ingest.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <fstream>
#include <limits>

using namespace steerlens;
using steerlens::testing::TempDir;
using steerlens::testing::file_bytes;
using steerlens::testing::to_hex;

namespace {

ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected steerlens::Error");
    return ErrorCode::InvalidRequest;
}

void write_raw(const std::filesystem::path& p, std::string_view magic, std::string_view header,
               std::string_view payload) {
    container::write_framed(p, magic, header, payload);
}

} // namespace

TEST_CASE("empty corpus is an 8-byte prefix plus manifest") {
    TempDir dir("ingest");
    EmbeddingCorpus empty(8, {}, {});
    write_corpus(empty, dir / "e.emb");

    const auto bytes = file_bytes(dir / "e.emb");
    const std::string manifest =
        R"({"version":1,"dim":8,"count":0,"ids":[],"labels":null,"asset_refs":null})";
    CHECK(bytes.size() == 8 + manifest.size());
    CHECK(bytes.substr(0, 4) == "EMB1");
    CHECK(bytes.substr(8) == manifest);

    const auto back = read_corpus(dir / "e.emb");
    CHECK(back.count() == 0);
    CHECK(back.dim() == 8);
}

TEST_CASE("payload bytes match little-endian float32 encoding") {
    TempDir dir("ingest");
    EmbeddingCorpus one(4, {"a"}, {1.0f, 2.0f, 3.0f, 4.0f});
    write_corpus(one, dir / "one.emb");
    const auto bytes = file_bytes(dir / "one.emb");
    // Frozen from Python: struct.pack('<4f', 1, 2, 3, 4).hex()
    CHECK(to_hex(bytes.substr(bytes.size() - 16)) == "0000803f000000400000404000008040");
}

TEST_CASE("hand-assembled 3x2 payload decodes to expected vectors") {
    TempDir dir("ingest");
    // Frozen from Python: struct.pack('<6f', 1, 0, 0, 1, 1, 1).hex()
    const std::string hex = "0000803f00000000000000000000803f0000803f0000803f";
    std::string payload;
    for (std::size_t i = 0; i < hex.size(); i += 2) {
        payload.push_back(static_cast<char>(std::stoi(hex.substr(i, 2), nullptr, 16)));
    }
    write_raw(dir / "m.emb", "EMB1",
              R"({"version":1,"dim":2,"count":3,"ids":["a","b","c"],"labels":null,"asset_refs":null})",
              payload);
    const auto c = read_corpus(dir / "m.emb");
    REQUIRE(c.count() == 3);
    CHECK(c.vectors() == std::vector<float>{1, 0, 0, 1, 1, 1});
}

TEST_CASE("round trip preserves every field and the payload bytes") {
    TempDir dir("ingest");
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t dim = 1 + rng() % 9;
        const std::size_t n = rng() % 12;
        auto ids = steerlens::testing::numbered_ids(n, "x");
        std::optional<std::vector<std::string>> labels;
        std::optional<std::vector<std::string>> assets;
        if (trial % 2) {
            labels = std::vector<std::string>(n, "lbl");
        }
        if (trial % 3 == 0) {
            assets = steerlens::testing::numbered_ids(n, "img/");
        }
        EmbeddingCorpus c(dim, ids, steerlens::testing::gaussian(rng, n * dim, 3.0), labels, assets);
        write_corpus(c, dir / "c.emb");
        const auto back = read_corpus(dir / "c.emb");
        CHECK(back == c);
        write_corpus(back, dir / "c2.emb");
        CHECK(file_bytes(dir / "c.emb") == file_bytes(dir / "c2.emb"));
    }
}

TEST_CASE("corpus validation errors") {
    const float nan = std::numeric_limits<float>::quiet_NaN();
    CHECK(code_of([&] { EmbeddingCorpus(2, {"a"}, {1.0f, nan}); }) == ErrorCode::NonFiniteValue);
    CHECK(code_of([&] { EmbeddingCorpus(2, {"a", "a"}, {1, 2, 3, 4}); }) == ErrorCode::DuplicateId);
    CHECK(code_of([&] { EmbeddingCorpus(2, {"a"}, {1, 2, 3}); }) == ErrorCode::DimMismatch);
    CHECK(code_of([&] {
              EmbeddingCorpus(1, {"a"}, {1}, std::vector<std::string>{"x", "y"});
          }) == ErrorCode::DimMismatch);
}

TEST_CASE("read rejects malformed files with typed errors") {
    TempDir dir("ingest");
    write_raw(dir / "bad.emb", "EMBX", "{}", "");
    CHECK(code_of([&] { read_corpus(dir / "bad.emb"); }) == ErrorCode::BadMagic);

    write_raw(dir / "short.emb", "EMB1",
              R"({"version":1,"dim":2,"count":1,"ids":["a"],"labels":null,"asset_refs":null})",
              std::string(4, '\0'));
    CHECK(code_of([&] { read_corpus(dir / "short.emb"); }) == ErrorCode::DimMismatch);

    std::string nan_payload;
    container::append_f32_le(nan_payload, std::numeric_limits<float>::infinity());
    write_raw(dir / "inf.emb", "EMB1",
              R"({"version":1,"dim":1,"count":1,"ids":["a"],"labels":null,"asset_refs":null})",
              nan_payload);
    CHECK(code_of([&] { read_corpus(dir / "inf.emb"); }) == ErrorCode::NonFiniteValue);

    std::string two;
    container::append_f32_le(two, std::vector<float>{1, 2});
    write_raw(dir / "dup.emb", "EMB1",
              R"({"version":1,"dim":1,"count":2,"ids":["a","a"],"labels":null,"asset_refs":null})",
              two);
    CHECK(code_of([&] { read_corpus(dir / "dup.emb"); }) == ErrorCode::DuplicateId);

    write_raw(dir / "json.emb", "EMB1", "{not json", "");
    CHECK(code_of([&] { read_corpus(dir / "json.emb"); }) == ErrorCode::MalformedHeader);

    CHECK(code_of([&] { read_corpus(dir / "missing.emb"); }) == ErrorCode::IoFailure);
}

TEST_CASE("write refuses to open unwritable paths") {
    EmbeddingCorpus c(1, {"a"}, {1});
    CHECK(code_of([&] { write_corpus(c, "/nonexistent-dir/x.emb"); }) == ErrorCode::IoFailure);
}

TEST_CASE("vocabulary resolves the empty prompt") {
    TempDir dir("vocab");
    EmbeddingCorpus entries(2, {"e", "b", "z"}, {0, 1, 1, 0, 0.5f, 0.5f},
                            std::vector<std::string>{"", "banana", "zebra"});
    Vocabulary vocab(entries);
    CHECK(vocab.empty_prompt_index() == 0);
    CHECK(vocab.label(1) == "banana");

    write_vocabulary(vocab, dir / "v.emb");
    const auto back = read_vocabulary(dir / "v.emb");
    CHECK(back.corpus() == vocab.corpus());
    CHECK(back.empty_prompt_index() == 0);

    EmbeddingCorpus no_empty(1, {"a", "b"}, {1, 2}, std::vector<std::string>{"x", "y"});
    CHECK(code_of([&] { Vocabulary v(no_empty); }) == ErrorCode::MissingEmptyPrompt);
    EmbeddingCorpus no_labels(1, {"a"}, {1});
    CHECK(code_of([&] { Vocabulary v(no_labels); }) == ErrorCode::MissingEmptyPrompt);
    EmbeddingCorpus two_empty(1, {"a", "b"}, {1, 2}, std::vector<std::string>{"", ""});
    CHECK(code_of([&] { Vocabulary v(two_empty); }) == ErrorCode::DuplicateEmptyPrompt);

    write_corpus(no_empty, dir / "ne.emb");
    CHECK(code_of([&] { read_vocabulary(dir / "ne.emb"); }) == ErrorCode::MissingEmptyPrompt);
}
